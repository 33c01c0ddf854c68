#include "seqembed/encoder.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "seqembed/error.hpp"
#include "seqembed/random.hpp"

namespace seqembed {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'Q', 'E', 'M', 'B', 'C', 'K', 'P'};

// Decodes one UTF-8 sequence starting at text[pos]. Returns the code point
// and its byte length, or {-1, 1} for an invalid lead/continuation byte.
std::pair<long, std::size_t> decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  long cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {-1, 1};
  }
  if (pos + len > text.size()) return {-1, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[pos + k]);
    if ((b & 0xC0) != 0x80) return {-1, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

void append_utf8(std::string& out, long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(long cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Simple case folding for Latin, Greek and Cyrillic capitals. No
// locale-specific rules: dotted capital I folds to plain 'i'.
long to_lower(long cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;
  if (cp == 0x130) return 'i';
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  return cp;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  auto bits = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint truncated while reading ") + what);
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  return static_cast<T>(bits);
}

void require_shape(const EncoderModel& model, std::span<const std::string> texts,
                   const Matrix& upstream) {
  if (upstream.rows() != texts.size() || upstream.cols() != model.dim()) {
    std::ostringstream msg;
    msg << "upstream gradient is " << upstream.rows() << "x" << upstream.cols() << ", expected "
        << texts.size() << "x" << model.dim();
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto [cp, len] = decode_utf8(text, pos);
    if (cp < 0) {
      current.push_back(text[pos]);
    } else if (is_space(cp)) {
      if (!current.empty()) words.push_back(std::exchange(current, {}));
    } else {
      append_utf8(current, to_lower(cp));
    }
    pos += len;
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Tokenizer::Tokenizer(std::vector<std::string> vocab, std::size_t unk_id,
                     std::size_t max_seq_length)
    : vocab_(std::move(vocab)), unk_id_(unk_id), max_seq_length_(max_seq_length) {
  if (vocab_.empty() || unk_id_ >= vocab_.size()) {
    throw Error(ErrorKind::kConsistency, "unknown-token id outside the vocabulary");
  }
  if (max_seq_length_ == 0) {
    throw Error(ErrorKind::kConsistency, "max_seq_length must be at least 1");
  }
  index_.reserve(vocab_.size());
  for (std::size_t id = 0; id < vocab_.size(); ++id) {
    if (!index_.emplace(vocab_[id], id).second) {
      throw Error(ErrorKind::kConsistency, "duplicate vocabulary entry '" + vocab_[id] + "'");
    }
  }
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus, std::size_t max_seq_length) {
  std::set<std::string> words;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) words.insert(std::move(w));
  }
  std::vector<std::string> vocab;
  vocab.reserve(words.size() + 1);
  vocab.emplace_back(kUnkToken);
  // Words are lowercased, so they can never collide with "[UNK]".
  vocab.insert(vocab.end(), words.begin(), words.end());
  return Tokenizer(std::move(vocab), 0, max_seq_length);
}

std::size_t Tokenizer::id_of(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_id_ : it->second;
}

std::vector<std::size_t> Tokenizer::tokenize(std::string_view text) const {
  const auto words = split_words(text);
  std::vector<std::size_t> ids;
  ids.reserve(std::min(words.size(), max_seq_length_));
  for (const auto& w : words) {
    if (ids.size() == max_seq_length_) break;
    ids.push_back(id_of(w));
  }
  if (ids.empty()) ids.push_back(unk_id_);
  return ids;
}

EncoderModel::EncoderModel(Tokenizer tokenizer, Matrix table)
    : tokenizer_(std::move(tokenizer)), table_(std::move(table)) {
  if (table_.rows() != tokenizer_.vocab_size() || table_.cols() == 0) {
    std::ostringstream msg;
    msg << "embedding table is " << table_.rows() << "x" << table_.cols() << " for a vocabulary of "
        << tokenizer_.vocab_size();
    throw Error(ErrorKind::kConsistency, msg.str());
  }
}

EncoderModel EncoderModel::initialize(Tokenizer tokenizer, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::kPrecondition, "embedding dimension must be positive");
  Matrix table(tokenizer.vocab_size(), dim);
  CounterRng rng(seed, 0x656d62ULL);
  for (double& v : table.values()) v = rng.uniform(-0.1, 0.1);
  return EncoderModel(std::move(tokenizer), std::move(table));
}

Matrix EncoderModel::encode_batch(std::span<const std::string> texts) const {
  Matrix out(texts.size(), dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto ids = tokenizer_.tokenize(texts[i]);
    auto dst = out.row(i);
    for (const auto id : ids) {
      const auto src = table_.row(id);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (double& v : dst) v *= inv;
  }
  return out;
}

Matrix EncoderModel::encode_backward(std::span<const std::string> texts,
                                     const Matrix& upstream) const {
  Matrix grad(table_.rows(), table_.cols());
  accumulate_backward(texts, upstream, grad);
  return grad;
}

void EncoderModel::accumulate_backward(std::span<const std::string> texts, const Matrix& upstream,
                                       Matrix& grad) const {
  require_shape(*this, texts, upstream);
  if (grad.rows() != table_.rows() || grad.cols() != table_.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "gradient buffer does not match the table");
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto ids = tokenizer_.tokenize(texts[i]);
    const double inv = 1.0 / static_cast<double>(ids.size());
    const auto g = upstream.row(i);
    for (const auto id : ids) {
      auto dst = grad.row(id);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g[c] * inv;
    }
  }
}

OptimizerState::OptimizerState(std::size_t rows, std::size_t cols, AdamConfig cfg)
    : first_moment(rows, cols), second_moment(rows, cols), config(cfg) {}

void adam_step(OptimizerState& state, Matrix& params, const Matrix& grads, double lr) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      state.first_moment.rows() != params.rows() || state.first_moment.cols() != params.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "adam_step shape mismatch");
  }
  if (!(lr > 0.0)) throw Error(ErrorKind::kPrecondition, "adam_step needs a positive learning rate");
  for (double g : grads.values()) {
    if (!std::isfinite(g)) throw Error(ErrorKind::kNonFinite, "non-finite gradient entry");
  }
  const auto& cfg = state.config;
  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto p = params.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  const auto g = grads.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

Schedule::Schedule(double peak_lr, std::uint64_t total_steps, std::uint64_t warmup_steps)
    : peak_lr_(peak_lr), total_steps_(total_steps), warmup_steps_(warmup_steps) {
  if (!(peak_lr_ > 0.0) || !std::isfinite(peak_lr_)) {
    throw Error(ErrorKind::kPrecondition, "peak learning rate must be positive");
  }
  if (total_steps_ == 0) throw Error(ErrorKind::kPrecondition, "schedule needs at least one step");
  if (warmup_steps_ > total_steps_) {
    throw Error(ErrorKind::kPrecondition, "warmup longer than the schedule");
  }
}

Schedule Schedule::from_ratio(double peak_lr, std::uint64_t total_steps, double warmup_ratio) {
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
    throw Error(ErrorKind::kPrecondition, "warmup ratio must lie in [0, 1]");
  }
  const auto warmup =
      static_cast<std::uint64_t>(std::llround(warmup_ratio * static_cast<double>(total_steps)));
  return Schedule(peak_lr, total_steps, warmup);
}

double Schedule::lr_at(std::uint64_t step) const {
  if (step > total_steps_) {
    std::ostringstream msg;
    msg << "step " << step << " beyond schedule of " << total_steps_;
    throw Error(ErrorKind::kOutOfRange, msg.str());
  }
  if (step < warmup_steps_) {
    return peak_lr_ * static_cast<double>(step) / static_cast<double>(warmup_steps_);
  }
  if (step == warmup_steps_) return peak_lr_;
  return peak_lr_ * static_cast<double>(total_steps_ - step) /
         static_cast<double>(total_steps_ - warmup_steps_);
}

void write_checkpoint(std::ostream& out, const EncoderModel& model) {
  const auto& tok = model.tokenizer();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, tok.vocab_size());
  for (const auto& word : tok.vocab()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(word.size()));
    out.write(word.data(), static_cast<std::streamsize>(word.size()));
  }
  put_le<std::uint64_t>(out, tok.unk_id());
  put_le<std::uint64_t>(out, model.dim());
  put_le<std::uint64_t>(out, tok.max_seq_length());
  put_le<std::uint64_t>(out, model.table().size());
  for (double v : model.table().values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

EncoderModel read_checkpoint(std::istream& in) {
  std::array<char, kMagic.size()> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw Error(ErrorKind::kFormat, "not a checkpoint (bad magic bytes)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    std::ostringstream msg;
    msg << "checkpoint version " << version << " unsupported (expected " << kCheckpointVersion << ")";
    throw Error(ErrorKind::kVersion, msg.str());
  }
  const auto vocab_size = get_le<std::uint64_t>(in, "vocabulary size");
  std::vector<std::string> vocab;
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    const auto len = get_le<std::uint32_t>(in, "token length");
    std::string word(len, '\0');
    in.read(word.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len)) {
      throw Error(ErrorKind::kFormat, "checkpoint truncated inside the vocabulary");
    }
    vocab.push_back(std::move(word));
  }
  const auto unk_id = get_le<std::uint64_t>(in, "unknown-token id");
  const auto dim = get_le<std::uint64_t>(in, "dimension");
  const auto max_seq_length = get_le<std::uint64_t>(in, "max sequence length");
  const auto value_count = get_le<std::uint64_t>(in, "value count");
  if (dim == 0 || value_count != vocab_size * dim) {
    std::ostringstream msg;
    msg << "checkpoint declares " << vocab_size << " tokens x " << dim << " dims but "
        << value_count << " values";
    throw Error(ErrorKind::kConsistency, msg.str());
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(value_count, 1u << 24)));
  for (std::uint64_t k = 0; k < value_count; ++k) {
    values.push_back(std::bit_cast<double>(get_le<std::uint64_t>(in, "parameters")));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kFormat, "trailing bytes after checkpoint parameters");
  }
  Tokenizer tokenizer(std::move(vocab), unk_id, max_seq_length);
  return EncoderModel(std::move(tokenizer), Matrix(vocab_size, dim, std::move(values)));
}

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_checkpoint(out, model);
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

EncoderModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace seqembed
