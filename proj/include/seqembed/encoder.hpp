#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqembed/numerics.hpp"

namespace seqembed {

// Lowercases UTF-8 text and splits it on Unicode whitespace. Invalid byte
// sequences are kept verbatim inside tokens.
std::vector<std::string> split_words(std::string_view text);

class Tokenizer {
 public:
  static constexpr std::string_view kUnkToken = "[UNK]";

  Tokenizer(std::vector<std::string> vocab, std::size_t unk_id, std::size_t max_seq_length);

  // Reserved unknown token at id 0, then every distinct word of the corpus
  // in byte-lexicographic order.
  static Tokenizer build(std::span<const std::string> corpus, std::size_t max_seq_length);

  // At most max_seq_length ids; empty input yields {unk_id}.
  std::vector<std::size_t> tokenize(std::string_view text) const;

  std::size_t id_of(std::string_view word) const;

  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t unk_id() const noexcept { return unk_id_; }
  std::size_t max_seq_length() const noexcept { return max_seq_length_; }

  bool operator==(const Tokenizer& other) const {
    return vocab_ == other.vocab_ && unk_id_ == other.unk_id_ &&
           max_seq_length_ == other.max_seq_length_;
  }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t unk_id_;
  std::size_t max_seq_length_;
};

// Embedding bag: a sentence is the mean of its tokens' table rows.
class EncoderModel {
 public:
  EncoderModel(Tokenizer tokenizer, Matrix table);

  // Table drawn uniformly from [-0.1, 0.1], a pure function of seed.
  static EncoderModel initialize(Tokenizer tokenizer, std::size_t dim, std::uint64_t seed);

  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  const Matrix& table() const noexcept { return table_; }
  Matrix& table() noexcept { return table_; }
  std::size_t dim() const noexcept { return table_.cols(); }

  // B x D matrix, rows not normalized. Safe for concurrent callers.
  Matrix encode_batch(std::span<const std::string> texts) const;

  // Gradient of sum_i <upstream_i, encode(texts)_i> with respect to the table.
  Matrix encode_backward(std::span<const std::string> texts, const Matrix& upstream) const;

  // Adds the same gradient into `grad` (vocab_size x D).
  void accumulate_backward(std::span<const std::string> texts, const Matrix& upstream,
                           Matrix& grad) const;

  bool operator==(const EncoderModel& other) const = default;

 private:
  Tokenizer tokenizer_;
  Matrix table_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerState(std::size_t rows, std::size_t cols, AdamConfig config = {});

  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;
};

// One bias-corrected Adam update in place. Throws kNonFinite on a bad gradient.
void adam_step(OptimizerState& state, Matrix& params, const Matrix& grads, double lr);

// Linear warmup from 0 to peak_lr, then linear decay to 0 at total_steps.
class Schedule {
 public:
  Schedule(double peak_lr, std::uint64_t total_steps, std::uint64_t warmup_steps);

  // warmup_steps = round(ratio * total_steps).
  static Schedule from_ratio(double peak_lr, std::uint64_t total_steps, double warmup_ratio);

  double lr_at(std::uint64_t step) const;

  double peak_lr() const noexcept { return peak_lr_; }
  std::uint64_t total_steps() const noexcept { return total_steps_; }
  std::uint64_t warmup_steps() const noexcept { return warmup_steps_; }

 private:
  double peak_lr_;
  std::uint64_t total_steps_;
  std::uint64_t warmup_steps_;
};

// Binary checkpoint, little-endian throughout:
//   magic "SQEMBCKP", u32 version, u64 vocab_size, vocab_size x (u32 length,
//   bytes), u64 unk_id, u64 dim, u64 max_seq_length, u64 value_count,
//   value_count x f64 (row-major table).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const EncoderModel& model);
EncoderModel read_checkpoint(std::istream& in);

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_checkpoint(const std::filesystem::path& path);

}  // namespace seqembed
