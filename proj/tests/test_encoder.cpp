#include <bit>
#include <cmath>
#include <sstream>

#include "seqembed/encoder.hpp"
#include "seqembed/random.hpp"
#include "test_support.hpp"

namespace seqembed {
namespace {

using testing::oracle;
using testing::TempDir;
using testing::to_matrix;

Tokenizer small_tokenizer(std::size_t max_len = 16) {
  const std::vector<std::string> corpus{"merhaba dünya", "a b c"};
  return Tokenizer::build(corpus, max_len);
}

EncoderModel random_model(std::size_t dim, std::uint64_t seed) {
  return EncoderModel::initialize(small_tokenizer(), dim, seed);
}

TEST(SplitWords, LowercaseAndUnicodeWhitespace) {
  EXPECT_EQ(split_words("Merhaba Dünya"), (std::vector<std::string>{"merhaba", "dünya"}));
  EXPECT_EQ(split_words("  İSTANBUL\tÇAĞ ÖĞRENCİ　x\n"),
            (std::vector<std::string>{"istanbul", "çağ", "öğrenci", "x"}));
  EXPECT_EQ(split_words("ΑΒΓ ЖУК"), (std::vector<std::string>{"αβγ", "жук"}));
  EXPECT_TRUE(split_words(" \t\n").empty());
}

TEST(SplitWords, InvalidBytesKept) {
  const std::string bad = "a\xff" "b c";
  const auto words = split_words(bad);
  ASSERT_EQ(words.size(), 2u);
  EXPECT_EQ(words[0], "a\xff" "b");
}

TEST(Tokenizer, BuildLayout) {
  const auto tok = small_tokenizer();
  EXPECT_EQ(tok.unk_id(), 0u);
  EXPECT_EQ(tok.vocab()[0], "[UNK]");
  EXPECT_EQ(tok.vocab(), (std::vector<std::string>{"[UNK]", "a", "b", "c", "dünya", "merhaba"}));
}

TEST(Tokenizer, Tokenize) {
  const auto tok = small_tokenizer();
  EXPECT_EQ(tok.tokenize("Merhaba Dünya"),
            (std::vector<std::size_t>{tok.id_of("merhaba"), tok.id_of("dünya")}));
  EXPECT_EQ(tok.tokenize(""), (std::vector<std::size_t>{tok.unk_id()}));
  EXPECT_EQ(tok.tokenize("   "), (std::vector<std::size_t>{tok.unk_id()}));
  EXPECT_EQ(tok.tokenize("a zzz"), (std::vector<std::size_t>{tok.id_of("a"), tok.unk_id()}));
}

TEST(Tokenizer, TruncatesToMaxSeqLength) {
  const auto tok = Tokenizer::build(std::vector<std::string>{"a b"}, 512);
  std::string text;
  for (int i = 0; i < 600; ++i) text += (i % 2 ? "b " : "a ");
  const auto ids = tok.tokenize(text);
  ASSERT_EQ(ids.size(), 512u);
  EXPECT_EQ(ids[0], tok.id_of("a"));
  EXPECT_EQ(ids[511], tok.id_of("b"));
}

TEST(Tokenizer, Errors) {
  EXPECT_ERROR_KIND(Tokenizer({"[UNK]", "a"}, 2, 8), ErrorKind::kConsistency);
  EXPECT_ERROR_KIND(Tokenizer({"[UNK]", "a", "a"}, 0, 8), ErrorKind::kConsistency);
  EXPECT_ERROR_KIND(Tokenizer({"[UNK]"}, 0, 0), ErrorKind::kConsistency);
}

TEST(Encode, MeanPooling) {
  const auto model = random_model(5, 1);
  const auto& tok = model.tokenizer();
  const std::vector<std::string> texts{"a", "a b", "b a", "b a a"};
  const Matrix out = model.encode_batch(texts);
  const auto a = model.table().row(tok.id_of("a"));
  const auto b = model.table().row(tok.id_of("b"));
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(out(0, c), a[c]);
    EXPECT_EQ(out(1, c), (a[c] + b[c]) / 2);
    EXPECT_EQ(out(1, c), out(2, c));
    EXPECT_DOUBLE_EQ(out(3, c), (2 * a[c] + b[c]) / 3);
  }
}

TEST(Encode, OracleValues) {
  const auto& c = oracle()["encoder"];
  const EncoderModel model(Tokenizer(c["vocab"].get<std::vector<std::string>>(), 0, 16),
                           to_matrix(c["table"]));
  const auto texts = c["texts"].get<std::vector<std::string>>();
  const Matrix pooled = model.encode_batch(texts);
  const Matrix expected = to_matrix(c["pooled"]);
  for (std::size_t k = 0; k < pooled.size(); ++k) EXPECT_NEAR(pooled.values()[k], expected.values()[k], 1e-15);
  const Matrix grad = model.encode_backward(texts, to_matrix(c["upstream"]));
  const Matrix expected_grad = to_matrix(c["table_grad"]);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    EXPECT_NEAR(grad.values()[k], expected_grad.values()[k], 1e-15);
  }
}

TEST(EncodeBackward, SingleTokenAndRepeats) {
  const auto model = random_model(3, 2);
  const auto id = model.tokenizer().id_of("c");
  const Matrix g = Matrix::from_rows({{0.5, -1.0, 2.0}});
  Matrix grad = model.encode_backward(std::vector<std::string>{"c"}, g);
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    for (std::size_t col = 0; col < 3; ++col) EXPECT_EQ(grad(r, col), r == id ? g(0, col) : 0.0);
  }
  grad = model.encode_backward(std::vector<std::string>{"c c"}, g);
  for (std::size_t col = 0; col < 3; ++col) EXPECT_EQ(grad(id, col), g(0, col));
}

TEST(EncodeBackward, MatchesFiniteDifferences) {
  auto model = random_model(4, 3);
  const std::vector<std::string> texts{"a b", "merhaba dünya a", "c", "bilinmeyen"};
  CounterRng rng(9, 9);
  Matrix upstream(texts.size(), 4);
  for (double& v : upstream.values()) v = rng.uniform(-1, 1);
  const Matrix grad = model.encode_backward(texts, upstream);
  auto objective = [&] {
    const Matrix out = model.encode_batch(texts);
    double s = 0;
    for (std::size_t k = 0; k < out.size(); ++k) s += out.values()[k] * upstream.values()[k];
    return s;
  };
  const double eps = 1e-6;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    double& w = model.table().values()[k];
    const double saved = w;
    w = saved + eps;
    const double plus = objective();
    w = saved - eps;
    const double minus = objective();
    w = saved;
    const double numeric = (plus - minus) / (2 * eps);
    const double analytic = grad.values()[k];
    EXPECT_LE(std::abs(analytic - numeric), 1e-6 * std::max(1e-3, std::abs(analytic) + std::abs(numeric)))
        << "entry " << k;
  }
}

TEST(EncodeBackward, ShapeErrors) {
  const auto model = random_model(3, 2);
  EXPECT_ERROR_KIND(model.encode_backward(std::vector<std::string>{"a"}, Matrix(2, 3)),
                    ErrorKind::kDimensionMismatch);
  EXPECT_ERROR_KIND(model.encode_backward(std::vector<std::string>{"a"}, Matrix(1, 4)),
                    ErrorKind::kDimensionMismatch);
}

TEST(Initialize, DeterministicAndBounded) {
  const auto a = random_model(8, 5);
  EXPECT_EQ(a, random_model(8, 5));
  EXPECT_NE(a.table(), random_model(8, 6).table());
  for (double v : a.table().values()) {
    EXPECT_GE(v, -0.1);
    EXPECT_LT(v, 0.1);
  }
  EXPECT_ERROR_KIND(random_model(0, 1), ErrorKind::kPrecondition);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix p = Matrix::from_rows({{1.0, -2.0}});
  const Matrix before = p;
  OptimizerState state(1, 2);
  adam_step(state, p, Matrix(1, 2), 0.1);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  for (double g : {3.0, -0.25, 1e-4}) {
    Matrix p(1, 1, 0.5);
    OptimizerState state(1, 1);
    adam_step(state, p, Matrix(1, 1, g), 0.01);
    // |m_hat / sqrt(v_hat)| = |g| / (|g| + eps).
    EXPECT_NEAR(p(0, 0), 0.5 - 0.01 * std::copysign(1.0, g), 1e-6);
  }
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const double g = 0.3, lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Matrix p(1, 1, 1.0);
  OptimizerState state(1, 1);
  adam_step(state, p, Matrix(1, 1, g), lr);
  adam_step(state, p, Matrix(1, 1, g), lr);
  double x = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  EXPECT_NEAR(p(0, 0), x, 1e-12);
}

TEST(Adam, MatchesReferenceTrajectory) {
  const auto& c = oracle()["adam"];
  Matrix p = to_matrix(c["params"]);
  OptimizerState state(p.rows(), p.cols());
  for (std::size_t s = 0; s < c["grads"].size(); ++s) {
    adam_step(state, p, to_matrix(c["grads"][s]), c["lr"].get<double>());
    const Matrix expected = to_matrix(c["trajectory"][s]);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p.values()[k], expected.values()[k], 1e-12);
  }
}

TEST(Adam, Errors) {
  Matrix p(1, 2);
  OptimizerState state(1, 2);
  EXPECT_ERROR_KIND(adam_step(state, p, Matrix::from_rows({{NAN, 0}}), 0.1), ErrorKind::kNonFinite);
  EXPECT_ERROR_KIND(adam_step(state, p, Matrix(1, 3), 0.1), ErrorKind::kDimensionMismatch);
  EXPECT_ERROR_KIND(adam_step(state, p, Matrix(1, 2), 0.0), ErrorKind::kPrecondition);
  EXPECT_EQ(state.step_count, 0u);
}

TEST(Schedule, WarmupThenLinearDecay) {
  const Schedule s(1e-3, 100, 10);
  EXPECT_EQ(s.lr_at(0), 0.0);
  EXPECT_EQ(s.lr_at(10), 1e-3);
  EXPECT_DOUBLE_EQ(s.lr_at(5), 0.5e-3);
  EXPECT_DOUBLE_EQ(s.lr_at(55), 0.5e-3);
  EXPECT_EQ(s.lr_at(100), 0.0);
  EXPECT_ERROR_KIND(s.lr_at(101), ErrorKind::kOutOfRange);
}

TEST(Schedule, FromRatioAndErrors) {
  EXPECT_EQ(Schedule::from_ratio(1.0, 125, 0.1).warmup_steps(), 13u);
  EXPECT_EQ(Schedule::from_ratio(1.0, 10, 0.0).warmup_steps(), 0u);
  EXPECT_EQ(Schedule::from_ratio(1.0, 10, 0.0).lr_at(0), 1.0);
  EXPECT_ERROR_KIND(Schedule(1.0, 0, 0), ErrorKind::kPrecondition);
  EXPECT_ERROR_KIND(Schedule(1.0, 5, 6), ErrorKind::kPrecondition);
  EXPECT_ERROR_KIND(Schedule(0.0, 5, 1), ErrorKind::kPrecondition);
  EXPECT_ERROR_KIND(Schedule::from_ratio(1.0, 5, 1.5), ErrorKind::kPrecondition);
}

// Little-endian writer for hand-made checkpoint files.
struct Bytes {
  std::string data;
  template <class T>
  Bytes& put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) data.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    return *this;
  }
  Bytes& raw(const std::string& s) {
    data += s;
    return *this;
  }
};

std::string serialized(const EncoderModel& model) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, model);
  return out.str();
}

EncoderModel deserialized(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_checkpoint(in);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  auto model = random_model(7, 11);
  model.table()(1, 1) = -0.0;
  model.table()(2, 2) = 1e-310;
  TempDir dir;
  save_checkpoint(model, dir / "m.ckpt");
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(loaded.tokenizer(), model.tokenizer());
  ASSERT_EQ(loaded.table().size(), model.table().size());
  for (std::size_t k = 0; k < model.table().size(); ++k) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(loaded.table().values()[k]),
              std::bit_cast<std::uint64_t>(model.table().values()[k]));
  }
  EXPECT_EQ(serialized(loaded), serialized(model));
}

TEST(Checkpoint, LayoutHeader) {
  const auto bytes = serialized(random_model(2, 1));
  EXPECT_EQ(bytes.substr(0, 8), "SQEMBCKP");
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x01\x00\x00\x00", 4));
}

TEST(Checkpoint, CorruptInputs) {
  const auto good = serialized(random_model(3, 1));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_ERROR_KIND(deserialized(bad_magic), ErrorKind::kFormat);
  std::string bad_version = good;
  bad_version[8] = 2;
  EXPECT_ERROR_KIND(deserialized(bad_version), ErrorKind::kVersion);
  EXPECT_ERROR_KIND(deserialized(good.substr(0, good.size() - 3)), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(deserialized(good.substr(0, 20)), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(deserialized(good + "x"), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(deserialized(""), ErrorKind::kFormat);
  EXPECT_ERROR_KIND(load_checkpoint("/nonexistent/m.ckpt"), ErrorKind::kIo);
}

TEST(Checkpoint, DeclaredDimensionInconsistent) {
  Bytes b;
  b.raw("SQEMBCKP").put<std::uint32_t>(1).put<std::uint64_t>(2);
  for (const std::string w : {"[UNK]", "a"}) b.put<std::uint32_t>(static_cast<std::uint32_t>(w.size())).raw(w);
  b.put<std::uint64_t>(0).put<std::uint64_t>(768).put<std::uint64_t>(512).put<std::uint64_t>(768);
  for (int i = 0; i < 768; ++i) b.put<std::uint64_t>(0);
  EXPECT_ERROR_KIND(deserialized(b.data), ErrorKind::kConsistency);
}

}  // namespace
}  // namespace seqembed
