#include "seqembed/gradcheck.hpp"

#include <algorithm>
#include <span>

#include "seqembed/encoder.hpp"
#include "seqembed/losses.hpp"
#include "seqembed/random.hpp"

namespace seqembed {
namespace {

// Rows share a common direction plus independent noise, so pairwise cosines
// sit in a band of realistic width instead of spanning [-1, 1]. With
// scale 20, full-range cosines push softmax weights to ~1e-9, below what a
// central difference of a double-valued loss can resolve (~ulp(loss)/eps).
class InstanceGenerator {
 public:
  InstanceGenerator(CounterRng& rng, std::size_t cols, double spread)
      : rng_(rng), shared_(cols), spread_(spread) {
    for (double& v : shared_) v = rng_.uniform(-1.0, 1.0);
  }

  Matrix matrix(std::size_t rows) {
    Matrix m(rows, shared_.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < shared_.size(); ++c) {
        m(r, c) = shared_[c] + spread_ * rng_.uniform(-1.0, 1.0);
      }
    }
    return m;
  }

 private:
  CounterRng& rng_;
  std::vector<double> shared_;
  double spread_;
};

std::vector<double> random_labels(CounterRng& rng, std::size_t n) {
  std::vector<double> labels(n);
  for (double& l : labels) l = static_cast<double>(rng.below(6)) / 5.0;
  return labels;
}

// Small model over words w0..w9.
EncoderModel random_model(InstanceGenerator& gen) {
  std::vector<std::string> words;
  for (int i = 0; i < 10; ++i) words.push_back("w" + std::to_string(i));
  Tokenizer tok = Tokenizer::build(words, 16);
  Matrix table = gen.matrix(tok.vocab_size());
  return EncoderModel(std::move(tok), std::move(table));
}

std::vector<std::string> random_texts(CounterRng& rng, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const auto len = 1 + rng.below(4);
    for (std::uint64_t k = 0; k < len; ++k) s += (k ? " w" : "w") + std::to_string(rng.below(10));
    out.push_back(s);
  }
  return out;
}

// Gradient of loss(encode(texts...)) with respect to the table, checked
// against central differences of the table entries.
double encoder_check(const EncoderModel& model, const std::vector<std::vector<std::string>>& texts,
                     const LossFn& loss, double eps) {
  auto forward = [&](const EncoderModel& m) {
    std::vector<Matrix> inputs;
    for (const auto& col : texts) inputs.push_back(m.encode_batch(col));
    return std::pair{inputs, loss(inputs)};
  };
  const auto [inputs, out] = forward(model);
  Matrix grad(model.table().rows(), model.table().cols());
  for (std::size_t m = 0; m < texts.size(); ++m) model.accumulate_backward(texts[m], out.grads[m], grad);

  EncoderModel probe = model;
  auto value = [&](std::span<const double> flat) {
    std::copy(flat.begin(), flat.end(), probe.table().values().begin());
    return forward(probe).second.value;
  };
  return finite_difference_check(value, model.table().values(), grad.values(), eps);
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& options) {
  const MatryoshkaSpec nested = MatryoshkaSpec::uniform({4, 8, 16});
  const LossFn wrapped_mnrl = [&](std::span<const Matrix> x) { return matryoshka_wrap(mnrl_fn(), x, nested); };
  auto wrap = [&](LossFn base) {
    return LossFn([base = std::move(base), &nested](std::span<const Matrix> x) {
      return matryoshka_wrap(base, x, nested);
    });
  };

  std::vector<GradcheckResult> results;
  auto run = [&](const std::string& name, std::uint64_t stream, auto&& one_instance) {
    CounterRng rng(options.seed, stream);
    GradcheckResult r{name, options.instances, 0.0, options.tolerance};
    for (std::size_t i = 0; i < options.instances; ++i) {
      r.max_error = std::max(r.max_error, one_instance(rng));
    }
    results.push_back(r);
  };
  auto batch = [](CounterRng& rng) { return static_cast<std::size_t>(2 + rng.below(5)); };
  auto width = [](CounterRng& rng) { return static_cast<std::size_t>(4 + rng.below(13)); };

  run("mnrl", 1, [&](CounterRng& rng) {
    const auto b = batch(rng);
    InstanceGenerator gen(rng, width(rng), options.spread);
    const std::vector<Matrix> in = {gen.matrix(b), gen.matrix(b)};
    return finite_difference_check(mnrl_fn(), in, options.eps);
  });
  run("mnrl+negatives", 2, [&](CounterRng& rng) {
    const auto b = batch(rng);
    InstanceGenerator gen(rng, width(rng), options.spread);
    const std::vector<Matrix> in = {gen.matrix(b), gen.matrix(b), gen.matrix(b)};
    return finite_difference_check(mnrl_fn(), in, options.eps);
  });
  run("cosent", 3, [&](CounterRng& rng) {
    const auto n = batch(rng);
    InstanceGenerator gen(rng, width(rng), options.spread);
    const std::vector<Matrix> in = {gen.matrix(n), gen.matrix(n)};
    return finite_difference_check(cosent_fn(random_labels(rng, n)), in, options.eps);
  });
  run("matryoshka(mnrl+negatives)", 4, [&](CounterRng& rng) {
    const auto b = batch(rng);
    InstanceGenerator gen(rng, 16, options.spread);
    const std::vector<Matrix> in = {gen.matrix(b), gen.matrix(b), gen.matrix(b)};
    return finite_difference_check(wrapped_mnrl, in, options.eps);
  });
  run("matryoshka(cosent)", 5, [&](CounterRng& rng) {
    const auto n = batch(rng);
    InstanceGenerator gen(rng, 16, options.spread);
    const std::vector<Matrix> in = {gen.matrix(n), gen.matrix(n)};
    return finite_difference_check(wrap(cosent_fn(random_labels(rng, n))), in, options.eps);
  });
  run("encoder+matryoshka(mnrl)", 6, [&](CounterRng& rng) {
    const auto b = batch(rng);
    InstanceGenerator gen(rng, 16, options.spread);
    const EncoderModel model = random_model(gen);
    const std::vector<std::vector<std::string>> texts = {random_texts(rng, b), random_texts(rng, b),
                                                         random_texts(rng, b)};
    return encoder_check(model, texts, wrapped_mnrl, options.encoder_eps);
  });
  run("encoder+matryoshka(cosent)", 7, [&](CounterRng& rng) {
    const auto n = batch(rng);
    InstanceGenerator gen(rng, 16, options.spread);
    const EncoderModel model = random_model(gen);
    const std::vector<std::vector<std::string>> texts = {random_texts(rng, n), random_texts(rng, n)};
    return encoder_check(model, texts, wrap(cosent_fn(random_labels(rng, n))), options.encoder_eps);
  });
  return results;
}

}  // namespace seqembed
