#include "seqembed/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqembed/error.hpp"

namespace seqembed {
namespace {

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) norms[r] = l2_norm(m.row(r));
  return norms;
}

// Accumulates dL/dcos(u, v) = coeff into the gradients of u and v:
//   d cos / d u = (v/|v| - cos * u/|u|) / |u|.
void backprop_cosine(std::span<const double> u, double norm_u, std::span<const double> v,
                     double norm_v, double cos, double coeff, std::span<double> grad_u,
                     std::span<double> grad_v) {
  for (std::size_t c = 0; c < u.size(); ++c) {
    const double u_hat = u[c] / norm_u;
    const double v_hat = v[c] / norm_v;
    grad_u[c] += coeff * (v_hat - cos * u_hat) / norm_u;
    grad_v[c] += coeff * (u_hat - cos * v_hat) / norm_v;
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << what << ": shapes " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x"
        << b.cols() << " differ";
    throw Error(ErrorKind::kDimensionMismatch, msg.str());
  }
}

LossOutput mnrl_impl(const Matrix& anchors, const Matrix& positives, const Matrix* negatives,
                     double scale) {
  const std::size_t batch = anchors.rows();
  if (batch == 0) throw Error(ErrorKind::kEmptyInput, "MNRL on an empty batch");
  require_same_shape(anchors, positives, "MNRL anchors/positives");
  if (negatives) require_same_shape(anchors, *negatives, "MNRL anchors/negatives");
  if (!(scale > 0.0)) throw Error(ErrorKind::kPrecondition, "MNRL scale must be positive");

  // Candidate j < batch is positive j; j >= batch is negative j - batch.
  const Matrix pos_cos = pairwise_cosine(anchors, positives);
  const Matrix neg_cos = negatives ? pairwise_cosine(anchors, *negatives) : Matrix();
  const std::size_t n_candidates = negatives ? 2 * batch : batch;
  auto cos_at = [&](std::size_t i, std::size_t j) {
    return j < batch ? pos_cos(i, j) : neg_cos(i, j - batch);
  };

  const auto anchor_norms = row_norms(anchors);
  const auto positive_norms = row_norms(positives);
  const auto negative_norms = negatives ? row_norms(*negatives) : std::vector<double>{};

  LossOutput out;
  out.grads.emplace_back(anchors.rows(), anchors.cols());
  out.grads.emplace_back(positives.rows(), positives.cols());
  if (negatives) out.grads.emplace_back(negatives->rows(), negatives->cols());

  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> shifted(n_candidates);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    // Logits shifted by the target logit: the per-row loss is lse(shifted).
    const double target = scale * cos_at(i, i);
    for (std::size_t j = 0; j < n_candidates; ++j) shifted[j] = scale * cos_at(i, j) - target;
    shifted[i] = 0.0;
    const double row_loss = log_sum_exp(shifted);
    total += row_loss;

    for (std::size_t j = 0; j < n_candidates; ++j) {
      const double prob = std::exp(shifted[j] - row_loss);
      const double dlogit = inv_batch * (prob - (j == i ? 1.0 : 0.0));
      const double coeff = dlogit * scale;
      if (coeff == 0.0) continue;
      if (j < batch) {
        backprop_cosine(anchors.row(i), anchor_norms[i], positives.row(j), positive_norms[j],
                        cos_at(i, j), coeff, out.grads[0].row(i), out.grads[1].row(j));
      } else {
        const std::size_t k = j - batch;
        backprop_cosine(anchors.row(i), anchor_norms[i], negatives->row(k), negative_norms[k],
                        cos_at(i, j), coeff, out.grads[0].row(i), out.grads[2].row(k));
      }
    }
  }
  out.value = total * inv_batch;
  return out;
}

}  // namespace

LossOutput mnrl_loss(const Matrix& anchors, const Matrix& positives, double scale) {
  return mnrl_impl(anchors, positives, nullptr, scale);
}

LossOutput mnrl_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                     double scale) {
  return mnrl_impl(anchors, positives, &negatives, scale);
}

LossOutput cosent_loss(const Matrix& emb1, const Matrix& emb2, std::span<const double> labels,
                       double scale) {
  const std::size_t n = emb1.rows();
  if (n == 0) throw Error(ErrorKind::kEmptyInput, "CoSENT on an empty batch");
  require_same_shape(emb1, emb2, "CoSENT inputs");
  if (labels.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "CoSENT needs one label per pair");
  }
  for (double l : labels) {
    if (!(l >= 0.0 && l <= 1.0)) throw Error(ErrorKind::kOutOfRange, "CoSENT label outside [0, 1]");
  }
  if (!(scale > 0.0)) throw Error(ErrorKind::kPrecondition, "CoSENT scale must be positive");

  std::vector<double> cos(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (l2_norm(emb1.row(k)) == 0.0 || l2_norm(emb2.row(k)) == 0.0) {
      std::ostringstream msg;
      msg << "CoSENT pair " << k << " has a zero-norm embedding";
      throw Error(ErrorKind::kZeroNorm, msg.str());
    }
    cos[k] = cosine_similarity(emb1.row(k), emb2.row(k));
  }

  // Term 0 is the implicit 1 = exp(0); the rest are the ordered pairs.
  struct PairTerm {
    std::size_t hi;
    std::size_t lo;
  };
  std::vector<PairTerm> pairs;
  std::vector<double> terms{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[i] > labels[j]) {
        pairs.push_back({i, j});
        terms.push_back(scale * (cos[j] - cos[i]));
      }
    }
  }

  LossOutput out;
  out.grads.emplace_back(emb1.rows(), emb1.cols());
  out.grads.emplace_back(emb2.rows(), emb2.cols());
  if (pairs.empty()) return out;

  out.value = log_sum_exp(terms);
  std::vector<double> dcos(n, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double weight = std::exp(terms[p + 1] - out.value) * scale;
    dcos[pairs[p].lo] += weight;
    dcos[pairs[p].hi] -= weight;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (dcos[k] == 0.0) continue;
    backprop_cosine(emb1.row(k), l2_norm(emb1.row(k)), emb2.row(k), l2_norm(emb2.row(k)), cos[k],
                    dcos[k], out.grads[0].row(k), out.grads[1].row(k));
  }
  return out;
}

MatryoshkaSpec MatryoshkaSpec::uniform(std::vector<std::size_t> dims) {
  MatryoshkaSpec spec;
  spec.weights.assign(dims.size(), 1.0);
  spec.dims = std::move(dims);
  return spec;
}

void MatryoshkaSpec::validate(std::size_t full_dim) const {
  if (dims.empty()) throw Error(ErrorKind::kConfig, "matryoshka spec has no dimensions");
  if (weights.size() != dims.size()) {
    throw Error(ErrorKind::kConfig, "matryoshka weights and dims differ in length");
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] == 0) throw Error(ErrorKind::kConfig, "matryoshka dimension must be positive");
    if (k > 0 && dims[k] <= dims[k - 1]) {
      throw Error(ErrorKind::kConfig, "matryoshka dimensions must be strictly increasing");
    }
    if (!(weights[k] > 0.0) || !std::isfinite(weights[k])) {
      throw Error(ErrorKind::kConfig, "matryoshka weights must be positive");
    }
  }
  if (dims.back() > full_dim) {
    std::ostringstream msg;
    msg << "matryoshka dimension " << dims.back() << " exceeds embedding dimension " << full_dim;
    throw Error(ErrorKind::kConfig, msg.str());
  }
}

LossOutput matryoshka_wrap(const LossFn& base, std::span<const Matrix> inputs,
                           const MatryoshkaSpec& spec) {
  if (inputs.empty()) throw Error(ErrorKind::kEmptyInput, "matryoshka_wrap without inputs");
  const std::size_t full_dim = inputs.front().cols();
  for (const auto& m : inputs) {
    if (m.cols() != full_dim) {
      throw Error(ErrorKind::kDimensionMismatch, "matryoshka inputs differ in width");
    }
  }
  spec.validate(full_dim);

  LossOutput out;
  for (const auto& m : inputs) out.grads.emplace_back(m.rows(), m.cols());
  std::vector<Matrix> truncated(inputs.size());
  for (std::size_t k = 0; k < spec.dims.size(); ++k) {
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      truncated[m] = inputs[m].leading_columns(spec.dims[k]);
    }
    const LossOutput part = base(truncated);
    if (part.grads.size() != inputs.size()) {
      throw Error(ErrorKind::kConsistency, "base loss returned the wrong number of gradients");
    }
    const double w = spec.weights[k];
    if (k == 0) {
      // Initialize from the first term so a single-dimension spec is exact.
      out.value = w * part.value;
      for (std::size_t m = 0; m < inputs.size(); ++m) {
        Matrix first(inputs[m].rows(), inputs[m].cols());
        for (std::size_t r = 0; r < first.rows(); ++r) {
          const auto src = part.grads[m].row(r);
          auto dst = first.row(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] = w * src[c];
        }
        out.grads[m] = std::move(first);
      }
    } else {
      out.value += w * part.value;
      for (std::size_t m = 0; m < inputs.size(); ++m) out.grads[m].add_scaled_padded(part.grads[m], w);
    }
  }
  return out;
}

LossFn mnrl_fn(double scale) {
  return [scale](std::span<const Matrix> in) {
    if (in.size() == 2) return mnrl_loss(in[0], in[1], scale);
    if (in.size() == 3) return mnrl_loss(in[0], in[1], in[2], scale);
    throw Error(ErrorKind::kPrecondition, "MNRL takes anchors, positives and optional negatives");
  };
}

LossFn cosent_fn(std::vector<double> labels, double scale) {
  return [labels = std::move(labels), scale](std::span<const Matrix> in) {
    if (in.size() != 2) throw Error(ErrorKind::kPrecondition, "CoSENT takes two embedding matrices");
    return cosent_loss(in[0], in[1], labels, scale);
  };
}

double finite_difference_check(const std::function<double(std::span<const double>)>& value,
                               std::span<const double> point, std::span<const double> analytic,
                               double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::kPrecondition, "finite-difference step must be positive");
  if (point.size() != analytic.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "analytic gradient size differs from the point");
  }
  std::vector<double> probe(point.begin(), point.end());
  std::vector<double> numeric(probe.size());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double original = probe[k];
    probe[k] = original + eps;
    const double plus = value(probe);
    probe[k] = original - eps;
    const double minus = value(probe);
    probe[k] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      std::ostringstream msg;
      msg << "non-finite loss while perturbing entry " << k;
      throw Error(ErrorKind::kNonFinite, msg.str());
    }
    numeric[k] = (plus - minus) / (2.0 * eps);
  }
  // Entries far below the gradient's scale are compared against that scale:
  // a central difference cannot resolve them (its quantum is ~ulp(loss)/eps).
  double scale = 0.0;
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    scale = std::max(scale, std::abs(analytic[k]) + std::abs(numeric[k]));
  }
  const double floor = std::max(1e-12, kRelativeErrorFloor * scale);
  double worst = 0.0;
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    const double err = std::abs(analytic[k] - numeric[k]) /
                       std::max(floor, std::abs(analytic[k]) + std::abs(numeric[k]));
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_difference_check(const LossFn& loss, std::span<const Matrix> inputs, double eps) {
  const LossOutput at_point = loss(inputs);
  if (at_point.grads.size() != inputs.size()) {
    throw Error(ErrorKind::kConsistency, "loss returned the wrong number of gradients");
  }
  std::vector<double> point;
  std::vector<double> analytic;
  for (std::size_t m = 0; m < inputs.size(); ++m) {
    point.insert(point.end(), inputs[m].values().begin(), inputs[m].values().end());
    analytic.insert(analytic.end(), at_point.grads[m].values().begin(),
                    at_point.grads[m].values().end());
  }
  std::vector<Matrix> scratch(inputs.begin(), inputs.end());
  auto value = [&](std::span<const double> flat) {
    std::size_t offset = 0;
    for (auto& m : scratch) {
      auto dst = m.values();
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
      offset += dst.size();
    }
    return loss(scratch).value;
  };
  return finite_difference_check(value, point, analytic, eps);
}

}  // namespace seqembed
