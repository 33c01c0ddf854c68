#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "seqembed/numerics.hpp"

namespace seqembed {

inline constexpr double kDefaultScale = 20.0;

// Loss value plus one gradient per input embedding matrix, in input order.
struct LossOutput {
  double value = 0.0;
  std::vector<Matrix> grads;
};

// Evaluates a loss on a list of embedding matrices.
using LossFn = std::function<LossOutput(std::span<const Matrix>)>;

// Softmax cross-entropy over scaled cosines between each anchor and every
// candidate (all positives, then all negatives when given); the target for
// anchor i is positive i. Mean over the batch.
LossOutput mnrl_loss(const Matrix& anchors, const Matrix& positives, double scale = kDefaultScale);
LossOutput mnrl_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                     double scale = kDefaultScale);

// log(1 + sum over pairs with labels[i] > labels[j] of exp(scale * (c_j - c_i)))
// where c_k = cos(emb1_k, emb2_k).
LossOutput cosent_loss(const Matrix& emb1, const Matrix& emb2, std::span<const double> labels,
                       double scale = kDefaultScale);

struct MatryoshkaSpec {
  std::vector<std::size_t> dims;
  std::vector<double> weights;

  static MatryoshkaSpec uniform(std::vector<std::size_t> dims);

  // Throws kConfig unless dims are strictly increasing, each in [1, full_dim],
  // and weights are positive and match dims in length.
  void validate(std::size_t full_dim) const;
};

// Sum over d of weight_d * base(inputs truncated to their first d columns);
// gradients are zero-padded back to full width before accumulation.
LossOutput matryoshka_wrap(const LossFn& base, std::span<const Matrix> inputs,
                           const MatryoshkaSpec& spec);

enum class LossKind { kMnrl, kCosent };

// Adapters so the batch losses fit LossFn. For MNRL the inputs are
// {anchors, positives[, negatives]}; for CoSENT {emb1, emb2}.
LossFn mnrl_fn(double scale = kDefaultScale);
LossFn cosent_fn(std::vector<double> labels, double scale = kDefaultScale);

// Central-difference gradient check over a flat parameter vector. Returns
// max_k |a_k - n_k| / max(floor, |a_k| + |n_k|), where
// floor = kRelativeErrorFloor * max_k(|a_k| + |n_k|).
inline constexpr double kRelativeErrorFloor = 1e-6;
double finite_difference_check(const std::function<double(std::span<const double>)>& value,
                               std::span<const double> point, std::span<const double> analytic,
                               double eps);

// Same check applied to every entry of every input matrix of a loss.
double finite_difference_check(const LossFn& loss, std::span<const Matrix> inputs, double eps);

}  // namespace seqembed
