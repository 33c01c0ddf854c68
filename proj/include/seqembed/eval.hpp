#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqembed/data.hpp"
#include "seqembed/encoder.hpp"
#include "seqembed/numerics.hpp"

namespace seqembed {

struct SimilarityMetrics {
  double pearson_cosine = 0.0;
  double spearman_cosine = 0.0;
};

// Pearson and Spearman between per-pair cosines (first `dim` coordinates)
// and the gold unit scores.
SimilarityMetrics similarity_eval(const EncoderModel& model, const DatasetSplit& pairs,
                                  std::size_t dim);
SimilarityMetrics similarity_eval(const Matrix& emb1, const Matrix& emb2,
                                  std::span<const double> gold, std::size_t dim);

// Fraction of triplets whose anchor is strictly closer to the positive than
// to the negative. Ties count as failures.
double triplet_eval(const EncoderModel& model, const DatasetSplit& triplets, std::size_t dim);
double triplet_eval(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                    std::size_t dim);

enum class EvalTask { kSts, kNliTriplet };

struct MetricRecord {
  std::optional<double> pearson_cosine;
  std::optional<double> spearman_cosine;
  std::optional<double> cosine_accuracy;

  bool operator==(const MetricRecord&) const = default;
};

struct EvalReport {
  EvalTask task = EvalTask::kSts;
  std::map<std::size_t, MetricRecord> per_dim;
  std::size_t n_records = 0;
  std::string model_label;
  std::size_t max_seq_length = 0;

  bool operator==(const EvalReport&) const = default;
};

// Runs the evaluator that matches the split kind once per dimension; the
// model's full dimension is always included.
EvalReport dimension_sweep(const EncoderModel& model, const DatasetSplit& split,
                           std::span<const std::size_t> dims, std::string model_label = "model");

struct ForgettingReport {
  double metric_before = 0.0;
  double metric_after = 0.0;
  double delta = 0.0;
};

ForgettingReport forgetting_report(const EncoderModel& before, const EncoderModel& after,
                                   const DatasetSplit& nli, std::size_t dim);

// One JSON object per line, one line per dimension.
void write_report_jsonl(std::ostream& out, const EvalReport& report);
EvalReport read_report_jsonl(std::istream& in);
void write_forgetting_jsonl(std::ostream& out, const ForgettingReport& report, std::size_t dim);

// Aligned table with the columns Model | Max Seq Length | Embedding Dimension
// followed by Cosine Accuracy, or Pearson Cosine | Spearman Cosine.
void write_report_table(std::ostream& out, std::span<const EvalReport> reports);

std::string_view to_string(EvalTask task);

}  // namespace seqembed
