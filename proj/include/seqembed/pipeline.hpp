#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqembed/config.hpp"
#include "seqembed/data.hpp"
#include "seqembed/encoder.hpp"
#include "seqembed/eval.hpp"
#include "seqembed/losses.hpp"

namespace seqembed {

struct StageResult {
  EncoderModel model;
  std::vector<double> loss_trace;       // one entry per optimizer step
  std::vector<double> epoch_mean_loss;  // one entry per epoch
  std::vector<double> dev_metric;       // per epoch, when a dev metric is given
  std::size_t selected_epoch = 0;       // 0-based
};

// Higher is better.
using DevMetric = std::function<double(const EncoderModel&)>;

// Fine-tunes `model` on `split` with the Matryoshka-wrapped loss: per epoch,
// per shuffled batch, encode, evaluate the loss, backpropagate into the
// embedding table and take an Adam step at lr_at(step). Fresh optimizer
// state; deterministic in (inputs, config, seed).
StageResult train_stage(EncoderModel model, const DatasetSplit& split, LossKind kind,
                        const MatryoshkaSpec& spec, const StageConfig& config, std::uint64_t seed,
                        const DevMetric& dev_metric = {}, bool select_best_epoch = false);

struct StageMonitor {
  double nli_dev_accuracy = 0.0;
  SimilarityMetrics sts_dev;
};

struct TwoStageArtifacts {
  std::filesystem::path checkpoint_stage1;
  std::filesystem::path checkpoint_stage2;
  std::filesystem::path sweep_nli;   // JSONL, both stage models
  std::filesystem::path sweep_sts;
  std::filesystem::path forgetting;
  EvalReport final_nli;
  EvalReport final_sts;
  ForgettingReport forgetting_report;
  StageMonitor stage1_monitor;
  StageMonitor stage2_monitor;
  std::vector<double> stage1_losses;
  std::vector<double> stage2_losses;
};

// Stage 1 (NLI + MNRL) from a fresh encoder, checkpoint, stage 2 (STS +
// CoSENT) from the stage-1 parameters, checkpoint, then dimension sweeps on
// both dev sets and a forgetting report. All datasets are parsed before any
// training. On failure a manifest listing the finished artifacts is written
// and the error is rethrown.
TwoStageArtifacts run_two_stage(const RunConfig& config);

struct BenchResult {
  double sentences_per_second = 0.0;
  std::size_t batch_size = 0;
  std::size_t n_sentences = 0;
  double wall_seconds = 0.0;  // median timed pass
};

BenchResult make_bench_result(std::size_t n_sentences, std::size_t batch_size, double wall_seconds);

// One untimed warm-up pass, then `repetitions` timed passes of encode_batch
// over all texts in chunks of batch_size; reports the median pass.
BenchResult bench_throughput(const EncoderModel& model, std::span<const std::string> texts,
                             std::size_t batch_size, std::size_t repetitions);

// Exclusive ownership of an output directory through a lock file.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace seqembed
