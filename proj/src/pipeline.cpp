#include "seqembed/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "log.hpp"
#include "seqembed/error.hpp"

namespace seqembed {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct BatchTexts {
  std::vector<std::vector<std::string>> columns;
  std::vector<double> labels;
};

BatchTexts gather(const DatasetSplit& split, const Batch& batch, LossKind kind,
                  bool use_negatives) {
  BatchTexts out;
  if (kind == LossKind::kMnrl) {
    const auto& t = split.triplets();
    out.columns.resize(use_negatives ? 3 : 2);
    for (auto i : batch) {
      out.columns[0].push_back(t[i].anchor);
      out.columns[1].push_back(t[i].positive);
      if (use_negatives) out.columns[2].push_back(*t[i].negative);
    }
  } else {
    const auto& p = split.pairs();
    out.columns.resize(2);
    for (auto i : batch) {
      out.columns[0].push_back(p[i].sentence1);
      out.columns[1].push_back(p[i].sentence2);
      out.labels.push_back(p[i].unit_score);
    }
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void save_checkpoint_atomic(const EncoderModel& model, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  save_checkpoint(model, tmp);
  fs::rename(tmp, path);
}

std::string loss_trace_text(const std::vector<double>& losses) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t k = 0; k < losses.size(); ++k) out << k << ' ' << losses[k] << '\n';
  return out.str();
}

StageMonitor monitor(const EncoderModel& model, const DatasetSplit& nli_dev,
                     const DatasetSplit& sts_dev) {
  return {triplet_eval(model, nli_dev, model.dim()), similarity_eval(model, sts_dev, model.dim())};
}

json monitor_json(const StageMonitor& m) {
  return {{"nli_dev_cosine_accuracy", m.nli_dev_accuracy},
          {"sts_dev_pearson_cosine", m.sts_dev.pearson_cosine},
          {"sts_dev_spearman_cosine", m.sts_dev.spearman_cosine}};
}

}  // namespace

StageResult train_stage(EncoderModel model, const DatasetSplit& split, LossKind kind,
                        const MatryoshkaSpec& spec, const StageConfig& config, std::uint64_t seed,
                        const DevMetric& dev_metric, bool select_best_epoch) {
  const bool nli = split.kind() == SplitKind::kNliTriplets;
  if ((kind == LossKind::kMnrl) != nli) {
    throw Error(ErrorKind::kPrecondition,
                "loss kind does not match the split (MNRL needs NLI triplets, CoSENT needs STS pairs)");
  }
  if (config.epochs == 0) throw Error(ErrorKind::kPrecondition, "training needs at least one epoch");
  spec.validate(model.dim());
  const bool use_negatives = kind == LossKind::kMnrl && config.use_negatives && split.has_negatives();

  const std::size_t steps_per_epoch = shuffled_batches(split, config.batch_size, seed, 0).size();
  const std::uint64_t total_steps = steps_per_epoch * config.epochs;
  if (total_steps == 0) {
    throw Error(ErrorKind::kPrecondition, "split '" + split.name() + "' yields no training batches");
  }
  const Schedule schedule = Schedule::from_ratio(config.peak_lr, total_steps, config.warmup_ratio);
  OptimizerState optimizer(model.table().rows(), model.table().cols());

  StageResult result{model, {}, {}, {}, 0};
  std::optional<EncoderModel> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  Matrix grad(model.table().rows(), model.table().cols());
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_total = 0.0;
    const auto batches = shuffled_batches(split, config.batch_size, seed, epoch);
    for (const auto& batch : batches) {
      const BatchTexts texts = gather(split, batch, kind, use_negatives);
      std::vector<Matrix> inputs;
      for (const auto& col : texts.columns) inputs.push_back(model.encode_batch(col));
      const LossFn base = kind == LossKind::kMnrl ? mnrl_fn(config.scale)
                                                  : cosent_fn(texts.labels, config.scale);
      const LossOutput loss = matryoshka_wrap(base, inputs, spec);
      if (!std::isfinite(loss.value)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step;
        throw Error(ErrorKind::kNonFinite, msg.str());
      }
      std::fill(grad.values().begin(), grad.values().end(), 0.0);
      for (std::size_t m = 0; m < inputs.size(); ++m) {
        model.accumulate_backward(texts.columns[m], loss.grads[m], grad);
      }
      // The schedule starts at 0 during warmup; a zero rate is a no-op step.
      const double lr = schedule.lr_at(step);
      if (lr > 0.0) adam_step(optimizer, model.table(), grad, lr);
      result.loss_trace.push_back(loss.value);
      epoch_total += loss.value;
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_total / static_cast<double>(batches.size()));
    log::debug("epoch ", epoch + 1, "/", config.epochs, " mean loss ", result.epoch_mean_loss.back());
    if (dev_metric) {
      const double metric = dev_metric(model);
      result.dev_metric.push_back(metric);
      log::debug("epoch ", epoch + 1, " dev metric ", metric);
      if (select_best_epoch && metric > best_metric) {
        best_metric = metric;
        best = model;
        result.selected_epoch = epoch;
      }
    }
  }
  if (select_best_epoch && best) {
    result.model = std::move(*best);
  } else {
    result.model = std::move(model);
    result.selected_epoch = config.epochs - 1;
  }
  return result;
}

TwoStageArtifacts run_two_stage(const RunConfig& config) {
  config.validate();
  // Parse everything up front so a bad stage-2 file fails before training.
  const NliParseOptions nli_options{config.allow_nli_pairs};
  const DatasetSplit nli_train = load_nli(config.stage1.train_path.string(), nli_options);
  const DatasetSplit nli_dev = load_nli(config.stage1.dev_path.string());
  const DatasetSplit sts_train = load_sts(config.stage2.train_path.string());
  const DatasetSplit sts_dev = load_sts(config.stage2.dev_path.string());

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  OutputLock lock(dir);

  TwoStageArtifacts art;
  json manifest = {{"status", "running"}, {"artifacts", json::array()}};
  auto record = [&](const fs::path& p) { manifest["artifacts"].push_back(p.filename().string()); };

  try {
    {
      std::ostringstream cfg;
      write_config(cfg, config);
      write_text_file(dir / "effective_config.cfg", cfg.str());
      record(dir / "effective_config.cfg");
    }

    // Vocabulary covers both stages' training text so stage 2 can move
    // words that never occur in NLI data.
    std::vector<std::string> corpus;
    for (const auto& t : nli_train.triplets()) {
      corpus.push_back(t.anchor);
      corpus.push_back(t.positive);
      if (t.negative) corpus.push_back(*t.negative);
    }
    for (const auto& p : sts_train.pairs()) {
      corpus.push_back(p.sentence1);
      corpus.push_back(p.sentence2);
    }
    EncoderModel initial = EncoderModel::initialize(
        Tokenizer::build(corpus, config.encoder.max_seq_length), config.encoder.dim, config.seed);

    log::info("stage 1: ", nli_train.size(), " NLI records, MNRL within Matryoshka");
    const DevMetric nli_metric = [&](const EncoderModel& m) { return triplet_eval(m, nli_dev, m.dim()); };
    StageResult s1 = train_stage(std::move(initial), nli_train, LossKind::kMnrl, config.matryoshka,
                                 config.stage1, config.seed, nli_metric, config.select_best_epoch);
    art.checkpoint_stage1 = dir / "stage1.ckpt";
    save_checkpoint_atomic(s1.model, art.checkpoint_stage1);
    record(art.checkpoint_stage1);
    write_text_file(dir / "stage1_loss.txt", loss_trace_text(s1.loss_trace));
    record(dir / "stage1_loss.txt");
    art.stage1_losses = s1.loss_trace;
    art.stage1_monitor = monitor(s1.model, nli_dev, sts_dev);
    log::info("stage 1 done: NLI dev accuracy ", art.stage1_monitor.nli_dev_accuracy,
              ", STS dev spearman ", art.stage1_monitor.sts_dev.spearman_cosine);

    log::info("stage 2: ", sts_train.size(), " STS pairs, CoSENT within Matryoshka");
    const DevMetric sts_metric = [&](const EncoderModel& m) {
      return similarity_eval(m, sts_dev, m.dim()).spearman_cosine;
    };
    StageResult s2 = train_stage(s1.model, sts_train, LossKind::kCosent, config.matryoshka,
                                 config.stage2, config.seed + 1, sts_metric, config.select_best_epoch);
    art.checkpoint_stage2 = dir / "stage2.ckpt";
    save_checkpoint_atomic(s2.model, art.checkpoint_stage2);
    record(art.checkpoint_stage2);
    write_text_file(dir / "stage2_loss.txt", loss_trace_text(s2.loss_trace));
    record(dir / "stage2_loss.txt");
    art.stage2_losses = s2.loss_trace;
    art.stage2_monitor = monitor(s2.model, nli_dev, sts_dev);
    log::info("stage 2 done: NLI dev accuracy ", art.stage2_monitor.nli_dev_accuracy,
              ", STS dev spearman ", art.stage2_monitor.sts_dev.spearman_cosine);

    const auto& dims = config.matryoshka.dims;
    const EvalReport s1_nli = dimension_sweep(s1.model, nli_dev, dims, "stage1-nli");
    const EvalReport s1_sts = dimension_sweep(s1.model, sts_dev, dims, "stage1-nli");
    art.final_nli = dimension_sweep(s2.model, nli_dev, dims, "stage2-sts");
    art.final_sts = dimension_sweep(s2.model, sts_dev, dims, "stage2-sts");

    auto emit_sweep = [&](const std::string& stem, const EvalReport& first, const EvalReport& second) {
      std::ostringstream jsonl, table;
      write_report_jsonl(jsonl, first);
      write_report_jsonl(jsonl, second);
      const EvalReport both[] = {first, second};
      write_report_table(table, both);
      write_text_file(dir / (stem + ".jsonl"), jsonl.str());
      write_text_file(dir / (stem + ".txt"), table.str());
      record(dir / (stem + ".jsonl"));
      record(dir / (stem + ".txt"));
      return dir / (stem + ".jsonl");
    };
    art.sweep_nli = emit_sweep("sweep_nli", s1_nli, art.final_nli);
    art.sweep_sts = emit_sweep("sweep_sts", s1_sts, art.final_sts);

    art.forgetting_report = forgetting_report(s1.model, s2.model, nli_dev, config.encoder.dim);
    {
      std::ostringstream out;
      write_forgetting_jsonl(out, art.forgetting_report, config.encoder.dim);
      art.forgetting = dir / "forgetting.jsonl";
      write_text_file(art.forgetting, out.str());
      record(art.forgetting);
    }
    log::info("forgetting delta on NLI dev: ", art.forgetting_report.delta);

    manifest["status"] = "complete";
    manifest["stage1"] = monitor_json(art.stage1_monitor);
    manifest["stage2"] = monitor_json(art.stage2_monitor);
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    try {
      write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (...) {
      // The original failure is the one worth reporting.
    }
    throw;
  }
  return art;
}

BenchResult make_bench_result(std::size_t n_sentences, std::size_t batch_size, double wall_seconds) {
  if (!(wall_seconds > 0.0)) throw Error(ErrorKind::kPrecondition, "benchmark wall time must be positive");
  return {static_cast<double>(n_sentences) / wall_seconds, batch_size, n_sentences, wall_seconds};
}

BenchResult bench_throughput(const EncoderModel& model, std::span<const std::string> texts,
                             std::size_t batch_size, std::size_t repetitions) {
  if (texts.empty()) throw Error(ErrorKind::kEmptyInput, "benchmark needs at least one sentence");
  if (batch_size == 0) throw Error(ErrorKind::kPrecondition, "benchmark batch size must be positive");
  if (repetitions == 0) throw Error(ErrorKind::kPrecondition, "benchmark needs at least one repetition");

  double sink = 0.0;
  auto pass = [&] {
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, texts.size() - start);
      const Matrix out = model.encode_batch(texts.subspan(start, len));
      sink += out.values().front();
    }
  };
  pass();
  std::vector<double> walls;
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const auto t1 = std::chrono::steady_clock::now();
    walls.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(walls.begin(), walls.end());
  const std::size_t mid = walls.size() / 2;
  const double median = walls.size() % 2 ? walls[mid] : 0.5 * (walls[mid - 1] + walls[mid]);
  log::debug("benchmark checksum ", sink);
  // steady_clock ticks are at least nanoseconds; never divide by zero.
  return make_bench_result(texts.size(), batch_size, std::max(median, 1e-9));
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".lock") {
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    throw Error(ErrorKind::kIo, "output directory " + dir.string() +
                                    " is locked by another run (remove .lock if stale)");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace seqembed
