#include "seqembed/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqembed/config.hpp"
#include "seqembed/error.hpp"
#include "seqembed/eval.hpp"
#include "seqembed/gradcheck.hpp"
#include "seqembed/pipeline.hpp"
#include "seqembed/synthetic.hpp"

namespace seqembed {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kUsageError = 2;

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kConfig, "bad dimension list '" + text + "'");
    }
  }
  return dims;
}

void print_report(std::ostream& out, const EvalReport& report, bool table) {
  if (table) {
    write_report_table(out, std::span(&report, 1));
  } else {
    write_report_jsonl(out, report);
  }
}

std::string quote(const std::string& s) { return json(s).dump(); }

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate contrastive sentence encoders.", "seqembed"};
  app.require_subcommand(1);

  // train
  std::string config_path, output_override;
  std::optional<std::uint64_t> seed_override;
  auto* train = app.add_subcommand("train", "Two-stage NLI -> STS training from a config file");
  train->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--output-dir", output_override, "Override output_dir");
  train->add_option("--seed", seed_override, "Override seed");

  // eval-nli / eval-sts / sweep
  std::string model_path, data_path, task = "nli", dims_text, report_out, label = "model";
  std::size_t dim = 0;
  bool table = false;
  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", data_path, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--label", label, "Model label in the report");
    cmd->add_flag("--table", table, "Print an aligned table instead of JSON lines");
  };
  auto* eval_nli = app.add_subcommand("eval-nli", "Triplet cosine accuracy");
  add_eval_flags(eval_nli);
  eval_nli->add_option("--dim", dim, "Embedding dimension (default: full)");
  auto* eval_sts = app.add_subcommand("eval-sts", "Pearson/Spearman of cosine against gold scores");
  add_eval_flags(eval_sts);
  eval_sts->add_option("--dim", dim, "Embedding dimension (default: full)");
  auto* sweep = app.add_subcommand("sweep", "Evaluate at several truncated dimensions");
  add_eval_flags(sweep);
  sweep->add_option("--task", task, "nli or sts")->check(CLI::IsMember({"nli", "sts"}));
  sweep->add_option("--dims", dims_text, "Comma-separated dimensions")->required();
  sweep->add_option("--out", report_out, "Also write the JSON-lines report here");

  // bench
  std::string bench_model, bench_nli;
  std::size_t synthetic_n = 0, batch_size = 32, repetitions = 3, bench_dim = 768;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Encoding throughput (sentences/sec)");
  bench->add_option("--model", bench_model, "Checkpoint (default: fresh model over the synthetic vocabulary)")
      ->check(CLI::ExistingFile);
  auto* nli_opt = bench->add_option("--nli", bench_nli, "Take anchor sentences from an NLI file")
                      ->check(CLI::ExistingFile);
  bench->add_option("--synthetic", synthetic_n, "Generate this many synthetic sentences")->excludes(nli_opt);
  bench->add_option("--batch-size", batch_size, "Sentences per encode call")->check(CLI::PositiveNumber);
  bench->add_option("--repetitions", repetitions, "Timed passes")->check(CLI::PositiveNumber);
  bench->add_option("--dim", bench_dim, "Width of a fresh model")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Seed for synthetic data and fresh models");

  // gradcheck
  GradcheckOptions grad_options;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  gradcheck->add_option("--instances", grad_options.instances, "Random instances per suite");
  gradcheck->add_option("--seed", grad_options.seed, "Seed");

  // synth
  std::string synth_dir;
  std::uint64_t synth_seed = 42;
  std::size_t n_nli_train = 200, n_nli_dev = 200, n_sts_train = 100, n_sts_dev = 100;
  auto* synth = app.add_subcommand("synth", "Write a synthetic NLI/STS corpus and a desk-scale config");
  synth->add_option("--out-dir", synth_dir, "Directory to create")->required();
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--nli-train", n_nli_train, "NLI training triplets");
  synth->add_option("--nli-dev", n_nli_dev, "NLI dev triplets");
  synth->add_option("--sts-train", n_sts_train, "STS training pairs");
  synth->add_option("--sts-dev", n_sts_dev, "STS dev pairs");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: kind=usage message=" << quote(e.what()) << '\n';
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kUsageError;
  }

  try {
    if (train->parsed()) {
      RunConfig config = load_config(config_path);
      if (!output_override.empty()) config.output_dir = output_override;
      if (seed_override) config.seed = *seed_override;
      const auto art = run_two_stage(config);
      out << "stage1 checkpoint: " << art.checkpoint_stage1.string() << '\n'
          << "stage2 checkpoint: " << art.checkpoint_stage2.string() << '\n';
      const EvalReport nli[] = {art.final_nli};
      const EvalReport sts[] = {art.final_sts};
      write_report_table(out, nli);
      write_report_table(out, sts);
      out << "forgetting: before " << art.forgetting_report.metric_before << " after "
          << art.forgetting_report.metric_after << " delta " << art.forgetting_report.delta << '\n';
      return 0;
    }
    if (eval_nli->parsed() || eval_sts->parsed()) {
      const EncoderModel model = load_checkpoint(model_path);
      const std::size_t d = dim == 0 ? model.dim() : dim;
      const DatasetSplit split = eval_nli->parsed() ? load_nli(data_path) : load_sts(data_path);
      const std::size_t dims[] = {d};
      EvalReport report = dimension_sweep(model, split, dims, label);
      // dimension_sweep always adds the full width; keep only the request.
      std::erase_if(report.per_dim, [&](const auto& kv) { return kv.first != d; });
      print_report(out, report, table);
      return 0;
    }
    if (sweep->parsed()) {
      const EncoderModel model = load_checkpoint(model_path);
      const DatasetSplit split = task == "nli" ? load_nli(data_path) : load_sts(data_path);
      const auto dims = parse_dims(dims_text);
      const EvalReport report = dimension_sweep(model, split, dims, label);
      print_report(out, report, table);
      if (!report_out.empty()) {
        std::ofstream file(report_out);
        if (!file) throw Error(ErrorKind::kIo, "cannot write " + report_out);
        write_report_jsonl(file, report);
      }
      return 0;
    }
    if (bench->parsed()) {
      std::vector<std::string> texts;
      if (!bench_nli.empty()) {
        const DatasetSplit nli = load_nli(bench_nli);
        for (const auto& t : nli.triplets()) texts.push_back(t.anchor);
      } else {
        texts = synthetic::sentences(synthetic_n == 0 ? 10000 : synthetic_n, bench_seed);
      }
      const EncoderModel model =
          bench_model.empty()
              ? EncoderModel::initialize(Tokenizer::build(synthetic::vocabulary(), 512), bench_dim, bench_seed)
              : load_checkpoint(bench_model);
      const BenchResult r = bench_throughput(model, texts, batch_size, repetitions);
      out << "| Model | Precision | Embedding Dimension | Batch Size | Sentences | Wall Seconds | "
             "Inference Speed (sentences/sec) |\n";
      out << "| " << (bench_model.empty() ? std::string("fresh") : bench_model) << " | FP64 | "
          << model.dim() << " | " << r.batch_size << " | " << r.n_sentences << " | " << std::setprecision(6)
          << r.wall_seconds << " | " << std::fixed << std::setprecision(1) << r.sentences_per_second
          << " |\n";
      out << json({{"task", "bench"},
                   {"precision", "FP64"},
                   {"batch_size", r.batch_size},
                   {"n_sentences", r.n_sentences},
                   {"wall_seconds", r.wall_seconds},
                   {"sentences_per_second", r.sentences_per_second}})
                 .dump()
          << '\n';
      return 0;
    }
    if (gradcheck->parsed()) {
      bool ok = true;
      for (const auto& r : run_gradcheck_suite(grad_options)) {
        out << (r.passed() ? "PASS " : "FAIL ") << r.name << " instances=" << r.instances
            << " max_rel_error=" << std::scientific << std::setprecision(3) << r.max_error
            << " tolerance=" << r.tolerance << std::defaultfloat << '\n';
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    }
    if (synth->parsed()) {
      const fs::path dir = synth_dir;
      fs::create_directories(dir);
      save_split((dir / "nli_train.jsonl").string(), synthetic::nli_triplets(n_nli_train, synth_seed));
      save_split((dir / "nli_dev.jsonl").string(), synthetic::nli_triplets(n_nli_dev, synth_seed + 1));
      save_split((dir / "sts_train.jsonl").string(), synthetic::sts_pairs(n_sts_train, synth_seed + 2));
      save_split((dir / "sts_dev.jsonl").string(), synthetic::sts_pairs(n_sts_dev, synth_seed + 3));
      RunConfig config;
      config.seed = synth_seed;
      config.output_dir = "run";
      config.stage1.train_path = "nli_train.jsonl";
      config.stage1.dev_path = "nli_dev.jsonl";
      config.stage2.train_path = "sts_train.jsonl";
      config.stage2.dev_path = "sts_dev.jsonl";
      std::ofstream cfg(dir / "desk.cfg");
      write_config(cfg, config);
      out << "wrote " << (dir / "desk.cfg").string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: kind=" << to_string(e.kind()) << " message=" << quote(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: kind=internal message=" << quote(e.what()) << '\n';
    return 1;
  }
  return kUsageError;
}

}  // namespace seqembed
