#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "seqembed/losses.hpp"

namespace seqembed {

struct StageConfig {
  std::filesystem::path train_path;
  std::filesystem::path dev_path;
  std::size_t batch_size = 8;
  std::size_t epochs = 5;
  double peak_lr = 1e-2;
  double warmup_ratio = 0.1;
  double scale = kDefaultScale;
  // Stage 1 only: feed contradiction sentences to MNRL as hard negatives.
  bool use_negatives = true;
};

struct EncoderConfig {
  std::size_t dim = 16;
  std::size_t max_seq_length = 128;
};

struct RunConfig {
  std::uint64_t seed = 42;
  StageConfig stage1;
  StageConfig stage2;
  MatryoshkaSpec matryoshka = MatryoshkaSpec::uniform({4, 8, 16});
  EncoderConfig encoder;
  std::filesystem::path output_dir = "run";
  // Keep the epoch with the best dev metric instead of the last one.
  bool select_best_epoch = false;
  // Accept NLI records without a negative field.
  bool allow_nli_pairs = false;

  void validate() const;
};

// Flat "key = value" lines, '#' comments, dotted section keys, e.g.
//   stage1.batch_size = 8
//   matryoshka.dims = 4,8,16
// Relative paths are resolved against base_dir.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Writes every key with its effective value; parse_config of the output
// reproduces the config exactly.
void write_config(std::ostream& out, const RunConfig& config);

}  // namespace seqembed
