#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace seqembed {

// One NLI record: anchor, entailment (positive), contradiction (negative).
// The negative may be absent when a split is parsed in pairs mode.
struct Triplet {
  std::string anchor;
  std::string positive;
  std::optional<std::string> negative;

  bool operator==(const Triplet&) const = default;
};

// One STS record. unit_score is raw_score / 5.
struct ScoredPair {
  std::string sentence1;
  std::string sentence2;
  double raw_score = 0.0;
  double unit_score = 0.0;

  bool operator==(const ScoredPair&) const = default;
};

inline constexpr double kMaxStsScore = 5.0;

ScoredPair make_scored_pair(std::string sentence1, std::string sentence2, double raw_score);

enum class SplitKind { kNliTriplets, kStsPairs };

class DatasetSplit {
 public:
  DatasetSplit(std::string name, std::vector<Triplet> triplets);
  DatasetSplit(std::string name, std::vector<ScoredPair> pairs);

  SplitKind kind() const noexcept;
  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept;

  // Throw kPrecondition when the split holds the other kind.
  const std::vector<Triplet>& triplets() const;
  const std::vector<ScoredPair>& pairs() const;

  // True when every triplet carries a negative.
  bool has_negatives() const;

  bool operator==(const DatasetSplit&) const = default;

 private:
  std::string name_;
  std::variant<std::vector<Triplet>, std::vector<ScoredPair>> records_;
};

struct NliParseOptions {
  // Accept records without a "negative" field (anchor/positive pairs).
  bool allow_pairs = false;
};

// Line-delimited JSON records. Errors are kParse/kOutOfRange/kEmptyInput and
// name the 1-based line number.
DatasetSplit parse_nli(std::istream& in, std::string name = "nli", NliParseOptions options = {});
DatasetSplit parse_sts(std::istream& in, std::string name = "sts");

DatasetSplit load_nli(const std::string& path, NliParseOptions options = {});
DatasetSplit load_sts(const std::string& path);

void write_split(std::ostream& out, const DatasetSplit& split);
void save_split(const std::string& path, const DatasetSplit& split);

using Batch = std::vector<std::size_t>;

// Deterministic permutation of record indices, a pure function of
// (seed, epoch), chunked into batches. For NLI splits a trailing batch of a
// single record is dropped.
std::vector<Batch> shuffled_batches(const DatasetSplit& split, std::size_t batch_size,
                                    std::uint64_t seed, std::uint64_t epoch);

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

}  // namespace seqembed
