#include "seqembed/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "seqembed/error.hpp"
#include "seqembed/random.hpp"

namespace seqembed {
namespace {

using nlohmann::json;

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
  });
}

[[noreturn]] void fail_line(ErrorKind kind, std::size_t line, const std::string& reason) {
  std::ostringstream msg;
  msg << "line " << line << ": " << reason;
  throw Error(kind, msg.str());
}

json parse_object(const std::string& text, std::size_t line) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    fail_line(ErrorKind::kParse, line, std::string("malformed record (") + e.what() + ")");
  }
  if (!record.is_object()) fail_line(ErrorKind::kParse, line, "record is not an object");
  return record;
}

std::string text_field(const json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end()) fail_line(ErrorKind::kParse, line, std::string("missing field \"") + key + "\"");
  if (!it->is_string()) fail_line(ErrorKind::kParse, line, std::string("field \"") + key + "\" is not a string");
  auto value = it->get<std::string>();
  if (is_blank(value)) fail_line(ErrorKind::kParse, line, std::string("field \"") + key + "\" is empty");
  return value;
}

void reject_unknown_fields(const json& record, std::initializer_list<const char*> allowed,
                           std::size_t line) {
  for (const auto& item : record.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) fail_line(ErrorKind::kParse, line, "unexpected field \"" + item.key() + "\"");
  }
}

// Calls fn(text, line_number) for every non-blank line.
template <typename Fn>
std::size_t for_each_record(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  std::size_t seen = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (is_blank(text)) continue;
    fn(text, line);
    ++seen;
  }
  return seen;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return in;
}

}  // namespace

ScoredPair make_scored_pair(std::string sentence1, std::string sentence2, double raw_score) {
  if (!std::isfinite(raw_score) || raw_score < 0.0 || raw_score > kMaxStsScore) {
    std::ostringstream msg;
    msg << "score " << raw_score << " outside [0, 5]";
    throw Error(ErrorKind::kOutOfRange, msg.str());
  }
  if (is_blank(sentence1) || is_blank(sentence2)) {
    throw Error(ErrorKind::kPrecondition, "scored pair with an empty sentence");
  }
  return ScoredPair{std::move(sentence1), std::move(sentence2), raw_score,
                    raw_score / kMaxStsScore};
}

DatasetSplit::DatasetSplit(std::string name, std::vector<Triplet> triplets)
    : name_(std::move(name)), records_(std::move(triplets)) {
  if (size() == 0) throw Error(ErrorKind::kEmptyInput, "dataset split '" + name_ + "' is empty");
}

DatasetSplit::DatasetSplit(std::string name, std::vector<ScoredPair> pairs)
    : name_(std::move(name)), records_(std::move(pairs)) {
  if (size() == 0) throw Error(ErrorKind::kEmptyInput, "dataset split '" + name_ + "' is empty");
}

SplitKind DatasetSplit::kind() const noexcept {
  return records_.index() == 0 ? SplitKind::kNliTriplets : SplitKind::kStsPairs;
}

std::size_t DatasetSplit::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, records_);
}

const std::vector<Triplet>& DatasetSplit::triplets() const {
  if (const auto* t = std::get_if<std::vector<Triplet>>(&records_)) return *t;
  throw Error(ErrorKind::kPrecondition, "split '" + name_ + "' holds STS pairs, not NLI triplets");
}

const std::vector<ScoredPair>& DatasetSplit::pairs() const {
  if (const auto* p = std::get_if<std::vector<ScoredPair>>(&records_)) return *p;
  throw Error(ErrorKind::kPrecondition, "split '" + name_ + "' holds NLI triplets, not STS pairs");
}

bool DatasetSplit::has_negatives() const {
  const auto& t = triplets();
  return std::all_of(t.begin(), t.end(), [](const Triplet& r) { return r.negative.has_value(); });
}

DatasetSplit parse_nli(std::istream& in, std::string name, NliParseOptions options) {
  std::vector<Triplet> records;
  for_each_record(in, [&](const std::string& text, std::size_t line) {
    const json record = parse_object(text, line);
    reject_unknown_fields(record, {"anchor", "positive", "negative"}, line);
    Triplet t;
    t.anchor = text_field(record, "anchor", line);
    t.positive = text_field(record, "positive", line);
    if (record.contains("negative") || !options.allow_pairs) {
      t.negative = text_field(record, "negative", line);
    }
    records.push_back(std::move(t));
  });
  if (records.empty()) throw Error(ErrorKind::kEmptyInput, "NLI input '" + name + "' has no records");
  return DatasetSplit(std::move(name), std::move(records));
}

DatasetSplit parse_sts(std::istream& in, std::string name) {
  std::vector<ScoredPair> records;
  for_each_record(in, [&](const std::string& text, std::size_t line) {
    const json record = parse_object(text, line);
    reject_unknown_fields(record, {"sentence1", "sentence2", "score"}, line);
    auto s1 = text_field(record, "sentence1", line);
    auto s2 = text_field(record, "sentence2", line);
    const auto score = record.find("score");
    if (score == record.end()) fail_line(ErrorKind::kParse, line, "missing field \"score\"");
    if (!score->is_number()) fail_line(ErrorKind::kParse, line, "field \"score\" is not numeric");
    const double raw = score->get<double>();
    if (!std::isfinite(raw) || raw < 0.0 || raw > kMaxStsScore) {
      std::ostringstream reason;
      reason << "score " << raw << " outside [0, 5]";
      fail_line(ErrorKind::kOutOfRange, line, reason.str());
    }
    records.push_back(make_scored_pair(std::move(s1), std::move(s2), raw));
  });
  if (records.empty()) throw Error(ErrorKind::kEmptyInput, "STS input '" + name + "' has no records");
  return DatasetSplit(std::move(name), std::move(records));
}

DatasetSplit load_nli(const std::string& path, NliParseOptions options) {
  auto in = open_input(path);
  try {
    return parse_nli(in, path, options);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

DatasetSplit load_sts(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_sts(in, path);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void write_split(std::ostream& out, const DatasetSplit& split) {
  if (split.kind() == SplitKind::kNliTriplets) {
    for (const auto& t : split.triplets()) {
      json record = {{"anchor", t.anchor}, {"positive", t.positive}};
      if (t.negative) record["negative"] = *t.negative;
      out << record.dump() << '\n';
    }
  } else {
    for (const auto& p : split.pairs()) {
      json record = {{"sentence1", p.sentence1}, {"sentence2", p.sentence2}, {"score", p.raw_score}};
      out << record.dump() << '\n';
    }
  }
}

void save_split(const std::string& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  write_split(out, split);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path);
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, epoch);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<Batch> shuffled_batches(const DatasetSplit& split, std::size_t batch_size,
                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw Error(ErrorKind::kPrecondition, "batch_size must be positive");
  const auto order = permutation(split.size(), seed, epoch);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A contrastive batch of one pair has no in-batch negatives.
  if (split.kind() == SplitKind::kNliTriplets && !batches.empty() && batches.back().size() == 1) {
    batches.pop_back();
  }
  return batches;
}

}  // namespace seqembed
