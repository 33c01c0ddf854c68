#include "seqembed/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "seqembed/error.hpp"

namespace seqembed {
namespace {

using nlohmann::json;

void require_dim(std::size_t dim, std::size_t full_dim) {
  if (dim == 0 || dim > full_dim) {
    std::ostringstream msg;
    msg << "evaluation dimension " << dim << " outside [1, " << full_dim << "]";
    throw Error(ErrorKind::kOutOfRange, msg.str());
  }
}

double cosine_of_record(std::span<const double> u, std::span<const double> v, std::size_t record,
                        const char* what) {
  try {
    return cosine_similarity(u, v);
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << "record " << record << " (" << what << "): " << e.what();
    throw Error(e.kind(), msg.str());
  }
}

std::vector<std::string> column(const std::vector<Triplet>& t, int which) {
  std::vector<std::string> out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (which == 0) out.push_back(t[i].anchor);
    if (which == 1) out.push_back(t[i].positive);
    if (which == 2) {
      if (!t[i].negative) {
        std::ostringstream msg;
        msg << "record " << i << " has no negative; triplet evaluation needs one";
        throw Error(ErrorKind::kPrecondition, msg.str());
      }
      out.push_back(*t[i].negative);
    }
  }
  return out;
}

std::string format_metric(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

std::string_view to_string(EvalTask task) {
  return task == EvalTask::kSts ? "sts" : "nli_triplet";
}

SimilarityMetrics similarity_eval(const Matrix& emb1, const Matrix& emb2,
                                  std::span<const double> gold, std::size_t dim) {
  if (emb1.rows() != emb2.rows() || emb1.cols() != emb2.cols() || gold.size() != emb1.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "similarity_eval inputs disagree in shape");
  }
  require_dim(dim, emb1.cols());
  if (emb1.rows() < 2) {
    throw Error(ErrorKind::kUndefinedCorrelation, "similarity evaluation needs at least two pairs");
  }
  std::vector<double> cosines(emb1.rows());
  for (std::size_t i = 0; i < emb1.rows(); ++i) {
    cosines[i] = cosine_of_record(emb1.row(i).first(dim), emb2.row(i).first(dim), i, "pair");
  }
  return {pearson(cosines, gold), spearman(cosines, gold)};
}

SimilarityMetrics similarity_eval(const EncoderModel& model, const DatasetSplit& split,
                                  std::size_t dim) {
  const auto& pairs = split.pairs();
  std::vector<std::string> s1, s2;
  std::vector<double> gold;
  for (const auto& p : pairs) {
    s1.push_back(p.sentence1);
    s2.push_back(p.sentence2);
    gold.push_back(p.unit_score);
  }
  return similarity_eval(model.encode_batch(s1), model.encode_batch(s2), gold, dim);
}

double triplet_eval(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                    std::size_t dim) {
  if (anchors.rows() != positives.rows() || anchors.rows() != negatives.rows() ||
      anchors.cols() != positives.cols() || anchors.cols() != negatives.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "triplet_eval inputs disagree in shape");
  }
  if (anchors.rows() == 0) throw Error(ErrorKind::kEmptyInput, "triplet_eval on no records");
  require_dim(dim, anchors.cols());
  std::size_t wins = 0;
  for (std::size_t i = 0; i < anchors.rows(); ++i) {
    const auto a = anchors.row(i).first(dim);
    const double pos = cosine_of_record(a, positives.row(i).first(dim), i, "anchor/positive");
    const double neg = cosine_of_record(a, negatives.row(i).first(dim), i, "anchor/negative");
    if (pos > neg) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(anchors.rows());
}

double triplet_eval(const EncoderModel& model, const DatasetSplit& split, std::size_t dim) {
  const auto& t = split.triplets();
  const auto negatives = column(t, 2);
  return triplet_eval(model.encode_batch(column(t, 0)), model.encode_batch(column(t, 1)),
                      model.encode_batch(negatives), dim);
}

EvalReport dimension_sweep(const EncoderModel& model, const DatasetSplit& split,
                           std::span<const std::size_t> dims, std::string model_label) {
  std::vector<std::size_t> all(dims.begin(), dims.end());
  all.push_back(model.dim());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (auto d : all) require_dim(d, model.dim());

  EvalReport report;
  report.n_records = split.size();
  report.model_label = std::move(model_label);
  report.max_seq_length = model.tokenizer().max_seq_length();
  if (split.kind() == SplitKind::kNliTriplets) {
    report.task = EvalTask::kNliTriplet;
    const auto& t = split.triplets();
    const auto negatives = column(t, 2);
    const Matrix a = model.encode_batch(column(t, 0));
    const Matrix p = model.encode_batch(column(t, 1));
    const Matrix n = model.encode_batch(negatives);
    for (auto d : all) report.per_dim[d].cosine_accuracy = triplet_eval(a, p, n, d);
  } else {
    report.task = EvalTask::kSts;
    std::vector<std::string> s1, s2;
    std::vector<double> gold;
    for (const auto& pr : split.pairs()) {
      s1.push_back(pr.sentence1);
      s2.push_back(pr.sentence2);
      gold.push_back(pr.unit_score);
    }
    const Matrix e1 = model.encode_batch(s1);
    const Matrix e2 = model.encode_batch(s2);
    for (auto d : all) {
      const auto m = similarity_eval(e1, e2, gold, d);
      report.per_dim[d].pearson_cosine = m.pearson_cosine;
      report.per_dim[d].spearman_cosine = m.spearman_cosine;
    }
  }
  return report;
}

ForgettingReport forgetting_report(const EncoderModel& before, const EncoderModel& after,
                                   const DatasetSplit& nli, std::size_t dim) {
  if (before.dim() != after.dim() || !(before.tokenizer() == after.tokenizer())) {
    throw Error(ErrorKind::kIncompatibleModels,
                "models differ in vocabulary or dimension and cannot be compared");
  }
  ForgettingReport r;
  r.metric_before = triplet_eval(before, nli, dim);
  r.metric_after = triplet_eval(after, nli, dim);
  r.delta = r.metric_after - r.metric_before;
  return r;
}

void write_report_jsonl(std::ostream& out, const EvalReport& report) {
  for (const auto& [dim, m] : report.per_dim) {
    json line = {{"task", std::string(to_string(report.task))},
                 {"model", report.model_label},
                 {"max_seq_length", report.max_seq_length},
                 {"embedding_dimension", dim},
                 {"n_records", report.n_records}};
    if (m.cosine_accuracy) line["cosine_accuracy"] = *m.cosine_accuracy;
    if (m.pearson_cosine) line["pearson_cosine"] = *m.pearson_cosine;
    if (m.spearman_cosine) line["spearman_cosine"] = *m.spearman_cosine;
    out << line.dump() << '\n';
  }
}

EvalReport read_report_jsonl(std::istream& in) {
  EvalReport report;
  std::string text;
  bool first = true;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    json line;
    try {
      line = json::parse(text);
      const auto task = line.at("task").get<std::string>();
      report.task = task == "sts" ? EvalTask::kSts : EvalTask::kNliTriplet;
      if (first) {
        report.model_label = line.at("model").get<std::string>();
        report.max_seq_length = line.at("max_seq_length").get<std::size_t>();
        report.n_records = line.at("n_records").get<std::size_t>();
        first = false;
      }
      auto& m = report.per_dim[line.at("embedding_dimension").get<std::size_t>()];
      if (line.contains("cosine_accuracy")) m.cosine_accuracy = line["cosine_accuracy"].get<double>();
      if (line.contains("pearson_cosine")) m.pearson_cosine = line["pearson_cosine"].get<double>();
      if (line.contains("spearman_cosine")) m.spearman_cosine = line["spearman_cosine"].get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("bad report line: ") + e.what());
    }
  }
  return report;
}

void write_forgetting_jsonl(std::ostream& out, const ForgettingReport& report, std::size_t dim) {
  json line = {{"task", "forgetting"},
               {"embedding_dimension", dim},
               {"cosine_accuracy_before", report.metric_before},
               {"cosine_accuracy_after", report.metric_after},
               {"delta", report.delta}};
  out << line.dump() << '\n';
}

void write_report_table(std::ostream& out, std::span<const EvalReport> reports) {
  if (reports.empty()) return;
  const bool sts = reports.front().task == EvalTask::kSts;
  std::vector<std::string> header = {"Model", "Max Seq Length", "Embedding Dimension"};
  if (sts) {
    header.push_back("Pearson Cosine");
    header.push_back("Spearman Cosine");
  } else {
    header.push_back("Cosine Accuracy");
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    if ((r.task == EvalTask::kSts) != sts) {
      throw Error(ErrorKind::kPrecondition, "cannot mix STS and NLI reports in one table");
    }
    for (const auto& [dim, m] : r.per_dim) {
      std::vector<std::string> row = {r.model_label, std::to_string(r.max_seq_length),
                                      std::to_string(dim)};
      if (sts) {
        row.push_back(format_metric(m.pearson_cosine.value_or(0.0)));
        row.push_back(format_metric(m.spearman_cosine.value_or(0.0)));
      } else {
        row.push_back(format_metric(m.cosine_accuracy.value_or(0.0)));
      }
      rows.push_back(std::move(row));
    }
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << ' ' << std::left << std::setw(static_cast<int>(width[c])) << cells[c] << " |";
    }
    out << '\n';
  };
  emit(header);
  out << '|';
  for (auto w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (const auto& row : rows) emit(row);
}

}  // namespace seqembed
