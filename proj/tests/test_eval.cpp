#include <sstream>

#include "seqembed/eval.hpp"
#include "seqembed/pipeline.hpp"
#include "seqembed/synthetic.hpp"
#include "test_support.hpp"

namespace seqembed {
namespace {

using testing::oracle;
using testing::to_matrix;
using testing::to_vector;

// Model whose one-word sentences embed to the given rows; word k is "w<k>".
EncoderModel model_from_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> vocab{"[UNK]"};
  std::vector<std::vector<double>> table{std::vector<double>(rows.front().size(), 1.0)};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    vocab.push_back("w" + std::to_string(k));
    table.push_back(rows[k]);
  }
  return EncoderModel(Tokenizer(vocab, 0, 8), Matrix::from_rows(table));
}

std::string w(std::size_t k) { return "w" + std::to_string(k); }

TEST(SimilarityEval, PerfectAndReversedRanking) {
  // Pair k compares e0 with a vector at angle k * 20 degrees.
  std::vector<std::vector<double>> rows{{1, 0}};
  for (int k = 0; k < 4; ++k) {
    const double t = k * 20.0 * 3.14159265358979 / 180.0;
    rows.push_back({std::cos(t), std::sin(t)});
  }
  const auto model = model_from_rows(rows);
  std::vector<ScoredPair> up, down;
  for (std::size_t k = 0; k < 4; ++k) {
    up.push_back(make_scored_pair(w(0), w(k + 1), 5.0 - static_cast<double>(k)));
    down.push_back(make_scored_pair(w(0), w(k + 1), static_cast<double>(k)));
  }
  EXPECT_NEAR(similarity_eval(model, DatasetSplit("up", up), 2).spearman_cosine, 1.0, 1e-15);
  EXPECT_NEAR(similarity_eval(model, DatasetSplit("down", down), 2).spearman_cosine, -1.0, 1e-15);
}

TEST(SimilarityEval, MatchesReference) {
  const auto& c = oracle()["similarity"];
  const Matrix e1 = to_matrix(c["emb1"]), e2 = to_matrix(c["emb2"]);
  std::vector<double> gold;
  for (double g : to_vector(c["gold"])) gold.push_back(g / 5.0);
  const auto m = similarity_eval(e1, e2, gold, e1.cols());
  EXPECT_NEAR(m.pearson_cosine, c["pearson"].get<double>(), 1e-12);
  EXPECT_NEAR(m.spearman_cosine, c["spearman"].get<double>(), 1e-12);

  // Same numbers through a model and a split.
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < e1.rows(); ++i) rows.emplace_back(e1.row(i).begin(), e1.row(i).end());
  for (std::size_t i = 0; i < e2.rows(); ++i) rows.emplace_back(e2.row(i).begin(), e2.row(i).end());
  const auto model = model_from_rows(rows);
  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < e1.rows(); ++i) {
    pairs.push_back(make_scored_pair(w(i), w(e1.rows() + i), c["gold"][i].get<double>()));
  }
  const auto via_model = similarity_eval(model, DatasetSplit("fixture", pairs), e1.cols());
  EXPECT_EQ(via_model.pearson_cosine, m.pearson_cosine);
  EXPECT_EQ(via_model.spearman_cosine, m.spearman_cosine);
}

TEST(SimilarityEval, Errors) {
  const auto model = model_from_rows({{1, 0}, {0, 1}, {1, 1}});
  const DatasetSplit constant_gold("c", std::vector<ScoredPair>{make_scored_pair(w(0), w(1), 2),
                                                                make_scored_pair(w(0), w(2), 2)});
  EXPECT_ERROR_KIND(similarity_eval(model, constant_gold, 2), ErrorKind::kUndefinedCorrelation);
  const DatasetSplit constant_cos("c", std::vector<ScoredPair>{make_scored_pair(w(0), w(0), 1),
                                                               make_scored_pair(w(1), w(1), 2)});
  EXPECT_ERROR_KIND(similarity_eval(model, constant_cos, 2), ErrorKind::kUndefinedCorrelation);
  const DatasetSplit ok("ok", std::vector<ScoredPair>{make_scored_pair(w(0), w(1), 1),
                                                      make_scored_pair(w(0), w(2), 2)});
  EXPECT_ERROR_KIND(similarity_eval(model, ok, 3), ErrorKind::kOutOfRange);
  EXPECT_ERROR_KIND(similarity_eval(model, ok, 0), ErrorKind::kOutOfRange);
  EXPECT_ERROR_KIND(similarity_eval(model, DatasetSplit("n", std::vector<Triplet>{{"a", "b", "c"}}), 2),
                    ErrorKind::kPrecondition);
}

TEST(TripletEval, PositiveEqualsAnchor) {
  const auto model = model_from_rows({{1, 0}, {0, 1}});
  const DatasetSplit good("g", std::vector<Triplet>{{w(0), w(0), w(1)}, {w(1), w(1), w(0)}});
  const DatasetSplit swapped("s", std::vector<Triplet>{{w(0), w(1), w(0)}, {w(1), w(0), w(1)}});
  EXPECT_EQ(triplet_eval(model, good, 2), 1.0);
  EXPECT_EQ(triplet_eval(model, swapped, 2), 0.0);
}

TEST(TripletEval, TiesCountAsFailures) {
  const auto model = model_from_rows({{1, 0}, {1, 0}, {0, 1}});
  const DatasetSplit tie("t", std::vector<Triplet>{{w(0), w(1), w(1)}, {w(0), w(1), w(2)}});
  EXPECT_EQ(triplet_eval(model, tie, 2), 0.5);
}

TEST(TripletEval, MatchesReference) {
  const auto& c = oracle()["triplet"];
  const Matrix a = to_matrix(c["anchors"]), p = to_matrix(c["positives"]), n = to_matrix(c["negatives"]);
  EXPECT_EQ(triplet_eval(a, p, n, a.cols()), c["accuracy"].get<double>());
}

TEST(TripletEval, TruncationUsesLeadingCoordinates) {
  // The negative wins in full; on the first coordinate it ties, then loses.
  const Matrix a = Matrix::from_rows({{1, 1}});
  const Matrix p = Matrix::from_rows({{1, -1}});
  const Matrix n = Matrix::from_rows({{0.5, 1}});
  EXPECT_EQ(triplet_eval(a, p, n, 2), 0.0);
  EXPECT_EQ(triplet_eval(a, p, n, 1), 0.0);  // 1 vs 1: a tie
  const Matrix n2 = Matrix::from_rows({{-0.5, 1}});
  EXPECT_EQ(triplet_eval(a, p, n2, 1), 1.0);
}

TEST(TripletEval, ZeroNormNamesRecord) {
  const Matrix a = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix p = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix n = Matrix::from_rows({{-1, 1}, {1, 0}});
  try {
    triplet_eval(a, p, n, 1);  // anchor 1 is zero in its first coordinate
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroNorm);
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(TripletEval, PairsSplitHasNoNegatives) {
  const auto model = model_from_rows({{1, 0}, {0, 1}});
  const DatasetSplit pairs("p", std::vector<Triplet>{{w(0), w(1), std::nullopt}});
  EXPECT_ERROR_KIND(triplet_eval(model, pairs, 2), ErrorKind::kPrecondition);
}

EncoderModel toy_model() {
  return EncoderModel::initialize(Tokenizer::build(synthetic::vocabulary(), 16), 16, 4);
}

TEST(DimensionSweep, FullDimOnlyEqualsBareEvaluator) {
  const auto model = toy_model();
  const auto nli = synthetic::nli_triplets(30, 1);
  const std::vector<std::size_t> dims{16};
  const auto report = dimension_sweep(model, nli, dims, "toy");
  ASSERT_EQ(report.per_dim.size(), 1u);
  EXPECT_EQ(report.task, EvalTask::kNliTriplet);
  EXPECT_EQ(report.n_records, 30u);
  EXPECT_EQ(report.per_dim.at(16).cosine_accuracy, triplet_eval(model, nli, 16));
  EXPECT_FALSE(report.per_dim.at(16).pearson_cosine.has_value());
}

TEST(DimensionSweep, NestedDimsAndFullDimAdded) {
  const auto model = toy_model();
  const auto sts = synthetic::sts_pairs(30, 2);
  const std::vector<std::size_t> dims{8, 4};
  const auto report = dimension_sweep(model, sts, dims, "toy");
  ASSERT_EQ(report.per_dim.size(), 3u);
  EXPECT_EQ(report.task, EvalTask::kSts);
  for (std::size_t d : {4, 8, 16}) {
    const auto bare = similarity_eval(model, sts, d);
    EXPECT_EQ(report.per_dim.at(d).pearson_cosine, bare.pearson_cosine);
    EXPECT_EQ(report.per_dim.at(d).spearman_cosine, bare.spearman_cosine);
  }
  const std::vector<std::size_t> too_big{32};
  EXPECT_ERROR_KIND(dimension_sweep(model, sts, too_big), ErrorKind::kOutOfRange);
}

TEST(DimensionSweep, MatryoshkaModelKeepsAccuracyAtDim8) {
  const auto train = synthetic::nli_triplets(200, 11);
  const auto dev = synthetic::nli_triplets(200, 12);
  StageConfig cfg;
  const auto result = train_stage(toy_model(), train, LossKind::kMnrl, MatryoshkaSpec::uniform({4, 8, 16}),
                                  cfg, 42);
  const std::vector<std::size_t> dims{4, 8, 16};
  const auto report = dimension_sweep(result.model, dev, dims);
  EXPECT_NEAR(*report.per_dim.at(8).cosine_accuracy, *report.per_dim.at(16).cosine_accuracy, 0.05);
}

TEST(Forgetting, IdenticalModelsHaveZeroDelta) {
  const auto model = toy_model();
  const auto r = forgetting_report(model, model, synthetic::nli_triplets(40, 3), 16);
  EXPECT_EQ(r.delta, 0.0);
  EXPECT_EQ(r.metric_before, r.metric_after);
}

TEST(Forgetting, ReferenceShape) {
  // 0.935 before, 0.924 after.
  const ForgettingReport r{0.935, 0.924, 0.924 - 0.935};
  EXPECT_NEAR(r.delta, -0.011, 1e-12);
  std::ostringstream out;
  write_forgetting_jsonl(out, r, 768);
  const auto line = nlohmann::json::parse(out.str());
  EXPECT_EQ(line["task"], "forgetting");
  EXPECT_EQ(line["embedding_dimension"], 768);
  EXPECT_NEAR(line["delta"].get<double>(), -0.011, 1e-12);
}

TEST(Forgetting, IncompatibleModels) {
  const auto model = toy_model();
  const auto other_dim = EncoderModel::initialize(model.tokenizer(), 8, 4);
  const auto other_vocab = EncoderModel::initialize(Tokenizer::build(std::vector<std::string>{"x"}, 16), 16, 4);
  const auto nli = synthetic::nli_triplets(10, 3);
  EXPECT_ERROR_KIND(forgetting_report(model, other_dim, nli, 8), ErrorKind::kIncompatibleModels);
  EXPECT_ERROR_KIND(forgetting_report(model, other_vocab, nli, 16), ErrorKind::kIncompatibleModels);
}

TEST(Reports, JsonlRoundTrip) {
  const auto model = toy_model();
  const std::vector<std::size_t> dims{4, 8};
  for (const auto& report : {dimension_sweep(model, synthetic::sts_pairs(20, 5), dims, "stage2-sts"),
                             dimension_sweep(model, synthetic::nli_triplets(20, 5), dims, "stage1-nli")}) {
    std::stringstream io;
    write_report_jsonl(io, report);
    EXPECT_EQ(read_report_jsonl(io), report);
  }
  std::istringstream bad("{\"task\": \"sts\"}\n");
  EXPECT_ERROR_KIND(read_report_jsonl(bad), ErrorKind::kParse);
}

TEST(Reports, TableColumns) {
  EvalReport nli;
  nli.task = EvalTask::kNliTriplet;
  nli.model_label = "stage1-nli";
  nli.max_seq_length = 512;
  nli.per_dim[768].cosine_accuracy = 0.935;
  std::ostringstream out;
  write_report_table(out, std::span<const EvalReport>(&nli, 1));
  const std::string text = out.str();
  EXPECT_NE(text.find("| Model"), std::string::npos);
  EXPECT_NE(text.find("| Max Seq Length |"), std::string::npos);
  EXPECT_NE(text.find("| Embedding Dimension |"), std::string::npos);
  EXPECT_NE(text.find("| Cosine Accuracy |"), std::string::npos);
  EXPECT_NE(text.find("0.9350"), std::string::npos);

  EvalReport sts;
  sts.task = EvalTask::kSts;
  sts.model_label = "stage2-sts";
  sts.per_dim[64] = MetricRecord{0.8, 0.81, std::nullopt};
  std::ostringstream out2;
  const std::vector<EvalReport> both{sts};
  write_report_table(out2, both);
  EXPECT_NE(out2.str().find("| Pearson Cosine | Spearman Cosine |"), std::string::npos);
  const std::vector<EvalReport> mixed{sts, nli};
  std::ostringstream out3;
  EXPECT_ERROR_KIND(write_report_table(out3, mixed), ErrorKind::kPrecondition);
}

}  // namespace
}  // namespace seqembed
