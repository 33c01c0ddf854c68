#include <sstream>

#include "seqembed/cli.hpp"
#include "seqembed/encoder.hpp"
#include "seqembed/eval.hpp"
#include "seqembed/synthetic.hpp"
#include "test_support.hpp"

namespace seqembed {
namespace {

using testing::fixture;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "seqembed");
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

// A fresh 16-wide model over the fixture vocabulary.
std::filesystem::path write_model(const TempDir& dir) {
  const std::vector<std::string> corpus = {
      read_file(fixture("nli_three.jsonl")), read_file(fixture("sts_five.jsonl"))};
  const auto path = dir / "m.ckpt";
  save_checkpoint(EncoderModel::initialize(Tokenizer::build(corpus, 128), 16, 3), path);
  return path;
}

TEST(Cli, EvalNliPrintsOneAccuracyLine) {
  TempDir dir;
  const auto model = write_model(dir);
  const auto r = run({"eval-nli", "--model", model.string(), "--data", fixture("nli_three.jsonl").string(),
                      "--dim", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto line = nlohmann::json::parse(r.out);
  EXPECT_EQ(line["embedding_dimension"], 16);
  EXPECT_TRUE(line.contains("cosine_accuracy"));
  const double acc = line["cosine_accuracy"];
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}

TEST(Cli, EvalStsTable) {
  TempDir dir;
  const auto model = write_model(dir);
  const auto r = run({"eval-sts", "--model", model.string(), "--data", fixture("sts_five.jsonl").string(),
                      "--dim", "8", "--table"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Spearman Cosine"), std::string::npos);
  EXPECT_NE(r.out.find("| 8 "), std::string::npos);
}

TEST(Cli, SweepWritesReport) {
  TempDir dir;
  const auto model = write_model(dir);
  const auto report = dir / "sweep.jsonl";
  const auto r = run({"sweep", "--model", model.string(), "--data", fixture("sts_five.jsonl").string(),
                      "--task", "sts", "--dims", "4,8", "--out", report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(report), r.out);
  std::istringstream in(r.out);
  EXPECT_EQ(read_report_jsonl(in).per_dim.size(), 3u);
}

TEST(Cli, SweepRejectsBadDims) {
  TempDir dir;
  const auto model = write_model(dir);
  const auto r = run({"sweep", "--model", model.string(), "--data", fixture("sts_five.jsonl").string(),
                      "--task", "sts", "--dims", "4,x"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: kind=config message=", 0), 0u) << r.err;
}

TEST(Cli, MissingRequiredFlagIsUsageError) {
  const auto r = run({"eval-nli", "--data", fixture("nli_three.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: kind=usage", 0), 0u);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
}

TEST(Cli, ErrorLineForBadData) {
  TempDir dir;
  const auto model = write_model(dir);
  write_file(dir / "bad.jsonl", "{\"anchor\": \"a\", \"positive\": \"b\", \"negative\": \"c\"}\nnot json\n");
  const auto r = run({"eval-nli", "--model", model.string(), "--data", (dir / "bad.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: kind=parse message=", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, GradcheckPasses) {
  const auto r = run({"gradcheck", "--instances", "3"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SynthThenTrainIsReproducible) {
  TempDir dir;
  const auto corpus = dir / "corpus";
  ASSERT_EQ(run({"synth", "--out-dir", corpus.string(), "--nli-train", "64", "--sts-train", "32",
                 "--nli-dev", "32", "--sts-dev", "32"})
                .code,
            0);
  const auto cfg = (corpus / "desk.cfg").string();
  const auto a = run({"train", "--config", cfg, "--output-dir", (dir / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("Cosine Accuracy"), std::string::npos);
  EXPECT_NE(a.out.find("forgetting: before"), std::string::npos);
  ASSERT_EQ(run({"train", "--config", cfg, "--output-dir", (dir / "b").string()}).code, 0);
  EXPECT_EQ(read_file(dir / "a" / "stage2.ckpt"), read_file(dir / "b" / "stage2.ckpt"));
  const auto c = run({"train", "--config", cfg, "--output-dir", (dir / "c").string(), "--seed", "7"});
  ASSERT_EQ(c.code, 0);
  EXPECT_NE(read_file(dir / "a" / "stage2.ckpt"), read_file(dir / "c" / "stage2.ckpt"));
}

TEST(Cli, BenchReportsThroughput) {
  const auto r = run({"bench", "--synthetic", "200", "--dim", "32", "--repetitions", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Inference Speed (sentences/sec)"), std::string::npos);
  const auto last = r.out.substr(r.out.rfind('{'));
  const auto j = nlohmann::json::parse(last);
  EXPECT_EQ(j["n_sentences"], 200);
  EXPECT_EQ(j["batch_size"], 32);
  EXPECT_GT(j["sentences_per_second"].get<double>(), 0.0);
}

TEST(Cli, BenchRejectsZeroBatch) {
  EXPECT_EQ(run({"bench", "--batch-size", "0"}).code, 2);
}

}  // namespace
}  // namespace seqembed
