#include "vqakit/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

namespace vqakit {
namespace {

namespace fs = std::filesystem;

const std::string kData = VQAKIT_TEST_DATA;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vqakit_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, EvalFixture) {
  const auto r = run({"eval", "--annotations", kData + "/four_questions_annotations.json",
                      "--predictions", kData + "/four_questions_predictions.json",
                      "--out", path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("72.50"), std::string::npos) << r.out;
  const auto j = json::parse(slurp(path("report.json")));
  EXPECT_EQ(j["overall"]["accuracy_text"], "72.50");
  EXPECT_EQ(j["per_category"]["number"]["accuracy_text"], "90.00");
  EXPECT_EQ(j["overall"]["count"], 4);
}

TEST_F(CliTest, EvalJsonToStdout) {
  const auto r = run({"eval", "--json", "--annotations",
                      kData + "/four_questions_annotations.json", "--predictions",
                      kData + "/four_questions_predictions.json"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["overall"]["accuracy"], 72.5);
}

TEST_F(CliTest, EvalWithoutNormalization) {
  const auto r = run({"eval", "--json", "--no-normalize", "--annotations",
                      kData + "/four_questions_annotations.json", "--predictions",
                      kData + "/four_questions_predictions.json"});
  ASSERT_EQ(r.code, 0);
  // "Yes." no longer matches "yes"; "2" matches only two literal "2"s.
  EXPECT_EQ(json::parse(r.out)["overall"]["accuracy_text"], "40.00");
}

TEST_F(CliTest, NineAnswersIsDataError) {
  const auto r = run({"eval", "--annotations", kData + "/nine_answers_annotations.json",
                      "--predictions", kData + "/four_questions_predictions.json"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("VizWiz_val_00000003.jpg"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"eval", "--annotations", "x"}).code, 2);
  EXPECT_EQ(run({"enhance", "--image", "a", "--mask", "b", "--mode", "blur",
                 "--out", "c"}).code, 2);
  EXPECT_EQ(run({"toy", "fit", "--lr", "-1"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, MissingFileIsIoError) {
  const auto r = run({"eval", "--annotations", path("nope.json"), "--predictions",
                      kData + "/four_questions_predictions.json"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos);
}

TEST_F(CliTest, EnsembleOfIdenticalFilesIsSortedInput) {
  const std::string p = kData + "/four_questions_predictions.json";
  const auto r = run({"ensemble", "--predictions", p, p, p});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto expected =
      predictions_to_json(parse_predictions(load_json(p))).dump(2) + "\n";
  EXPECT_EQ(r.out, expected);
}

TEST_F(CliTest, EnsembleThenEvalIsDeterministic) {
  const std::vector<std::string> models = {kData + "/model_a_predictions.json",
                                           kData + "/model_b_predictions.json",
                                           kData + "/model_c_predictions.json"};
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const std::string merged = path("merged" + std::to_string(i) + ".json");
    const std::string report = path("report" + std::to_string(i) + ".json");
    std::vector<std::string> args = {"ensemble", "--out", merged, "--predictions"};
    args.insert(args.end(), models.begin(), models.end());
    ASSERT_EQ(run(args).code, 0);
    ASSERT_EQ(run({"eval", "--annotations", kData + "/four_questions_annotations.json",
                   "--predictions", merged, "--out", report})
                  .code,
              0);
    reports[i] = slurp(report);
  }
  EXPECT_FALSE(reports[0].empty());
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(slurp(path("merged0.json")), slurp(path("merged1.json")));
}

TEST_F(CliTest, EnhanceWritesImage) {
  ImageBuffer img(2, 1, 100);
  MaskBuffer mask(2, 1);
  mask.values = {255, 0};
  write_image(path("in.ppm"), img);
  write_mask(path("in.pgm"), mask);
  auto r = run({"enhance", "--image", path("in.ppm"), "--mask", path("in.pgm"),
                "--mode", "highlight", "--gain", "80", "--out", path("hi.ppm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_image(path("hi.ppm")).pixels,
            (std::vector<std::uint8_t>{180, 180, 180, 100, 100, 100}));
  r = run({"enhance", "--image", path("in.ppm"), "--mask", path("in.pgm"),
           "--mode", "contrast", "--out", path("lo.ppm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_image(path("lo.ppm")).pixels,
            (std::vector<std::uint8_t>{100, 100, 100, 30, 30, 30}));
}

TEST_F(CliTest, EnhanceDimensionMismatch) {
  write_image(path("in.ppm"), ImageBuffer(2, 2));
  write_mask(path("in.pgm"), MaskBuffer(3, 2));
  const auto r = run({"enhance", "--image", path("in.ppm"), "--mask", path("in.pgm"),
                      "--mode", "contrast", "--out", path("out.ppm")});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(path("out.ppm")));
}

TEST_F(CliTest, Prompt) {
  const auto r = run({"prompt", "--question", "What is this?"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, build_instruction("What is this?") + "\n");
}

TEST_F(CliTest, ToySubcommands) {
  auto r = run({"toy", "grad-check"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(json::parse(r.out)["max_relative_error"].get<double>(), 1e-4);

  r = run({"toy", "fit", "--steps", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fit = json::parse(r.out);
  EXPECT_EQ(fit["frozen_changed"], 0);
  EXPECT_LT(fit["final_loss"].get<double>(), fit["initial_loss"].get<double>());

  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"d": 4, "heads": 2, "n_vit": 3,
               "lora": {"rank": 1, "alpha": 2, "targets": ["mlp_down"]},
               "cross_attention_trainable": false, "integration": null})";
  }
  r = run({"toy", "params", "--config", path("cfg.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  // lora on mlp_down only: 1 * (8 + 4).
  EXPECT_EQ(json::parse(r.out)["trainable"], 12);
  EXPECT_EQ(run({"toy", "params"}).code, 2);
}

}  // namespace
}  // namespace vqakit
