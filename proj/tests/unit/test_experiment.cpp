#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "alans/dataset_io.hpp"
#include "alans/error.hpp"
#include "alans/experiment.hpp"

using namespace alans;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quick() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.n = 40;
  c.train.d = 3;
  c.train.stage1_epochs = 1;
  c.train.stage2_epochs = 1;
  c.train.batch_size = 8;
  return c;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p, std::ios::trunc) << text;
  return p;
}

}  // namespace

TEST(ExperimentConfig, DefaultsDifferFromLibraryOnlyInReasoner) {
  const ExperimentConfig c = ExperimentConfig::defaults();
  const TrainConfig lib;
  EXPECT_EQ(c.train.learning_rate, lib.learning_rate);
  EXPECT_EQ(c.train.epochs(), lib.epochs());
  EXPECT_EQ(c.train.batch_size, lib.batch_size);
  EXPECT_EQ(c.train.reasoner.tau_posterior, 0.1);
  EXPECT_EQ(c.train.reasoner.tau_candidate[index_of(Attribute::Position)], 1.0);
  EXPECT_EQ(c.train.reasoner.tau_candidate[index_of(Attribute::Color)], 0.2);
  EXPECT_EQ(c.train.reasoner.ridge[index_of(Attribute::Size)][static_cast<std::size_t>(RelationKind::Ternary)],
            0.1);
  EXPECT_NO_THROW(c.validate());
}

TEST(ExperimentConfig, SetParsesEveryKind) {
  ExperimentConfig c;
  c.set("regime", "localism");
  c.set(" seed ", " 42 ");
  c.set("variant", "alans-ind");
  c.set("noise", "0.25");
  c.set("ridge.color.binary", "0.5");
  c.set("tau_candidate.type", "0.3");
  c.set("data", "/tmp/x");
  EXPECT_EQ(c.regime, Regime::Localism);
  EXPECT_EQ(c.seed(), 42u);
  EXPECT_EQ(c.variant(), ModelKind::AlansInd);
  EXPECT_EQ(c.train.noise.epsilon, 0.25);
  EXPECT_EQ(c.train.noise.objectiveness_epsilon, 0.25);
  EXPECT_EQ(c.train.reasoner.ridge[index_of(Attribute::Color)][static_cast<std::size_t>(RelationKind::Binary)],
            0.5);
  EXPECT_EQ(c.train.reasoner.tau_candidate[index_of(Attribute::Type)], 0.3);
  EXPECT_EQ(fold_path(c, Phase::Val), fs::path("/tmp/x/val.jsonl"));
}

TEST(ExperimentConfig, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(c.set("colour", "1"), ConfigError);
  EXPECT_THROW(c.set("seed", "abc"), ConfigError);
  EXPECT_THROW(c.set("seed", "12x"), ConfigError);
  EXPECT_THROW(c.set("regime", "novelty"), ConfigError);
  EXPECT_THROW(c.set("ridge.color", "1"), ConfigError);
  c.set("n", "5");
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig();
  c.set("lr", "-1");
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig();
  c.set("tau_decode", "0");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ExperimentConfig, LoadReportsLineNumbers) {
  const fs::path p = write_file("alans_cfg_bad.txt", "# comment\nseed = 3\n\nbogus = 1\n");
  ExperimentConfig c;
  try {
    c.load(p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
  EXPECT_EQ(c.seed(), 3u);
  EXPECT_THROW(c.load(write_file("alans_cfg_noeq.txt", "seed 3\n")), ConfigError);
  EXPECT_THROW(c.load(fs::temp_directory_path() / "alans_missing_cfg.txt"), IoError);
}

TEST(ExperimentConfig, DumpRoundTrips) {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.set("regime", "productivity");
  c.set("seed", "9");
  c.set("noise", "0.1");
  c.set("ridge.number.unary", "0.0123456789");
  c.set("checkpoint", "/tmp/ck.txt");
  const fs::path p = write_file("alans_cfg_dump.txt", c.dump());
  ExperimentConfig back;
  back.load(p);
  EXPECT_EQ(back.dump(), c.dump());
}

TEST(ExperimentConfig, LaterSettingsWin) {
  const fs::path p = write_file("alans_cfg_prec.txt", "seed = 3\nnoise = 0.2\n");
  ExperimentConfig c = ExperimentConfig::defaults();
  c.load(p);
  c.set("seed", "8");
  EXPECT_EQ(c.seed(), 8u);
  EXPECT_EQ(c.noise(), 0.2);
}

TEST(Folds, GeneratedOrLoaded) {
  ExperimentConfig c = quick();
  const Folds gen = load_folds(c);
  EXPECT_EQ(gen.train.size(), 24u);
  EXPECT_EQ(gen.val.size(), 8u);
  EXPECT_EQ(gen.test.size(), 8u);

  const fs::path dir = fs::temp_directory_path() / "alans_folds";
  generate_split(c.regime, c.strategy, c.n, c.seed(), dir);
  c.data_dir = dir;
  const Folds disk = load_folds(c);
  ASSERT_EQ(disk.test.size(), gen.test.size());
  for (std::size_t i = 0; i < gen.test.size(); ++i) EXPECT_EQ(disk.test[i].id, gen.test[i].id);

  c.test_path = dir / "nope.jsonl";
  EXPECT_THROW(load_folds(c), IoError);
}

TEST(Report, SummaryIsRecomputableFromInstanceRecords) {
  ExperimentConfig c = quick();
  c.n = 200;
  const Folds f = load_folds(c);
  Rng rng(3);
  const Model model = init_model(ModelKind::Alans, 4, rng);
  Evaluation ev;
  const ReportRow row = report_row(f.test, model, c.train.reasoner, {0.1, 0.1}, 5, &ev);
  std::istringstream in(instance_records(ev, row));
  std::size_t count = 0, correct = 0, generated = 0;
  std::array<std::size_t, kNumAttributes> labelled{}, right{};
  nlohmann::json summary;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j["record"] == "summary") {
      summary = j;
      continue;
    }
    ++count;
    correct += j["correct"].get<bool>();
    generated += j["generated_correct"].get<bool>();
    for (Attribute a : kAllAttributes) {
      const auto& e = j["attributes"][std::string(to_string(a))];
      if (e["label"].is_null()) continue;
      ++labelled[index_of(a)];
      right[index_of(a)] += e["label"] == e["predicted"];
    }
  }
  ASSERT_FALSE(summary.is_null());
  EXPECT_EQ(count, summary["count"].get<std::size_t>());
  EXPECT_EQ(correct, summary["correct"].get<std::size_t>());
  EXPECT_DOUBLE_EQ(summary["accuracy"].get<double>(), static_cast<double>(correct) / count);
  EXPECT_DOUBLE_EQ(summary["generation_accuracy"].get<double>(), static_cast<double>(generated) / count);
  for (Attribute a : kAllAttributes) {
    const std::size_t ai = index_of(a);
    const auto& op = summary["operator_accuracy"][std::string(to_string(a))];
    EXPECT_EQ(summary["operator_count"][std::string(to_string(a))].get<std::size_t>(), labelled[ai]);
    if (labelled[ai] == 0) {
      EXPECT_TRUE(op.is_null());
    } else {
      EXPECT_NEAR(op.get<double>(), static_cast<double>(right[ai]) / labelled[ai], 1e-12);
    }
  }
}

TEST(Report, TextTableHasOneLinePerRow) {
  ExperimentConfig c = quick();
  const Folds f = load_folds(c);
  Rng rng(3);
  const Model model = init_model(ModelKind::AlansGt, 3, rng);
  ReportTable t;
  t.rows.push_back(report_row(f.test, model, c.train.reasoner, {}, 1));
  t.rows.push_back(report_row(f.val, model, c.train.reasoner, {}, 1));
  const std::string text = t.to_text();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  const std::string rec = t.to_records();
  EXPECT_EQ(std::count(rec.begin(), rec.end(), '\n'), 2);
  // Noiseless perception is exact.
  for (double p : t.rows[0].perception_accuracy) EXPECT_EQ(p, 1.0);
}

TEST(Ablation, IdenticalArmsHaveZeroDelta) {
  ExperimentConfig c = quick();
  c.baseline = c.variant();
  const auto rows = run_ablation(c, {Regime::Systematicity});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].delta(), 0.0);
  EXPECT_EQ(rows[0].primary.correct, rows[0].baseline.correct);
  const std::string text = ablation_text(rows);
  EXPECT_NE(text.find("+0.00"), std::string::npos) << text;
  EXPECT_EQ(nlohmann::json::parse(ablation_records(rows))["delta"].get<double>(), 0.0);
}

TEST(Experiment, RunIsReproducible) {
  ExperimentConfig c = quick();
  const Folds f = load_folds(c);
  const TrainedExperiment a = run_experiment(c, f);
  const TrainedExperiment b = run_experiment(c, f);
  EXPECT_EQ(a.test.correct, b.test.correct);
  EXPECT_EQ(a.result.report.to_records(), b.result.report.to_records());
}

TEST(SolveTrace, ShowsRulesCandidatesAndAnswer) {
  const auto data = generate_fold(Regime::Systematicity, Phase::Train, DistractorStrategy::PerturbOne, 10, 2);
  Rng rng(1);
  const Model model = init_model(ModelKind::AlansGt, 4, rng);
  const std::string t = solve_trace(data[0], model, ExperimentConfig::defaults().train.reasoner, {}, 0);
  EXPECT_NE(t.find(data[0].id), std::string::npos);
  EXPECT_NE(t.find("candidate probabilities"), std::string::npos);
  EXPECT_NE(t.find("answer"), std::string::npos);
  EXPECT_NE(t.find("generated panel:"), std::string::npos);
  for (Attribute a : kAllAttributes) {
    EXPECT_NE(t.find("[" + std::string(to_string(a)) + "]"), std::string::npos);
  }
}
