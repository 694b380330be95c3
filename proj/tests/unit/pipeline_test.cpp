#include "fixtures.hpp"
#include "ride/pipeline.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace {

using namespace ride;
using namespace ride::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig tiny(const fs::path& out, std::uint64_t seed = 1) {
  return PipelineConfig::from_json(fixture::tiny_config_json(out, seed));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RIDE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, UnknownKeysAndWrongTypesAreRejected) {
  EXPECT_THROW(PipelineConfig::from_json(R"({"sed": 1})"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"seed": "one"})"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"autoencoder": {"n_b": -3}})"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"classifier": {"train": {"optimizer": "rmsprop"}}})"), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json("{not json"), ConfigError);
}

TEST(Config, ValidateCatchesInconsistentValues) {
  auto parse_and_validate = [](std::string_view text) { PipelineConfig::from_json(text).validate(); };
  EXPECT_THROW(parse_and_validate(R"({"ingest": {"n_p": 64}, "autoencoder": {"n_b": 64}})"), ConfigError);
  EXPECT_THROW(parse_and_validate(R"({"classifier": {"test_fraction": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_and_validate(R"({"jshc": {"min_beta": 9, "max_beta": 3}})"), ConfigError);
  PipelineConfig cfg;
  cfg.n_b = cfg.n_p;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstBaseDir) {
  const auto cfg = PipelineConfig::from_json(R"({"out_dir": "out", "inputs": {"pcap": "/abs/x.pcap"}})", "/base");
  EXPECT_EQ(cfg.out_dir, fs::path("/base/out"));
  EXPECT_EQ(cfg.pcap, fs::path("/abs/x.pcap"));
}

TEST(Config, JsonRoundTrip) {
  const fixture::TempDir dir;
  const auto cfg = tiny(dir.path(), 9);
  const auto back = PipelineConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.n_b, 8u);
}

TEST(Stages, NamesRoundTrip) {
  for (Stage s : all_stages()) EXPECT_EQ(stage_from_string(to_string(s)), s);
  EXPECT_EQ(stage_from_string("train-ae"), Stage::train_ae);
  EXPECT_THROW(stage_from_string("bogus"), ConfigError);
}

TEST(Stages, MissingUpstreamArtifact) {
  const fixture::TempDir dir;
  EXPECT_THROW(run_stage(Stage::embed, tiny(dir.path())), MissingDependency);
  EXPECT_THROW(run_stage(Stage::report, tiny(dir.path())), MissingDependency);
}

TEST(RunAll, ProducesEveryArtifactAndAReport) {
  const fixture::TempDir dir;
  const auto cfg = tiny(dir.path());
  run_all(cfg);
  const Layout l{dir.path()};
  for (const auto& p : {l.synth_pcap(), l.synth_truth(), l.flows(), l.autoencoder(), l.rae(), l.embeddings(),
                        l.split(), l.classifier(), l.tree(), l.tree_rules(), l.prune_sweep(), l.qtree(), l.sweep(),
                        l.timings(), l.report_json(), l.report_md()})
    EXPECT_TRUE(fs::exists(p)) << p;
  for (Stage s : all_stages()) EXPECT_TRUE(fs::exists(l.summary(s))) << to_string(s);

  const json report = json::parse(read_file(l.report_json()));
  ASSERT_EQ(report.at("models").size(), 3u);
  for (const auto& m : report.at("models")) {
    EXPECT_GE(m.at("f1").get<double>(), 0.0);
    EXPECT_LE(m.at("f1").get<double>(), 1.0);
  }
  EXPECT_EQ(report.at("dataset").at("n_flows").get<std::size_t>(), 60u);
  const std::string md = read_file(l.report_md());
  EXPECT_NE(md.find("| Model | F1 score |"), std::string::npos);

  const json jshc_s = json::parse(read_file(l.summary(Stage::jshc)));
  const std::string sweep = read_file(l.sweep());
  EXPECT_EQ(static_cast<std::size_t>(std::count(sweep.begin(), sweep.end(), '\n')),
            jshc_s.at("n_grid").get<std::size_t>() + 1);
}

TEST(RunAll, StagesAreIdempotent) {
  const fixture::TempDir dir;
  const auto cfg = tiny(dir.path());
  run_all(cfg);
  const Layout l{dir.path()};
  const std::string tree = read_file(l.tree());
  const std::string report = read_file(l.report_json());
  run_stage(Stage::distill, cfg);
  run_stage(Stage::report, cfg);
  EXPECT_EQ(read_file(l.tree()), tree);
  EXPECT_EQ(read_file(l.report_json()), report);
}

TEST(Cli, ExitCodes) {
  const fixture::TempDir dir;
  const fs::path config = dir / "config.json";
  write_text(config, fixture::tiny_config_json(dir / "out"));
  EXPECT_EQ(run_cli("embed --config " + config.string()), 2);

  const fs::path bad = dir / "bad.json";
  write_text(bad, R"({"autoencoder": {"bottleneck": 4}})");
  EXPECT_EQ(run_cli("synth --config " + bad.string()), 3);
  EXPECT_EQ(run_cli("synth --config " + (dir / "absent.json").string()), 3);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);

  EXPECT_EQ(run_cli("synth --config " + config.string() + " --seed 4 --out " + (dir / "o2").string()), 0);
  EXPECT_TRUE(fs::exists(Layout{dir / "o2"}.synth_pcap()));
  const json summary = json::parse(read_file(Layout{dir / "o2"}.summary(Stage::synth)));
  EXPECT_EQ(summary.at("seed").get<std::uint64_t>(), 4u);
}

} // namespace
