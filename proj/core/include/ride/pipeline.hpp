#pragma once

#include "ride/error.hpp"
#include "ride/hw_model.hpp"
#include "ride/jshc.hpp"
#include "ride/nn.hpp"
#include "ride/packet_ingest.hpp"
#include "ride/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/// Stage orchestration: configuration, on-disk artifacts, and reports.
namespace ride::pipeline {

/// A stage's input artifact does not exist. Maps to exit code 2.
class MissingDependency : public Error {
public:
  explicit MissingDependency(const std::filesystem::path& path)
      : Error("missing upstream artifact: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const noexcept { return path_; }

private:
  std::filesystem::path path_;
};

/// Invalid configuration file or flag. Maps to exit code 3.
class ConfigError : public Error {
public:
  using Error::Error;
};

enum class Stage {
  synth,
  ingest,
  train_ae,
  embed,
  train_clf,
  distill,
  prune_sweep,
  quantize,
  cost,
  jshc,
  eval,
  report,
};

std::string_view to_string(Stage s) noexcept;
/// Accepts the CLI spelling ("train-ae"). Throws ConfigError.
Stage stage_from_string(std::string_view name);
/// Stages in dependency order.
const std::vector<Stage>& all_stages();

struct SynthSettings {
  std::string fixture = "default"; ///< "default" or "motif_combination"
  std::optional<std::size_t> n_flows;
  std::optional<std::size_t> min_packets;
  std::optional<std::size_t> max_packets;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "ride-out";
  /// Empty paths mean "use the synth stage's output".
  std::filesystem::path pcap;
  std::filesystem::path truth;
  std::filesystem::path calibration;

  SynthSettings synth;

  std::size_t n_p = ingest::kDefaultPayloadBytes;
  ingest::LabelMode label_mode = ingest::LabelMode::binary;

  std::size_t n_b = 100;
  std::size_t h = 512;
  std::size_t ae_training_cap = 50'000;
  nn::TrainConfig ae_train;

  std::size_t rae_pair_cap = 20'000;
  bool greedy_fold = false;
  nn::TrainConfig rae_train;

  std::size_t clf_hidden = 100;
  double test_fraction = 0.2;
  nn::TrainConfig clf_train;

  std::string criterion = "gini";
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;

  double quantize_alpha = 0.0;
  int quantize_beta = 11;

  jshc::JshcConfig jshc;

  std::size_t timing_repeats = 20;
  bool verbose = false;

  /// Throws ConfigError.
  void validate() const;

  /// Parses a JSON config; unknown keys and wrong types raise ConfigError. Relative paths
  /// resolve against `base_dir`.
  static PipelineConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_json() const;
};

/// Fixed artifact locations under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path synth_pcap() const { return root / "synth" / "traffic.pcap"; }
  std::filesystem::path synth_truth() const { return root / "synth" / "truth.csv"; }
  std::filesystem::path flows() const { return root / "flows.ndjson"; }
  std::filesystem::path autoencoder() const { return root / "autoencoder.json"; }
  std::filesystem::path rae() const { return root / "rae.json"; }
  std::filesystem::path embeddings() const { return root / "embeddings.csv"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path classifier() const { return root / "classifier.json"; }
  std::filesystem::path tree() const { return root / "tree.json"; }
  std::filesystem::path tree_rules() const { return root / "tree_rules.txt"; }
  std::filesystem::path prune_sweep() const { return root / "prune_sweep.csv"; }
  std::filesystem::path qtree() const { return root / "qtree.json"; }
  std::filesystem::path sweep() const { return root / "sweep.csv"; }
  std::filesystem::path timings() const { return root / "timings.json"; }
  std::filesystem::path report_json() const { return root / "report.json"; }
  std::filesystem::path report_md() const { return root / "report.md"; }
  std::filesystem::path summary(Stage s) const {
    return root / "summaries" / (std::string(to_string(s)) + ".json");
  }
};

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Runs one stage. Throws MissingDependency, ConfigError, or another ride::Error.
void run_stage(Stage stage, const PipelineConfig& cfg);

/// Runs every stage in dependency order.
void run_all(const PipelineConfig& cfg);

} // namespace ride::pipeline
