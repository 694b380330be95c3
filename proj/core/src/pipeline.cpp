#include "ride/pipeline.hpp"

#include "ride/classifier.hpp"
#include "ride/decision_tree.hpp"
#include "ride/distill.hpp"
#include "ride/flow_embedder.hpp"
#include "ride/flow_store.hpp"
#include "ride/payload_autoencoder.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

namespace ride::pipeline {

namespace fs = std::filesystem;
using detail::json;

namespace {

// Offsets that give every seeded component its own stream from the one config seed.
constexpr std::uint64_t kAutoencoderSeed = 11;
constexpr std::uint64_t kRaeSeed = 23;
constexpr std::uint64_t kClassifierSeed = 37;
constexpr std::uint64_t kSplitSeed = 53;
constexpr std::uint64_t kPairSeed = 71;

// ---------------------------------------------------------------------------
// Config parsing

class ConfigReader {
public:
  explicit ConfigReader(const json& root) : root_(root) {}

  static void check_object(const json& j, const std::string& where,
                           std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : j.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError("config: unknown key '" + join(where, key) + "'");
  }

  static std::string join(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
  }

  static std::size_t size(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw ConfigError("config: '" + where + "' must be a non-negative integer");
    return j.get<std::size_t>();
  }
  static std::uint64_t u64(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw ConfigError("config: '" + where + "' must be a non-negative integer");
    return j.get<std::uint64_t>();
  }
  static int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError("config: '" + where + "' must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      throw ConfigError("config: '" + where + "' is out of range");
    return static_cast<int>(v);
  }
  static double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError("config: '" + where + "' must be a number");
    return j.get<double>();
  }
  static std::string string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError("config: '" + where + "' must be a string");
    return j.get<std::string>();
  }
  static bool boolean(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw ConfigError("config: '" + where + "' must be true or false");
    return j.get<bool>();
  }

  static void train_config(const json& j, const std::string& where, nn::TrainConfig& tc) {
    check_object(j, where, {"learning_rate", "batch_size", "epochs", "init_scale", "optimizer"});
    if (j.contains("learning_rate")) tc.learning_rate = number(j["learning_rate"], where + ".learning_rate");
    if (j.contains("batch_size")) tc.batch_size = size(j["batch_size"], where + ".batch_size");
    if (j.contains("epochs")) tc.epochs = size(j["epochs"], where + ".epochs");
    if (j.contains("init_scale")) tc.weight_init_scale = number(j["init_scale"], where + ".init_scale");
    if (j.contains("optimizer")) {
      const auto o = string(j["optimizer"], where + ".optimizer");
      if (o == "adam")
        tc.optimizer = nn::OptimizerKind::adam;
      else if (o == "sgd")
        tc.optimizer = nn::OptimizerKind::sgd;
      else
        throw ConfigError("config: '" + where + ".optimizer' must be \"adam\" or \"sgd\"");
    }
  }

private:
  const json& root_;
};

json train_config_json(const nn::TrainConfig& tc) {
  return {{"learning_rate", tc.learning_rate},
          {"batch_size", tc.batch_size},
          {"epochs", tc.epochs},
          {"init_scale", tc.weight_init_scale},
          {"optimizer", tc.optimizer == nn::OptimizerKind::adam ? "adam" : "sgd"}};
}

nn::TrainConfig seeded(nn::TrainConfig tc, std::uint64_t seed, std::uint64_t offset) {
  tc.seed = seed + offset;
  return tc;
}

// ---------------------------------------------------------------------------
// Stage plumbing

void log(const PipelineConfig& cfg, Stage s, const std::string& msg) {
  if (cfg.verbose) std::clog << "[ride " << to_string(s) << "] " << msg << '\n';
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingDependency(p);
}

json read_json(const fs::path& p) {
  require(p);
  return detail::parse_json_or_throw(read_file(p), p.string().c_str(), [](json j) { return j; });
}

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

void write_summary(const Layout& layout, Stage s, json body) {
  body["stage"] = std::string(to_string(s));
  write_json(layout.summary(s), body);
}

fs::path pcap_path(const PipelineConfig& cfg, const Layout& layout) {
  return cfg.pcap.empty() ? layout.synth_pcap() : cfg.pcap;
}

fs::path truth_path(const PipelineConfig& cfg, const Layout& layout) {
  return cfg.truth.empty() ? layout.synth_truth() : cfg.truth;
}

hw::CostCalibration calibration(const PipelineConfig& cfg) {
  if (cfg.calibration.empty()) return hw::CostCalibration::defaults();
  require(cfg.calibration);
  return hw::CostCalibration::load(cfg.calibration);
}

tree::CartParams cart_params(const PipelineConfig& cfg) {
  tree::CartParams p;
  p.criterion = tree::criterion_from_string(cfg.criterion);
  p.max_depth = cfg.max_depth;
  p.min_samples_leaf = cfg.min_samples_leaf;
  return p;
}

json metrics_json(const clf::MetricsReport& m) {
  return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"confusion", m.confusion}, {"n_samples", m.n_samples}};
}

json cost_json(const hw::HardwareCost& c) {
  return {{"power_mw", c.power_mw},
          {"area_units", c.area_units},
          {"latency_s", c.inference_time_s},
          {"n_nodes", c.n_nodes},
          {"depth", c.depth},
          {"beta", c.beta}};
}

json budget_json(const hw::Budget& b) {
  json j = json::object();
  if (b.max_power_mw) j["max_power_mw"] = *b.max_power_mw;
  if (b.max_area_units) j["max_area_units"] = *b.max_area_units;
  if (b.max_latency_s) j["max_latency_s"] = *b.max_latency_s;
  return j;
}

json config_eval_json(const jshc::ConfigEval& e) {
  return {{"alpha", e.alpha},     {"beta", e.beta},         {"accuracy", e.accuracy},
          {"f1", e.f1},           {"n_nodes", e.n_nodes},   {"feasible", e.feasible},
          {"cost", cost_json(e.cost)}};
}

std::vector<ingest::PayloadVector> payloads_of(const std::vector<ingest::FlowRecord>& flows, std::size_t n_p) {
  std::vector<ingest::PayloadVector> out;
  for (const auto& f : flows)
    for (const auto& p : f.packets) out.push_back(ingest::extract_payload_vector(p, n_p));
  return out;
}

std::vector<std::string> class_names(const Layout& layout) {
  return read_json(layout.summary(Stage::ingest)).at("classes").get<std::vector<std::string>>();
}

std::vector<rae::FlowEmbedding> load_embeddings(const Layout& layout) {
  require(layout.embeddings());
  return rae::read_embeddings_csv(read_file(layout.embeddings()));
}

struct SplitData {
  std::vector<rae::FlowEmbedding> train;
  std::vector<rae::FlowEmbedding> test;
};

SplitData load_split(const Layout& layout) {
  auto all = load_embeddings(layout);
  const json s = read_json(layout.split());
  SplitData out;
  for (std::size_t i : s.at("train").get<std::vector<std::size_t>>()) out.train.push_back(all.at(i));
  for (std::size_t i : s.at("test").get<std::vector<std::size_t>>()) out.test.push_back(all.at(i));
  return out;
}

clf::ClassifierModel load_classifier(const Layout& layout) {
  require(layout.classifier());
  return clf::classifier_from_json(read_file(layout.classifier()));
}

tree::DecisionTree load_tree(const Layout& layout) {
  require(layout.tree());
  return tree::tree_from_json(read_file(layout.tree()));
}

template <clf::LabelPredictor P>
double agreement(const P& a, const tree::DecisionTree& b, std::span<const rae::FlowEmbedding> xs) {
  if (xs.empty()) return 0.0;
  std::size_t same = 0;
  for (const auto& x : xs) same += a.predict_label(x.values) == b.predict_label(x.values);
  return static_cast<double>(same) / static_cast<double>(xs.size());
}

// Fastest of several timed passes over the batch.
template <clf::LabelPredictor P>
double best_batch_time(const P& predictor, std::span<const rae::FlowEmbedding> xs, std::size_t k,
                       std::size_t repeats) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r)
    best = std::min(best, clf::evaluate(predictor, xs, k).inference_time_s);
  return best;
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Stages

void stage_synth(const PipelineConfig& cfg, const Layout& layout) {
  synth::TrafficSpec spec = cfg.synth.fixture == "motif_combination" ? synth::motif_combination_fixture(cfg.seed)
                                                                     : synth::default_fixture(cfg.seed);
  if (cfg.synth.n_flows) spec.n_flows = *cfg.synth.n_flows;
  if (cfg.synth.min_packets) spec.min_packets = *cfg.synth.min_packets;
  if (cfg.synth.max_packets) spec.max_packets = *cfg.synth.max_packets;
  const auto traffic = synth::generate(spec);
  write_file_atomic(layout.synth_pcap(),
                    std::string_view(reinterpret_cast<const char*>(traffic.pcap.data()), traffic.pcap.size()));
  write_file_atomic(layout.synth_truth(), traffic.truth_csv);

  std::vector<std::size_t> per_class(spec.classes.size(), 0);
  for (std::size_t c : traffic.class_of_flow) ++per_class[c];
  json counts = json::object();
  for (std::size_t c = 0; c < spec.classes.size(); ++c) counts[spec.classes[c].name] = per_class[c];
  write_summary(layout, Stage::synth,
                {{"fixture", cfg.synth.fixture},
                 {"seed", spec.seed},
                 {"n_flows", spec.n_flows},
                 {"n_packets", traffic.n_packets},
                 {"class_counts", counts},
                 {"artifacts", {layout.synth_pcap().filename().string(), layout.synth_truth().filename().string()}}});
  log(cfg, Stage::synth, std::to_string(spec.n_flows) + " flows, " + std::to_string(traffic.n_packets) + " packets");
}

void stage_ingest(const PipelineConfig& cfg, const Layout& layout) {
  const fs::path pcap = pcap_path(cfg, layout);
  const fs::path truth = truth_path(cfg, layout);
  require(pcap);
  require(truth);
  const std::string bytes = read_file(pcap);
  const auto parsed = ingest::parse_pcap(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  auto flows = ingest::group_flows(parsed.packets);
  const std::size_t grouped = flows.size();
  const auto rows = ingest::parse_truth_csv(read_file(truth));
  auto labeled = ingest::label_flows(std::move(flows), rows, cfg.label_mode);
  if (labeled.flows.empty()) throw Error("ingest: no flow matched the truth table");
  write_file_atomic(layout.flows(), ingest::write_flow_store(labeled.flows, labeled.classes));

  std::vector<std::size_t> per_class(labeled.classes.size(), 0);
  for (const auto& f : labeled.flows) ++per_class[static_cast<std::size_t>(f.label)];
  write_summary(layout, Stage::ingest,
                {{"n_packets", parsed.packets.size()},
                 {"skipped_frames", parsed.skipped},
                 {"truncated", parsed.truncated},
                 {"n_flows_grouped", grouped},
                 {"n_flows", labeled.flows.size()},
                 {"dropped_unlabeled", labeled.dropped},
                 {"classes", labeled.classes.names()},
                 {"class_counts", per_class},
                 {"label_mode", cfg.label_mode == ingest::LabelMode::binary ? "binary" : "multiclass"},
                 {"artifacts", {layout.flows().filename().string()}}});
  log(cfg, Stage::ingest, std::to_string(labeled.flows.size()) + " labeled flows");
}

void stage_train_ae(const PipelineConfig& cfg, const Layout& layout) {
  require(layout.flows());
  const auto store = ingest::read_flow_store(read_file(layout.flows()));
  const auto payloads = payloads_of(store.flows, cfg.n_p);
  ae::AutoencoderOptions opt;
  opt.n_b = cfg.n_b;
  opt.h = cfg.h;
  opt.training_cap = cfg.ae_training_cap;
  const auto bundle = ae::train_autoencoder(payloads, opt, seeded(cfg.ae_train, cfg.seed, kAutoencoderSeed));
  write_file_atomic(layout.autoencoder(), ae::to_json(bundle));
  write_summary(layout, Stage::train_ae,
                {{"n_payloads", payloads.size()},
                 {"n_trained", std::min(payloads.size(), cfg.ae_training_cap)},
                 {"n_p", bundle.n_p},
                 {"n_b", bundle.n_b},
                 {"h", bundle.h},
                 {"final_train_mse", bundle.final_train_mse},
                 {"train", train_config_json(cfg.ae_train)},
                 {"artifacts", {layout.autoencoder().filename().string()}}});
  log(cfg, Stage::train_ae, "final mse " + fmt(bundle.final_train_mse, "%.6g"));
}

void stage_embed(const PipelineConfig& cfg, const Layout& layout) {
  require(layout.flows());
  require(layout.autoencoder());
  const auto store = ingest::read_flow_store(read_file(layout.flows()));
  const auto bundle = ae::autoencoder_from_json(read_file(layout.autoencoder()));

  std::vector<rae::PacketSequence> seqs;
  seqs.reserve(store.flows.size());
  for (const auto& f : store.flows) {
    std::vector<ingest::PayloadVector> pv;
    for (const auto& p : f.packets) pv.push_back(ingest::extract_payload_vector(p, bundle.n_p));
    seqs.push_back({f.flow_id, f.label, ae::encode_batch(bundle, pv)});
  }
  const auto pairs = rae::sample_training_pairs(seqs, cfg.rae_pair_cap, cfg.seed + kPairSeed);
  const auto rae_bundle = rae::train_rae(pairs, seeded(cfg.rae_train, cfg.seed, kRaeSeed));
  write_file_atomic(layout.rae(), rae::to_json(rae_bundle));

  const auto order = cfg.greedy_fold ? rae::FoldOrder::greedy_min_error : rae::FoldOrder::sequential;
  std::vector<rae::FlowEmbedding> embeddings;
  embeddings.reserve(seqs.size());
  for (const auto& s : seqs) embeddings.push_back(rae::embed_flow(rae_bundle, s.embeddings, s.flow_id, s.label, order));
  write_file_atomic(layout.embeddings(), rae::write_embeddings_csv(embeddings));
  write_summary(layout, Stage::embed,
                {{"n_flows", embeddings.size()},
                 {"n_pairs", pairs.size()},
                 {"n_b", rae_bundle.n_b},
                 {"final_recon_error", rae_bundle.final_recon_error},
                 {"fold_order", cfg.greedy_fold ? "greedy_min_error" : "sequential"},
                 {"train", train_config_json(cfg.rae_train)},
                 {"artifacts", {layout.rae().filename().string(), layout.embeddings().filename().string()}}});
  log(cfg, Stage::embed, std::to_string(embeddings.size()) + " flow embeddings");
}

void stage_train_clf(const PipelineConfig& cfg, const Layout& layout) {
  const auto all = load_embeddings(layout);
  const auto names = class_names(layout);
  std::vector<int> labels;
  for (const auto& e : all) labels.push_back(e.label);
  const auto split = clf::stratified_split(labels, cfg.test_fraction, cfg.seed + kSplitSeed);
  if (split.train.empty() || split.test.empty()) throw Error("train-clf: split left an empty partition");
  write_json(layout.split(), {{"seed", cfg.seed + kSplitSeed},
                              {"test_fraction", cfg.test_fraction},
                              {"train", split.train},
                              {"test", split.test}});
  std::vector<rae::FlowEmbedding> train, test;
  for (std::size_t i : split.train) train.push_back(all[i]);
  for (std::size_t i : split.test) test.push_back(all[i]);

  clf::ClassifierOptions opt;
  opt.hidden = cfg.clf_hidden;
  const auto model = clf::train_classifier(train, names.size(), seeded(cfg.clf_train, cfg.seed, kClassifierSeed),
                                           opt, names);
  write_file_atomic(layout.classifier(), clf::to_json(model));
  const auto train_m = clf::evaluate(model, train, names.size());
  const auto test_m = clf::evaluate(model, test, names.size());
  write_summary(layout, Stage::train_clf,
                {{"k", names.size()},
                 {"hidden", cfg.clf_hidden},
                 {"parameters", model.net.parameter_count()},
                 {"n_train", train.size()},
                 {"n_test", test.size()},
                 {"train", metrics_json(train_m)},
                 {"test", metrics_json(test_m)},
                 {"train_config", train_config_json(cfg.clf_train)},
                 {"artifacts", {layout.split().filename().string(), layout.classifier().filename().string()}}});
  log(cfg, Stage::train_clf, "test f1 " + fmt(test_m.f1));
}

void stage_distill(const PipelineConfig& cfg, const Layout& layout) {
  const auto teacher = load_classifier(layout);
  const auto data = load_split(layout);
  const auto dataset = distill::generate_teacher_dataset(teacher, data.train);
  const auto tree = distill::distill_tree(dataset, cart_params(cfg));
  write_file_atomic(layout.tree(), tree::to_json(tree));
  write_file_atomic(layout.tree_rules(), tree::to_rules_text(tree, teacher.class_names));
  const auto test_m = clf::evaluate(tree, data.test, tree.k_classes());
  write_summary(layout, Stage::distill,
                {{"n_nodes", tree.n_nodes()},
                 {"n_leaves", tree.n_leaves()},
                 {"depth", tree.max_depth()},
                 {"criterion", cfg.criterion},
                 {"teacher_train_accuracy", dataset.teacher_accuracy()},
                 {"fidelity_train", distill::fidelity(tree, teacher, data.train)},
                 {"fidelity_test", distill::fidelity(tree, teacher, data.test)},
                 {"test", metrics_json(test_m)},
                 {"artifacts", {layout.tree().filename().string(), layout.tree_rules().filename().string()}}});
  log(cfg, Stage::distill, std::to_string(tree.n_nodes()) + " nodes");
}

void stage_prune_sweep(const PipelineConfig& cfg, const Layout& layout) {
  const auto tree = load_tree(layout);
  const auto data = load_split(layout);
  const auto path = tree::pruning_path(tree);
  std::string csv = "alpha,n_nodes,n_leaves,terminal_impurity,accuracy,f1\n";
  json rows = json::array();
  char buf[256];
  for (const auto& step : path.steps) {
    const auto& t = path.snapshots[step.snapshot];
    const auto m = clf::evaluate(t, data.test, t.k_classes());
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu,%.17g,%.17g,%.17g\n", step.alpha_eff, step.n_nodes_after,
                  step.n_leaves_after, step.terminal_impurity, m.accuracy, m.f1);
    csv += buf;
    rows.push_back({{"alpha", step.alpha_eff},
                    {"n_nodes", step.n_nodes_after},
                    {"n_leaves", step.n_leaves_after},
                    {"terminal_impurity", step.terminal_impurity},
                    {"accuracy", m.accuracy},
                    {"f1", m.f1}});
  }
  write_file_atomic(layout.prune_sweep(), csv);
  write_summary(layout, Stage::prune_sweep,
                {{"n_steps", path.steps.size()}, {"steps", rows}, {"artifacts", {layout.prune_sweep().filename().string()}}});
  log(cfg, Stage::prune_sweep, std::to_string(path.steps.size()) + " pruning steps");
}

void stage_quantize(const PipelineConfig& cfg, const Layout& layout) {
  const auto tree = load_tree(layout);
  const auto data = load_split(layout);
  const auto train_x = distill::feature_matrix(data.train);
  const auto pruned = tree::prune(tree, cfg.quantize_alpha);
  const auto q = hw::quantize_tree(pruned, cfg.quantize_beta, hw::fit_quantization_ranges(tree, train_x));
  write_file_atomic(layout.qtree(), hw::to_json(q));
  const auto test_m = clf::evaluate(q, data.test, q.tree.k_classes());
  write_summary(layout, Stage::quantize,
                {{"alpha", cfg.quantize_alpha},
                 {"beta", q.beta},
                 {"n_nodes", q.n_nodes()},
                 {"train_agreement", agreement(q, pruned, data.train)},
                 {"test", metrics_json(test_m)},
                 {"artifacts", {layout.qtree().filename().string()}}});
  log(cfg, Stage::quantize, "beta " + std::to_string(q.beta) + ", " + std::to_string(q.n_nodes()) + " nodes");
}

void stage_cost(const PipelineConfig& cfg, const Layout& layout) {
  require(layout.qtree());
  const auto q = hw::quantized_tree_from_json(read_file(layout.qtree()));
  const auto calib = calibration(cfg);
  const auto cost = hw::cost_estimate(q, calib);
  const auto check = hw::check_constraint(cost, cfg.jshc.z_max);
  write_summary(layout, Stage::cost,
                {{"cost", cost_json(cost)},
                 {"budget", budget_json(cfg.jshc.z_max)},
                 {"feasible", check.ok},
                 {"violations", check.violations},
                 {"calibration", cfg.calibration.empty() ? "built-in" : cfg.calibration.filename().string()}});
  log(cfg, Stage::cost, fmt(cost.power_mw, "%.4g") + " mW");
}

void stage_jshc(const PipelineConfig& cfg, const Layout& layout) {
  auto tree = load_tree(layout);
  const auto data = load_split(layout);
  const std::size_t full_nodes = tree.n_nodes();
  const auto artifacts =
      jshc::prepare_artifacts(std::move(tree), distill::feature_matrix(data.train), data.test, calibration(cfg));
  jshc::Evaluator evaluator(artifacts, cfg.jshc.z_max);
  const auto result = jshc::jshc_optimize(cfg.jshc, evaluator);
  write_file_atomic(layout.sweep(), jshc::sweep_csv(result.sweep));

  json trace = json::array();
  for (const auto& e : result.bisection) trace.push_back(config_eval_json(e));
  write_summary(layout, Stage::jshc,
                {{"best", config_eval_json(result.best)},
                 {"grid_best", config_eval_json(result.grid_best)},
                 {"bisection", trace},
                 {"alpha_set", result.alpha_set},
                 {"beta_set", cfg.jshc.beta_set},
                 {"n_grid", result.sweep.size()},
                 {"n_evaluated", evaluator.computed()},
                 {"unpruned_n_nodes", full_nodes},
                 {"budget", budget_json(cfg.jshc.z_max)},
                 {"artifacts", {layout.sweep().filename().string()}}});
  log(cfg, Stage::jshc, "alpha " + fmt(result.best.alpha, "%.6g") + ", beta " + std::to_string(result.best.beta));
}

void stage_eval(const PipelineConfig& cfg, const Layout& layout) {
  const auto teacher = load_classifier(layout);
  const auto tree = load_tree(layout);
  const auto data = load_split(layout);
  const json j = read_json(layout.summary(Stage::jshc));
  const double alpha = j.at("best").at("alpha").get<double>();
  const int beta = j.at("best").at("beta").get<int>();
  const auto ranges = hw::fit_quantization_ranges(tree, distill::feature_matrix(data.train));
  const auto q = hw::quantize_tree(tree::prune(tree, alpha), beta, ranges);
  const auto cost = hw::cost_estimate(q, calibration(cfg));
  const std::size_t k = teacher.k_classes;

  const auto m_mlp = clf::evaluate(teacher, data.test, k);
  const auto m_tree = clf::evaluate(tree, data.test, k);
  const auto m_q = clf::evaluate(q, data.test, k);
  write_summary(layout, Stage::eval,
                {{"n_test", data.test.size()},
                 {"mlp", {{"metrics", metrics_json(m_mlp)},
                          {"hidden", cfg.clf_hidden},
                          {"parameters", teacher.net.parameter_count()}}},
                 {"tree", {{"metrics", metrics_json(m_tree)}, {"n_nodes", tree.n_nodes()}}},
                 {"quantized", {{"metrics", metrics_json(m_q)},
                                {"n_nodes", q.n_nodes()},
                                {"alpha", alpha},
                                {"beta", beta},
                                {"hw", cost_json(cost)}}},
                 {"artifacts", {layout.timings().filename().string()}}});

  // Wall-clock numbers vary run to run, so they stay out of the summaries and the report.
  const std::size_t n = std::max<std::size_t>(data.test.size(), 1);
  auto timing = [&](double batch) {
    return json{{"batch_s", batch}, {"per_sample_s", batch / static_cast<double>(n)}};
  };
  write_json(layout.timings(), {{"n_samples", data.test.size()},
                                {"repeats", cfg.timing_repeats},
                                {"mlp", timing(best_batch_time(teacher, data.test, k, cfg.timing_repeats))},
                                {"tree", timing(best_batch_time(tree, data.test, k, cfg.timing_repeats))},
                                {"quantized", timing(best_batch_time(q, data.test, k, cfg.timing_repeats))},
                                {"hw_modeled_latency_s", cost.inference_time_s}});
  log(cfg, Stage::eval, "mlp f1 " + fmt(m_mlp.f1) + ", tree f1 " + fmt(m_tree.f1) + ", quantized f1 " + fmt(m_q.f1));
}

void stage_report(const PipelineConfig& cfg, const Layout& layout) {
  const json ingest_s = read_json(layout.summary(Stage::ingest));
  const json clf_s = read_json(layout.summary(Stage::train_clf));
  const json distill_s = read_json(layout.summary(Stage::distill));
  const json jshc_s = read_json(layout.summary(Stage::jshc));
  const json eval_s = read_json(layout.summary(Stage::eval));
  require(layout.sweep());

  const json& mlp = eval_s.at("mlp");
  const json& tr = eval_s.at("tree");
  const json& q = eval_s.at("quantized");
  const json& hwc = q.at("hw");
  const std::string mlp_size = "1 layer/" + std::to_string(mlp.at("hidden").get<std::size_t>()) + " neurons";
  const std::string tree_size = std::to_string(tr.at("n_nodes").get<std::size_t>()) + " nodes";
  const std::string q_size = std::to_string(q.at("n_nodes").get<std::size_t>()) + " nodes, " +
                             std::to_string(q.at("beta").get<int>()) + " bits";

  json models = json::array();
  models.push_back({{"model", "MLP teacher"},
                    {"f1", mlp.at("metrics").at("f1")},
                    {"accuracy", mlp.at("metrics").at("accuracy")},
                    {"size", mlp_size},
                    {"parameters", mlp.at("parameters")}});
  models.push_back({{"model", "Decision tree"},
                    {"f1", tr.at("metrics").at("f1")},
                    {"accuracy", tr.at("metrics").at("accuracy")},
                    {"size", tree_size},
                    {"n_nodes", tr.at("n_nodes")}});
  models.push_back({{"model", "Pruned + quantized tree"},
                    {"f1", q.at("metrics").at("f1")},
                    {"accuracy", q.at("metrics").at("accuracy")},
                    {"size", q_size},
                    {"n_nodes", q.at("n_nodes")},
                    {"alpha", q.at("alpha")},
                    {"beta", q.at("beta")},
                    {"modeled_latency_s", hwc.at("latency_s")},
                    {"modeled_power_mw", hwc.at("power_mw")},
                    {"modeled_area_units", hwc.at("area_units")}});
  const json report = {{"seed", cfg.seed},
                       {"dataset", {{"n_flows", ingest_s.at("n_flows")},
                                    {"classes", ingest_s.at("classes")},
                                    {"n_train", clf_s.at("n_train")},
                                    {"n_test", clf_s.at("n_test")}}},
                       {"models", models},
                       {"distillation", {{"fidelity_train", distill_s.at("fidelity_train")},
                                         {"fidelity_test", distill_s.at("fidelity_test")}}},
                       {"jshc", {{"best", jshc_s.at("best")},
                                 {"grid_best", jshc_s.at("grid_best")},
                                 {"n_grid", jshc_s.at("n_grid")},
                                 {"unpruned_n_nodes", jshc_s.at("unpruned_n_nodes")},
                                 {"sweep_csv", layout.sweep().filename().string()}}}};
  write_json(layout.report_json(), report);

  std::ostringstream md;
  md << "# RIDE report\n\n"
     << "Flows: " << ingest_s.at("n_flows").get<std::size_t>() << " (" << clf_s.at("n_train").get<std::size_t>()
     << " train / " << clf_s.at("n_test").get<std::size_t>() << " test), seed " << cfg.seed << ".\n\n"
     << "| Model | F1 score | Accuracy | Modeled HW latency (s) | Learning model size |\n"
     << "|---|---|---|---|---|\n";
  for (const auto& m : models) {
    md << "| " << m.at("model").get<std::string>() << " | " << fmt(m.at("f1").get<double>()) << " | "
       << fmt(m.at("accuracy").get<double>()) << " | "
       << (m.contains("modeled_latency_s") ? fmt(m.at("modeled_latency_s").get<double>(), "%.2e") : std::string("-"))
       << " | " << m.at("size").get<std::string>() << " |\n";
  }
  const json& best = jshc_s.at("best");
  md << "\nJSHC winner: alpha = " << fmt(best.at("alpha").get<double>(), "%.6g")
     << ", beta = " << best.at("beta").get<int>() << ", accuracy = " << fmt(best.at("accuracy").get<double>())
     << ", " << best.at("n_nodes").get<std::size_t>() << " of "
     << jshc_s.at("unpruned_n_nodes").get<std::size_t>() << " nodes, modeled power "
     << fmt(best.at("cost").at("power_mw").get<double>(), "%.4g") << " mW.\n"
     << "Full grid: " << layout.sweep().filename().string() << " (" << jshc_s.at("n_grid").get<std::size_t>()
     << " configurations).\n"
     << "Distillation fidelity: " << fmt(distill_s.at("fidelity_test").get<double>()) << " on the test split.\n\n"
     << "Measured software inference times are machine dependent and are written to "
     << layout.timings().filename().string() << ".\n";
  write_file_atomic(layout.report_md(), md.str());
  write_summary(layout, Stage::report,
                {{"models", models.size()},
                 {"artifacts", {layout.report_json().filename().string(), layout.report_md().filename().string()}}});
  log(cfg, Stage::report, layout.report_md().string());
}

} // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Stage s) noexcept {
  switch (s) {
  case Stage::synth: return "synth";
  case Stage::ingest: return "ingest";
  case Stage::train_ae: return "train-ae";
  case Stage::embed: return "embed";
  case Stage::train_clf: return "train-clf";
  case Stage::distill: return "distill";
  case Stage::prune_sweep: return "prune-sweep";
  case Stage::quantize: return "quantize";
  case Stage::cost: return "cost";
  case Stage::jshc: return "jshc";
  case Stage::eval: return "eval";
  case Stage::report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::synth,     Stage::ingest,      Stage::train_ae,
                                            Stage::embed,     Stage::train_clf,   Stage::distill,
                                            Stage::prune_sweep, Stage::quantize,  Stage::cost,
                                            Stage::jshc,      Stage::eval,        Stage::report};
  return stages;
}

Stage stage_from_string(std::string_view name) {
  for (Stage s : all_stages())
    if (to_string(s) == name) return s;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (synth.fixture != "default" && synth.fixture != "motif_combination")
    fail("synth.fixture must be \"default\" or \"motif_combination\"");
  if (n_p == 0) fail("ingest.n_p must be >= 1");
  if (n_b == 0 || n_b >= n_p) fail("autoencoder.n_b must be in [1, n_p)");
  if (h == 0) fail("autoencoder.hidden must be >= 1");
  if (ae_training_cap == 0) fail("autoencoder.training_cap must be >= 1");
  if (rae_pair_cap == 0) fail("rae.pair_cap must be >= 1");
  if (clf_hidden == 0) fail("classifier.hidden must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("classifier.test_fraction must be in (0, 1)");
  if (criterion != "gini" && criterion != "entropy") fail("tree.criterion must be \"gini\" or \"entropy\"");
  if (min_samples_leaf == 0) fail("tree.min_samples_leaf must be >= 1");
  if (!(quantize_alpha >= 0.0)) fail("quantize.alpha must be >= 0");
  if (quantize_beta < 1 || quantize_beta > hw::kMaxQuantBits) fail("quantize.beta must be in [1, 52]");
  if (timing_repeats == 0) fail("eval.timing_repeats must be >= 1");
  for (const auto* tc : {&ae_train, &rae_train, &clf_train}) {
    try {
      tc->validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
  }
  try {
    jshc.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (out_dir.empty()) fail("out_dir must not be empty");
}

PipelineConfig PipelineConfig::from_json(std::string_view text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  using R = ConfigReader;
  PipelineConfig c;
  R::check_object(root, "", {"seed", "out_dir", "inputs", "calibration", "synth", "ingest", "autoencoder", "rae",
                             "classifier", "tree", "quantize", "jshc", "eval", "verbose"});
  auto path = [&](const json& j, const std::string& where) {
    fs::path p = R::string(j, where);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  if (root.contains("seed")) c.seed = R::u64(root["seed"], "seed");
  if (root.contains("out_dir")) c.out_dir = path(root["out_dir"], "out_dir");
  if (root.contains("verbose")) c.verbose = R::boolean(root["verbose"], "verbose");
  if (root.contains("calibration") && !root["calibration"].is_null())
    c.calibration = path(root["calibration"], "calibration");
  if (root.contains("inputs")) {
    const json& j = root["inputs"];
    R::check_object(j, "inputs", {"pcap", "truth"});
    if (j.contains("pcap")) c.pcap = path(j["pcap"], "inputs.pcap");
    if (j.contains("truth")) c.truth = path(j["truth"], "inputs.truth");
  }
  if (root.contains("synth")) {
    const json& j = root["synth"];
    R::check_object(j, "synth", {"fixture", "n_flows", "min_packets", "max_packets"});
    if (j.contains("fixture")) c.synth.fixture = R::string(j["fixture"], "synth.fixture");
    if (j.contains("n_flows")) c.synth.n_flows = R::size(j["n_flows"], "synth.n_flows");
    if (j.contains("min_packets")) c.synth.min_packets = R::size(j["min_packets"], "synth.min_packets");
    if (j.contains("max_packets")) c.synth.max_packets = R::size(j["max_packets"], "synth.max_packets");
  }
  if (root.contains("ingest")) {
    const json& j = root["ingest"];
    R::check_object(j, "ingest", {"n_p", "label_mode"});
    if (j.contains("n_p")) c.n_p = R::size(j["n_p"], "ingest.n_p");
    if (j.contains("label_mode")) {
      const auto m = R::string(j["label_mode"], "ingest.label_mode");
      if (m == "binary")
        c.label_mode = ingest::LabelMode::binary;
      else if (m == "multiclass")
        c.label_mode = ingest::LabelMode::multiclass;
      else
        throw ConfigError("config: 'ingest.label_mode' must be \"binary\" or \"multiclass\"");
    }
  }
  if (root.contains("autoencoder")) {
    const json& j = root["autoencoder"];
    R::check_object(j, "autoencoder", {"n_b", "hidden", "training_cap", "train"});
    if (j.contains("n_b")) c.n_b = R::size(j["n_b"], "autoencoder.n_b");
    if (j.contains("hidden")) c.h = R::size(j["hidden"], "autoencoder.hidden");
    if (j.contains("training_cap")) c.ae_training_cap = R::size(j["training_cap"], "autoencoder.training_cap");
    if (j.contains("train")) R::train_config(j["train"], "autoencoder.train", c.ae_train);
  }
  if (root.contains("rae")) {
    const json& j = root["rae"];
    R::check_object(j, "rae", {"pair_cap", "fold_order", "train"});
    if (j.contains("pair_cap")) c.rae_pair_cap = R::size(j["pair_cap"], "rae.pair_cap");
    if (j.contains("fold_order")) {
      const auto o = R::string(j["fold_order"], "rae.fold_order");
      if (o != "sequential" && o != "greedy_min_error")
        throw ConfigError("config: 'rae.fold_order' must be \"sequential\" or \"greedy_min_error\"");
      c.greedy_fold = o == "greedy_min_error";
    }
    if (j.contains("train")) R::train_config(j["train"], "rae.train", c.rae_train);
  }
  if (root.contains("classifier")) {
    const json& j = root["classifier"];
    R::check_object(j, "classifier", {"hidden", "test_fraction", "train"});
    if (j.contains("hidden")) c.clf_hidden = R::size(j["hidden"], "classifier.hidden");
    if (j.contains("test_fraction")) c.test_fraction = R::number(j["test_fraction"], "classifier.test_fraction");
    if (j.contains("train")) R::train_config(j["train"], "classifier.train", c.clf_train);
  }
  if (root.contains("tree")) {
    const json& j = root["tree"];
    R::check_object(j, "tree", {"criterion", "max_depth", "min_samples_leaf"});
    if (j.contains("criterion")) c.criterion = R::string(j["criterion"], "tree.criterion");
    if (j.contains("max_depth") && !j["max_depth"].is_null()) c.max_depth = R::size(j["max_depth"], "tree.max_depth");
    if (j.contains("min_samples_leaf")) c.min_samples_leaf = R::size(j["min_samples_leaf"], "tree.min_samples_leaf");
  }
  if (root.contains("quantize")) {
    const json& j = root["quantize"];
    R::check_object(j, "quantize", {"alpha", "beta"});
    if (j.contains("alpha")) c.quantize_alpha = R::number(j["alpha"], "quantize.alpha");
    if (j.contains("beta")) c.quantize_beta = R::integer(j["beta"], "quantize.beta");
  }
  if (root.contains("jshc")) {
    const json& j = root["jshc"];
    R::check_object(j, "jshc", {"alpha_set", "beta_set", "min_beta", "max_beta", "tol", "max_iter", "z_max"});
    if (j.contains("alpha_set") && !j["alpha_set"].is_null()) {
      if (!j["alpha_set"].is_array()) throw ConfigError("config: 'jshc.alpha_set' must be an array or null");
      c.jshc.alpha_set.clear();
      for (const auto& a : j["alpha_set"]) c.jshc.alpha_set.push_back(R::number(a, "jshc.alpha_set[]"));
    }
    if (j.contains("beta_set")) {
      if (!j["beta_set"].is_array()) throw ConfigError("config: 'jshc.beta_set' must be an array");
      c.jshc.beta_set.clear();
      for (const auto& b : j["beta_set"]) c.jshc.beta_set.push_back(R::integer(b, "jshc.beta_set[]"));
    }
    if (j.contains("min_beta")) c.jshc.min_beta = R::integer(j["min_beta"], "jshc.min_beta");
    if (j.contains("max_beta")) c.jshc.max_beta = R::integer(j["max_beta"], "jshc.max_beta");
    if (j.contains("tol")) c.jshc.tol = R::number(j["tol"], "jshc.tol");
    if (j.contains("max_iter")) c.jshc.max_iter = R::size(j["max_iter"], "jshc.max_iter");
    if (j.contains("z_max")) {
      const json& z = j["z_max"];
      R::check_object(z, "jshc.z_max", {"max_power_mw", "max_area_units", "max_latency_s"});
      auto opt = [&](const char* key, std::optional<double>& dst) {
        if (z.contains(key) && !z[key].is_null()) dst = R::number(z[key], std::string("jshc.z_max.") + key);
      };
      opt("max_power_mw", c.jshc.z_max.max_power_mw);
      opt("max_area_units", c.jshc.z_max.max_area_units);
      opt("max_latency_s", c.jshc.z_max.max_latency_s);
    }
  }
  if (root.contains("eval")) {
    const json& j = root["eval"];
    R::check_object(j, "eval", {"timing_repeats"});
    if (j.contains("timing_repeats")) c.timing_repeats = R::size(j["timing_repeats"], "eval.timing_repeats");
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return from_json(read_file(path), path.parent_path());
}

std::string PipelineConfig::to_json() const {
  json j = {
      {"seed", seed},
      {"out_dir", out_dir.string()},
      {"inputs", {{"pcap", pcap.string()}, {"truth", truth.string()}}},
      {"calibration", calibration.empty() ? json(nullptr) : json(calibration.string())},
      {"synth", {{"fixture", synth.fixture}}},
      {"ingest", {{"n_p", n_p}, {"label_mode", label_mode == ingest::LabelMode::binary ? "binary" : "multiclass"}}},
      {"autoencoder", {{"n_b", n_b}, {"hidden", h}, {"training_cap", ae_training_cap}, {"train", train_config_json(ae_train)}}},
      {"rae", {{"pair_cap", rae_pair_cap},
               {"fold_order", greedy_fold ? "greedy_min_error" : "sequential"},
               {"train", train_config_json(rae_train)}}},
      {"classifier", {{"hidden", clf_hidden}, {"test_fraction", test_fraction}, {"train", train_config_json(clf_train)}}},
      {"tree", {{"criterion", criterion},
                {"max_depth", max_depth ? json(*max_depth) : json(nullptr)},
                {"min_samples_leaf", min_samples_leaf}}},
      {"quantize", {{"alpha", quantize_alpha}, {"beta", quantize_beta}}},
      {"jshc", {{"alpha_set", jshc.alpha_set.empty() ? json(nullptr) : json(jshc.alpha_set)},
                {"beta_set", jshc.beta_set},
                {"min_beta", jshc.min_beta},
                {"max_beta", jshc.max_beta},
                {"tol", jshc.tol},
                {"max_iter", jshc.max_iter},
                {"z_max", budget_json(jshc.z_max)}}},
      {"eval", {{"timing_repeats", timing_repeats}}},
      {"verbose", verbose},
  };
  if (synth.n_flows) j["synth"]["n_flows"] = *synth.n_flows;
  if (synth.min_packets) j["synth"]["min_packets"] = *synth.min_packets;
  if (synth.max_packets) j["synth"]["max_packets"] = *synth.max_packets;
  if (pcap.empty()) j["inputs"].erase("pcap");
  if (truth.empty()) j["inputs"].erase("truth");
  return j.dump(2) + "\n";
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingDependency(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void run_stage(Stage stage, const PipelineConfig& cfg) {
  cfg.validate();
  const Layout layout{cfg.out_dir};
  fs::create_directories(layout.root / "summaries");
  switch (stage) {
  case Stage::synth: stage_synth(cfg, layout); break;
  case Stage::ingest: stage_ingest(cfg, layout); break;
  case Stage::train_ae: stage_train_ae(cfg, layout); break;
  case Stage::embed: stage_embed(cfg, layout); break;
  case Stage::train_clf: stage_train_clf(cfg, layout); break;
  case Stage::distill: stage_distill(cfg, layout); break;
  case Stage::prune_sweep: stage_prune_sweep(cfg, layout); break;
  case Stage::quantize: stage_quantize(cfg, layout); break;
  case Stage::cost: stage_cost(cfg, layout); break;
  case Stage::jshc: stage_jshc(cfg, layout); break;
  case Stage::eval: stage_eval(cfg, layout); break;
  case Stage::report: stage_report(cfg, layout); break;
  }
}

void run_all(const PipelineConfig& cfg) {
  for (Stage s : all_stages()) {
    // User-supplied captures replace the synthetic corpus.
    if (s == Stage::synth && !cfg.pcap.empty()) continue;
    run_stage(s, cfg);
  }
}

} // namespace ride::pipeline
