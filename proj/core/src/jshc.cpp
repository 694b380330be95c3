#include "ride/jshc.hpp"

#include "ride/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ride::jshc {

void JshcConfig::validate() const {
  if (!std::is_sorted(alpha_set.begin(), alpha_set.end()))
    throw InvalidArgument("jshc: alpha_set must be ascending");
  for (double a : alpha_set)
    if (!(a >= 0.0)) throw InvalidArgument("jshc: alpha values must be >= 0");
  if (beta_set.empty()) throw InvalidArgument("jshc: beta_set is empty");
  for (int b : beta_set)
    if (b < 1) throw InvalidArgument("jshc: beta values must be >= 1");
  if (min_beta < 1 || min_beta > max_beta) throw InvalidArgument("jshc: need 1 <= min_beta <= max_beta");
  if (!(tol > 0.0)) throw InvalidArgument("jshc: tol must be > 0");
}

Artifacts prepare_artifacts(tree::DecisionTree full_tree, const Eigen::MatrixXd& train_features,
                            std::span<const rae::FlowEmbedding> eval, hw::CostCalibration calib) {
  if (eval.empty()) throw InvalidArgument("jshc: empty evaluation set");
  calib.validate();
  Artifacts a;
  a.k_classes = full_tree.k_classes();
  a.full_tree = std::move(full_tree);
  a.path = tree::pruning_path(a.full_tree);
  a.ranges = hw::fit_quantization_ranges(a.full_tree, train_features);
  a.calib = std::move(calib);
  a.eval_features = distill::feature_matrix(eval);
  a.eval_labels.reserve(eval.size());
  for (const auto& e : eval) a.eval_labels.push_back(e.label);
  return a;
}

Artifacts prepare_artifacts(const distill::TeacherDataset& train, const tree::CartParams& params,
                            std::span<const rae::FlowEmbedding> eval, hw::CostCalibration calib) {
  return prepare_artifacts(distill::distill_tree(train, params), train.features, eval, std::move(calib));
}

std::vector<double> default_alpha_set(const tree::PruningPath& path) {
  std::vector<double> out{0.0};
  for (double a : path.alphas())
    if (a > out.back()) out.push_back(a);
  return out;
}

Evaluator::Evaluator(const Artifacts& artifacts, hw::Budget budget)
    : artifacts_(artifacts), budget_(budget) {}

const ConfigEval& Evaluator::evaluate(double alpha, int beta) {
  const auto key = std::make_pair(alpha, beta);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  ++computed_;

  const tree::DecisionTree pruned = tree::prune(artifacts_.path, alpha);
  const hw::QuantizedTree q = hw::quantize_tree(pruned, beta, artifacts_.ranges);
  const auto& x = artifacts_.eval_features;
  std::vector<int> predicted(static_cast<std::size_t>(x.cols()));
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Map<Eigen::VectorXd>(col.data(), x.rows()) = x.col(j);
    predicted[static_cast<std::size_t>(j)] = q.predict_label(col);
  }
  const auto metrics = clf::metrics_from_predictions(artifacts_.eval_labels, predicted, artifacts_.k_classes);

  ConfigEval e;
  e.alpha = alpha;
  e.beta = beta;
  e.accuracy = metrics.accuracy;
  e.f1 = metrics.f1;
  e.n_nodes = pruned.n_nodes();
  e.cost = hw::cost_estimate(q, artifacts_.calib);
  const auto check = hw::check_constraint(e.cost, budget_);
  e.feasible = check.ok;
  e.violations = check.violations;
  return cache_.emplace(key, std::move(e)).first->second;
}

bool better(const ConfigEval& a, const ConfigEval& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  if (a.beta != b.beta) return a.beta < b.beta;
  return a.alpha > b.alpha;
}

namespace {

[[noreturn]] void throw_infeasible(const std::vector<ConfigEval>& log, const hw::Budget& z) {
  struct Field {
    const char* name;
    std::optional<double> limit;
    double (*value)(const hw::HardwareCost&);
  };
  const Field fields[] = {
      {"power", z.max_power_mw, [](const hw::HardwareCost& c) { return c.power_mw; }},
      {"area", z.max_area_units, [](const hw::HardwareCost& c) { return c.area_units; }},
      {"latency", z.max_latency_s, [](const hw::HardwareCost& c) { return c.inference_time_s; }},
  };
  const Field* tightest = nullptr;
  double tightest_ratio = -std::numeric_limits<double>::infinity();
  double tightest_min = 0.0;
  for (const Field& f : fields) {
    if (!f.limit) continue;
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& e : log) lowest = std::min(lowest, f.value(e.cost));
    const double ratio = *f.limit > 0.0 ? lowest / *f.limit : std::numeric_limits<double>::infinity();
    if (ratio > tightest_ratio) {
      tightest_ratio = ratio;
      tightest = &f;
      tightest_min = lowest;
    }
  }
  if (!tightest) throw InvalidArgument("jshc: no configurations were evaluated");
  throw NoFeasibleConfig(tightest->name, tightest_min, *tightest->limit);
}

} // namespace

GridResult grid_sweep(const JshcConfig& cfg, Evaluator& evaluator) {
  cfg.validate();
  const std::vector<double> alphas =
      cfg.alpha_set.empty() ? default_alpha_set(evaluator.artifacts().path) : cfg.alpha_set;
  std::vector<int> betas = cfg.beta_set;
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  GridResult out;
  bool found = false;
  for (double a : alphas)
    for (int b : betas) {
      const ConfigEval& e = evaluator.evaluate(a, b);
      out.log.push_back(e);
      if (e.feasible && (!found || better(e, out.best))) {
        out.best = e;
        found = true;
      }
    }
  if (!found) throw_infeasible(out.log, cfg.z_max);
  return out;
}

BisectResult bisect_beta(const ConfigEval& start, const JshcConfig& cfg, Evaluator& evaluator) {
  BisectResult out;
  out.best = start;
  // Invariant: beta <= left is not known to reach the target, beta = right does (or lies past
  // the search window). Betas outside [min_beta, max_beta] are never evaluated.
  if (start.beta < cfg.min_beta) return out;
  int left = cfg.min_beta - 1;
  int right = std::min(start.beta, cfg.max_beta + 1);
  const double gap = std::max(cfg.tol, 1.0);
  for (std::size_t iter = 0; iter < cfg.max_iter && static_cast<double>(right - left) > gap; ++iter) {
    // Rounded to nearest; a half rounds down so the lower half is probed first.
    const int mid = left + (right - left) / 2;
    if (mid <= left || mid >= right) break;
    const ConfigEval& e = evaluator.evaluate(start.alpha, mid);
    out.trace.push_back(e);
    if (e.feasible && e.accuracy >= out.best.accuracy) {
      if (better(e, out.best)) out.best = e;
      right = mid;
    } else {
      left = mid;
    }
  }
  return out;
}

JshcResult jshc_optimize(const JshcConfig& cfg, Evaluator& evaluator) {
  JshcResult out;
  out.alpha_set = cfg.alpha_set.empty() ? default_alpha_set(evaluator.artifacts().path) : cfg.alpha_set;
  GridResult grid = grid_sweep(cfg, evaluator);
  out.grid_best = grid.best;
  out.sweep = std::move(grid.log);
  BisectResult bis = bisect_beta(out.grid_best, cfg, evaluator);
  out.best = bis.best;
  out.bisection = std::move(bis.trace);
  return out;
}

std::string sweep_csv(std::span<const ConfigEval> log) {
  std::string out = "alpha,beta,accuracy,f1,n_nodes,power_mw,area_units,latency_s,feasible\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%d\n", e.alpha, e.beta,
                  e.accuracy, e.f1, e.n_nodes, e.cost.power_mw, e.cost.area_units, e.cost.inference_time_s,
                  e.feasible ? 1 : 0);
    out += buf;
  }
  return out;
}

} // namespace ride::jshc
