#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "echoopt/data_io.hpp"
#include "echoopt/engine.hpp"
#include "echoopt/oracles.hpp"
#include "echoopt/svg.hpp"

namespace echoopt {

enum class Algorithm { gd, prox, agd };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gd: return "gd";
    case Algorithm::prox: return "prox";
    case Algorithm::agd: return "agd";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "gd") return Algorithm::gd;
  if (s == "prox") return Algorithm::prox;
  if (s == "agd") return Algorithm::agd;
  throw InvalidArgument("unknown algorithm '" + s + "' (expected gd, prox or agd)");
}

// Learning-rate grid: candidates 10^(1/steps_per_decade) apart from lo to hi
// inclusive (defaults give the 61-point 0.01..10 grid).
struct GridSpec {
  double lo = 0.01;
  double hi = 10.0;
  int steps_per_decade = 20;

  std::vector<double> candidates() const {
    require_positive(lo, "GridSpec.lo");
    require(hi > lo, "GridSpec: hi must exceed lo");
    require(steps_per_decade >= 1, "GridSpec.steps_per_decade must be >= 1");
    double lg_lo = std::log10(lo);
    double lg_hi = std::log10(hi);
    int n = static_cast<int>(std::lround((lg_hi - lg_lo) * steps_per_decade));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
      out.push_back(std::pow(10.0, lg_lo + static_cast<double>(i) / steps_per_decade));
    return out;
  }
};

// Converged at the first evaluation where the mean of the trailing `window`
// full-training losses drops below the threshold. Before `window` losses
// exist, the mean is over what is available.
struct StoppingRule {
  double threshold = 0.0;
  int window = 10;
};

inline std::optional<std::size_t> converged_at(const std::vector<double>& evals,
                                               const StoppingRule& rule) {
  require(rule.window >= 1, "StoppingRule.window must be >= 1");
  double sum = 0.0;
  std::deque<double> win;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    win.push_back(evals[i]);
    sum += evals[i];
    if (static_cast<int>(win.size()) > rule.window) {
      sum -= win.front();
      win.pop_front();
    }
    if (sum / static_cast<double>(win.size()) < rule.threshold) return i;
  }
  return std::nullopt;
}

// Binary datasets store labels as +1/-1; the softmax parameterization wants
// class ids. +1 -> class 0, -1 -> class 1 (covtype's original 1/2).
inline Dataset binary_to_class_ids(const Dataset& ds) {
  require(ds.n_classes == 2, "binary_to_class_ids: dataset is not binary");
  Dataset out = ds;
  for (auto& ex : out.examples) {
    auto& l = std::get<LogisticExample>(ex);
    require(l.label == 1 || l.label == -1, "binary_to_class_ids: label must be +1/-1");
    l.label = l.label == 1 ? 0 : 1;
  }
  return out;
}

// A dataset paired with the logistic model trained on it. Default is the
// one-weight-vector-per-class softmax form (binary data becomes C=2);
// single_vector selects the sigmoid parameterization.
struct PreparedProblem {
  Dataset data;
  LossModel model;
};

inline PreparedProblem prepare_problem(const Dataset& ds, bool single_vector = false) {
  require(!ds.examples.empty(), "prepare_problem: empty dataset");
  require(ds.n_classes >= 2, "prepare_problem: dataset has no class labels");
  PreparedProblem p;
  if (ds.n_classes == 2 && single_vector) {
    auto [beta, rho] = constants_for(LossKind::binary_logistic, ds.examples);
    p.model = make_binary_logistic_model(ds.n_features, beta, rho);
    p.data = ds;
  } else {
    auto [beta, rho] = constants_for(LossKind::multiclass_logistic, ds.examples);
    p.model = make_multiclass_model(ds.n_features, ds.n_classes, beta, rho);
    p.data = ds.n_classes == 2 ? binary_to_class_ids(ds) : ds;
  }
  return p;
}

struct ExperimentSpec {
  std::string dataset_name;
  const Dataset* dataset = nullptr;
  LossModel model;
  Algorithm algorithm = Algorithm::gd;
  int B = 1;
  StepBudget schedule{1};
  double gamma = 0.0;  // prox only
  StoppingRule stopping;
  long long step_cap = 200000;
  long long eval_every = 10;  // inner steps between full-training-loss evaluations
};

struct RunOutcome {
  ConvergenceRecord record;
  std::vector<double> eval_losses;
  std::vector<long long> eval_steps;
};

namespace detail {

inline Averaging averaging_for(Algorithm a) {
  return a == Algorithm::agd ? Averaging::final_iterate : Averaging::average_iterate;
}

// Truncates the echoing schedule so the total inner-step budget is exactly
// `cap` (the last inner run may be shorter than K).
inline std::pair<std::vector<int>, long long> capped_schedule(const StepBudget& schedule,
                                                              long long cap) {
  std::vector<int> out;
  long long total = 0;
  if (schedule.is_fixed()) {
    int k = schedule.at(0);
    while (total < cap) {
      int step = static_cast<int>(std::min<long long>(k, cap - total));
      out.push_back(step);
      total += step;
    }
  } else {
    for (int t = 0; t < schedule.size() && total < cap; ++t) {
      int step = static_cast<int>(std::min<long long>(schedule.at(t), cap - total));
      out.push_back(step);
      total += step;
    }
  }
  return {out, total};
}

}  // namespace detail

// One benchmark run: stream batches of size B from the dataset, run the
// echoed algorithm from w_0 = 0 until the stopping rule fires or the step
// budget is exhausted. Convergence is judged on the current iterate; the full
// training loss is evaluated at the first outer boundary at least eval_every
// inner steps after the previous evaluation, and once more at the budget end.
// A diverged run counts as unconverged at the full budget.
inline RunOutcome run_one(const ExperimentSpec& spec, const Batch& full_batch, double eta,
                          std::uint64_t seed) {
  require(spec.dataset != nullptr, "run_one: no dataset");
  require(spec.B >= 1, "run_one: B must be >= 1");
  require_positive(eta, "run_one: eta");

  auto [capped, effective_cap] = detail::capped_schedule(spec.schedule, spec.step_cap);
  EchoConfig cfg;
  cfg.batch_size = spec.B;
  cfg.num_batches = static_cast<int>(capped.size());
  cfg.schedule = StepBudget(capped);
  cfg.averaging = detail::averaging_for(spec.algorithm);
  cfg.seed = seed;

  BatchStream stream = make_stream(spec.dataset->examples, spec.B, seed);

  RunOutcome out;
  bool converged = false;
  long long steps_at_convergence = 0;
  long long outer_completed = 0;
  double last_eval = std::numeric_limits<double>::infinity();
  long long next_mark = spec.eval_every;

  EchoObserver observer = [&](int t, const Vec& w, double, long long steps) {
    ++outer_completed;
    bool last_outer = (t + 1 == cfg.num_batches);
    if (steps >= next_mark || last_outer) {
      double full = batch_loss(spec.model, w, full_batch);
      out.eval_losses.push_back(full);
      out.eval_steps.push_back(steps);
      last_eval = full;
      next_mark = steps + spec.eval_every;
      std::size_t begin = out.eval_losses.size() > static_cast<std::size_t>(spec.stopping.window)
                              ? out.eval_losses.size() - spec.stopping.window
                              : 0;
      double sum = 0.0;
      for (std::size_t i = begin; i < out.eval_losses.size(); ++i) sum += out.eval_losses[i];
      if (sum / static_cast<double>(out.eval_losses.size() - begin) < spec.stopping.threshold) {
        converged = true;
        steps_at_convergence = steps;
        return false;
      }
    }
    return true;
  };

  Vec w0 = Vec::Zero(spec.model.dim);
  try {
    switch (spec.algorithm) {
      case Algorithm::gd:
        run_echo([](auto&&... a) { return gd_run(a...); }, spec.model, w0, GdState{eta}, stream,
                 cfg, observer);
        break;
      case Algorithm::prox:
        run_echo([](auto&&... a) { return prox_run(a...); }, spec.model, w0,
                 ProxState{eta, spec.gamma, w0}, stream, cfg, observer);
        break;
      case Algorithm::agd:
        run_echo([](auto&&... a) { return agd_run(a...); }, spec.model, w0,
                 AgdState{eta, Vec::Zero(spec.model.dim), 1.0}, stream, cfg, observer);
        break;
    }
  } catch (const DivergenceError&) {
    converged = false;
    outer_completed = cfg.num_batches;
    last_eval = std::numeric_limits<double>::infinity();
  }

  auto& rec = out.record;
  rec.dataset = spec.dataset_name.empty() ? spec.dataset->name : spec.dataset_name;
  rec.algorithm = to_string(spec.algorithm);
  rec.B = spec.B;
  rec.K = spec.schedule.is_fixed() ? spec.schedule.at(0) : 0;  // 0 marks a variable schedule
  rec.eta = eta;
  rec.gamma = spec.algorithm == Algorithm::prox ? spec.gamma : 0.0;
  rec.seed = seed;
  rec.converged = converged;
  rec.steps_to_converge = converged ? steps_at_convergence : effective_cap;
  rec.samples_consumed = static_cast<long long>(spec.B) * outer_completed;
  rec.final_loss = last_eval;
  return out;
}

struct ExperimentResult {
  double tuned_eta = 0.0;
  bool used_grid = false;
  bool any_converged = false;
  std::vector<ConvergenceRecord> records;
};

struct TuneOptions {
  int tune_seed_count = 5;  // grid selection uses the first min(count, #seeds) seeds
};

using EtaOrGrid = std::variant<double, GridSpec>;

// Runs one (algorithm, B, K) cell. With a grid, the tuned eta is the
// candidate minimizing the total steps-to-converge over the tuning seeds
// (ties resolved toward the smaller eta); the full seed list is then rerun at
// the tuned eta for the reported records. A candidate whose partial total
// already exceeds the incumbent is abandoned, which cannot change the argmin.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const EtaOrGrid& eta_or_grid,
                                       const std::vector<std::uint64_t>& seeds,
                                       const TuneOptions& tune = {}) {
  require(!seeds.empty(), "run_experiment: no seeds");
  Batch full_batch = make_batch(spec.dataset->examples);

  ExperimentResult result;
  double eta;
  if (std::holds_alternative<double>(eta_or_grid)) {
    eta = std::get<double>(eta_or_grid);
  } else {
    result.used_grid = true;
    const auto candidates = std::get<GridSpec>(eta_or_grid).candidates();
    std::vector<std::uint64_t> tune_seeds(
        seeds.begin(),
        seeds.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                            seeds.size(), static_cast<std::size_t>(tune.tune_seed_count))));

    std::map<std::size_t, long long> completed;  // candidate -> full tuning total
    auto total_for = [&](std::size_t ci, long long prune_above) -> std::pair<long long, bool> {
      auto it = completed.find(ci);
      if (it != completed.end()) return {it->second, true};
      long long total = 0;
      for (auto s : tune_seeds) {
        total += run_one(spec, full_batch, candidates[ci], s).record.steps_to_converge;
        if (total > prune_above) return {total, false};
      }
      completed[ci] = total;
      return {total, true};
    };

    long long best_total = LLONG_MAX;
    std::size_t best_ci = 0;
    // coarse pre-pass seeds the incumbent so the full sweep prunes early
    for (std::size_t ci = 0; ci < candidates.size(); ci += 10) {
      auto [total, complete] = total_for(ci, best_total);
      if (complete && total < best_total) {
        best_total = total;
        best_ci = ci;
      }
    }
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      auto [total, complete] = total_for(ci, best_total);
      if (complete && (total < best_total || (total == best_total && ci < best_ci))) {
        best_total = total;
        best_ci = ci;
      }
    }
    eta = candidates[best_ci];
  }

  result.tuned_eta = eta;
  result.records.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    result.records[i] = run_one(spec, full_batch, eta, seeds[i]).record;
  });
  for (const auto& r : result.records) result.any_converged = result.any_converged || r.converged;
  return result;
}

struct SweepCell {
  int B = 0;
  int K = 0;
  double tuned_eta = 0.0;
  bool all_converged = false;
  double mean_steps = 0.0;
  double std_steps = 0.0;
  double mean_samples = 0.0;
  double std_samples = 0.0;
};

struct SweepResult {
  std::vector<ConvergenceRecord> records;
  std::vector<SweepCell> cells;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

// Full factorial over (B, K) with per-cell grid tuning. Records come out
// sorted so identical invocations emit byte-identical CSV.
inline SweepResult sweep(ExperimentSpec spec, const std::vector<int>& b_list,
                         const std::vector<int>& k_list, const GridSpec& grid,
                         const std::vector<std::uint64_t>& seeds, const TuneOptions& tune = {}) {
  require(!b_list.empty() && !k_list.empty(), "sweep: empty B or K list");
  SweepResult out;
  for (int b : b_list) {
    for (int k : k_list) {
      spec.B = b;
      spec.schedule = StepBudget(k);
      auto res = run_experiment(spec, grid, seeds, tune);
      SweepCell cell;
      cell.B = b;
      cell.K = k;
      cell.tuned_eta = res.tuned_eta;
      cell.all_converged = true;
      std::vector<double> steps, samples;
      for (const auto& r : res.records) {
        steps.push_back(static_cast<double>(r.steps_to_converge));
        samples.push_back(static_cast<double>(r.samples_consumed));
        cell.all_converged = cell.all_converged && r.converged;
        out.records.push_back(r);
      }
      std::tie(cell.mean_steps, cell.std_steps) = detail::mean_std(steps);
      std::tie(cell.mean_samples, cell.std_samples) = detail::mean_std(samples);
      out.cells.push_back(cell);
    }
  }
  std::sort(out.records.begin(), out.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dataset, a.algorithm, a.B, a.K, a.seed) <
           std::tie(b.dataset, b.algorithm, b.B, b.K, b.seed);
  });
  return out;
}

// Uniform subsample without replacement (partial Fisher-Yates, portable RNG).
inline Dataset subsample_uniform(const Dataset& ds, std::size_t m, std::uint64_t seed) {
  require(m >= 1, "subsample_uniform: m must be >= 1");
  if (m >= ds.examples.size()) return ds;
  std::vector<std::size_t> idx(ds.examples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(child_seed(seed, 2));
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  Dataset out;
  out.name = ds.name + "-sub" + std::to_string(m);
  out.n_features = ds.n_features;
  out.n_classes = ds.n_classes;
  out.examples.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.examples.push_back(ds.examples[idx[i]]);
  return out;
}

// Long-horizon full-batch GD estimate of the optimal training loss, used to
// recompute desk-scale thresholds as 1.01x the optimum.
inline double estimate_optimum_loss(const LossModel& model, const Dataset& ds, int iters) {
  Batch full = make_batch(ds.examples);
  Vec w0 = Vec::Zero(model.dim);
  auto r = gd_run(model, w0, GdState{1.0 / model.beta}, full, iters);
  return batch_loss(model, r.w_out, full);
}

namespace detail {

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace detail

// Renders one SVG panel per (dataset, algorithm, B): x = K (log scale),
// left axis = steps KT and samples BT at convergence with +-1 std bands,
// right axis = tuned eta. Unconverged cells get a cross marker.
inline std::vector<std::string> emit_plots(const std::vector<ConvergenceRecord>& records,
                                           const std::string& out_dir) {
  require(!records.empty(), "emit_plots: no records");
  std::filesystem::create_directories(out_dir);

  struct CellAgg {
    std::vector<double> steps, samples;
    double eta = 0.0;
    bool all_converged = true;
  };
  std::map<std::tuple<std::string, std::string, int>, std::map<int, CellAgg>> panels;
  for (const auto& r : records) {
    auto& cell = panels[{r.dataset, r.algorithm, r.B}][r.K];
    cell.steps.push_back(static_cast<double>(r.steps_to_converge));
    cell.samples.push_back(static_cast<double>(r.samples_consumed));
    cell.eta = r.eta;
    cell.all_converged = cell.all_converged && r.converged;
  }

  const double W = 640, H = 420, ml = 70, mr = 70, mt = 46, mb = 50;
  std::vector<std::string> paths;
  for (const auto& [key, cells] : panels) {
    const auto& [dataset, algorithm, B] = key;

    double kx_min = std::numeric_limits<double>::max(), kx_max = std::numeric_limits<double>::lowest();
    double y_min = std::numeric_limits<double>::max(), y_max = std::numeric_limits<double>::lowest();
    double e_min = y_min, e_max = y_max;
    for (const auto& [k, cell] : cells) {
      double kx = std::log10(std::max(1, k));
      kx_min = std::min(kx_min, kx);
      kx_max = std::max(kx_max, kx);
      auto [ms, ss] = detail::mean_std(cell.steps);
      auto [mp, sp] = detail::mean_std(cell.samples);
      for (double v : {std::max(1.0, ms - ss), ms + ss, std::max(1.0, mp - sp), mp + sp}) {
        y_min = std::min(y_min, std::log10(std::max(1.0, v)));
        y_max = std::max(y_max, std::log10(std::max(1.0, v)));
      }
      e_min = std::min(e_min, std::log10(cell.eta));
      e_max = std::max(e_max, std::log10(cell.eta));
    }
    if (kx_max - kx_min < 1e-9) { kx_min -= 0.5; kx_max += 0.5; }
    if (y_max - y_min < 1e-9) { y_min -= 0.5; y_max += 0.5; }
    if (e_max - e_min < 1e-9) { e_min -= 0.5; e_max += 0.5; }
    y_min -= 0.05 * (y_max - y_min); y_max += 0.05 * (y_max - y_min);

    auto px = [&](double lk) { return ml + (lk - kx_min) / (kx_max - kx_min) * (W - ml - mr); };
    auto py = [&](double lv) { return H - mb - (lv - y_min) / (y_max - y_min) * (H - mt - mb); };
    auto pe = [&](double le) { return H - mb - (le - e_min) / (e_max - e_min) * (H - mt - mb); };

    SvgCanvas canvas(W, H);
    canvas.line(ml, H - mb, W - mr, H - mb, "#333333");
    canvas.line(ml, mt, ml, H - mb, "#333333");
    canvas.line(W - mr, mt, W - mr, H - mb, "#808000");
    for (int p = static_cast<int>(std::ceil(y_min)); p <= static_cast<int>(std::floor(y_max)); ++p) {
      canvas.line(ml, py(p), W - mr, py(p), "#dddddd", 0.5);
      canvas.text(ml - 6, py(p) + 4, "1e" + std::to_string(p), 10, "#333333", "end");
    }
    for (const auto& [k, cell] : cells)
      canvas.text(px(std::log10(std::max(1, k))), H - mb + 16, std::to_string(k), 10, "#333333",
                  "middle");
    for (int p = static_cast<int>(std::ceil(e_min)); p <= static_cast<int>(std::floor(e_max)); ++p)
      canvas.text(W - mr + 6, pe(p) + 4, "1e" + std::to_string(p), 10, "#808000");

    struct Series {
      const char* color;
      bool is_steps;
    };
    for (auto [color, is_steps] : {Series{"#1f77b4", true}, Series{"#d62728", false}}) {
      std::vector<std::pair<double, double>> mid, band;
      std::vector<std::pair<double, double>> lower;
      for (const auto& [k, cell] : cells) {
        auto [m, s] = detail::mean_std(is_steps ? cell.steps : cell.samples);
        double x = px(std::log10(std::max(1, k)));
        mid.emplace_back(x, py(std::log10(std::max(1.0, m))));
        band.emplace_back(x, py(std::log10(std::max(1.0, m + s))));
        lower.emplace_back(x, py(std::log10(std::max(1.0, m - s))));
      }
      for (auto it = lower.rbegin(); it != lower.rend(); ++it) band.push_back(*it);
      canvas.polygon(band, color, 0.15);
      canvas.polyline(mid, color);
      std::size_t i = 0;
      for (const auto& [k, cell] : cells) {
        if (cell.all_converged)
          canvas.circle(mid[i].first, mid[i].second, 3, color);
        else
          canvas.cross(mid[i].first, mid[i].second, 4, color);
        ++i;
      }
    }
    {
      std::vector<std::pair<double, double>> pts;
      for (const auto& [k, cell] : cells)
        pts.emplace_back(px(std::log10(std::max(1, k))), pe(std::log10(cell.eta)));
      canvas.polyline(pts, "#808000");
      for (const auto& p : pts) canvas.circle(p.first, p.second, 2.5, "#808000");
    }

    canvas.text(ml, mt - 12, dataset + "  " + algorithm + "  B=" + std::to_string(B), 13);
    canvas.text(ml, mt + 2, "steps KT", 10, "#1f77b4");
    canvas.text(ml + 70, mt + 2, "samples BT", 10, "#d62728");
    canvas.text(ml + 150, mt + 2, "tuned eta (right)", 10, "#808000");
    canvas.text(W / 2, H - 14, "echoing factor K", 11, "#333333", "middle");

    std::string path = out_dir + "/sweep_" + detail::sanitize_filename(dataset) + "_" +
                       detail::sanitize_filename(algorithm) + "_B" + std::to_string(B) + ".svg";
    canvas.write(path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace echoopt
