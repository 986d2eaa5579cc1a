#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "echoopt/losses.hpp"

namespace echoopt {

// Carried state of the three inner algorithms. Each K-step run maps
// (w_init, state, batch, K) -> (w_out, state'), and the echo engine threads
// the state through consecutive batches.

struct GdState {
  double eta = 0.0;
};

struct ProxState {
  double eta = 0.0;
  double gamma = 0.0;
  Vec pivot;
};

struct AgdState {
  double eta = 0.0;
  Vec d;
  double lambda = 1.0;
};

// Echoing factor: either a fixed K for every outer step or a per-step schedule.
class StepBudget {
 public:
  explicit StepBudget(int fixed_k) : fixed_(fixed_k) {
    require(fixed_k >= 1, "StepBudget: K must be >= 1");
  }
  explicit StepBudget(std::vector<int> schedule) : schedule_(std::move(schedule)) {
    require(!schedule_.empty(), "StepBudget: empty schedule");
    for (int k : schedule_) require(k >= 1, "StepBudget: every K_t must be >= 1");
  }

  bool is_fixed() const { return schedule_.empty(); }

  int at(int t) const {
    if (is_fixed()) return fixed_;
    require(t >= 0 && t < static_cast<int>(schedule_.size()), "StepBudget: step index out of schedule");
    return schedule_[static_cast<std::size_t>(t)];
  }

  int size() const { return is_fixed() ? 0 : static_cast<int>(schedule_.size()); }

 private:
  int fixed_ = 1;
  std::vector<int> schedule_;
};

struct RunOptions {
  bool record_trajectory = false;  // keep w_0..w_K (O(K n) memory)
};

template <typename State>
struct InnerResult {
  Vec w_out;
  State s_out;
  std::vector<Vec> trajectory;  // w_0..w_K when recorded, else empty
};

namespace detail {

inline void check_finite(const Vec& w, const char* algo, int step) {
  if (!w.allFinite()) throw DivergenceError(algo, step);
}

}  // namespace detail

// w_{j+1} = w_j - eta grad fbar(w_j); state returned unchanged.
inline InnerResult<GdState> gd_run(const LossModel& model, const Vec& w_init, const GdState& s,
                                   const Batch& batch, int K, const RunOptions& opts = {}) {
  require(K >= 1, "gd_run: K must be >= 1");
  require_positive(s.eta, "gd_run: eta");
  InnerResult<GdState> out;
  out.s_out = s;
  Vec w = w_init;
  if (opts.record_trajectory) out.trajectory.push_back(w);
  for (int j = 0; j < K; ++j) {
    Vec g = batch_grad(model, w, batch);
    w = w - s.eta * g;
    detail::check_finite(w, "gd_run", j + 1);
    if (opts.record_trajectory) out.trajectory.push_back(w);
  }
  out.w_out = std::move(w);
  return out;
}

// GD on fbar_prox(w) = fbar(w) + (gamma/2)||w - pivot||^2. The outgoing pivot
// is the average of the first K iterates w_0..w_{K-1}.
inline InnerResult<ProxState> prox_run(const LossModel& model, const Vec& w_init,
                                       const ProxState& s, const Batch& batch, int K,
                                       const RunOptions& opts = {}) {
  require(K >= 1, "prox_run: K must be >= 1");
  require_positive(s.eta, "prox_run: eta");
  require(s.gamma >= 0.0, "prox_run: gamma must be >= 0");
  if (s.pivot.size() != model.dim) throw DimensionError("prox pivot", model.dim, s.pivot.size());
  InnerResult<ProxState> out;
  out.s_out = s;
  Vec w = w_init;
  Vec pivot_sum = Vec::Zero(model.dim);
  if (opts.record_trajectory) out.trajectory.push_back(w);
  for (int j = 0; j < K; ++j) {
    pivot_sum += w;
    Vec g = batch_grad(model, w, batch);
    if (s.gamma != 0.0) g += s.gamma * (w - s.pivot);
    w = w - s.eta * g;
    detail::check_finite(w, "prox_run", j + 1);
    if (opts.record_trajectory) out.trajectory.push_back(w);
  }
  out.s_out.pivot = pivot_sum / K;
  out.w_out = std::move(w);
  return out;
}

// Positive root of lambda'^2 - lambda' = lambda^2.
inline double agd_next_lambda(double lambda) {
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * lambda * lambda));
}

// Nesterov updates with a persistent momentum state:
//   x_{j+1} = w_j + d_j
//   w_{j+1} = x_{j+1} - eta grad fbar(x_{j+1})
//   d_{j+1} = gamma_{j+1} (w_{j+1} - w_j),  gamma_{j+1} = (lambda_j - 1)/lambda_{j+1}
inline InnerResult<AgdState> agd_run(const LossModel& model, const Vec& w_init, const AgdState& s,
                                     const Batch& batch, int K, const RunOptions& opts = {}) {
  require(K >= 1, "agd_run: K must be >= 1");
  require_positive(s.eta, "agd_run: eta");
  require(s.lambda >= 1.0, "agd_run: lambda must be >= 1");
  if (s.d.size() != model.dim) throw DimensionError("agd momentum", model.dim, s.d.size());
  InnerResult<AgdState> out;
  out.s_out = s;
  Vec w = w_init;
  Vec d = s.d;
  double lambda = s.lambda;
  if (opts.record_trajectory) out.trajectory.push_back(w);
  for (int j = 0; j < K; ++j) {
    Vec x = w + d;
    Vec g = batch_grad(model, x, batch);
    Vec w_next = x - s.eta * g;
    double lambda_next = agd_next_lambda(lambda);
    double gamma = (lambda - 1.0) / lambda_next;
    d = gamma * (w_next - w);
    w = std::move(w_next);
    lambda = lambda_next;
    detail::check_finite(w, "agd_run", j + 1);
    if (opts.record_trajectory) out.trajectory.push_back(w);
  }
  out.s_out.d = std::move(d);
  out.s_out.lambda = lambda;
  out.w_out = std::move(w);
  return out;
}

// Step size for echoed GD balancing the regret term D^2/(2 eta K T) against
// the stability term 2 eta K rho^2 / B, capped at 1/beta.
inline double step_size_gd(double beta, double rho, double D, double B, double T, double K) {
  require_positive(beta, "step_size_gd: beta");
  require_positive(rho, "step_size_gd: rho");
  require_positive(D, "step_size_gd: D");
  require_positive(B, "step_size_gd: B");
  require_positive(T, "step_size_gd: T");
  require_positive(K, "step_size_gd: K");
  return std::min(1.0 / beta, (D / (2.0 * rho * K)) * std::sqrt(B / T));
}

// Prox parameter and step size for echoed prox-GD; independent of K.
inline std::pair<double, double> prox_params(double beta, double rho, double D, double B, double T) {
  require_positive(beta, "prox_params: beta");
  require_positive(rho, "prox_params: rho");
  require_positive(D, "prox_params: D");
  require_positive(B, "prox_params: B");
  require_positive(T, "prox_params: T");
  double gamma = (rho / D) * std::sqrt(T / B);
  double eta = 1.0 / (beta + gamma);
  return {gamma, eta};
}

// Step size for echoed AGD balancing D^2/(eta K^2 T^2) against
// eta rho^2 K^2 T / B, capped at 1/beta.
inline double step_size_agd(double beta, double rho, double D, double B, double T, double K) {
  require_positive(beta, "step_size_agd: beta");
  require_positive(rho, "step_size_agd: rho");
  require_positive(D, "step_size_agd: D");
  require_positive(B, "step_size_agd: B");
  require_positive(T, "step_size_agd: T");
  require_positive(K, "step_size_agd: K");
  return std::min(1.0 / beta, (D * std::sqrt(B)) / (rho * K * K * std::pow(T, 1.5)));
}

}  // namespace echoopt
