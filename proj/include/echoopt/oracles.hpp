#pragma once

#include <cmath>
#include <vector>

#include "echoopt/optim.hpp"

namespace echoopt {

// One potential-bounded-regret check: lhs is the function-value progress
// term, rhs the potential decrement, slack = rhs - lhs. Under the lemma's
// preconditions slack must be >= -1e-9 (relative).
struct RegretCertificate {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double v_init = 0.0;
  double v_out = 0.0;
  bool precondition_met = true;
};

inline constexpr double kAgdStabilityConstant = 8.0;

namespace detail {

inline bool leq_with_slop(double a, double b) { return a <= b * (1.0 + 1e-12) + 1e-15; }

}  // namespace detail

// GD potential V(w, s, w*) = ||w - w*||^2 / (2 eta K); valid for eta <= 1/beta.
inline RegretCertificate check_regret_gd(const LossModel& model, const Batch& batch,
                                         const Vec& w_init, double eta, int K, const Vec& w_star) {
  RegretCertificate cert;
  cert.precondition_met = detail::leq_with_slop(eta * model.beta, 1.0);
  auto run = gd_run(model, w_init, GdState{eta}, batch, K);
  cert.v_init = (w_init - w_star).squaredNorm() / (2.0 * eta * K);
  cert.v_out = (run.w_out - w_star).squaredNorm() / (2.0 * eta * K);
  cert.lhs = batch_loss(model, run.w_out, batch) - batch_loss(model, w_star, batch);
  cert.rhs = cert.v_init - cert.v_out;
  cert.slack = cert.rhs - cert.lhs;
  return cert;
}

// Prox potential V(w, {eta,gamma,pivot}, w*) = ||w - w*||^2/(2 eta K)
//   + (gamma/2) ||w* - pivot||^2; valid for eta <= 1/(beta + gamma).
// The outgoing potential uses the updated pivot (average of the first K
// iterates), matching the state the next outer step receives.
inline RegretCertificate check_regret_prox(const LossModel& model, const Batch& batch,
                                           const Vec& w_init, const ProxState& state, int K,
                                           const Vec& w_star) {
  RegretCertificate cert;
  cert.precondition_met = detail::leq_with_slop(state.eta * (model.beta + state.gamma), 1.0);
  auto run = prox_run(model, w_init, state, batch, K);
  auto potential = [&](const Vec& w, const Vec& pivot) {
    return (w - w_star).squaredNorm() / (2.0 * state.eta * K) +
           0.5 * state.gamma * (w_star - pivot).squaredNorm();
  };
  cert.v_init = potential(w_init, state.pivot);
  cert.v_out = potential(run.w_out, run.s_out.pivot);
  cert.lhs = batch_loss(model, run.w_out, batch) - batch_loss(model, w_star, batch);
  cert.rhs = cert.v_init - cert.v_out;
  cert.slack = cert.rhs - cert.lhs;
  return cert;
}

// AGD weighted regret:
//   (l_out^2 - l_out)(f(w_out) - f(w)) - (l_init^2 - l_init)(f(w_init) - f(w))
//     <= (1/2eta)(||w_init + l_init d_init - w||^2 - ||w_out + l_out d_out - w||^2)
inline RegretCertificate check_regret_agd(const LossModel& model, const Batch& batch,
                                          const Vec& w_init, const AgdState& state, int K,
                                          const Vec& w_star) {
  RegretCertificate cert;
  cert.precondition_met = detail::leq_with_slop(state.eta * model.beta, 1.0);
  auto run = agd_run(model, w_init, state, batch, K);
  double f_star = batch_loss(model, w_star, batch);
  double f_init = batch_loss(model, w_init, batch);
  double f_out = batch_loss(model, run.w_out, batch);
  double li = state.lambda;
  double lo = run.s_out.lambda;
  cert.lhs = (lo * lo - lo) * (f_out - f_star) - (li * li - li) * (f_init - f_star);
  cert.v_init = (w_init + li * state.d - w_star).squaredNorm() / (2.0 * state.eta);
  cert.v_out = (run.w_out + lo * run.s_out.d - w_star).squaredNorm() / (2.0 * state.eta);
  cert.rhs = cert.v_init - cert.v_out;
  cert.slack = cert.rhs - cert.lhs;
  return cert;
}

// Closed-form uniform-stability bounds.
inline double stability_bound_gd(double eta, int K, double rho, int B) {
  return 2.0 * eta * K * rho * rho / B;
}

inline double stability_bound_prox(double eta, double gamma, int K, double rho, int B) {
  if (gamma == 0.0) return stability_bound_gd(eta, K, rho, B);
  return (2.0 * rho * rho / (B * gamma)) * (1.0 - std::pow(1.0 - eta * gamma, K));
}

inline double stability_bound_agd(double eta, int K, double rho, int B) {
  return kAgdStabilityConstant * eta * rho * rho * K * K / B;
}

// Result of one paired swap-one-example run.
struct StabilityMeasurement {
  double param_divergence = 0.0;  // ||A(xi) - A(xi')|| at the output
  double loss_divergence = 0.0;   // sup over probes of |f(A(xi),p) - f(A(xi'),p)|
  double bound = 0.0;             // the matching closed-form epsilon
  std::vector<double> step_divergences;  // ||w_j^xi - w_j^xi'|| for j = 0..K
};

namespace detail {

template <typename InnerFn, typename State>
StabilityMeasurement paired_run(InnerFn inner, const LossModel& model, const Vec& w_init,
                                const Batch& batch, int swap_index, const Example& replacement,
                                const std::vector<Example>& probes, const State& state, int K) {
  require(swap_index >= 0 && swap_index < batch.size(), "measure_stability: swap index out of range");
  require(!probes.empty(), "measure_stability: empty probe set");
  Batch swapped = batch;
  swapped.items[static_cast<std::size_t>(swap_index)] = &replacement;

  RunOptions opts;
  opts.record_trajectory = true;
  auto run_a = inner(model, w_init, state, batch, K, opts);
  auto run_b = inner(model, w_init, state, swapped, K, opts);

  StabilityMeasurement m;
  m.param_divergence = (run_a.w_out - run_b.w_out).norm();
  for (std::size_t j = 0; j < run_a.trajectory.size(); ++j)
    m.step_divergences.push_back((run_a.trajectory[j] - run_b.trajectory[j]).norm());
  for (const auto& probe : probes) {
    double d = std::abs(eval_example(model, run_a.w_out, probe) -
                        eval_example(model, run_b.w_out, probe));
    m.loss_divergence = std::max(m.loss_divergence, d);
  }
  return m;
}

}  // namespace detail

inline StabilityMeasurement measure_stability(const LossModel& model, const Vec& w_init,
                                              const Batch& batch, int swap_index,
                                              const Example& replacement,
                                              const std::vector<Example>& probes,
                                              const GdState& state, int K) {
  auto m = detail::paired_run([](auto&&... a) { return gd_run(a...); }, model, w_init, batch,
                              swap_index, replacement, probes, state, K);
  m.bound = stability_bound_gd(state.eta, K, model.rho, batch.size());
  return m;
}

inline StabilityMeasurement measure_stability(const LossModel& model, const Vec& w_init,
                                              const Batch& batch, int swap_index,
                                              const Example& replacement,
                                              const std::vector<Example>& probes,
                                              const ProxState& state, int K) {
  auto m = detail::paired_run([](auto&&... a) { return prox_run(a...); }, model, w_init, batch,
                              swap_index, replacement, probes, state, K);
  m.bound = stability_bound_prox(state.eta, state.gamma, K, model.rho, batch.size());
  return m;
}

inline StabilityMeasurement measure_stability(const LossModel& model, const Vec& w_init,
                                              const Batch& batch, int swap_index,
                                              const Example& replacement,
                                              const std::vector<Example>& probes,
                                              const AgdState& state, int K) {
  if (model.kind != LossKind::quadratic)
    throw InvalidArgument("measure_stability: AGD stability is unsupported by Lemma 10 for "
                          "non-quadratic losses");
  auto m = detail::paired_run([](auto&&... a) { return agd_run(a...); }, model, w_init, batch,
                              swap_index, replacement, probes, state, K);
  m.bound = stability_bound_agd(state.eta, K, model.rho, batch.size());
  return m;
}

enum class TheoremBound { degd, depgd, deagd };

// Excess-risk upper bounds of the three echoed-method theorems. deagd carries
// an explicit constant 4 on each term in place of the paper's O(.).
inline double theorem_bound(TheoremBound which, double beta, double rho, double D, double B,
                            double T, double K) {
  require_positive(beta, "theorem_bound: beta");
  require_positive(rho, "theorem_bound: rho");
  require_positive(D, "theorem_bound: D");
  require_positive(B, "theorem_bound: B");
  require_positive(T, "theorem_bound: T");
  require_positive(K, "theorem_bound: K");
  switch (which) {
    case TheoremBound::degd:
      return beta * D * D / (2.0 * K * T) + 2.0 * rho * D / std::sqrt(B * T);
    case TheoremBound::depgd:
      return std::sqrt(1.0 + 1.0 / K) * 2.0 * rho * D / std::sqrt(B * T) +
             beta * D * D / (2.0 * K * T);
    case TheoremBound::deagd:
      return 4.0 * beta * D * D / (K * K * T * T) + 4.0 * rho * D / std::sqrt(B * T);
  }
  return 0.0;
}

// Chebyshev polynomial of the second kind, by the three-term recurrence.
inline double chebyshev_u(int n, double x) {
  require(n >= -1, "chebyshev_u: n must be >= -1");
  if (n == -1) return 0.0;
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 2.0 * x;
  for (int k = 2; k <= n; ++k) {
    double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// j-th power of the AGD transfer matrix H = [[2h, -h], [1, 0]], computed two
// ways: direct repeated multiplication and the Chebyshev closed form
//   H^{2n}   = [[r^{2n} U_{2n}(r),   -r^{2n+1} U_{2n-1}(r)],
//               [r^{2n-1} U_{2n-1}(r), -r^{2n} U_{2n-2}(r)]]
//   H^{2n+1} = [[r^{2n+1} U_{2n+1}(r), -r^{2n+2} U_{2n}(r)],
//               [r^{2n} U_{2n}(r),    -r^{2n+1} U_{2n-1}(r)]]
// with r = sqrt(h).
struct TransferPower {
  Eigen::Matrix2d direct;
  Eigen::Matrix2d closed_form;
  double spectral_norm = 0.0;  // 2-norm of the direct power
};

inline Eigen::Matrix2d transfer_matrix(double h) {
  Eigen::Matrix2d m;
  m << 2.0 * h, -h, 1.0, 0.0;
  return m;
}

inline double spectral_norm_2x2(const Eigen::Matrix2d& m) {
  Eigen::Matrix2d g = m.transpose() * m;
  double half_tr = 0.5 * g.trace();
  double det = g.determinant();
  double disc = std::max(0.0, half_tr * half_tr - det);
  return std::sqrt(half_tr + std::sqrt(disc));
}

inline TransferPower transfer_power(double h, int j) {
  require(h >= 0.0 && h <= 1.0, "transfer_power: h must lie in [0, 1]");
  require(j >= 1, "transfer_power: j must be >= 1");

  TransferPower out;
  Eigen::Matrix2d base = transfer_matrix(h);
  out.direct = base;
  for (int i = 1; i < j; ++i) out.direct = base * out.direct;

  double r = std::sqrt(h);
  auto rpow_u = [&](int p, int n) {
    // r^p * U_n(r); p >= 0 whenever this is called with n >= 0
    return std::pow(r, p) * chebyshev_u(n, r);
  };
  if (j % 2 == 0) {
    int n = j / 2;
    out.closed_form << rpow_u(2 * n, 2 * n), -rpow_u(2 * n + 1, 2 * n - 1),
        rpow_u(2 * n - 1, 2 * n - 1), -rpow_u(2 * n, 2 * n - 2);
  } else {
    int n = (j - 1) / 2;
    out.closed_form << rpow_u(2 * n + 1, 2 * n + 1), -rpow_u(2 * n + 2, 2 * n),
        rpow_u(2 * n, 2 * n), (n == 0 ? 0.0 : -rpow_u(2 * n + 1, 2 * n - 1));
  }
  out.spectral_norm = spectral_norm_2x2(out.direct);
  return out;
}

// Theorem-2 composition: with T per-batch certificates and a stability bound
// epsilon, the certified excess-risk bound is V(w_0, s_0, w*)/T + epsilon
// (the nonnegative final potential is dropped).
inline double compose_main_theorem(const std::vector<RegretCertificate>& certs, double epsilon,
                                   int T) {
  require(T >= 1, "compose_main_theorem: T must be >= 1");
  require(static_cast<int>(certs.size()) == T,
          "compose_main_theorem: certificate count does not match T");
  return certs.front().v_init / T + epsilon;
}

}  // namespace echoopt
