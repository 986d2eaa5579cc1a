#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "echoopt/bench.hpp"
#include "echoopt/data_io.hpp"
#include "echoopt/oracles.hpp"

namespace echoopt {

// One oracle-suite check: pass/fail plus the worst normalized slack seen
// (negative slack beyond -1e-9 is a violation).
struct OracleReport {
  std::string name;
  bool pass = false;
  double worst = 0.0;
  std::string detail;
};

namespace verify_detail {

constexpr double kSlackTol = 1e-9;

inline double normalized_slack(const RegretCertificate& c) {
  double scale = std::max({1.0, std::abs(c.lhs), std::abs(c.rhs)});
  return c.slack / scale;
}

struct Instance {
  LossModel model;
  std::vector<Example> pool;  // batch examples + replacement + probe sources
  int batch_size = 1;
  Vec w_init;
  Vec w_star;
  double eta = 0.0;
  double gamma = 0.0;
  int k = 1;
  double close_form_center = 0.0;
};

// Random quadratic batch instance: shared-A quadratics with bounded noise,
// start and comparator inside the certified ball.
inline Instance quadratic_instance(Rng& rng, bool for_agd) {
  Instance inst;
  int n = 1 + static_cast<int>(rng.next_below(10));
  double beta = 0.5 + 3.5 * rng.next_unit();
  int b = 1 + static_cast<int>(rng.next_below(12));
  double noise = 0.02 * beta;
  auto prob = gen_quadratic(n, beta, noise, b + 1, rng.next_u64());
  inst.model = make_quadratic_model(n, prob.beta, prob.rho);
  inst.pool = prob.dataset.examples;
  inst.batch_size = b;
  inst.w_init = prob.optimum + 0.5 * rng.next_in_ball(n);
  inst.w_star = prob.optimum + (for_agd ? 0.5 : 1.0) * rng.next_in_ball(n);
  inst.k = 1 + static_cast<int>(rng.next_below(20));
  inst.eta = (0.05 + 0.95 * rng.next_unit()) / beta;
  return inst;
}

inline Instance logistic_instance(Rng& rng) {
  Instance inst;
  int raw = 1 + static_cast<int>(rng.next_below(5));
  int b = 1 + static_cast<int>(rng.next_below(12));
  Dataset ds = gen_logistic(raw, b + 1, rng.next_u64());
  bool single = rng.next_below(2) == 0;
  auto prep = prepare_problem(ds, single);
  inst.model = prep.model;
  inst.pool = prep.data.examples;
  inst.batch_size = b;
  inst.w_init = 0.5 * rng.next_in_ball(inst.model.dim);
  inst.w_star = rng.next_in_ball(inst.model.dim);
  inst.k = 1 + static_cast<int>(rng.next_below(20));
  inst.eta = (0.05 + 0.95 * rng.next_unit()) / inst.model.beta;
  return inst;
}

inline Batch batch_of(const Instance& inst) {
  Batch b;
  for (int i = 0; i < inst.batch_size; ++i) b.items.push_back(&inst.pool[static_cast<std::size_t>(i)]);
  return b;
}

// Probe set for the stability sup: every pool example plus synthetic extremes
// at the rho-achieving feature norm (logistic) or fresh population draws
// (quadratic).
inline std::vector<Example> probes_for(const Instance& inst, Rng& rng, int extremes) {
  std::vector<Example> probes = inst.pool;
  if (inst.model.kind == LossKind::quadratic) return probes;
  double rmax = max_feature_norm(inst.pool);
  Eigen::Index raw = inst.model.n_features - 1;
  for (int i = 0; i < extremes; ++i) {
    Vec dir = rng.next_unit_vector(inst.model.n_features);
    LogisticExample ex;
    for (Eigen::Index k = 0; k < raw + 1; ++k) {
      double v = rmax * dir[k];
      if (v != 0.0) ex.x.push_back(static_cast<std::int32_t>(k), v);
    }
    if (inst.model.kind == LossKind::binary_logistic)
      ex.label = rng.next_below(2) == 0 ? 1 : -1;
    else
      ex.label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(inst.model.n_classes)));
    probes.emplace_back(std::move(ex));
  }
  return probes;
}

}  // namespace verify_detail

// Lemma 3 / 6 / 9 sweeps: every certificate must have slack >= -1e-9 relative
// and nonnegative potentials at both ends.
inline OracleReport verify_regret_suite(Algorithm which, int instances, std::uint64_t seed) {
  using namespace verify_detail;
  OracleReport rep;
  rep.name = std::string("regret-") + to_string(which);
  Rng rng(child_seed(seed, static_cast<std::uint64_t>(which) + 11));
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < instances; ++i) {
    bool quad = which == Algorithm::agd || rng.next_below(2) == 0;
    Instance inst = quad ? quadratic_instance(rng, which == Algorithm::agd) : logistic_instance(rng);
    Batch batch = batch_of(inst);
    RegretCertificate cert;
    switch (which) {
      case Algorithm::gd:
        cert = check_regret_gd(inst.model, batch, inst.w_init, inst.eta, inst.k, inst.w_star);
        break;
      case Algorithm::prox: {
        double gammas[] = {0.1, 1.0, 10.0};
        double gamma = gammas[rng.next_below(3)];
        double eta = (0.05 + 0.95 * rng.next_unit()) / (inst.model.beta + gamma);
        Vec pivot = inst.w_star + rng.next_in_ball(inst.model.dim);
        cert = check_regret_prox(inst.model, batch, inst.w_init, ProxState{eta, gamma, pivot},
                                 inst.k, inst.w_star);
        break;
      }
      case Algorithm::agd: {
        double lambda0 = 1.0 + 9.0 * rng.next_unit();
        Vec d0 = 0.3 * rng.next_in_ball(inst.model.dim);
        cert = check_regret_agd(inst.model, batch, inst.w_init, AgdState{inst.eta, d0, lambda0},
                                inst.k, inst.w_star);
        break;
      }
    }
    if (!cert.precondition_met) {
      rep.detail = "instance " + std::to_string(i) + ": precondition unexpectedly violated";
      return rep;
    }
    if (cert.v_init < 0.0 || cert.v_out < 0.0) {
      rep.detail = "instance " + std::to_string(i) + ": negative potential";
      return rep;
    }
    worst = std::min(worst, normalized_slack(cert));
  }
  rep.worst = worst;
  rep.pass = worst >= -kSlackTol;
  rep.detail = "worst normalized slack " + std::to_string(worst) + " over " +
               std::to_string(instances) + " instances";
  return rep;
}

// Lemma 4 / 7 / 10 sweeps: paired swap-one-example runs. Checks the
// closed-form bound on the loss divergence, the Lipschitz reduction, and the
// per-step parameter-divergence recursions from the stability proofs.
inline OracleReport verify_stability_suite(Algorithm which, int instances, std::uint64_t seed) {
  using namespace verify_detail;
  OracleReport rep;
  rep.name = std::string("stability-") + to_string(which);
  Rng rng(child_seed(seed, static_cast<std::uint64_t>(which) + 31));
  double worst = std::numeric_limits<double>::infinity();  // min of bound - measured
  for (int i = 0; i < instances; ++i) {
    Instance inst = which == Algorithm::agd ? quadratic_instance(rng, true) : logistic_instance(rng);
    Batch batch = batch_of(inst);
    int swap = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(inst.batch_size)));
    const Example& replacement = inst.pool[static_cast<std::size_t>(inst.batch_size)];
    auto probes = probes_for(inst, rng, 20);

    StabilityMeasurement m;
    double contraction = 1.0;
    switch (which) {
      case Algorithm::gd:
        m = measure_stability(inst.model, inst.w_init, batch, swap, replacement, probes,
                              GdState{inst.eta}, inst.k);
        break;
      case Algorithm::prox: {
        double gammas[] = {0.1, 1.0, 10.0};
        inst.gamma = gammas[rng.next_below(3)];
        inst.eta = (0.05 + 0.95 * rng.next_unit()) / (inst.model.beta + inst.gamma);
        Vec pivot = inst.w_init + 0.3 * rng.next_in_ball(inst.model.dim);
        m = measure_stability(inst.model, inst.w_init, batch, swap, replacement, probes,
                              ProxState{inst.eta, inst.gamma, pivot}, inst.k);
        contraction = 1.0 - inst.eta * inst.gamma;
        break;
      }
      case Algorithm::agd: {
        double lambda0 = 1.0 + 9.0 * rng.next_unit();
        Vec d0 = 0.1 * rng.next_in_ball(inst.model.dim);
        m = measure_stability(inst.model, inst.w_init, batch, swap, replacement, probes,
                              AgdState{inst.eta, d0, lambda0}, inst.k);
        break;
      }
    }

    double rho = inst.model.rho;
    if (m.loss_divergence > rho * m.param_divergence + 1e-10) {
      rep.detail = "instance " + std::to_string(i) + ": Lipschitz reduction violated";
      return rep;
    }
    if (which != Algorithm::agd) {
      double per_step = 2.0 * inst.eta * rho / inst.batch_size;
      for (std::size_t j = 0; j + 1 < m.step_divergences.size(); ++j) {
        if (m.step_divergences[j + 1] >
            contraction * m.step_divergences[j] + per_step + 1e-10) {
          rep.detail = "instance " + std::to_string(i) + ": step recursion violated at inner step " +
                       std::to_string(j + 1);
          return rep;
        }
      }
      if (m.param_divergence > m.bound / rho + 1e-10) {
        rep.detail = "instance " + std::to_string(i) + ": parameter divergence exceeds bound/rho";
        return rep;
      }
    }
    worst = std::min(worst, m.bound - m.loss_divergence);
  }
  rep.worst = worst;
  rep.pass = worst >= -1e-10;
  rep.detail = "min (bound - measured divergence) " + std::to_string(worst) + " over " +
               std::to_string(instances) + " paired runs";
  return rep;
}

// Appendix B: Chebyshev closed form vs direct matrix powers, and the
// ||H^j|| <= 2(j+1) norm claim, over h in {0, 0.01, ..., 1}, j <= j_max.
inline OracleReport verify_chebyshev(int j_max = 40) {
  OracleReport rep;
  rep.name = "chebyshev-transfer";
  double worst_entry = 0.0;
  double worst_norm_margin = std::numeric_limits<double>::infinity();
  for (int hi = 0; hi <= 100; ++hi) {
    double h = hi / 100.0;
    for (int j = 1; j <= j_max; ++j) {
      auto tp = transfer_power(h, j);
      double diff = (tp.direct - tp.closed_form).cwiseAbs().maxCoeff();
      worst_entry = std::max(worst_entry, diff);
      worst_norm_margin = std::min(worst_norm_margin, 2.0 * (j + 1) - tp.spectral_norm);
    }
  }
  rep.worst = -worst_entry;
  rep.pass = worst_entry <= 1e-9 && worst_norm_margin >= -1e-9;
  rep.detail = "max |direct - closed| " + std::to_string(worst_entry) + ", min norm margin " +
               std::to_string(worst_norm_margin);
  return rep;
}

// Theorem 2 composition on a synthetic quadratic population: Monte-Carlo
// excess risk must stay below V_0/T + epsilon within 3 standard errors, and
// per-batch certificates must chain (v_out of step t = v_init of step t+1).
inline OracleReport verify_compose(int mc_seeds, std::uint64_t seed) {
  OracleReport rep;
  rep.name = "compose-theorem2";
  const int n = 4, B = 20, T = 25, K = 5;
  auto prob = gen_quadratic(n, 1.0, 0.5, 2, seed);
  double eta = step_size_gd(prob.beta, prob.rho, prob.D, B, T, K);

  // certificate chain from one run
  {
    Vec w = Vec::Zero(n);
    BatchStream stream = prob.stream(B, child_seed(seed, 100));
    std::vector<RegretCertificate> certs;
    for (int t = 0; t < T; ++t) {
      Batch batch = stream.batch_at(t);
      certs.push_back(check_regret_gd(prob.model(), batch, w, eta, K, prob.optimum));
      w = gd_run(prob.model(), w, GdState{eta}, batch, K).w_out;
    }
    for (int t = 0; t + 1 < T; ++t) {
      if (certs[static_cast<std::size_t>(t)].v_out != certs[static_cast<std::size_t>(t) + 1].v_init) {
        rep.detail = "certificate chain broken at t=" + std::to_string(t);
        return rep;
      }
    }
    double eps = stability_bound_gd(eta, K, prob.rho, B);
    double bound = compose_main_theorem(certs, eps, T);

    // Monte-Carlo excess risk
    std::vector<double> excess(static_cast<std::size_t>(mc_seeds));
    parallel_for(excess.size(), [&](std::size_t i) {
      EchoConfig cfg;
      cfg.batch_size = B;
      cfg.num_batches = T;
      cfg.schedule = StepBudget(K);
      cfg.averaging = Averaging::average_iterate;
      cfg.seed = child_seed(seed, 200 + i);
      BatchStream s = prob.stream(B, cfg.seed);
      auto r = run_echo([](auto&&... a) { return gd_run(a...); }, prob.model(), Vec::Zero(n),
                        GdState{eta}, s, cfg);
      excess[i] = prob.excess_risk(r.w_out);
    });
    auto [mean, sd] = detail::mean_std(excess);
    double se = sd / std::sqrt(static_cast<double>(excess.size()));
    rep.worst = bound + 3.0 * se - mean;
    rep.pass = mean <= bound + 3.0 * se;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "excess %.6f (se %.6f) vs composed bound %.6f", mean, se, bound);
    rep.detail = buf;
  }
  return rep;
}

inline std::vector<OracleReport> verify_all(int instances = 500, int mc_seeds = 50,
                                            std::uint64_t seed = 20200616) {
  std::vector<OracleReport> out;
  for (auto a : {Algorithm::gd, Algorithm::prox, Algorithm::agd})
    out.push_back(verify_regret_suite(a, instances, seed));
  for (auto a : {Algorithm::gd, Algorithm::prox, Algorithm::agd})
    out.push_back(verify_stability_suite(a, instances, seed));
  out.push_back(verify_chebyshev());
  out.push_back(verify_compose(mc_seeds, seed));
  return out;
}

inline bool print_verify_report(const std::vector<OracleReport>& reports, std::ostream& out) {
  bool all = true;
  for (const auto& r : reports) {
    out << (r.pass ? "PASS" : "FAIL") << "  " << r.name << ": " << r.detail << "\n";
    all = all && r.pass;
  }
  return all;
}

}  // namespace echoopt
