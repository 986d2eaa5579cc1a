#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "echoopt/common.hpp"

namespace echoopt {

// Sparse feature vector; indices strictly increasing, no duplicates.
struct SparseVec {
  std::vector<std::int32_t> idx;
  std::vector<double> val;

  std::size_t nnz() const { return idx.size(); }

  void push_back(std::int32_t i, double v) {
    idx.push_back(i);
    val.push_back(v);
  }

  double dot(const Vec& w, Eigen::Index offset = 0) const {
    double s = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += w[offset + idx[k]] * val[k];
    return s;
  }

  // g[offset + i] += a * x[i]
  void axpy(double a, Vec& g, Eigen::Index offset = 0) const {
    for (std::size_t k = 0; k < idx.size(); ++k) g[offset + idx[k]] += a * val[k];
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return s;
  }

  bool indices_strictly_increasing() const {
    for (std::size_t k = 1; k < idx.size(); ++k)
      if (idx[k] <= idx[k - 1]) return false;
    return true;
  }

  bool operator==(const SparseVec&) const = default;
};

struct LogisticExample {
  SparseVec x;
  int label = 0;  // binary: +1/-1; multiclass: 0..C-1

  bool operator==(const LogisticExample&) const = default;
};

// f(w, xi) = 1/2 w'Aw - b'w. A is shared across examples of one problem.
struct QuadraticExample {
  std::shared_ptr<const Mat> a;
  Vec b;
};

using Example = std::variant<LogisticExample, QuadraticExample>;

inline bool is_logistic(const Example& ex) { return std::holds_alternative<LogisticExample>(ex); }
inline bool is_quadratic(const Example& ex) { return std::holds_alternative<QuadraticExample>(ex); }
inline const LogisticExample& as_logistic(const Example& ex) { return std::get<LogisticExample>(ex); }
inline const QuadraticExample& as_quadratic(const Example& ex) { return std::get<QuadraticExample>(ex); }

enum class LossKind { quadratic, binary_logistic, multiclass_logistic };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::quadratic: return "quadratic";
    case LossKind::binary_logistic: return "binary-logistic";
    case LossKind::multiclass_logistic: return "multiclass-logistic";
  }
  return "?";
}

// A convex per-example loss with its declared smoothness/Lipschitz constants.
// dim is the full parameter count (multiclass: n_classes * n_features,
// class-major layout).
struct LossModel {
  LossKind kind = LossKind::quadratic;
  Eigen::Index dim = 0;
  double beta = 0.0;
  double rho = 0.0;
  Eigen::Index n_features = 0;  // logistic only
  int n_classes = 0;            // multiclass only

  void validate() const {
    require_positive(beta, "LossModel.beta");
    require_positive(rho, "LossModel.rho");
    require(dim >= 1, "LossModel.dim must be >= 1");
    if (kind == LossKind::multiclass_logistic) {
      require(n_classes >= 2, "multiclass model needs n_classes >= 2");
      require(dim == n_features * n_classes, "multiclass dim must equal n_classes * n_features");
    }
    if (kind == LossKind::binary_logistic) {
      require(dim == n_features, "binary-logistic dim must equal n_features");
    }
  }
};

inline LossModel make_quadratic_model(Eigen::Index n, double beta, double rho) {
  LossModel m;
  m.kind = LossKind::quadratic;
  m.dim = n;
  m.beta = beta;
  m.rho = rho;
  return m;
}

inline LossModel make_binary_logistic_model(Eigen::Index n_features, double beta, double rho) {
  LossModel m;
  m.kind = LossKind::binary_logistic;
  m.dim = n_features;
  m.n_features = n_features;
  m.beta = beta;
  m.rho = rho;
  return m;
}

inline LossModel make_multiclass_model(Eigen::Index n_features, int n_classes, double beta,
                                       double rho) {
  LossModel m;
  m.kind = LossKind::multiclass_logistic;
  m.n_features = n_features;
  m.n_classes = n_classes;
  m.dim = n_features * n_classes;
  m.beta = beta;
  m.rho = rho;
  return m;
}

// log(1 + exp(t)) without overflow.
inline double log1pexp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

namespace detail {

inline void check_dim(const LossModel& m, const Vec& w) {
  if (w.size() != m.dim) throw DimensionError("parameter vector", m.dim, w.size());
}

inline void check_example(const LossModel& m, const Example& ex) {
  switch (m.kind) {
    case LossKind::quadratic: {
      if (!is_quadratic(ex)) throw InvalidArgument("quadratic model got a logistic example");
      const auto& q = as_quadratic(ex);
      if (!q.a || q.a->rows() != m.dim || q.a->cols() != m.dim)
        throw DimensionError("quadratic example matrix", m.dim, q.a ? q.a->rows() : 0);
      if (q.b.size() != m.dim) throw DimensionError("quadratic example vector", m.dim, q.b.size());
      break;
    }
    case LossKind::binary_logistic:
    case LossKind::multiclass_logistic: {
      if (!is_logistic(ex)) throw InvalidArgument("logistic model got a quadratic example");
      const auto& l = as_logistic(ex);
      if (!l.x.idx.empty() && l.x.idx.back() >= m.n_features)
        throw DimensionError("feature index", m.n_features, l.x.idx.back());
      if (m.kind == LossKind::binary_logistic)
        require(l.label == 1 || l.label == -1, "binary label must be +1 or -1");
      else
        require(l.label >= 0 && l.label < m.n_classes, "multiclass label out of range");
      break;
    }
  }
}

// Class scores z_c = w_c . x under the class-major layout.
inline void multiclass_logits(const LossModel& m, const Vec& w, const SparseVec& x, Vec& z) {
  z.resize(m.n_classes);
  for (int c = 0; c < m.n_classes; ++c) z[c] = x.dot(w, c * m.n_features);
}

inline double log_sum_exp(const Vec& z) {
  double mx = z.maxCoeff();
  double s = 0.0;
  for (Eigen::Index c = 0; c < z.size(); ++c) s += std::exp(z[c] - mx);
  return mx + std::log(s);
}

}  // namespace detail

inline double eval_example(const LossModel& model, const Vec& w, const Example& ex) {
  detail::check_dim(model, w);
  detail::check_example(model, ex);
  switch (model.kind) {
    case LossKind::quadratic: {
      const auto& q = as_quadratic(ex);
      return 0.5 * w.dot(*q.a * w) - q.b.dot(w);
    }
    case LossKind::binary_logistic: {
      const auto& l = as_logistic(ex);
      double margin = l.label * l.x.dot(w);
      return log1pexp(-margin);
    }
    case LossKind::multiclass_logistic: {
      const auto& l = as_logistic(ex);
      Vec z;
      detail::multiclass_logits(model, w, l.x, z);
      return detail::log_sum_exp(z) - z[l.label];
    }
  }
  return 0.0;
}

// Accumulates scale * grad f(w, ex) into g (g must be zeroed by the caller).
inline void grad_example_into(const LossModel& model, const Vec& w, const Example& ex,
                              double scale, Vec& g) {
  detail::check_dim(model, w);
  detail::check_example(model, ex);
  switch (model.kind) {
    case LossKind::quadratic: {
      const auto& q = as_quadratic(ex);
      g.noalias() += scale * (*q.a * w - q.b);
      break;
    }
    case LossKind::binary_logistic: {
      const auto& l = as_logistic(ex);
      double margin = l.label * l.x.dot(w);
      double coeff = scale * (-l.label * sigmoid(-margin));
      l.x.axpy(coeff, g);
      break;
    }
    case LossKind::multiclass_logistic: {
      const auto& l = as_logistic(ex);
      Vec z;
      detail::multiclass_logits(model, w, l.x, z);
      double lse = detail::log_sum_exp(z);
      for (int c = 0; c < model.n_classes; ++c) {
        double p = std::exp(z[c] - lse);
        double coeff = scale * (p - (c == l.label ? 1.0 : 0.0));
        l.x.axpy(coeff, g, c * model.n_features);
      }
      break;
    }
  }
}

inline Vec grad_example(const LossModel& model, const Vec& w, const Example& ex) {
  Vec g = Vec::Zero(model.dim);
  grad_example_into(model, w, ex, 1.0, g);
  return g;
}

// A batch of B examples; holds non-owning pointers, so the backing dataset
// (or example vector) must outlive the batch.
struct Batch {
  std::vector<const Example*> items;

  int size() const { return static_cast<int>(items.size()); }
  const Example& operator[](int i) const { return *items[i]; }
};

inline Batch make_batch(const std::vector<Example>& examples) {
  Batch b;
  b.items.reserve(examples.size());
  for (const auto& ex : examples) b.items.push_back(&ex);
  return b;
}

inline Batch make_batch(const std::vector<Example>& examples, const std::vector<std::int32_t>& idx) {
  Batch b;
  b.items.reserve(idx.size());
  for (auto i : idx) b.items.push_back(&examples.at(static_cast<std::size_t>(i)));
  return b;
}

// Empirical objective on the batch: the uniform average of per-example losses.
inline double batch_loss(const LossModel& model, const Vec& w, const Batch& batch) {
  require(batch.size() >= 1, "batch_loss: empty batch");
  KahanSum s;
  for (const Example* ex : batch.items) s.add(eval_example(model, w, *ex));
  return s.value() / batch.size();
}

inline Vec batch_grad(const LossModel& model, const Vec& w, const Batch& batch) {
  require(batch.size() >= 1, "batch_grad: empty batch");
  Vec g = Vec::Zero(model.dim);
  double inv = 1.0 / batch.size();
  for (const Example* ex : batch.items) grad_example_into(model, w, *ex, inv, g);
  return g;
}

inline double max_feature_norm(const std::vector<Example>& examples) {
  double best = 0.0;
  for (const auto& ex : examples) best = std::max(best, as_logistic(ex).x.squared_norm());
  return std::sqrt(best);
}

// Smoothness/Lipschitz bounds scanned from a dataset. Logistic kinds use the
// closed-form sigmoid/softmax curvature bounds; quadratics are handled by
// constants_for_quadratic (their Lipschitz constant needs a declared ball).
inline std::pair<double, double> constants_for(LossKind kind, const std::vector<Example>& examples) {
  require(!examples.empty(), "constants_for: empty dataset");
  switch (kind) {
    case LossKind::binary_logistic: {
      double r = max_feature_norm(examples);
      return {0.25 * r * r, r};
    }
    case LossKind::multiclass_logistic: {
      double r = max_feature_norm(examples);
      return {r * r, std::sqrt(2.0) * r};
    }
    case LossKind::quadratic:
      throw InvalidArgument("constants_for: quadratic needs constants_for_quadratic(center, radius)");
  }
  return {0.0, 0.0};
}

// beta = max spectral norm of A_xi; rho bounds max ||grad f|| over the ball
// ||w - center|| <= radius.
inline std::pair<double, double> constants_for_quadratic(const std::vector<Example>& examples,
                                                         const Vec& center, double radius) {
  require(!examples.empty(), "constants_for_quadratic: empty dataset");
  double beta = 0.0;
  double rho = 0.0;
  const Mat* last = nullptr;
  double last_norm = 0.0;
  for (const auto& ex : examples) {
    const auto& q = as_quadratic(ex);
    if (q.a.get() != last) {
      Eigen::SelfAdjointEigenSolver<Mat> es(*q.a, Eigen::EigenvaluesOnly);
      last_norm = es.eigenvalues().cwiseAbs().maxCoeff();
      last = q.a.get();
    }
    beta = std::max(beta, last_norm);
    rho = std::max(rho, (*q.a * center - q.b).norm() + last_norm * radius);
  }
  return {beta, rho};
}

}  // namespace echoopt
