#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace echoopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, Eigen::Index expected, Eigen::Index got)
      : Error(what + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(got)),
        expected(expected),
        got(got) {}
  Eigen::Index expected;
  Eigen::Index got;
};

// Non-finite iterate detected mid-run; `step` is the inner step that produced it.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& algo, int step)
      : Error(algo + ": non-finite iterate at inner step " + std::to_string(step)),
        step(step) {}
  int step;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, long line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line(line) {}
  long line;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

inline void require_positive(double x, const std::string& name) {
  if (!(x > 0.0)) throw InvalidArgument(name + " must be > 0, got " + std::to_string(x));
}

// Kahan compensated sum; keeps batch means exact to ~1 ulp per term.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
// Work is claimed via an atomic counter; callers must make fn(i) write only
// to slot i of pre-sized output so results are schedule-independent.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t workers = std::min<std::size_t>(hw == 0 ? 1 : hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace echoopt
