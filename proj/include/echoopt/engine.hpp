#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "echoopt/optim.hpp"
#include "echoopt/rng.hpp"

namespace echoopt {

enum class Averaging { average_iterate, final_iterate };

inline const char* to_string(Averaging a) {
  return a == Averaging::average_iterate ? "average-iterate" : "final-iterate";
}

// Description of one echoed run: batch size B, T fresh batches, echoing
// factor K (or schedule K_t), output mode and RNG seed.
struct EchoConfig {
  int batch_size = 1;
  int num_batches = 1;  // T
  StepBudget schedule{1};
  Averaging averaging = Averaging::average_iterate;
  std::uint64_t seed = 0;
  bool record_outer = false;  // keep w_0..w_T

  void validate() const {
    require(batch_size >= 1, "EchoConfig: B must be >= 1");
    require(num_batches >= 1, "EchoConfig: T must be >= 1");
  }
};

// Effective echoing factor of a loader that delivers a batch every
// `loader_period` while one optimizer step takes `step_time`.
inline int effective_k(double loader_period, double step_time) {
  require_positive(loader_period, "effective_k: loader_period");
  require_positive(step_time, "effective_k: step_time");
  int k = static_cast<int>(std::floor(loader_period / step_time));
  return k < 1 ? 1 : k;
}

// Deterministic i.i.d.-with-replacement batch source. Batch t is drawn from
// child_seed(seed, t), so any suffix of the stream can be replayed from a
// checkpoint without generating the prefix.
//
// The Batch returned by batch_at stays valid until the next batch_at call
// (generator mode refills an internal buffer; dataset mode points at the
// dataset itself).
class BatchStream {
 public:
  using Generator = std::function<Example(Rng&)>;

  static BatchStream from_dataset(const std::vector<Example>& examples, int B,
                                  std::uint64_t seed) {
    require(B >= 1, "BatchStream: B must be >= 1");
    require(!examples.empty(), "BatchStream: empty dataset");
    BatchStream s;
    s.examples_ = &examples;
    s.batch_size_ = B;
    s.seed_ = seed;
    return s;
  }

  static BatchStream from_generator(Generator gen, int B, std::uint64_t seed) {
    require(B >= 1, "BatchStream: B must be >= 1");
    require(static_cast<bool>(gen), "BatchStream: null generator");
    BatchStream s;
    s.gen_ = std::move(gen);
    s.batch_size_ = B;
    s.seed_ = seed;
    return s;
  }

  int batch_size() const { return batch_size_; }
  std::uint64_t seed() const { return seed_; }

  // Optional cap on the number of batches the stream can supply.
  void set_limit(int max_batches) { limit_ = max_batches; }

  // Optional laggard-pipeline model: loader period vs optimizer step time.
  void set_lag_model(double loader_period, double step_time) {
    lag_ = std::make_pair(loader_period, step_time);
  }
  std::optional<int> derived_k() const {
    if (!lag_) return std::nullopt;
    return effective_k(lag_->first, lag_->second);
  }

  Batch batch_at(int t) {
    require(t >= 0, "BatchStream: negative batch index");
    if (limit_ && t >= *limit_)
      throw Error("BatchStream: exhausted after " + std::to_string(*limit_) + " batches");
    Rng rng(child_seed(seed_, static_cast<std::uint64_t>(t)));
    Batch b;
    b.items.reserve(static_cast<std::size_t>(batch_size_));
    if (examples_) {
      for (int i = 0; i < batch_size_; ++i) {
        std::uint64_t j = rng.next_below(examples_->size());
        b.items.push_back(&(*examples_)[j]);
      }
    } else {
      scratch_.clear();
      scratch_.reserve(static_cast<std::size_t>(batch_size_));
      for (int i = 0; i < batch_size_; ++i) scratch_.push_back(gen_(rng));
      for (const auto& ex : scratch_) b.items.push_back(&ex);
    }
    return b;
  }

 private:
  BatchStream() = default;

  const std::vector<Example>* examples_ = nullptr;
  Generator gen_;
  std::vector<Example> scratch_;
  int batch_size_ = 1;
  std::uint64_t seed_ = 0;
  std::optional<int> limit_;
  std::optional<std::pair<double, double>> lag_;
};

inline BatchStream make_stream(const std::vector<Example>& examples, int B, std::uint64_t seed) {
  return BatchStream::from_dataset(examples, B, seed);
}

template <typename State>
struct EchoRunResult {
  Vec w_out;
  State s_final;
  std::vector<Vec> outer_iterates;   // w_0..w_T when recorded
  long long steps_taken = 0;         // sum of K_t
  long long samples_consumed = 0;    // B * batches consumed
  std::vector<double> batch_losses;  // fbar_t(w_{t+1}) per outer step
  int outer_steps_completed = 0;
};

// Called after each outer step; return false to stop the run early.
using EchoObserver =
    std::function<bool(int t, const Vec& w_next, double post_batch_loss, long long steps_taken)>;

// The data-echoing meta-loop. For t = 0..T-1: pull batch t, run `inner` for
// K_t steps from (w_t, s_t), thread the state. Output is the average of
// w_0..w_{T-1} (average-iterate mode) or w_T (final-iterate mode).
template <typename InnerFn, typename State>
EchoRunResult<State> run_echo(InnerFn&& inner, const LossModel& model, const Vec& w0,
                              const State& s0, BatchStream& stream, const EchoConfig& cfg,
                              const EchoObserver& observer = {}) {
  cfg.validate();
  if (w0.size() != model.dim) throw DimensionError("run_echo w0", model.dim, w0.size());
  require(stream.batch_size() == cfg.batch_size,
          "run_echo: stream batch size does not match config");

  EchoRunResult<State> out;
  Vec w = w0;
  State s = s0;
  Vec avg_sum = Vec::Zero(model.dim);
  if (cfg.record_outer) out.outer_iterates.push_back(w);

  int t = 0;
  for (; t < cfg.num_batches; ++t) {
    Batch batch = stream.batch_at(t);
    int k_t = cfg.schedule.at(t);
    if (cfg.averaging == Averaging::average_iterate) avg_sum += w;
    auto inner_out = inner(model, w, s, batch, k_t, RunOptions{});
    w = std::move(inner_out.w_out);
    s = std::move(inner_out.s_out);
    out.steps_taken += k_t;
    out.samples_consumed += cfg.batch_size;
    double post_loss = batch_loss(model, w, batch);
    out.batch_losses.push_back(post_loss);
    if (cfg.record_outer) out.outer_iterates.push_back(w);
    ++out.outer_steps_completed;
    if (observer && !observer(t, w, post_loss, out.steps_taken)) {
      ++t;
      break;
    }
  }

  if (cfg.averaging == Averaging::average_iterate) {
    out.w_out = avg_sum / out.outer_steps_completed;
  } else {
    out.w_out = w;
  }
  out.s_final = std::move(s);
  return out;
}

}  // namespace echoopt
