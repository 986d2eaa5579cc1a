#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "echoopt/engine.hpp"
#include "echoopt/losses.hpp"

namespace echoopt {

struct Dataset {
  std::string name;
  Eigen::Index n_features = 0;  // includes the appended bias slot for logistic data
  int n_classes = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
};

namespace detail {

inline double parse_double(const char*& p, const std::string& path, long line) {
  char* end = nullptr;
  double v = std::strtod(p, &end);
  if (end == p) throw ParseError(path, line, "expected a number");
  p = end;
  return v;
}

inline long parse_long(const char*& p, const std::string& path, long line) {
  char* end = nullptr;
  long v = std::strtol(p, &end, 10);
  if (end == p) throw ParseError(path, line, "expected an integer");
  p = end;
  return v;
}

inline void skip_ws(const char*& p) {
  while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
}

}  // namespace detail

// LIBSVM sparse text format: "label idx:val idx:val ..." with 1-based,
// strictly increasing indices. Labels {1,2} map to {+1,-1}; +1/-1 are also
// accepted verbatim. A constant-1 bias feature is appended at the last slot.
// expected_dim, when given, is the raw feature dimension (without bias).
inline Dataset load_libsvm(std::istream& in, const std::string& path,
                           std::optional<Eigen::Index> expected_dim = std::nullopt) {
  Dataset ds;
  ds.name = path;
  ds.n_classes = 2;
  Eigen::Index max_index = 0;  // 1-based max raw index seen
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const char* p = line.c_str();
    detail::skip_ws(p);
    if (*p == '\0') continue;

    LogisticExample ex;
    double raw_label = detail::parse_double(p, path, line_no);
    if (raw_label == 1.0) ex.label = 1;
    else if (raw_label == 2.0 || raw_label == -1.0) ex.label = -1;
    else throw ParseError(path, line_no, "unsupported binary label " + std::to_string(raw_label));

    long prev_index = 0;
    for (;;) {
      detail::skip_ws(p);
      if (*p == '\0') break;
      long index = detail::parse_long(p, path, line_no);
      if (*p != ':') throw ParseError(path, line_no, "expected ':' after feature index");
      ++p;
      double value = detail::parse_double(p, path, line_no);
      if (index < 1) throw ParseError(path, line_no, "feature index must be >= 1");
      if (index <= prev_index)
        throw ParseError(path, line_no, "feature indices must be strictly increasing");
      prev_index = index;
      ex.x.push_back(static_cast<std::int32_t>(index - 1), value);
      max_index = std::max<Eigen::Index>(max_index, index);
    }
    ds.examples.emplace_back(std::move(ex));
  }
  if (ds.examples.empty()) throw ParseError(path, line_no, "no examples in file");

  Eigen::Index raw_dim = expected_dim.value_or(max_index);
  if (expected_dim && max_index > *expected_dim)
    throw ParseError(path, 0,
                     "feature index " + std::to_string(max_index) + " exceeds expected dimension " +
                         std::to_string(*expected_dim));
  ds.n_features = raw_dim + 1;
  for (auto& ex : ds.examples)
    std::get<LogisticExample>(ex).x.push_back(static_cast<std::int32_t>(raw_dim), 1.0);
  return ds;
}

inline Dataset load_libsvm(const std::string& path,
                           std::optional<Eigen::Index> expected_dim = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_libsvm(in, path, expected_dim);
}

// Inverse of load_libsvm: strips the trailing bias slot, writes labels back
// as {+1 -> 1, -1 -> 2} and indices 1-based.
inline void save_libsvm(const Dataset& ds, std::ostream& out) {
  const Eigen::Index bias_index = ds.n_features - 1;
  char buf[64];
  for (const auto& exv : ds.examples) {
    const auto& ex = as_logistic(exv);
    out << (ex.label == 1 ? '1' : '2');
    for (std::size_t k = 0; k < ex.x.idx.size(); ++k) {
      if (ex.x.idx[k] == bias_index) continue;
      std::snprintf(buf, sizeof(buf), " %d:%.17g", ex.x.idx[k] + 1, ex.x.val[k]);
      out << buf;
    }
    out << '\n';
  }
}

inline void save_libsvm(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_libsvm(ds, out);
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

// IDX image/label pair (MNIST layout): big-endian magic and dims, ubyte
// payload. Pixels are scaled to [0,1]; zeros are kept implicit in the sparse
// vector; a constant-1 bias is appended.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw Error("cannot open " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw Error("cannot open " + labels_path);

  std::uint32_t magic = detail::read_be_u32(imgs, images_path);
  if (magic != kIdxImagesMagic)
    throw Error(images_path + ": bad magic " + std::to_string(magic) + " (expected " +
                std::to_string(kIdxImagesMagic) + ")");
  std::uint32_t count = detail::read_be_u32(imgs, images_path);
  std::uint32_t rows = detail::read_be_u32(imgs, images_path);
  std::uint32_t cols = detail::read_be_u32(imgs, images_path);

  std::uint32_t lab_magic = detail::read_be_u32(labs, labels_path);
  if (lab_magic != kIdxLabelsMagic)
    throw Error(labels_path + ": bad magic " + std::to_string(lab_magic) + " (expected " +
                std::to_string(kIdxLabelsMagic) + ")");
  std::uint32_t lab_count = detail::read_be_u32(labs, labels_path);
  if (lab_count != count)
    throw Error(images_path + ": image count " + std::to_string(count) +
                " != label count " + std::to_string(lab_count));

  const std::size_t pixels = std::size_t(rows) * cols;
  Dataset ds;
  ds.name = images_path;
  ds.n_features = static_cast<Eigen::Index>(pixels) + 1;
  ds.examples.reserve(count);

  std::vector<unsigned char> img(pixels);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(pixels)))
      throw Error(images_path + ": truncated payload at image " + std::to_string(i));
    int lab = labs.get();
    if (lab == EOF) throw Error(labels_path + ": truncated payload at label " + std::to_string(i));
    LogisticExample ex;
    ex.label = lab;
    max_label = std::max(max_label, lab);
    for (std::size_t p = 0; p < pixels; ++p) {
      if (img[p] != 0) ex.x.push_back(static_cast<std::int32_t>(p), img[p] / 255.0);
    }
    ex.x.push_back(static_cast<std::int32_t>(pixels), 1.0);
    ds.examples.emplace_back(std::move(ex));
  }
  ds.n_classes = max_label + 1;
  return ds;
}

// Synthetic quadratic population with a closed-form optimum:
//   f(w, xi) = 1/2 w'Aw - b_xi'w,  b_xi = b_bar + noise_scale * (unit-ball draw)
// A is fixed with spectrum in [beta/10, beta]; w* = A^{-1} b_bar has norm 1,
// so D = ||w_0 - w*|| = 1 for the w_0 = 0 convention. rho is certified over
// the ball ||w - w*|| <= 2D.
struct SyntheticProblem {
  Dataset dataset;
  Vec optimum;
  double optimum_value = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double D = 1.0;
  std::shared_ptr<const Mat> a;
  Vec b_bar;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;

  double population_value(const Vec& w) const { return 0.5 * w.dot(*a * w) - b_bar.dot(w); }
  double excess_risk(const Vec& w) const { return population_value(w) - optimum_value; }

  LossModel model() const { return make_quadratic_model(b_bar.size(), beta, rho); }

  Example sample(Rng& rng) const {
    QuadraticExample q;
    q.a = a;
    q.b = noise_scale > 0.0 ? Vec(b_bar + noise_scale * rng.next_in_ball(b_bar.size())) : b_bar;
    return q;
  }

  BatchStream::Generator generator() const {
    return [this](Rng& rng) { return sample(rng); };
  }

  BatchStream stream(int B, std::uint64_t stream_seed) const {
    return BatchStream::from_generator(generator(), B, stream_seed);
  }
};

inline SyntheticProblem gen_quadratic(Eigen::Index n, double beta, double noise_scale, int count,
                                      std::uint64_t seed) {
  require(n >= 1, "gen_quadratic: n must be >= 1");
  if (!(beta > 0.0)) throw InvalidArgument("gen_quadratic: degenerate spectrum (beta must be > 0)");
  require(noise_scale >= 0.0, "gen_quadratic: noise_scale must be >= 0");
  require(count >= 1, "gen_quadratic: count must be >= 1");

  Rng rng(child_seed(seed, 0));
  Mat a(n, n);
  if (n == 1) {
    a(0, 0) = beta;
  } else {
    Mat g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.next_gaussian();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Vec spectrum(n);
    for (Eigen::Index i = 0; i < n; ++i)
      spectrum[i] = beta / 10.0 + (beta - beta / 10.0) * static_cast<double>(i) /
                                      static_cast<double>(n - 1);
    a = q * spectrum.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose());  // exact symmetry
  }

  SyntheticProblem p;
  p.a = std::make_shared<const Mat>(std::move(a));
  p.optimum = rng.next_unit_vector(n);
  p.b_bar = *p.a * p.optimum;
  p.optimum_value = -0.5 * p.optimum.dot(p.b_bar);
  p.beta = beta;
  p.noise_scale = noise_scale;
  p.D = 1.0;
  p.rho = 2.0 * beta * p.D + noise_scale;
  p.seed = seed;

  p.dataset.name = "synquad";
  p.dataset.n_features = n;
  p.dataset.n_classes = 0;
  p.dataset.examples.reserve(static_cast<std::size_t>(count));
  Rng data_rng(child_seed(seed, 1));
  for (int i = 0; i < count; ++i) p.dataset.examples.push_back(p.sample(data_rng));
  return p;
}

// Planted-model binary logistic dataset (used by datagen and tests).
// Features are gaussian scaled to norm <= feature_norm, labels drawn from
// sigmoid(margin_scale * <x, w_planted>).
inline Dataset gen_logistic(Eigen::Index raw_dim, int count, std::uint64_t seed,
                            double feature_norm = 1.0, double margin_scale = 4.0) {
  require(raw_dim >= 1, "gen_logistic: raw_dim must be >= 1");
  require(count >= 1, "gen_logistic: count must be >= 1");
  Rng rng(child_seed(seed, 0));
  Vec planted = rng.next_unit_vector(raw_dim);
  Dataset ds;
  ds.name = "synlog";
  ds.n_classes = 2;
  ds.n_features = raw_dim + 1;
  ds.examples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec x = feature_norm * rng.next_in_ball(raw_dim);
    double p_pos = sigmoid(margin_scale * planted.dot(x));
    LogisticExample ex;
    ex.label = rng.next_unit() < p_pos ? 1 : -1;
    for (Eigen::Index k = 0; k < raw_dim; ++k)
      if (x[k] != 0.0) ex.x.push_back(static_cast<std::int32_t>(k), x[k]);
    ex.x.push_back(static_cast<std::int32_t>(raw_dim), 1.0);
    ds.examples.emplace_back(std::move(ex));
  }
  return ds;
}

// Per-run outcome of a benchmark experiment; the CSV schema below is fixed.
struct ConvergenceRecord {
  std::string dataset;
  std::string algorithm;
  int B = 0;
  int K = 0;
  double eta = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  bool converged = false;
  long long steps_to_converge = 0;
  long long samples_consumed = 0;
  double final_loss = 0.0;
};

inline constexpr const char* kRecordsHeader =
    "dataset,algorithm,B,K,eta,gamma,seed,converged,steps_to_converge,samples_consumed,final_loss";

inline void save_records(const std::vector<ConvergenceRecord>& records, std::ostream& out) {
  out << kRecordsHeader << '\n';
  char buf[512];
  for (const auto& r : records) {
    require(r.dataset.find(',') == std::string::npos && r.algorithm.find(',') == std::string::npos,
            "save_records: field contains a comma");
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.17g,%.17g,%" PRIu64 ",%d,%lld,%lld,%.17g",
                  r.dataset.c_str(), r.algorithm.c_str(), r.B, r.K, r.eta, r.gamma,
                  static_cast<std::uint64_t>(r.seed), r.converged ? 1 : 0, r.steps_to_converge,
                  r.samples_consumed, r.final_loss);
    out << buf << '\n';
  }
}

inline void save_records(const std::vector<ConvergenceRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_records(records, out);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::vector<ConvergenceRecord> load_records(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": missing header");
  auto header = detail::split_csv(line);
  auto expected = detail::split_csv(kRecordsHeader);
  for (const auto& col : expected) {
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw SchemaError(path + ": missing column: " + col);
  }
  if (header != expected) throw SchemaError(path + ": header does not match records schema");

  std::vector<ConvergenceRecord> records;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != expected.size())
      throw ParseError(path, line_no, "expected " + std::to_string(expected.size()) + " fields");
    ConvergenceRecord r;
    try {
      r.dataset = f[0];
      r.algorithm = f[1];
      r.B = std::stoi(f[2]);
      r.K = std::stoi(f[3]);
      r.eta = std::stod(f[4]);
      r.gamma = std::stod(f[5]);
      r.seed = std::stoull(f[6]);
      r.converged = std::stoi(f[7]) != 0;
      r.steps_to_converge = std::stoll(f[8]);
      r.samples_consumed = std::stoll(f[9]);
      r.final_loss = std::stod(f[10]);
    } catch (const std::exception& e) {
      throw ParseError(path, line_no, std::string("bad field: ") + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ConvergenceRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_records(in, path);
}

}  // namespace echoopt
