#include "fedspan/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedspan/csv.hpp"
#include "fedspan/errors.hpp"

namespace fedspan {

double LossOracle::local_loss(const ModelVector& w, int sat, double t) const {
  double s = 0.0;
  const int d = dataset_size(sat);
  for (int i = 0; i < d; ++i) s += sample_loss(w, sat, i, t);
  return s / d;
}

ModelVector LossOracle::local_grad(const ModelVector& w, int sat, double t) const {
  ModelVector g = ModelVector::Zero(dim());
  const int d = dataset_size(sat);
  for (int i = 0; i < d; ++i) add_sample_grad(w, sat, i, t, g);
  return g / d;
}

Eigen::VectorXd LossOracle::data_sizes() const {
  Eigen::VectorXd D(n_sats());
  for (int n = 0; n < n_sats(); ++n) D(n) = dataset_size(n);
  return D;
}

double LossOracle::global_loss(const ModelVector& w, double t) const {
  Eigen::VectorXd D = data_sizes();
  double s = 0.0;
  for (int n = 0; n < n_sats(); ++n) s += D(n) * local_loss(w, n, t);
  return s / D.sum();
}

ModelVector LossOracle::global_grad(const ModelVector& w, double t) const {
  Eigen::VectorXd D = data_sizes();
  ModelVector g = ModelVector::Zero(dim());
  for (int n = 0; n < n_sats(); ++n) g += D(n) * local_grad(w, n, t);
  return g / D.sum();
}

double LossOracle::feature_sigma(int sat, double t) const {
  const int d = dataset_size(sat);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(datum(sat, 0, t).size());
  for (int i = 0; i < d; ++i) mu += datum(sat, i, t);
  mu /= d;
  double v = 0.0;
  for (int i = 0; i < d; ++i) v += (datum(sat, i, t) - mu).squaredNorm();
  return std::sqrt(v / d);
}

// ---- quadratic ----

QuadraticFamily::QuadraticFamily(const Eigen::MatrixXd& centers, const std::vector<int>& sizes, double spread,
                                 double drift_rate, std::uint64_t seed)
    : drift_(drift_rate) {
  const int N = static_cast<int>(centers.cols());
  const int M = static_cast<int>(centers.rows());
  if (static_cast<int>(sizes.size()) != N) throw SizeError("quadratic family: one size per center");
  for (int n = 0; n < N; ++n) {
    if (sizes[n] < 1) throw ArgumentError("quadratic family: dataset size must be >= 1");
    Rng rng = substream(seed, "quadratic-data", n);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd X(M, sizes[n]);
    for (int i = 0; i < sizes[n]; ++i)
      for (int m = 0; m < M; ++m) X(m, i) = centers(m, n) + spread * g(rng);
    Eigen::VectorXd u(M);
    for (int m = 0; m < M; ++m) u(m) = g(rng);
    if (u.norm() > 0) u.normalize();
    data_.push_back(std::move(X));
    dir_.push_back(u);
  }
  for (auto& X : data_) mean0_.push_back(X.rowwise().mean());
}

QuadraticFamily::QuadraticFamily(std::vector<Eigen::MatrixXd> data) : data_(std::move(data)) {
  if (data_.empty()) throw SizeError("quadratic family: no satellites");
  for (auto& X : data_) {
    if (X.cols() < 1) throw ArgumentError("quadratic family: dataset size must be >= 1");
    dir_.push_back(Eigen::VectorXd::Zero(X.rows()));
    mean0_.push_back(X.rowwise().mean());
  }
}

Eigen::VectorXd QuadraticFamily::datum(int sat, int idx, double t) const {
  if (drift_ == 0.0) return data_[sat].col(idx);
  return data_[sat].col(idx) + (drift_ * t) * dir_[sat];
}

double QuadraticFamily::sample_loss(const ModelVector& w, int sat, int idx, double t) const {
  return 0.5 * (w - datum(sat, idx, t)).squaredNorm();
}

void QuadraticFamily::add_sample_grad(const ModelVector& w, int sat, int idx, double t, ModelVector& acc) const {
  if (drift_ == 0.0)
    acc += w - data_[sat].col(idx);
  else
    acc += w - datum(sat, idx, t);
}

Eigen::VectorXd QuadraticFamily::mean(int sat, double t) const { return mean0_[sat] + (drift_ * t) * dir_[sat]; }

double QuadraticFamily::local_loss(const ModelVector& w, int sat, double t) const {
  // 1/2 |w - mu|^2 + 1/2 mean |x - mu|^2
  Eigen::VectorXd mu = mean(sat, t);
  double spread = (data_[sat].colwise() - mean0_[sat]).squaredNorm() / data_[sat].cols();
  return 0.5 * (w - mu).squaredNorm() + 0.5 * spread;
}

ModelVector QuadraticFamily::local_grad(const ModelVector& w, int sat, double t) const { return w - mean(sat, t); }

ModelVector QuadraticFamily::optimum(double t) const {
  ModelVector s = ModelVector::Zero(dim());
  double D = 0.0;
  for (int n = 0; n < n_sats(); ++n) {
    s += dataset_size(n) * mean(n, t);
    D += dataset_size(n);
  }
  return s / D;
}

// ---- logistic ----

LogisticFamily::LogisticFamily(std::vector<Eigen::MatrixXd> features, std::vector<Eigen::VectorXd> labels, double ridge)
    : x_(std::move(features)), y_(std::move(labels)), ridge_(ridge) {
  if (x_.empty() || x_.size() != y_.size()) throw SizeError("logistic family: features and labels disagree");
  for (std::size_t n = 0; n < x_.size(); ++n) {
    if (x_[n].cols() < 1) throw ArgumentError("logistic family: dataset size must be >= 1");
    if (x_[n].cols() != y_[n].size()) throw SizeError("logistic family: label count mismatch");
  }
}

std::unique_ptr<LogisticFamily> LogisticFamily::gaussian(int n_sats, int dim, const std::vector<int>& sizes,
                                                         double separation, double skew, std::uint64_t seed) {
  if (dim < 2) throw ArgumentError("logistic family: dim must be >= 2");
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> Y;
  Rng mrng = substream(seed, "logistic-mean");
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd mu(dim - 1);
  for (int m = 0; m < dim - 1; ++m) mu(m) = g(mrng);
  mu *= 0.5 * separation / mu.norm();
  for (int n = 0; n < n_sats; ++n) {
    Rng rng = substream(seed, "logistic-data", n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double p1 = n_sats > 1 ? 0.5 + skew * (static_cast<double>(n) / (n_sats - 1) - 0.5) : 0.5;
    Eigen::MatrixXd x(dim, sizes.at(n));
    Eigen::VectorXd y(sizes.at(n));
    for (int i = 0; i < sizes.at(n); ++i) {
      y(i) = u(rng) < p1 ? 1.0 : 0.0;
      for (int m = 0; m < dim - 1; ++m) x(m, i) = (y(i) > 0.5 ? mu(m) : -mu(m)) + g(rng);
      x(dim - 1, i) = 1.0;
    }
    X.push_back(std::move(x));
    Y.push_back(std::move(y));
  }
  return std::make_unique<LogisticFamily>(std::move(X), std::move(Y));
}

std::unique_ptr<LogisticFamily> LogisticFamily::from_csv(const std::string& path, int n_sats) {
  csv::Table t = csv::read(path);
  if (t.header.size() < 2) throw ParseError(path + ": need at least one feature and a label column");
  const int k = static_cast<int>(t.header.size()) - 1;
  std::vector<std::vector<int>> rows(n_sats);
  for (std::size_t r = 0; r < t.rows.size(); ++r) rows[r % n_sats].push_back(static_cast<int>(r));
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> Y;
  for (int n = 0; n < n_sats; ++n) {
    if (rows[n].empty()) throw ArgumentError(path + ": fewer rows than satellites");
    Eigen::MatrixXd x(k + 1, rows[n].size());
    Eigen::VectorXd y(rows[n].size());
    for (std::size_t i = 0; i < rows[n].size(); ++i) {
      const auto& row = t.rows[rows[n][i]];
      if (static_cast<int>(row.size()) != k + 1)
        throw ParseError(path + ":" + std::to_string(t.line[rows[n][i]]) + ": wrong column count");
      for (int m = 0; m <= k; ++m) {
        double v = 0.0;
        try {
          v = std::stod(row[m]);
        } catch (const std::exception&) {
          throw ParseError(path + ":" + std::to_string(t.line[rows[n][i]]) + ": not a number: " + row[m]);
        }
        if (m < k)
          x(m, i) = v;
        else
          y(i) = v > 0.5 ? 1.0 : 0.0;
      }
      x(k, i) = 1.0;
    }
    X.push_back(std::move(x));
    Y.push_back(std::move(y));
  }
  return std::make_unique<LogisticFamily>(std::move(X), std::move(Y));
}

namespace {
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

double LogisticFamily::sample_loss(const ModelVector& w, int sat, int idx, double) const {
  double z = w.dot(x_[sat].col(idx));
  return softplus(z) - y_[sat](idx) * z + 0.5 * ridge_ * w.squaredNorm();
}

void LogisticFamily::add_sample_grad(const ModelVector& w, int sat, int idx, double, ModelVector& acc) const {
  double z = w.dot(x_[sat].col(idx));
  acc += (sigmoid(z) - y_[sat](idx)) * x_[sat].col(idx) + ridge_ * w;
}

Eigen::VectorXd LogisticFamily::datum(int sat, int idx, double) const {
  Eigen::VectorXd d(dim());
  d.head(dim() - 1) = x_[sat].col(idx).head(dim() - 1);
  d(dim() - 1) = y_[sat](idx);
  return d;
}

// ---- SGD and aggregation ----

SgdResult local_sgd(const LossOracle& oracle, int sat, const ModelVector& w0, int e, double frac, double eta, Rng& rng,
                    double t) {
  if (!(frac > 0.0 && frac <= 1.0)) throw ArgumentError("local_sgd: minibatch fraction must be in (0, 1]");
  if (e < 0) throw ArgumentError("local_sgd: negative iteration count");
  if (!(eta > 0.0)) throw ArgumentError("local_sgd: step size must be positive");
  const int D = oracle.dataset_size(sat);
  const int B = std::min(D, static_cast<int>(std::ceil(frac * D - 1e-12)));
  ModelVector w = w0;
  std::vector<int> idx(D);
  std::iota(idx.begin(), idx.end(), 0);
  ModelVector g(w.size());
  for (int s = 0; s < e; ++s) {
    g.setZero();
    if (B == D) {
      for (int i = 0; i < D; ++i) oracle.add_sample_grad(w, sat, i, t, g);
    } else {
      // partial Fisher-Yates: the first B slots form the batch
      for (int i = 0; i < B; ++i) {
        std::uniform_int_distribution<int> pick(i, D - 1);
        std::swap(idx[i], idx[pick(rng)]);
        oracle.add_sample_grad(w, sat, idx[i], t, g);
      }
    }
    w -= (eta / B) * g;
  }
  return {w, (w0 - w) / eta};
}

double boosting_coefficient(const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_n, int L) {
  if (D_n.size() != e_n.size()) throw SizeError("boosting coefficient: size mismatch");
  return (D_n.array() * (L * e_n.cast<double>()).array()).sum() / D_n.sum();
}

ModelVector flat_oracle(const std::vector<Eigen::MatrixXd>& grads, const VCPartition& part, const Eigen::VectorXd& D_n,
                        const Eigen::VectorXi& e_c, double eta) {
  if (grads.empty()) throw ArgumentError("flat_oracle: no local rounds");
  const int L = static_cast<int>(grads.size());
  const int N = static_cast<int>(D_n.size());
  const int C = part.n_clusters;
  if (e_c.size() != C) throw SizeError("flat_oracle: one e per cluster");
  Eigen::VectorXd D_c = Eigen::VectorXd::Zero(C);
  for (int n = 0; n < N; ++n) D_c(part.assignment[n]) += D_n(n);
  const double D = D_n.sum();
  double xi = 0.0;
  for (int c = 0; c < C; ++c) xi += D_c(c) * L * e_c(c) / D;
  ModelVector total = ModelVector::Zero(grads.front().rows());
  for (int c = 0; c < C; ++c) {
    ModelVector inner = ModelVector::Zero(total.size());
    for (int l = 0; l < L; ++l)
      for (int n = 0; n < N; ++n)
        if (part.assignment[n] == c) inner += (D_n(n) / D_c(c)) * grads[l].col(n);
    total += (D_c(c) / (D * L * e_c(c))) * inner;
  }
  return -eta * xi * total;
}

void write_model(const std::string& path, const ModelVector& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  char magic[8] = {'F', 'S', 'P', 'N', 'M', 'O', 'D', 'L'};
  f.write(magic, 8);
  std::uint64_t M = static_cast<std::uint64_t>(w.size());
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(M >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 8);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    std::uint64_t bits;
    double v = w(i);
    std::memcpy(&bits, &v, 8);
    for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>(bits >> (8 * j));
    f.write(reinterpret_cast<const char*>(b), 8);
  }
}

ModelVector read_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  char magic[8];
  unsigned char b[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "FSPNMODL", 8) != 0) throw ParseError(path + ": bad model header");
  f.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t M = 0;
  for (int i = 0; i < 8; ++i) M |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  ModelVector w(static_cast<Eigen::Index>(M));
  for (std::uint64_t i = 0; i < M; ++i) {
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw ParseError(path + ": truncated model");
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
    double v;
    std::memcpy(&v, &bits, 8);
    w(static_cast<Eigen::Index>(i)) = v;
  }
  return w;
}

}  // namespace fedspan
