#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fedspan/clustering.hpp"
#include "fedspan/errors.hpp"
#include "fedspan/graph.hpp"
#include "fedspan/rng.hpp"

namespace fedspan {

using ModelVector = Eigen::VectorXd;

// Per-satellite datasets with per-sample loss and gradient. Data may drift
// with wall-clock time t.
class LossOracle {
 public:
  virtual ~LossOracle() = default;
  virtual int dim() const = 0;
  virtual int n_sats() const = 0;
  virtual int dataset_size(int sat) const = 0;
  virtual double sample_loss(const ModelVector& w, int sat, int idx, double t) const = 0;
  virtual void add_sample_grad(const ModelVector& w, int sat, int idx, double t, ModelVector& acc) const = 0;
  // Feature vector of a datum, used for variability estimates.
  virtual Eigen::VectorXd datum(int sat, int idx, double t) const = 0;

  virtual double local_loss(const ModelVector& w, int sat, double t) const;
  virtual ModelVector local_grad(const ModelVector& w, int sat, double t) const;
  double global_loss(const ModelVector& w, double t) const;
  ModelVector global_grad(const ModelVector& w, double t) const;
  // Square root of the total sample variance of the features.
  double feature_sigma(int sat, double t) const;
  Eigen::VectorXd data_sizes() const;
};

// f(w, d) = 1/2 |w - d|^2 with d = x_i + drift * t * u_sat.
class QuadraticFamily : public LossOracle {
 public:
  // centers: dim x N; spread: per-coordinate std of data around a center.
  QuadraticFamily(const Eigen::MatrixXd& centers, const std::vector<int>& sizes, double spread, double drift_rate,
                  std::uint64_t seed);
  // Exactly representable data for bit-level tests: one matrix per satellite.
  explicit QuadraticFamily(std::vector<Eigen::MatrixXd> data);

  int dim() const override { return static_cast<int>(data_.front().rows()); }
  int n_sats() const override { return static_cast<int>(data_.size()); }
  int dataset_size(int sat) const override { return static_cast<int>(data_[sat].cols()); }
  double sample_loss(const ModelVector& w, int sat, int idx, double t) const override;
  void add_sample_grad(const ModelVector& w, int sat, int idx, double t, ModelVector& acc) const override;
  Eigen::VectorXd datum(int sat, int idx, double t) const override;
  double local_loss(const ModelVector& w, int sat, double t) const override;
  ModelVector local_grad(const ModelVector& w, int sat, double t) const override;

  Eigen::VectorXd mean(int sat, double t) const;
  // Minimizer and minimum of the global loss at time t.
  ModelVector optimum(double t) const;
  double drift_rate() const { return drift_; }
  const Eigen::VectorXd& drift_direction(int sat) const { return dir_[sat]; }

 private:
  std::vector<Eigen::MatrixXd> data_;
  std::vector<Eigen::VectorXd> dir_;
  std::vector<Eigen::VectorXd> mean0_;
  double drift_ = 0.0;
};

// Binary logistic regression, labels in {0, 1}, with a small ridge term.
class LogisticFamily : public LossOracle {
 public:
  LogisticFamily(std::vector<Eigen::MatrixXd> features, std::vector<Eigen::VectorXd> labels, double ridge = 1e-3);
  // Two Gaussian classes in `dim - 1` features plus a bias; per-satellite
  // class balance varies to create heterogeneity.
  static std::unique_ptr<LogisticFamily> gaussian(int n_sats, int dim, const std::vector<int>& sizes,
                                                  double separation, double skew, std::uint64_t seed);
  // Rows `f1,...,fk,label`; rows dealt round-robin to satellites.
  static std::unique_ptr<LogisticFamily> from_csv(const std::string& path, int n_sats);

  int dim() const override { return static_cast<int>(x_.front().rows()); }
  int n_sats() const override { return static_cast<int>(x_.size()); }
  int dataset_size(int sat) const override { return static_cast<int>(x_[sat].cols()); }
  double sample_loss(const ModelVector& w, int sat, int idx, double t) const override;
  void add_sample_grad(const ModelVector& w, int sat, int idx, double t, ModelVector& acc) const override;
  Eigen::VectorXd datum(int sat, int idx, double t) const override;

 private:
  std::vector<Eigen::MatrixXd> x_;  // dim x D_n, last row is the bias 1
  std::vector<Eigen::VectorXd> y_;
  double ridge_;
};

struct SgdResult {
  ModelVector w;
  ModelVector cumulative_grad;  // (w0 - w_e) / eta
};

// e mini-batch steps of size ceil(frac * D), sampled without replacement
// within a step. A full batch visits samples in index order.
SgdResult local_sgd(const LossOracle& oracle, int sat, const ModelVector& w0, int e, double frac, double eta, Rng& rng,
                    double t = 0.0);

// Leaf-to-root accumulation over an upward forest: column n of the result
// holds w_n v_n plus the accumulated values of n's predecessors.
// V: one column per node.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tree_aggregate(
    const DirectedForest& f, const Eigen::MatrixBase<Derived>& V,
    const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>& w);

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_vc_update(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w_bar,
                                                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& aggregated,
                                                         Scalar eta, Scalar D_c) {
  return w_bar - eta * aggregated / D_c;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_global_update(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w,
                                                             const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& aggregated,
                                                             Scalar eta, Scalar xi, Scalar D) {
  return w - eta * xi * aggregated / D;
}

// Xi = sum_n D_n L e_n / D.
double boosting_coefficient(const Eigen::VectorXd& D_n, const Eigen::VectorXi& e_n, int L);

// Model change of one global round computed without any tree:
// grads[l] has one column per satellite (the cumulative gradient of local
// round l), e_c per cluster.
ModelVector flat_oracle(const std::vector<Eigen::MatrixXd>& grads, const VCPartition& part, const Eigen::VectorXd& D_n,
                        const Eigen::VectorXi& e_c, double eta);

// Raw little-endian float64 dump behind a 16-byte header: "FSPNMODL" then M.
void write_model(const std::string& path, const ModelVector& w);
ModelVector read_model(const std::string& path);

// ---- template definitions ----

template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tree_aggregate(
    const DirectedForest& f, const Eigen::MatrixBase<Derived>& V,
    const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>& w) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (f.direction != Direction::Upward) throw StructureError("tree_aggregate needs an upward forest");
  if (!is_valid(f)) throw StructureError("tree_aggregate: invalid forest");
  std::vector<int> next = toward_root(f);
  std::vector<int> order = root_first_order(f);
  Mat acc(V.rows(), V.cols());
  for (int n = 0; n < f.n(); ++n) acc.col(n) = w(n) * V.col(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (next[*it] >= 0) acc.col(next[*it]) += acc.col(*it);
  return acc;
}

}  // namespace fedspan
