#pragma once

#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fedspan {

// d * prod_j y_j^a_j
struct Monomial {
  double c = 1.0;
  Eigen::VectorXd a;

  Monomial() = default;
  Monomial(double coeff, Eigen::VectorXd exps);
  static Monomial constant(double c, int n_vars);
  static Monomial variable(int index, int n_vars, double power = 1.0, double c = 1.0);

  int n_vars() const { return static_cast<int>(a.size()); }
  template <class Derived>
  typename Derived::Scalar operator()(const Eigen::MatrixBase<Derived>& y) const {
    using std::pow;
    typename Derived::Scalar v(c);
    for (Eigen::Index j = 0; j < a.size(); ++j)
      if (a(j) != 0.0) v *= pow(y(j), a(j));
    return v;
  }
};

Monomial operator*(const Monomial& x, const Monomial& y);
Monomial operator/(const Monomial& x, const Monomial& y);
Monomial operator*(double s, const Monomial& x);
Monomial pow(const Monomial& x, double p);

struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) : terms{std::move(m)} {}  // NOLINT: implicit by design
  int n_vars() const { return terms.empty() ? 0 : terms.front().n_vars(); }
  bool empty() const { return terms.empty(); }
  template <class Derived>
  typename Derived::Scalar operator()(const Eigen::MatrixBase<Derived>& y) const {
    typename Derived::Scalar v(0);
    for (const auto& t : terms) v += t(y);
    return v;
  }
};

Posynomial operator+(const Posynomial& x, const Posynomial& y);
Posynomial operator*(const Posynomial& x, const Posynomial& y);
Posynomial operator*(double s, const Posynomial& x);
Posynomial operator/(const Posynomial& x, const Monomial& m);
// Merges terms with identical exponents.
Posynomial simplify(const Posynomial& x);

// Difference of two posynomials, used to assemble objectives with negative terms.
struct Signomial {
  Posynomial pos;
  Posynomial neg;
};
Signomial operator+(const Signomial& x, const Signomial& y);
Signomial operator*(const Signomial& x, const Signomial& y);
Signomial operator*(double s, const Signomial& x);
Signomial operator-(const Posynomial& x, const Posynomial& y);

// Tight monomial under-estimator of g at z.
Monomial agm_condense(const Posynomial& g, const Eigen::VectorXd& z);

enum class Extremum { Min, Max };
// p-norm approximation: max -> (sum v^p)^(1/p), min -> (sum v^-p)^(-1/p).
template <class Scalar>
Scalar smooth_extremum(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, double p, Extremum kind);
double smooth_extremum(std::initializer_list<double> v, double p, Extremum kind);

struct VarSpace {
  std::vector<std::string> names;
  Eigen::VectorXd lo, hi;  // box, 0 / inf when unbounded
  int add(const std::string& name, double lo = 0.0, double hi = std::numeric_limits<double>::infinity());
  int size() const { return static_cast<int>(names.size()); }
  int index(const std::string& name) const;
};

struct GPProgram {
  VarSpace vars;
  Posynomial objective;
  std::vector<Posynomial> ineq;  // <= 1
  std::vector<std::string> ineq_names;
  std::vector<Monomial> eq;  // = 1
  std::vector<std::string> eq_names;
  std::vector<int> aux;  // slack variables of split equalities, forced toward 1
  // True when nothing in the program depends on an expansion point.
  bool exact = true;

  void add_ineq(Posynomial p, std::string name);
  void add_eq(Monomial m, std::string name);
  // Checks well-formedness; throws ArgumentError.
  void validate() const;
};

// lhs = rhs as lhs/rhs <= 1 and rhs/(A lhs) <= 1 with A >= 1 added to the
// variables and penalized in the objective with `penalty`. Denominators are
// condensed at z.
int split_equality(GPProgram& gp, const Posynomial& lhs, const Posynomial& rhs, const std::string& aux_name,
                   const Eigen::VectorXd& z, double penalty);

// posynomial inequality numerator / denominator <= 1 with the denominator
// condensed at z.
Posynomial condensed_ratio(const Posynomial& num, const Posynomial& den, const Eigen::VectorXd& z);

// log-sum-exp of affine forms: log sum_m exp(F_m . z + g_m)
struct LSE {
  Eigen::MatrixXd F;  // terms x vars
  Eigen::VectorXd g;
  double value(const Eigen::VectorXd& z) const;
  void derivatives(const Eigen::VectorXd& z, double& v, Eigen::VectorXd& grad, Eigen::MatrixXd* hess) const;
};

struct ConvexProblem {
  LSE objective;
  std::vector<LSE> ineq;  // <= 0
  std::vector<std::string> ineq_names;
  Eigen::MatrixXd A;  // equality rows A z = b
  Eigen::VectorXd b;
  int n() const { return static_cast<int>(objective.F.cols()); }
};

// Box bounds become monomial inequalities.
ConvexProblem log_convexify(const GPProgram& gp);

struct InnerOptions {
  double tol = 1e-8;
  double mu = 0.2;  // barrier weight factor per centering stage
  double armijo = 1e-4;
  int max_newton = 200;  // per centering stage
  double phase1_margin = 1e-6;
};

struct InnerResult {
  Eigen::VectorXd z;
  double kkt_residual = 0.0;
  double equality_residual = 0.0;
  int newton_steps = 0;
  bool phase1 = false;
};

InnerResult inner_solve(const ConvexProblem& cp, const Eigen::VectorXd& z0, const InnerOptions& opt = {});

using ProblemBuilder = std::function<GPProgram(const Eigen::VectorXd& x, double penalty)>;

struct SCAOptions {
  double tol = 1e-6;
  int max_iter = 50;
  double penalty = 1e3;
  double aux_tol = 1e-4;
  InnerOptions inner;
};

struct SCAState {
  Eigen::VectorXd x;
  std::vector<double> history;  // objective of each accepted outer iterate
  std::vector<bool> feasible;   // auxiliaries within aux_tol at that iterate
  double penalty = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostics;
};

SCAState sca_loop(const ProblemBuilder& builder, const Eigen::VectorXd& x0, const SCAOptions& opt = {});

// `coeff var^exp ...` listing, one line per monomial, grouped per constraint.
std::string dump_problem(const GPProgram& gp);

}  // namespace fedspan
