#include "fedspan/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "fedspan/errors.hpp"

namespace fedspan {

// ---- algebra ----

Monomial::Monomial(double coeff, Eigen::VectorXd exps) : c(coeff), a(std::move(exps)) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("monomial coefficient must be positive and finite");
}

Monomial Monomial::constant(double c, int n_vars) { return Monomial(c, Eigen::VectorXd::Zero(n_vars)); }

Monomial Monomial::variable(int index, int n_vars, double power, double c) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n_vars);
  a(index) = power;
  return Monomial(c, a);
}

namespace {
void same_space(int a, int b) {
  if (a != b) throw SizeError("variable counts differ: " + std::to_string(a) + " vs " + std::to_string(b));
}
}  // namespace

Monomial operator*(const Monomial& x, const Monomial& y) {
  same_space(x.n_vars(), y.n_vars());
  return Monomial(x.c * y.c, x.a + y.a);
}

Monomial operator/(const Monomial& x, const Monomial& y) {
  same_space(x.n_vars(), y.n_vars());
  return Monomial(x.c / y.c, x.a - y.a);
}

Monomial operator*(double s, const Monomial& x) { return Monomial(s * x.c, x.a); }

Monomial pow(const Monomial& x, double p) { return Monomial(std::pow(x.c, p), p * x.a); }

Posynomial operator+(const Posynomial& x, const Posynomial& y) {
  if (!x.empty() && !y.empty()) same_space(x.n_vars(), y.n_vars());
  Posynomial r = x;
  r.terms.insert(r.terms.end(), y.terms.begin(), y.terms.end());
  return r;
}

Posynomial operator*(const Posynomial& x, const Posynomial& y) {
  Posynomial r;
  for (const auto& s : x.terms)
    for (const auto& t : y.terms) r.terms.push_back(s * t);
  return simplify(r);
}

Posynomial operator*(double s, const Posynomial& x) {
  Posynomial r;
  if (s == 0.0) return r;
  for (const auto& t : x.terms) r.terms.push_back(s * t);
  return r;
}

Posynomial operator/(const Posynomial& x, const Monomial& m) {
  Posynomial r;
  for (const auto& t : x.terms) r.terms.push_back(t / m);
  return r;
}

Posynomial simplify(const Posynomial& x) {
  std::map<std::vector<double>, std::size_t> seen;
  Posynomial r;
  for (const auto& t : x.terms) {
    std::vector<double> key(t.a.data(), t.a.data() + t.a.size());
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(std::move(key), r.terms.size());
      r.terms.push_back(t);
    } else {
      r.terms[it->second].c += t.c;
    }
  }
  return r;
}

Signomial operator+(const Signomial& x, const Signomial& y) { return {x.pos + y.pos, x.neg + y.neg}; }

Signomial operator*(const Signomial& x, const Signomial& y) {
  return {simplify(x.pos * y.pos + x.neg * y.neg), simplify(x.pos * y.neg + x.neg * y.pos)};
}

Signomial operator*(double s, const Signomial& x) {
  if (s < 0) throw DomainError("signomial scale must be non-negative");
  return {s * x.pos, s * x.neg};
}

Signomial operator-(const Posynomial& x, const Posynomial& y) { return {x, y}; }

Monomial agm_condense(const Posynomial& g, const Eigen::VectorXd& z) {
  if (g.empty()) throw DomainError("cannot condense an empty posynomial");
  if ((z.array() <= 0.0).any()) throw DomainError("expansion point must be strictly positive");
  if (g.terms.size() == 1) return g.terms.front();
  const double gz = g(z);
  Monomial r = Monomial::constant(1.0, g.n_vars());
  for (const auto& u : g.terms) {
    const double w = u(z) / gz;
    r = r * pow(Monomial(u.c / w, u.a), w);
  }
  // Exact tightness at z regardless of rounding in the product above.
  r.c *= gz / r(z);
  return r;
}

template <class Scalar>
Scalar smooth_extremum(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, double p, Extremum kind) {
  using std::pow;
  if (p < 1.0) throw DomainError("smoothing exponent must be >= 1");
  if (v.size() == 0) throw DomainError("no values to smooth");
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v(i) > Scalar(0))) throw DomainError("smooth_extremum needs positive values");
  const double q = kind == Extremum::Max ? p : -p;
  // factor out the extremum for numerical range
  Scalar ref = kind == Extremum::Max ? v.maxCoeff() : v.minCoeff();
  Scalar s(0);
  for (Eigen::Index i = 0; i < v.size(); ++i) s += pow(v(i) / ref, q);
  return ref * pow(s, 1.0 / q);
}

template double smooth_extremum<double>(const Eigen::VectorXd&, double, Extremum);

double smooth_extremum(std::initializer_list<double> v, double p, Extremum kind) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return smooth_extremum<double>(x, p, kind);
}

// ---- programs ----

int VarSpace::add(const std::string& name, double l, double h) {
  if (index(name) >= 0) throw ArgumentError("duplicate variable " + name);
  if (l < 0 || !(h > l)) throw ArgumentError("bad box for " + name);
  names.push_back(name);
  lo.conservativeResize(size());
  hi.conservativeResize(size());
  lo(size() - 1) = l;
  hi(size() - 1) = h;
  return size() - 1;
}

int VarSpace::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

void GPProgram::add_ineq(Posynomial p, std::string name) {
  ineq.push_back(std::move(p));
  ineq_names.push_back(std::move(name));
}

void GPProgram::add_eq(Monomial m, std::string name) {
  eq.push_back(std::move(m));
  eq_names.push_back(std::move(name));
}

void GPProgram::validate() const {
  const int n = vars.size();
  if (n == 0) throw ArgumentError("program has no variables");
  if (objective.empty()) throw ArgumentError("program has no objective");
  std::vector<bool> used(n, false);
  auto scan = [&](const Monomial& m, const std::string& where) {
    if (m.n_vars() != n) throw SizeError(where + ": monomial over " + std::to_string(m.n_vars()) + " variables");
    if (!m.a.allFinite()) throw ArgumentError(where + ": non-finite exponent");
    for (int j = 0; j < n; ++j)
      if (m.a(j) != 0.0) used[j] = true;
  };
  for (const auto& t : objective.terms) scan(t, "objective");
  for (std::size_t i = 0; i < ineq.size(); ++i) {
    if (ineq[i].empty()) throw ArgumentError("empty inequality " + ineq_names[i]);
    for (const auto& t : ineq[i].terms) scan(t, ineq_names[i]);
  }
  for (std::size_t i = 0; i < eq.size(); ++i) scan(eq[i], eq_names[i]);
  for (int j = 0; j < n; ++j)
    if (!used[j]) throw ArgumentError("variable " + vars.names[j] + " is never referenced");
}

Posynomial condensed_ratio(const Posynomial& num, const Posynomial& den, const Eigen::VectorXd& z) {
  return num / agm_condense(den, z);
}

int split_equality(GPProgram& gp, const Posynomial& lhs, const Posynomial& rhs, const std::string& aux_name,
                   const Eigen::VectorXd& z, double penalty) {
  // The aux variable joins the space, so existing monomials are widened.
  const int A = gp.vars.add(aux_name, 1.0, 1e6);
  const int n = gp.vars.size();
  auto widen_all = [&](Posynomial& p) {
    for (auto& t : p.terms) {
      Eigen::Index old = t.a.size();
      t.a.conservativeResize(n);
      t.a.tail(n - old).setZero();
    }
  };
  widen_all(gp.objective);
  for (auto& p : gp.ineq) widen_all(p);
  for (auto& m : gp.eq) {
    Eigen::Index old = m.a.size();
    m.a.conservativeResize(n);
    m.a.tail(n - old).setZero();
  }
  Posynomial L = lhs, R = rhs;
  widen_all(L);
  widen_all(R);
  Eigen::VectorXd zz(n);
  zz.head(z.size()) = z;
  zz.tail(n - z.size()).setOnes();
  Monomial Am = Monomial::variable(A, n);
  gp.add_ineq(condensed_ratio(L, R, zz), aux_name + ":upper");
  gp.add_ineq(condensed_ratio(R / Am, L, zz), aux_name + ":lower");
  gp.objective = gp.objective + Posynomial(penalty * Am);
  gp.aux.push_back(A);
  if (R.terms.size() > 1 || L.terms.size() > 1) gp.exact = false;
  return A;
}

// ---- convex form ----

double LSE::value(const Eigen::VectorXd& z) const {
  Eigen::VectorXd s = F * z + g;
  const double m = s.maxCoeff();
  return m + std::log((s.array() - m).exp().sum());
}

void LSE::derivatives(const Eigen::VectorXd& z, double& v, Eigen::VectorXd& grad, Eigen::MatrixXd* hess) const {
  Eigen::VectorXd s = F * z + g;
  const double m = s.maxCoeff();
  Eigen::VectorXd w = (s.array() - m).exp();
  const double sum = w.sum();
  v = m + std::log(sum);
  w /= sum;
  grad = F.transpose() * w;
  if (hess) *hess = F.transpose() * w.asDiagonal() * F - grad * grad.transpose();
}

namespace {
LSE lse_of(const Posynomial& p) {
  LSE f;
  const int n = p.n_vars();
  f.F.resize(static_cast<Eigen::Index>(p.terms.size()), n);
  f.g.resize(static_cast<Eigen::Index>(p.terms.size()));
  for (std::size_t m = 0; m < p.terms.size(); ++m) {
    f.F.row(static_cast<Eigen::Index>(m)) = p.terms[m].a.transpose();
    f.g(static_cast<Eigen::Index>(m)) = std::log(p.terms[m].c);
  }
  return f;
}
}  // namespace

ConvexProblem log_convexify(const GPProgram& gp) {
  gp.validate();
  const int n = gp.vars.size();
  ConvexProblem cp;
  cp.objective = lse_of(gp.objective);
  for (std::size_t i = 0; i < gp.ineq.size(); ++i) {
    cp.ineq.push_back(lse_of(gp.ineq[i]));
    cp.ineq_names.push_back(gp.ineq_names[i]);
  }
  for (int j = 0; j < n; ++j) {
    if (gp.vars.lo(j) > 0) {
      cp.ineq.push_back(lse_of(Monomial::variable(j, n, -1.0, gp.vars.lo(j))));
      cp.ineq_names.push_back(gp.vars.names[j] + ":lo");
    }
    if (std::isfinite(gp.vars.hi(j))) {
      cp.ineq.push_back(lse_of(Monomial::variable(j, n, 1.0, 1.0 / gp.vars.hi(j))));
      cp.ineq_names.push_back(gp.vars.names[j] + ":hi");
    }
  }
  cp.A.resize(static_cast<Eigen::Index>(gp.eq.size()), n);
  cp.b.resize(static_cast<Eigen::Index>(gp.eq.size()));
  for (std::size_t l = 0; l < gp.eq.size(); ++l) {
    cp.A.row(static_cast<Eigen::Index>(l)) = gp.eq[l].a.transpose();
    cp.b(static_cast<Eigen::Index>(l)) = -std::log(gp.eq[l].c);
  }
  return cp;
}

// ---- barrier solver ----

namespace {

LSE reduce(const LSE& f, const Eigen::MatrixXd& N, const Eigen::VectorXd& zp) {
  return {f.F * N, f.g + f.F * zp};
}

constexpr double kPhase1Box = 40.0;  // in log space

struct Barrier {
  const LSE& obj;
  const std::vector<LSE>& cons;
  double t = 1.0;

  // false when some constraint is not strictly satisfied
  bool eval(const Eigen::VectorXd& u, double& phi, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    double v;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    obj.derivatives(u, v, g, hess ? &H : nullptr);
    phi = t * v;
    if (grad) *grad = t * g;
    if (hess) *hess = t * H;
    for (const auto& c : cons) {
      c.derivatives(u, v, g, hess ? &H : nullptr);
      if (!(v < 0.0)) return false;
      phi -= std::log(-v);
      if (grad) *grad += g / (-v);
      if (hess) *hess += H / (-v) + g * g.transpose() / (v * v);
    }
    return std::isfinite(phi);
  }
};

struct CenterResult {
  int steps = 0;
  double decrement = 0.0;
};

CenterResult center(const Barrier& B, Eigen::VectorXd& u, const InnerOptions& opt, const char* stage) {
  CenterResult r;
  double phi;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  for (int it = 0; it < opt.max_newton; ++it) {
    if (!B.eval(u, phi, &g, &H)) throw NonConvergenceError(std::string(stage) + ": iterate left the domain");
    Eigen::VectorXd dx;
    double reg = 0.0;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd Hr = H;
      Hr.diagonal().array() += reg;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hr);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        dx = -ldlt.solve(g);
        if (dx.allFinite() && g.dot(dx) < 0) break;
      }
      dx.resize(0);
      reg = reg == 0.0 ? 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
    }
    if (dx.size() == 0) {
      if (g.norm() < 1e-12) return r;
      throw NonConvergenceError(std::string(stage) + ": singular Newton system, gradient norm " +
                                std::to_string(g.norm()));
    }
    r.decrement = -g.dot(dx);
    // phi grows with t, so round-off in it does too
    const double floor = 1e-12 * std::max(1.0, std::abs(phi));
    if (r.decrement / 2.0 <= floor) {
      // one full step polishes the gradient below what phi can resolve
      double phi_new;
      if (B.eval(u + dx, phi_new, nullptr, nullptr)) u += dx;
      return r;
    }
    double s = 1.0, phi_new;
    while (true) {
      Eigen::VectorXd cand = u + s * dx;
      if (B.eval(cand, phi_new, nullptr, nullptr) && phi_new <= phi + opt.armijo * s * g.dot(dx)) {
        u = cand;
        break;
      }
      s *= 0.5;
      if (s < 1e-14) {
        if (r.decrement < 1e4 * floor) return r;
        throw NonConvergenceError(std::string(stage) + ": line search stalled, Newton decrement " +
                                  std::to_string(r.decrement));
      }
    }
    ++r.steps;
  }
  throw NonConvergenceError(std::string(stage) + ": no convergence in " + std::to_string(opt.max_newton) +
                            " Newton steps, decrement " + std::to_string(r.decrement));
}

// Sequential centering; returns the final barrier weight t.
double barrier_path(const LSE& obj, const std::vector<LSE>& cons, Eigen::VectorXd& u, const InnerOptions& opt,
                    double tol, int& steps, const char* stage) {
  Barrier B{obj, cons, 1.0};
  const double m = static_cast<double>(cons.size());
  if (m == 0) {
    steps += center(B, u, opt, stage).steps;
    return 1.0;
  }
  while (true) {
    steps += center(B, u, opt, stage).steps;
    if (m / B.t < tol) return B.t;
    B.t /= opt.mu;
  }
}

}  // namespace

InnerResult inner_solve(const ConvexProblem& cp, const Eigen::VectorXd& z0, const InnerOptions& opt) {
  const int n = cp.n();
  if (z0.size() != n) throw SizeError("inner_solve: start point has wrong size");
  InnerResult res;

  // equality elimination z = zp + N u
  Eigen::VectorXd zp = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
  if (cp.A.rows() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cp.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    const Eigen::Index r = svd.rank();
    zp = svd.solve(cp.b);
    res.equality_residual = (cp.A * zp - cp.b).norm();
    if (res.equality_residual > 1e-9 * (1.0 + cp.b.norm()))
      throw InfeasibleError("inconsistent equality constraints, residual " + std::to_string(res.equality_residual));
    N = svd.matrixV().rightCols(n - r);
  }
  const int k = static_cast<int>(N.cols());
  LSE obj = reduce(cp.objective, N, zp);
  std::vector<LSE> cons;
  for (const auto& c : cp.ineq) cons.push_back(reduce(c, N, zp));
  Eigen::VectorXd u = N.transpose() * (z0 - zp);

  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : cons) worst = std::max(worst, c.value(u));
  if (!cons.empty() && worst > -opt.phase1_margin) {
    // phase I over (u, s): min s  s.t.  f_i(u) <= s,  s >= -1
    res.phase1 = true;
    LSE o1{Eigen::MatrixXd::Zero(1, k + 1), Eigen::VectorXd::Zero(1)};
    o1.F(0, k) = 1.0;
    std::vector<LSE> c1;
    for (const auto& c : cons) {
      LSE e{Eigen::MatrixXd(c.F.rows(), k + 1), c.g};
      e.F.leftCols(k) = c.F;
      e.F.col(k).setConstant(-1.0);
      c1.push_back(std::move(e));
    }
    LSE floor{Eigen::MatrixXd::Zero(1, k + 1), Eigen::VectorXd::Constant(1, -1.0)};
    floor.F(0, k) = -1.0;
    c1.push_back(floor);
    // keeps phase I bounded when the feasible set is not
    for (int j = 0; j < k; ++j)
      for (double sgn : {1.0, -1.0}) {
        LSE box{Eigen::MatrixXd::Zero(1, k + 1), Eigen::VectorXd::Constant(1, -sgn * u(j) - kPhase1Box)};
        box.F(0, j) = sgn;
        c1.push_back(box);
      }
    Eigen::VectorXd us(k + 1);
    us.head(k) = u;
    us(k) = std::max(worst, 0.0) + 1.0;
    barrier_path(o1, c1, us, opt, 1e-4, res.newton_steps, "phase I");
    u = us.head(k);
    worst = -std::numeric_limits<double>::infinity();
    std::string which;
    for (std::size_t i = 0; i < cons.size(); ++i) {
      double v = cons[i].value(u);
      if (v > worst) {
        worst = v;
        which = cp.ineq_names[i];
      }
    }
    if (!(worst < 0.0)) throw InfeasibleError("phase I found no strictly feasible point; worst constraint " + which);
  }

  const double t = barrier_path(obj, cons, u, opt, opt.tol, res.newton_steps, "barrier");

  // KKT residual with barrier multipliers 1/(t * -f_i)
  double v;
  Eigen::VectorXd g, gi;
  obj.derivatives(u, v, g, nullptr);
  double gap = 0.0;
  for (const auto& c : cons) {
    c.derivatives(u, v, gi, nullptr);
    const double lam = 1.0 / (t * -v);
    g += lam * gi;
    gap += lam * -v;
  }
  res.kkt_residual = std::max(g.norm(), gap);
  res.z = zp + N * u;
  return res;
}

// ---- SCA ----

SCAState sca_loop(const ProblemBuilder& builder, const Eigen::VectorXd& x0, const SCAOptions& opt) {
  if ((x0.array() <= 0.0).any()) throw DomainError("sca_loop: start point must be strictly positive");
  SCAState st;
  st.x = x0;
  st.penalty = opt.penalty;
  bool feasible_seen = false;
  std::ostringstream diag;
  for (int it = 1; it <= opt.max_iter; ++it) {
    GPProgram gp = builder(st.x, st.penalty);
    if (gp.vars.size() != st.x.size()) throw SizeError("problem builder changed the variable count");
    ConvexProblem cp = log_convexify(gp);
    InnerResult r = inner_solve(cp, st.x.array().log().matrix(), opt.inner);
    Eigen::VectorXd x_new = r.z.array().exp().matrix();
    const double obj = gp.objective(x_new);
    bool aux_ok = true;
    for (int a : gp.aux) aux_ok = aux_ok && x_new(a) <= 1.0 + opt.aux_tol;

    if (feasible_seen && !st.history.empty() && obj > st.history.back()) {
      // inexact inner solve can overshoot; keep the previous iterate
      diag << "iteration " << it << ": objective " << obj << " above " << st.history.back() << ", step rejected\n";
      st.converged = true;
      break;
    }
    const double step = (x_new - st.x).norm() / st.x.norm();
    st.x = x_new;
    st.history.push_back(obj);
    st.feasible.push_back(aux_ok);
    st.iterations = it;
    if (aux_ok)
      feasible_seen = true;
    else if (!feasible_seen)
      st.penalty *= 2.0;
    if (gp.exact && aux_ok) {
      st.converged = true;
      break;
    }
    if (step < opt.tol && (aux_ok || feasible_seen)) {
      st.converged = true;
      break;
    }
  }
  if (!st.converged) diag << "max_iter " << opt.max_iter << " reached without convergence\n";
  st.diagnostics = diag.str();
  return st;
}

std::string dump_problem(const GPProgram& gp) {
  std::ostringstream os;
  os.precision(17);
  auto mono = [&](const Monomial& m) {
    os << m.c;
    for (Eigen::Index j = 0; j < m.a.size(); ++j)
      if (m.a(j) != 0.0) os << ' ' << gp.vars.names[static_cast<std::size_t>(j)] << '^' << m.a(j);
    os << '\n';
  };
  os << "variables";
  for (int j = 0; j < gp.vars.size(); ++j)
    os << ' ' << gp.vars.names[j] << '[' << gp.vars.lo(j) << ',' << gp.vars.hi(j) << ']';
  os << "\nobjective\n";
  for (const auto& t : gp.objective.terms) mono(t);
  for (std::size_t i = 0; i < gp.ineq.size(); ++i) {
    os << "ineq " << gp.ineq_names[i] << " <= 1\n";
    for (const auto& t : gp.ineq[i].terms) mono(t);
  }
  for (std::size_t i = 0; i < gp.eq.size(); ++i) {
    os << "eq " << gp.eq_names[i] << " = 1\n";
    mono(gp.eq[i]);
  }
  return os.str();
}

}  // namespace fedspan
