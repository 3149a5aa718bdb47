#include "ekgdipole/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace ekgdipole::opt {

namespace {

struct Correction {
  Vector s;
  Vector y;
  double rho;
};

// Cubic interpolation minimizer of a 1-d function known at two points with
// derivatives; falls back to bisection when the cubic is ill-conditioned.
double interpolate_step(double a_lo, double f_lo, double g_lo, double a_hi,
                        double f_hi, double g_hi) {
  const double d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
  const double disc = d1 * d1 - g_lo * g_hi;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), a_hi - a_lo);
    double a = a_hi - (a_hi - a_lo) * (g_hi + d2 - d1) / (g_hi - g_lo + 2.0 * d2);
    if (std::isfinite(a)) {
      const double lo = std::min(a_lo, a_hi);
      const double hi = std::max(a_lo, a_hi);
      const double margin = 0.1 * (hi - lo);
      if (a > lo + margin && a < hi - margin) return a;
    }
  }
  return 0.5 * (a_lo + a_hi);
}

class LineSearch {
 public:
  LineSearch(const Objective& objective, const Vector& x0, const Vector& d,
             double f0, double dg0, const LbfgsParams& params)
      : objective_(objective), x0_(x0), d_(d), f0_(f0), dg0_(dg0),
        params_(params), trial_x_(x0.size()), trial_grad_(x0.size()) {}

  // Evaluates phi(a) = f(x0 + a d) and phi'(a); counts evaluations.
  void eval(double a) {
    trial_x_ = x0_ + a * d_;
    phi_ = objective_(trial_x_, trial_grad_);
    dphi_ = trial_grad_.dot(d_);
    ++evals_;
  }

  bool armijo(double a) const { return phi_ <= f0_ + params_.armijo_c1 * a * dg0_; }
  bool curvature() const { return std::abs(dphi_) <= -params_.wolfe_c2 * dg0_; }

  // Strong-Wolfe search (bracket then zoom). Returns the accepted step or 0
  // on failure. On success trial_x_/trial_grad_/phi_ hold the new point.
  double run(double a_init) {
    double a_prev = 0.0, f_prev = f0_, g_prev = dg0_;
    double a = a_init;
    for (int i = 0; i < params_.max_line_search; ++i) {
      eval(a);
      if (!std::isfinite(phi_) || !armijo(a) || (i > 0 && phi_ >= f_prev)) {
        return zoom(a_prev, f_prev, g_prev, a, phi_, dphi_);
      }
      if (curvature()) return a;
      if (dphi_ >= 0.0) {
        return zoom(a, phi_, dphi_, a_prev, f_prev, g_prev);
      }
      a_prev = a; f_prev = phi_; g_prev = dphi_;
      a *= 2.0;
    }
    return 0.0;
  }

  double zoom(double a_lo, double f_lo, double g_lo, double a_hi, double f_hi,
              double g_hi) {
    for (int i = 0; i < params_.max_line_search; ++i) {
      if (std::abs(a_hi - a_lo) <
          1e-12 * std::max(1.0, std::max(std::abs(a_lo), std::abs(a_hi)))) {
        break;
      }
      const double a = interpolate_step(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi);
      eval(a);
      if (!std::isfinite(phi_) || !armijo(a) || phi_ >= f_lo) {
        a_hi = a; f_hi = phi_; g_hi = dphi_;
        continue;
      }
      if (curvature()) return a;
      if (dphi_ * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo; f_hi = f_lo; g_hi = g_lo;
      }
      a_lo = a; f_lo = phi_; g_lo = dphi_;
    }
    // Interval exhausted: fall back to the best Armijo point if one exists.
    if (std::isfinite(f_lo) && a_lo > 0.0 && f_lo <= f0_ + params_.armijo_c1 * a_lo * dg0_) {
      eval(a_lo);
      return a_lo;
    }
    return 0.0;
  }

  double phi() const { return phi_; }
  const Vector& trial_x() const { return trial_x_; }
  const Vector& trial_grad() const { return trial_grad_; }
  int evals() const { return evals_; }

 private:
  const Objective& objective_;
  const Vector& x0_;
  const Vector& d_;
  double f0_;
  double dg0_;
  const LbfgsParams& params_;
  Vector trial_x_;
  Vector trial_grad_;
  double phi_ = 0.0;
  double dphi_ = 0.0;
  int evals_ = 0;
};

}  // namespace

LbfgsReport minimize(
    const Objective& objective, Vector& x, const LbfgsParams& params,
    const std::function<void(int, double, const Vector&)>& on_iteration) {
  const Eigen::Index n = x.size();
  Vector grad(n);
  double f = objective(x, grad);

  LbfgsReport report;
  report.objective = f;
  report.grad_inf_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (report.grad_inf_norm < params.gradient_tolerance) {
    report.converged = true;
    return report;
  }

  std::deque<Correction> history;
  Vector direction(n), q(n);
  std::vector<double> alpha(params.memory);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    // Two-loop recursion for d = -H grad.
    q = grad;
    const int m = static_cast<int>(history.size());
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = history[i].rho * history[i].s.dot(q);
      q -= alpha[i] * history[i].y;
    }
    if (m > 0) {
      const auto& last = history.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (int i = 0; i < m; ++i) {
      const double beta = history[i].rho * history[i].y.dot(q);
      q += (alpha[i] - beta) * history[i].s;
    }
    direction = -q;

    double dg = direction.dot(grad);
    if (!(dg < 0.0)) {
      // Not a descent direction; reset to steepest descent.
      history.clear();
      direction = -grad;
      dg = -grad.squaredNorm();
    }

    const double a_init =
        (iter == 0 && m == 0) ? std::min(1.0, 1.0 / grad.cwiseAbs().sum()) : 1.0;
    LineSearch search(objective, x, direction, f, dg, params);
    const double step = search.run(a_init);
    if (step <= 0.0) break;  // line search failed; keep the current iterate

    Vector s = step * direction;
    Vector y = search.trial_grad() - grad;
    x = search.trial_x();
    grad = search.trial_grad();
    f = search.phi();
    ++report.iterations;
    if (on_iteration) on_iteration(report.iterations, f, x);

    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      history.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(history.size()) > params.memory) {
        history.pop_front();
      }
    }

    report.grad_inf_norm = grad.cwiseAbs().maxCoeff();
    if (report.grad_inf_norm < params.gradient_tolerance) {
      report.converged = true;
      break;
    }
  }

  report.objective = f;
  return report;
}

}  // namespace ekgdipole::opt
