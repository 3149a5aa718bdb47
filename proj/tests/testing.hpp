#pragma once

#include "ekgdipole/record.hpp"
#include "ekgdipole/rng.hpp"
#include "ekgdipole/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ekgtest {

using ekgdipole::EkgRecord;
using ekgdipole::kNumLeads;
using ekgdipole::MaskState;
using ekgdipole::Matrix;
using ekgdipole::Rng;
using ekgdipole::Vec3;
using ekgdipole::Vector;

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central finite differences with per-coordinate steps; the oracle side of
// every gradient check. Only calls the scalar objective.
inline Vector finite_difference_gradient(
    const std::function<double(const Vector&)>& f, Vector x,
    const Vector& steps) {
  Vector grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double h = steps[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Worst per-coordinate relative error between an analytic gradient and the
// finite-difference oracle; tiny coordinates are compared against a floor
// scaled to the gradient's magnitude.
inline double max_gradient_rel_err(const Vector& analytic, const Vector& fd) {
  const double scale =
      std::max(analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, rel_err(analytic[i], fd[i], 1e-9 * scale));
  }
  return worst;
}

inline Vec3 random_vec3(Rng& rng, double scale) {
  return Vec3(rng.normal(0.0, scale), rng.normal(0.0, scale),
              rng.normal(0.0, scale));
}

// Random offset with every component bounded away from zero, for gradient
// checks where a near-zero coordinate would fall below what the
// finite-difference oracle can certify.
inline Vec3 offset_vec3(Rng& rng, double scale) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    const double n = rng.normal();
    v[i] = scale * std::copysign(0.1 + std::abs(n), n);
  }
  return v;
}

// A fully random record: values ~ N(0, 1) mV, each entry independently
// Observed / HeldOut / Missing.
inline EkgRecord random_record(Rng& rng, int frames, double rate_hz = 250.0,
                               double p_heldout = 0.15,
                               double p_missing = 0.1) {
  EkgRecord record;
  record.record_id = "random";
  record.sample_rate_hz = rate_hz;
  record.samples.resize(frames, kNumLeads);
  record.mask.assign(static_cast<std::size_t>(frames) * kNumLeads,
                     MaskState::Observed);
  for (int t = 0; t < frames; ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      record.samples(t, l) = rng.normal(0.0, 1.0);
      const double u = rng.uniform();
      if (u < p_missing) {
        record.set_mask(t, l, MaskState::Missing);
        record.samples(t, l) = std::numeric_limits<double>::quiet_NaN();
      } else if (u < p_missing + p_heldout) {
        record.set_mask(t, l, MaskState::HeldOut);
      }
    }
  }
  return record;
}

}  // namespace ekgtest
