#pragma once

#include "ekgdipole/types.hpp"

#include <array>

namespace ekgdipole {

// Isotropic Gaussian over a 3-d quantity.
struct GaussianPrior3 {
  Vec3 mean = Vec3::Zero();
  double sigma = 1.0;
};

// Elliptical thorax cross-section at heart level used to place the
// precordial prior means. The frame is: origin at torso center, +x patient
// left, +y anterior, +z superior.
struct TorsoEllipse {
  double half_width = 0.125;      // a, meters (chest width 25 cm)
  double axis_ratio = 2.75;       // a / b
  double angle_start_deg = 260.0;
  double angle_end_deg = 360.0;

  void validate() const;
};

// One prior per electrode, in electrode_names() order.
struct ElectrodePriorSet {
  std::array<GaussianPrior3, kNumElectrodes> priors{};
};

// Hyperparameters for the priors; every value here is overridable through
// the CLI config file.
struct PriorConfig {
  TorsoEllipse ellipse{};
  double precordial_sigma = 0.02;  // m
  double limb_sigma = 0.10;        // m
  Vec3 la_mean{0.30, 0.0, 0.0};
  Vec3 ra_mean{-0.30, 0.0, 0.0};
  Vec3 ll_mean{0.15, 0.0, -0.45};

  void validate() const;
};

// V1..V6 prior means: theta_k evenly spaced over [angle_start, angle_end],
// position (a cos(theta), -b sin(theta), 0) with b = a / axis_ratio. The
// sign convention sweeps right-parasternal -> anterior -> left-lateral.
std::array<Vec3, 6> precordial_prior_means(const TorsoEllipse& ellipse = {});

ElectrodePriorSet default_electrode_priors(const PriorConfig& config = {});

// Prior means as a layout (used for optimizer initialization).
ElectrodeLayout prior_mean_layout(const ElectrodePriorSet& priors);

// log N(s | 0, sigma_s^2 I) + log N(p | 0, sigma_p^2 I), constants included.
// If grad is non-null it receives d(logp)/d(location), d(logp)/d(moment).
double log_prior_dipole(const DipoleState& state, double sigma_s,
                        double sigma_p, DipoleState* grad = nullptr);

// Sum of the 9 electrode log-densities; optional gradient w.r.t. positions.
double log_prior_electrodes(const ElectrodeLayout& layout,
                            const ElectrodePriorSet& priors,
                            std::array<Vec3, kNumElectrodes>* grad = nullptr);

}  // namespace ekgdipole
