#include "ekgdipole/priors.hpp"

#include <cmath>
#include <numbers>

namespace ekgdipole {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

// log N(x | mu, sigma^2 I_3); gradient accumulated into *grad if non-null.
double isotropic_log_density(const Vec3& x, const Vec3& mu, double sigma,
                             Vec3* grad) {
  const double var = sigma * sigma;
  const Vec3 diff = x - mu;
  if (grad) *grad = -diff / var;
  return -1.5 * (kLog2Pi + 2.0 * std::log(sigma)) - 0.5 * diff.squaredNorm() / var;
}

}  // namespace

void TorsoEllipse::validate() const {
  if (!(half_width > 0.0)) throw InvalidConfig("torso half_width must be > 0");
  if (!(axis_ratio > 1.0)) throw InvalidConfig("torso axis_ratio must be > 1");
  if (!(angle_start_deg < angle_end_deg)) {
    throw InvalidConfig("torso angle_start must be < angle_end");
  }
}

void PriorConfig::validate() const {
  ellipse.validate();
  if (!(precordial_sigma > 0.0) || !(limb_sigma > 0.0)) {
    throw InvalidConfig("prior sigmas must be > 0");
  }
}

std::array<Vec3, 6> precordial_prior_means(const TorsoEllipse& ellipse) {
  ellipse.validate();
  const double a = ellipse.half_width;
  const double b = a / ellipse.axis_ratio;
  std::array<Vec3, 6> means;
  for (int k = 0; k < 6; ++k) {
    const double theta_deg =
        ellipse.angle_start_deg +
        k * (ellipse.angle_end_deg - ellipse.angle_start_deg) / 5.0;
    const double theta = theta_deg * std::numbers::pi / 180.0;
    means[k] = Vec3(a * std::cos(theta), -b * std::sin(theta), 0.0);
  }
  return means;
}

ElectrodePriorSet default_electrode_priors(const PriorConfig& config) {
  config.validate();
  ElectrodePriorSet set;
  set.priors[0] = {config.la_mean, config.limb_sigma};
  set.priors[1] = {config.ra_mean, config.limb_sigma};
  set.priors[2] = {config.ll_mean, config.limb_sigma};
  const auto precordial = precordial_prior_means(config.ellipse);
  for (int k = 0; k < 6; ++k) {
    set.priors[3 + k] = {precordial[k], config.precordial_sigma};
  }
  return set;
}

ElectrodeLayout prior_mean_layout(const ElectrodePriorSet& priors) {
  ElectrodeLayout layout;
  for (int e = 0; e < kNumElectrodes; ++e) {
    layout.positions[e] = priors.priors[e].mean;
  }
  return layout;
}

double log_prior_dipole(const DipoleState& state, double sigma_s,
                        double sigma_p, DipoleState* grad) {
  if (!(sigma_s > 0.0) || !(sigma_p > 0.0)) {
    throw InvalidConfig("dipole prior sigmas must be > 0");
  }
  Vec3* gs = grad ? &grad->location : nullptr;
  Vec3* gp = grad ? &grad->moment : nullptr;
  return isotropic_log_density(state.location, Vec3::Zero(), sigma_s, gs) +
         isotropic_log_density(state.moment, Vec3::Zero(), sigma_p, gp);
}

double log_prior_electrodes(const ElectrodeLayout& layout,
                            const ElectrodePriorSet& priors,
                            std::array<Vec3, kNumElectrodes>* grad) {
  double total = 0.0;
  for (int e = 0; e < kNumElectrodes; ++e) {
    Vec3* g = grad ? &(*grad)[e] : nullptr;
    total += isotropic_log_density(layout.positions[e], priors.priors[e].mean,
                                   priors.priors[e].sigma, g);
  }
  return total;
}

}  // namespace ekgdipole
