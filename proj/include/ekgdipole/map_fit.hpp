#pragma once

#include "ekgdipole/priors.hpp"
#include "ekgdipole/record.hpp"
#include "ekgdipole/types.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace ekgdipole {

struct FitConfig {
  double sigma_noise = 0.02;  // observation noise, mV
  double sigma_s = 0.10;      // dipole location prior scale, m
  double sigma_p = 1e-4;      // dipole moment prior scale, A*m
  int max_outer_iterations = 20;
  int lbfgs_memory = 10;
  int lbfgs_max_iters = 500;  // per joint pass
  double gradient_tolerance = 1e-6;
  int n_restarts = 3;
  std::uint64_t rng_seed = 0;
  double degeneracy_penalty_weight = 1.0;
  double min_distance = kDefaultMinDistance;  // m
  double kappa = 0.2;                         // S/m

  void validate() const;
};

struct FitResult {
  std::vector<DipoleState> trajectory;
  ElectrodeLayout layout;
  double log_joint = 0.0;
  Matrix reconstruction;  // T x 12, mV, model leads at every entry
  bool converged = false;
  int iterations = 0;  // outer block/joint rounds used by the best restart
};

struct MomentPosterior {
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
};

// Log-joint of the record under the moving-dipole model: Gaussian
// log-likelihood over Observed entries (mean = model leads, scale
// sigma_noise, constants included) + dipole priors per frame + electrode
// location priors, minus degeneracy_penalty_weight * sum of
// softplus((min_distance - dist)/min_distance) over all frame/electrode
// pairs.
double log_joint(const std::vector<DipoleState>& trajectory,
                 const ElectrodeLayout& layout, const EkgRecord& record,
                 const ElectrodePriorSet& priors, const FitConfig& config);

// Exact gradient of log_joint over all 6T + 27 parameters, packed as
// [s_0, p_0, s_1, p_1, ..., r_la, r_ra, ..., r_v6].
Vector log_joint_gradient(const std::vector<DipoleState>& trajectory,
                          const ElectrodeLayout& layout,
                          const EkgRecord& record,
                          const ElectrodePriorSet& priors,
                          const FitConfig& config);

// The potential is linear in the moment, so with the location and layout
// fixed the moment posterior is an exact Gaussian. `leads` and `mask` are
// one frame (12 entries); only Observed entries inform the posterior.
// Throws NoObservedData when no entry is observed and DegenerateGeometry
// when the location is within config.min_distance of an electrode.
MomentPosterior conditional_moment_posterior(
    const Vec3& location, const ElectrodeLayout& layout,
    const Eigen::Matrix<double, kNumLeads, 1>& leads,
    const std::array<MaskState, kNumLeads>& mask, const FitConfig& config);

// Restart initialization: layout = prior means (restart 0) or prior means
// plus seeded Gaussian jitter growing with restart_index; locations get a
// small seeded jitter around the origin; moments come from the conditional
// moment posterior (zero in frames with no observed entry).
std::pair<std::vector<DipoleState>, ElectrodeLayout> initialize(
    const EkgRecord& record, const ElectrodePriorSet& priors,
    const FitConfig& config, int restart_index);

// MAP fit: n_restarts independent runs, each alternating per-frame block
// updates (exact moment posterior + a few L-BFGS steps on the location)
// with a joint L-BFGS pass over all parameters; returns the best restart.
// Frames with no observed entry stay at the zero state (their MAP).
// Throws NoObservedData when the record has no observed entry at all.
FitResult fit(const EkgRecord& record, const ElectrodePriorSet& priors,
              const FitConfig& config);

// Model reconstruction at HeldOut/Missing entries, observed values passed
// through unchanged.
Matrix impute(const FitResult& result, const EkgRecord& record);

}  // namespace ekgdipole
