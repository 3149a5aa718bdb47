#pragma once

#include "ekgdipole/priors.hpp"
#include "ekgdipole/record.hpp"
#include "ekgdipole/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ekgdipole {

struct SynthSpec {
  enum class Kind { DipoleLoop, LowRank };
  // Noise can enter at the 9 electrodes (lead identities hold exactly in
  // the output) or directly on the 12 leads (faithful to the observation
  // model). Lead is the default.
  enum class NoiseDomain { Lead, Electrode };

  Kind kind = Kind::DipoleLoop;
  std::string record_id = "synth";
  int frames = 2500;
  double sample_rate_hz = 250.0;
  double noise_sigma = 0.02;  // mV
  std::uint64_t seed = 0;
  NoiseDomain noise_domain = NoiseDomain::Lead;

  // DipoleLoop
  Vec3 loop_center = Vec3::Zero();
  double loop_radius = 0.02;    // m
  int beats = 12;
  double moment_scale = 1e-4;   // A*m
  double kappa = 0.2;           // S/m
  PriorConfig prior_config{};   // layout is sampled from these priors

  // LowRank
  int n_components = 3;
  double factor_scale = 0.5;  // mV

  void validate() const;
};

struct SynthTruth {
  // DipoleLoop
  std::vector<DipoleState> trajectory;
  ElectrodeLayout layout;
  // LowRank
  Matrix factors;  // 12 x K
  Matrix latents;  // T x K
  Vector mean;     // 12
};

// Deterministic given the spec (seed included). DipoleLoop: the location
// traces a closed loop (orthogonal sinusoids at the beat frequency), the
// moment rotates in a plane under a raised-cosine beat envelope, the layout
// is one draw from the electrode priors, and leads come from the forward
// model plus noise. LowRank: x_t = mu + F z_t + eps with seeded Gaussian
// F, z, eps. The returned record is fully Observed.
std::pair<EkgRecord, SynthTruth> generate(const SynthSpec& spec);

}  // namespace ekgdipole
