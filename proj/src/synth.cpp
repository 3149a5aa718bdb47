#include "ekgdipole/synth.hpp"

#include "ekgdipole/forward.hpp"
#include "ekgdipole/rng.hpp"

#include <cmath>
#include <numbers>

namespace ekgdipole {

void SynthSpec::validate() const {
  if (frames < 2) throw InvalidConfig("synth frames must be >= 2");
  if (!(sample_rate_hz > 0.0)) {
    throw InvalidConfig("synth sample_rate_hz must be > 0");
  }
  if (noise_sigma < 0.0) throw InvalidConfig("synth noise_sigma must be >= 0");
  if (kind == Kind::DipoleLoop) {
    if (!(loop_radius > 0.0) || !(moment_scale > 0.0)) {
      throw InvalidConfig("synth loop scales must be > 0");
    }
    if (beats < 1) throw InvalidConfig("synth beats must be >= 1");
    if (!(kappa > 0.0)) throw InvalidConfig("synth kappa must be > 0");
    prior_config.validate();
  } else {
    if (n_components < 1 || n_components > kNumLeads - 1) {
      throw InvalidConfig("synth n_components must be in [1, 11]");
    }
    if (!(factor_scale > 0.0)) {
      throw InvalidConfig("synth factor_scale must be > 0");
    }
  }
}

std::pair<EkgRecord, SynthTruth> generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  EkgRecord record;
  record.record_id = spec.record_id;
  record.sample_rate_hz = spec.sample_rate_hz;
  record.samples.resize(spec.frames, kNumLeads);
  record.mask.assign(static_cast<std::size_t>(spec.frames) * kNumLeads,
                     MaskState::Observed);

  SynthTruth truth;

  if (spec.kind == SynthSpec::Kind::DipoleLoop) {
    const auto priors = default_electrode_priors(spec.prior_config);
    for (int e = 0; e < kNumElectrodes; ++e) {
      const auto& prior = priors.priors[e];
      truth.layout.positions[e] =
          prior.mean + Vec3(rng.normal(0.0, prior.sigma),
                            rng.normal(0.0, prior.sigma),
                            rng.normal(0.0, prior.sigma));
    }
    truth.layout.validate();

    const double duration = spec.frames / spec.sample_rate_hz;
    const double beat_hz = spec.beats / duration;
    truth.trajectory.resize(spec.frames);
    for (int t = 0; t < spec.frames; ++t) {
      const double time = t / spec.sample_rate_hz;
      const double phase = 2.0 * std::numbers::pi * beat_hz * time;
      // Location loop in the x-z plane; moment rotates in the x-y plane
      // under a raised-cosine envelope (zero at beat boundaries).
      DipoleState& state = truth.trajectory[t];
      state.location =
          spec.loop_center + spec.loop_radius * Vec3(std::cos(phase), 0.0,
                                                     std::sin(phase));
      const double envelope = 0.5 * (1.0 - std::cos(phase));
      state.moment = spec.moment_scale * envelope *
                     Vec3(std::cos(phase), std::sin(phase), 0.0);
    }

    const Conductivity kappa{spec.kappa};
    for (int t = 0; t < spec.frames; ++t) {
      if (spec.noise_domain == SynthSpec::NoiseDomain::Electrode) {
        auto phi = electrode_potentials(truth.trajectory[t], truth.layout,
                                        kappa);
        for (int e = 0; e < kNumElectrodes; ++e) {
          phi[e] += rng.normal(0.0, spec.noise_sigma) / 1000.0;  // mV -> V
        }
        record.samples.row(t) = (1000.0 * (lead_matrix() * phi)).transpose();
      } else {
        auto leads = leads_from_dipole(truth.trajectory[t], truth.layout,
                                       kappa);
        for (int l = 0; l < kNumLeads; ++l) {
          leads[l] += rng.normal(0.0, spec.noise_sigma);
        }
        record.samples.row(t) = leads.transpose();
      }
    }
  } else {
    const int K = spec.n_components;
    truth.factors.resize(kNumLeads, K);
    for (int l = 0; l < kNumLeads; ++l) {
      for (int k = 0; k < K; ++k) {
        truth.factors(l, k) = rng.normal(0.0, spec.factor_scale);
      }
    }
    truth.mean.resize(kNumLeads);
    for (int l = 0; l < kNumLeads; ++l) {
      truth.mean[l] = rng.normal(0.0, spec.factor_scale);
    }
    truth.latents.resize(spec.frames, K);
    for (int t = 0; t < spec.frames; ++t) {
      for (int k = 0; k < K; ++k) {
        truth.latents(t, k) = rng.normal(0.0, 1.0);
      }
    }
    for (int t = 0; t < spec.frames; ++t) {
      for (int l = 0; l < kNumLeads; ++l) {
        record.samples(t, l) = truth.mean[l] +
                               truth.factors.row(l).dot(truth.latents.row(t)) +
                               rng.normal(0.0, spec.noise_sigma);
      }
    }
  }

  return {std::move(record), std::move(truth)};
}

}  // namespace ekgdipole
