#include "ekgdipole/config_json.hpp"

#include "ekgdipole/forward.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace ekgdipole {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) {
    throw InvalidConfig(where + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw InvalidConfig("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec3(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 3) {
    throw InvalidConfig(std::string("key '") + key +
                        "' must be a 3-element array");
  }
  out = Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

FitConfig parse_fit_config(const json& j) {
  require_keys(j,
               {"sigma_noise", "sigma_s", "sigma_p", "max_outer_iterations",
                "lbfgs_memory", "lbfgs_max_iters", "gradient_tolerance",
                "n_restarts", "rng_seed", "degeneracy_penalty_weight",
                "min_distance", "kappa"},
               "fit config");
  FitConfig cfg;
  read(j, "sigma_noise", cfg.sigma_noise);
  read(j, "sigma_s", cfg.sigma_s);
  read(j, "sigma_p", cfg.sigma_p);
  read(j, "max_outer_iterations", cfg.max_outer_iterations);
  read(j, "lbfgs_memory", cfg.lbfgs_memory);
  read(j, "lbfgs_max_iters", cfg.lbfgs_max_iters);
  read(j, "gradient_tolerance", cfg.gradient_tolerance);
  read(j, "n_restarts", cfg.n_restarts);
  read(j, "rng_seed", cfg.rng_seed);
  read(j, "degeneracy_penalty_weight", cfg.degeneracy_penalty_weight);
  read(j, "min_distance", cfg.min_distance);
  read(j, "kappa", cfg.kappa);
  cfg.validate();
  return cfg;
}

PpcaConfig parse_ppca_config(const json& j) {
  require_keys(j, {"max_iters", "tol", "seed", "center", "min_noise_variance"},
               "ppca config");
  PpcaConfig cfg;
  read(j, "max_iters", cfg.max_iters);
  read(j, "tol", cfg.tol);
  read(j, "seed", cfg.seed);
  read(j, "center", cfg.center);
  read(j, "min_noise_variance", cfg.min_noise_variance);
  cfg.validate();
  return cfg;
}

PriorConfig parse_prior_config(const json& j) {
  require_keys(j,
               {"chest_half_width", "axis_ratio", "angle_start_deg",
                "angle_end_deg", "precordial_sigma", "limb_sigma", "la_mean",
                "ra_mean", "ll_mean"},
               "priors config");
  PriorConfig cfg;
  read(j, "chest_half_width", cfg.ellipse.half_width);
  read(j, "axis_ratio", cfg.ellipse.axis_ratio);
  read(j, "angle_start_deg", cfg.ellipse.angle_start_deg);
  read(j, "angle_end_deg", cfg.ellipse.angle_end_deg);
  read(j, "precordial_sigma", cfg.precordial_sigma);
  read(j, "limb_sigma", cfg.limb_sigma);
  read_vec3(j, "la_mean", cfg.la_mean);
  read_vec3(j, "ra_mean", cfg.ra_mean);
  read_vec3(j, "ll_mean", cfg.ll_mean);
  cfg.validate();
  return cfg;
}

MaskScheme parse_mask_scheme(const json& j) {
  require_keys(j,
               {"holdout_fraction", "window_seconds", "segment_seconds",
                "long_leads", "seed"},
               "mask config");
  MaskScheme scheme;
  read(j, "holdout_fraction", scheme.holdout_fraction);
  read(j, "window_seconds", scheme.window_seconds);
  read(j, "segment_seconds", scheme.segment_seconds);
  read(j, "seed", scheme.seed);
  if (j.contains("long_leads")) {
    scheme.long_leads.clear();
    for (const auto& entry : j.at("long_leads")) {
      const int idx = lead_index(entry.get<std::string>());
      if (idx < 0) {
        throw InvalidConfig("unknown lead name '" +
                            entry.get<std::string>() + "' in long_leads");
      }
      scheme.long_leads.push_back(idx);
    }
  }
  return scheme;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  require_keys(j, {"fit", "ppca", "priors", "mask"}, "run config");
  RunConfig cfg;
  if (j.contains("fit")) cfg.fit = parse_fit_config(j.at("fit"));
  if (j.contains("ppca")) cfg.ppca = parse_ppca_config(j.at("ppca"));
  if (j.contains("priors")) cfg.priors = parse_prior_config(j.at("priors"));
  if (j.contains("mask")) cfg.mask = parse_mask_scheme(j.at("mask"));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidConfig("bad JSON in " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

SynthSpec parse_synth_spec(const json& j) {
  require_keys(j,
               {"kind", "record_id", "frames", "sample_rate_hz", "noise_sigma",
                "seed", "noise_domain", "loop_center", "loop_radius", "beats",
                "moment_scale", "kappa", "n_components", "factor_scale",
                "count", "id_prefix"},
               "synth spec");
  SynthSpec spec;
  if (j.contains("kind")) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dipole_loop") {
      spec.kind = SynthSpec::Kind::DipoleLoop;
    } else if (kind == "low_rank") {
      spec.kind = SynthSpec::Kind::LowRank;
    } else {
      throw InvalidConfig("synth kind must be dipole_loop or low_rank");
    }
  }
  read(j, "record_id", spec.record_id);
  read(j, "frames", spec.frames);
  read(j, "sample_rate_hz", spec.sample_rate_hz);
  read(j, "noise_sigma", spec.noise_sigma);
  read(j, "seed", spec.seed);
  if (j.contains("noise_domain")) {
    const std::string domain = j.at("noise_domain").get<std::string>();
    if (domain == "lead") {
      spec.noise_domain = SynthSpec::NoiseDomain::Lead;
    } else if (domain == "electrode") {
      spec.noise_domain = SynthSpec::NoiseDomain::Electrode;
    } else {
      throw InvalidConfig("noise_domain must be lead or electrode");
    }
  }
  read_vec3(j, "loop_center", spec.loop_center);
  read(j, "loop_radius", spec.loop_radius);
  read(j, "beats", spec.beats);
  read(j, "moment_scale", spec.moment_scale);
  read(j, "kappa", spec.kappa);
  read(j, "n_components", spec.n_components);
  read(j, "factor_scale", spec.factor_scale);
  spec.validate();
  return spec;
}

SynthSuite parse_synth_suite(const json& j) {
  SynthSuite suite;
  suite.base = parse_synth_spec(j);
  read(j, "count", suite.count);
  read(j, "id_prefix", suite.id_prefix);
  if (suite.count < 1) throw InvalidConfig("synth count must be >= 1");
  return suite;
}

SynthSuite load_synth_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open synth spec " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidConfig("bad JSON in " + path.string() + ": " + e.what());
  }
  return parse_synth_suite(j);
}

std::string config_help_text() {
  return
      "Config file (JSON) sections and defaults:\n"
      "  fit:    sigma_noise=0.02 (mV), sigma_s=0.1 (m), sigma_p=1e-4 (A*m),\n"
      "          max_outer_iterations=20, lbfgs_memory=10, lbfgs_max_iters=500,\n"
      "          gradient_tolerance=1e-6, n_restarts=3, rng_seed=0,\n"
      "          degeneracy_penalty_weight=1.0, min_distance=0.001 (m), kappa=0.2 (S/m)\n"
      "  ppca:   max_iters=500, tol=1e-8, seed=0, center=true, min_noise_variance=1e-12\n"
      "  priors: chest_half_width=0.125 (m), axis_ratio=2.75, angle_start_deg=260,\n"
      "          angle_end_deg=360, precordial_sigma=0.02 (m), limb_sigma=0.1 (m),\n"
      "          la_mean=[0.3,0,0], ra_mean=[-0.3,0,0], ll_mean=[0.15,0,-0.45]\n"
      "  mask:   holdout_fraction=0.1, window_seconds=1.0, segment_seconds=2.5,\n"
      "          long_leads=[\"II\",\"V1\",\"V5\"], seed=0\n"
      "Synth spec file (JSON): kind=dipole_loop|low_rank, count=1, id_prefix=rec,\n"
      "  frames=2500, sample_rate_hz=250, noise_sigma=0.02 (mV), seed=0,\n"
      "  noise_domain=lead|electrode, loop_center=[0,0,0], loop_radius=0.02 (m),\n"
      "  beats=12, moment_scale=1e-4 (A*m), kappa=0.2, n_components=3, factor_scale=0.5 (mV)\n"
      "Unknown keys are rejected.";
}

}  // namespace ekgdipole
