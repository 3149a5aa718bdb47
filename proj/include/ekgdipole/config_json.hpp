#pragma once

#include "ekgdipole/map_fit.hpp"
#include "ekgdipole/ppca.hpp"
#include "ekgdipole/priors.hpp"
#include "ekgdipole/record.hpp"
#include "ekgdipole/synth.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>

namespace ekgdipole {

// A run config file bundles every tunable section; each section falls back
// to defaults when absent. Unknown keys anywhere are rejected
// (InvalidConfig).
struct RunConfig {
  FitConfig fit{};
  PpcaConfig ppca{};
  PriorConfig priors{};
  MaskScheme mask{};
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

SynthSpec parse_synth_spec(const nlohmann::json& j);

// Multi-record synth specs: `count` records with ids `<id_prefix>_<k>` and
// per-record seeds derived from the base seed.
struct SynthSuite {
  SynthSpec base;
  int count = 1;
  std::string id_prefix = "rec";
};
SynthSuite parse_synth_suite(const nlohmann::json& j);
SynthSuite load_synth_suite(const std::filesystem::path& path);

// Documented defaults for `--help`.
std::string config_help_text();

}  // namespace ekgdipole
