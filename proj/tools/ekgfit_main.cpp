// ekgfit: synthesize, mask, fit, and evaluate 12-lead EKG records with the
// moving-dipole model and the PPCA baseline.

#include "ekgdipole/config_json.hpp"
#include "ekgdipole/evaluation.hpp"
#include "ekgdipole/forward.hpp"
#include "ekgdipole/map_fit.hpp"
#include "ekgdipole/plot.hpp"
#include "ekgdipole/ppca.hpp"
#include "ekgdipole/record.hpp"
#include "ekgdipole/rng.hpp"
#include "ekgdipole/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ekgdipole;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

bool is_data_error(const std::exception& e) {
  return dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const NonUniformSampling*>(&e) ||
         dynamic_cast<const UnknownLeadHeader*>(&e) ||
         dynamic_cast<const InsufficientData*>(&e) ||
         dynamic_cast<const InsufficientLength*>(&e) ||
         dynamic_cast<const NoObservedData*>(&e) ||
         dynamic_cast<const NoHeldOutData*>(&e) ||
         dynamic_cast<const EmptyInput*>(&e) ||
         dynamic_cast<const RecordSetMismatch*>(&e) ||
         dynamic_cast<const DimensionMismatch*>(&e) ||
         dynamic_cast<const DegenerateGeometry*>(&e);
}

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << content;
}

// Full T x 12 matrix as a data CSV (every cell filled).
void write_matrix_csv(const fs::path& path, const Matrix& values,
                      double sample_rate_hz) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "time_s,I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6\n";
  for (int t = 0; t < values.rows(); ++t) {
    out << format_fixed6(t / sample_rate_hz);
    for (int l = 0; l < kNumLeads; ++l) {
      out << ',' << format_fixed6(values(t, l));
    }
    out << "\n";
  }
}

std::vector<fs::path> list_record_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (!name.ends_with(".csv")) continue;
    if (name.ends_with(".imputed.csv") || name.ends_with(".mask.csv") ||
        name.ends_with(".truth.csv")) {
      continue;
    }
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

json layout_to_json(const ElectrodeLayout& layout) {
  json out;
  for (int e = 0; e < kNumElectrodes; ++e) {
    const Vec3& r = layout.positions[e];
    out[electrode_names()[e]] = {r.x(), r.y(), r.z()};
  }
  return out;
}

// ---------------------------------------------------------------- synth --

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const SynthSuite suite = load_synth_suite(spec_path);
  fs::create_directories(out_dir);
  for (int k = 0; k < suite.count; ++k) {
    SynthSpec spec = suite.base;
    if (suite.count > 1) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03d", suite.id_prefix.c_str(), k);
      spec.record_id = id;
      spec.seed = derive_seed(suite.base.seed, static_cast<std::uint64_t>(k));
    }
    auto [record, truth] = generate(spec);
    write_record(record, out_dir / (spec.record_id + ".csv"));

    json gen;
    gen["record_id"] = spec.record_id;
    gen["seed"] = spec.seed;
    if (spec.kind == SynthSpec::Kind::DipoleLoop) {
      gen["kind"] = "dipole_loop";
      gen["layout"] = layout_to_json(truth.layout);
      json traj = json::array();
      for (const auto& state : truth.trajectory) {
        traj.push_back({state.location.x(), state.location.y(),
                        state.location.z(), state.moment.x(),
                        state.moment.y(), state.moment.z()});
      }
      gen["trajectory"] = std::move(traj);
    } else {
      gen["kind"] = "low_rank";
      json factors = json::array();
      for (int l = 0; l < kNumLeads; ++l) {
        json row = json::array();
        for (int c = 0; c < truth.factors.cols(); ++c) {
          row.push_back(truth.factors(l, c));
        }
        factors.push_back(std::move(row));
      }
      gen["factors"] = std::move(factors);
      json mean = json::array();
      for (int l = 0; l < kNumLeads; ++l) mean.push_back(truth.mean[l]);
      gen["mean"] = std::move(mean);
      json latents = json::array();
      for (int t = 0; t < truth.latents.rows(); ++t) {
        json row = json::array();
        for (int c = 0; c < truth.latents.cols(); ++c) {
          row.push_back(truth.latents(t, c));
        }
        latents.push_back(std::move(row));
      }
      gen["latents"] = std::move(latents);
    }
    write_text_file(out_dir / (spec.record_id + ".gen.json"), gen.dump(1));
    std::cout << "wrote " << (out_dir / (spec.record_id + ".csv")).string()
              << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- mask --

int cmd_mask(const fs::path& in_path, const std::string& scheme_name,
             const fs::path& config_path, const fs::path& out_path) {
  RunConfig config;
  if (!config_path.empty()) config = load_run_config(config_path);
  MaskScheme scheme = config.mask;
  if (scheme_name == "ptb") {
    scheme.kind = MaskScheme::Kind::PtbHoldout;
  } else if (scheme_name == "ed") {
    scheme.kind = MaskScheme::Kind::EdLayout;
  } else {
    throw InvalidConfig("--scheme must be ptb or ed");
  }
  const EkgRecord record = read_record(in_path);
  EkgRecord masked = apply_mask_scheme(record, scheme);
  masked.record_id = out_path.stem().string();
  if (!out_path.parent_path().empty()) {
    fs::create_directories(out_path.parent_path());
  }
  write_record(masked, out_path);
  std::cout << "wrote " << out_path.string() << " (held-out "
            << masked.count(MaskState::HeldOut) << ", missing "
            << masked.count(MaskState::Missing) << " of "
            << masked.frames() * kNumLeads << " entries)\n";
  return 0;
}

// ------------------------------------------------------------------ fit --

struct FitJobResult {
  std::string line;
  bool ok = false;
};

FitJobResult fit_one_record(const fs::path& path, const std::string& model,
                            const RunConfig& config, const fs::path& out_dir) {
  FitJobResult result;
  try {
    const EkgRecord record = read_record(path);
    Matrix imputed;
    json diagnostics;
    diagnostics["record_id"] = record.record_id;
    diagnostics["model"] = model;

    if (model == "dipole") {
      const auto priors = default_electrode_priors(config.priors);
      const FitResult fitted = fit(record, priors, config.fit);
      imputed = impute(fitted, record);
      diagnostics["log_joint"] = fitted.log_joint;
      diagnostics["converged"] = fitted.converged;
      diagnostics["iterations"] = fitted.iterations;
      diagnostics["layout"] = layout_to_json(fitted.layout);
    } else {
      const int k = model == "ppca3" ? 3 : 6;
      const PpcaFit fitted = ppca_fit(record, k, config.ppca);
      imputed = ppca_impute(fitted, record);
      diagnostics["log_likelihood"] = fitted.log_likelihood_trace.back();
      diagnostics["log_likelihood_trace"] = fitted.log_likelihood_trace;
      diagnostics["converged"] = fitted.converged;
      diagnostics["iterations"] = fitted.log_likelihood_trace.size();
      diagnostics["noise_variance"] = fitted.model.noise_variance;
    }

    const std::string base = record.record_id + "." + model;
    write_matrix_csv(out_dir / (base + ".imputed.csv"), imputed,
                     record.sample_rate_hz);
    write_text_file(out_dir / (base + ".json"), diagnostics.dump(1));
    result.ok = true;
    result.line = "fit " + record.record_id + " (" + model + "): ok";
  } catch (const std::exception& e) {
    result.line =
        "fit " + path.filename().string() + " (" + model + ") failed: " + e.what();
  }
  return result;
}

int cmd_fit(const fs::path& in_path, const std::string& model,
            const fs::path& config_path, const fs::path& out_dir, int jobs) {
  if (model != "dipole" && model != "ppca3" && model != "ppca6") {
    throw InvalidConfig("--model must be dipole, ppca3, or ppca6");
  }
  RunConfig config;
  if (!config_path.empty()) config = load_run_config(config_path);

  std::vector<fs::path> files;
  if (fs::is_directory(in_path)) {
    files = list_record_files(in_path);
    if (files.empty()) throw InsufficientData("no record files in " + in_path.string());
  } else {
    files.push_back(in_path);
  }
  fs::create_directories(out_dir);

  std::vector<FitJobResult> results(files.size());
  std::atomic<std::size_t> next{0};
  const int n_threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(files.size())));
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= files.size()) break;
      results[i] = fit_one_record(files[i], model, config, out_dir);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int n_failed = 0;
  for (const auto& r : results) {
    if (r.ok) {
      std::cout << r.line << "\n";
    } else {
      std::cerr << r.line << "\n";
      ++n_failed;
    }
  }
  if (n_failed > 0) {
    std::cerr << n_failed << "/" << files.size() << " records failed\n";
  }
  return n_failed == static_cast<int>(files.size()) ? kExitData : 0;
}

// ----------------------------------------------------------------- eval --

int cmd_eval(const fs::path& truth_dir, const std::vector<fs::path>& imputed_dirs,
             int n_bootstrap, std::uint64_t seed, const fs::path& out_dir) {
  std::map<std::string, EkgRecord> truth;
  for (const auto& path : list_record_files(truth_dir)) {
    EkgRecord record = read_record(path);
    truth.emplace(record.record_id, std::move(record));
  }
  if (truth.empty()) {
    throw InsufficientData("no truth records in " + truth_dir.string());
  }

  // <record_id>.<model>.imputed.csv, grouped by model.
  std::map<std::string, std::map<std::string, fs::path>> by_model;
  for (const auto& dir : imputed_dirs) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string name = entry.path().filename().string();
      if (!name.ends_with(".imputed.csv")) continue;
      name.resize(name.size() - std::string(".imputed.csv").size());
      const auto dot = name.rfind('.');
      if (dot == std::string::npos) continue;
      const std::string record_id = name.substr(0, dot);
      const std::string model = name.substr(dot + 1);
      by_model[model][record_id] = entry.path();
    }
  }
  if (by_model.empty()) {
    throw InsufficientData("no *.imputed.csv files found");
  }

  fs::create_directories(out_dir);
  std::vector<EvalReport> reports;
  for (const auto& [model, records] : by_model) {
    EvalReport report;
    report.model_label = model;
    for (const auto& [record_id, path] : records) {
      const auto it = truth.find(record_id);
      if (it == truth.end()) {
        throw RecordSetMismatch("imputed record " + record_id +
                                " has no truth record");
      }
      const EkgRecord imputed = read_record(path);
      report.scores[record_id] = holdout_rmse(it->second, imputed.samples);
      write_text_file(
          out_dir / (record_id + "." + model + ".svg"),
          reconstruction_overlay_svg(it->second, imputed.samples, model));
    }
    if (report.scores.size() != truth.size()) {
      throw RecordSetMismatch("model " + model + " covers " +
                              std::to_string(report.scores.size()) + " of " +
                              std::to_string(truth.size()) + " records");
    }
    reports.push_back(std::move(report));
  }

  const ComparisonTable table = compare_models(reports, n_bootstrap, seed);
  write_text_file(out_dir / "report.csv", report_csv(reports));
  write_text_file(out_dir / "summary.csv", table.summary_csv());
  write_text_file(out_dir / "summary_median_rmse.svg",
                  median_distribution_svg(table));
  std::cout << table.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-dipole EKG model: synthesize, mask, fit, evaluate"};
  app.require_subcommand(1);
  app.footer(config_help_text());

  std::string spec_path, in_path, scheme, config_path, out_path, model;
  std::string truth_dir;
  std::vector<std::string> imputed_dirs;
  int jobs = 1;
  int n_bootstrap = 1000;
  std::uint64_t seed = 0;

  auto* synth_cmd =
      app.add_subcommand("synth", "Generate synthetic records from a spec");
  synth_cmd->add_option("--spec", spec_path, "Synth spec JSON file")
      ->required();
  synth_cmd->add_option("--out", out_path, "Output directory")->required();

  auto* mask_cmd =
      app.add_subcommand("mask", "Apply a ptb or ed mask scheme to a record");
  mask_cmd->add_option("--in", in_path, "Input record CSV")->required();
  mask_cmd->add_option("--scheme", scheme, "ptb or ed")->required();
  mask_cmd->add_option("--config", config_path, "Run config JSON");
  mask_cmd->add_option("--out", out_path, "Output record CSV")->required();

  auto* fit_cmd = app.add_subcommand(
      "fit", "Fit a model to a record (or every record in a directory)");
  fit_cmd->add_option("--in", in_path, "Record CSV or directory")->required();
  fit_cmd->add_option("--model", model, "dipole, ppca3, or ppca6")->required();
  fit_cmd->add_option("--config", config_path, "Run config JSON");
  fit_cmd->add_option("--out", out_path, "Output directory")->required();
  fit_cmd->add_option("--jobs", jobs, "Concurrent record fits")
      ->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand(
      "eval", "Score imputations against held-out truth and compare models");
  eval_cmd->add_option("--truth", truth_dir, "Directory of truth records")
      ->required();
  eval_cmd
      ->add_option("--imputed", imputed_dirs,
                   "Directories of *.imputed.csv files (repeatable)")
      ->required();
  eval_cmd->add_option("--bootstrap", n_bootstrap, "Bootstrap resample count")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", seed, "Bootstrap seed");
  eval_cmd->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(spec_path, out_path);
    if (mask_cmd->parsed()) {
      return cmd_mask(in_path, scheme, config_path, out_path);
    }
    if (fit_cmd->parsed()) {
      return cmd_fit(in_path, model, config_path, out_path, jobs);
    }
    if (eval_cmd->parsed()) {
      std::vector<fs::path> dirs(imputed_dirs.begin(), imputed_dirs.end());
      return cmd_eval(truth_dir, dirs, n_bootstrap, seed, out_path);
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    if (is_data_error(e)) {
      std::cerr << "data error: " << e.what() << "\n";
      return kExitData;
    }
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
