// Python bindings for the moving-dipole EKG model.

#include "ekgdipole/evaluation.hpp"
#include "ekgdipole/forward.hpp"
#include "ekgdipole/map_fit.hpp"
#include "ekgdipole/ppca.hpp"
#include "ekgdipole/priors.hpp"
#include "ekgdipole/record.hpp"
#include "ekgdipole/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ekgdipole;

namespace {

ElectrodeLayout layout_from_array(const Eigen::MatrixXd& positions) {
  if (positions.rows() != kNumElectrodes || positions.cols() != 3) {
    throw DimensionMismatch("layout must be a 9x3 array");
  }
  ElectrodeLayout layout;
  for (int e = 0; e < kNumElectrodes; ++e) {
    layout.positions[e] = positions.row(e);
  }
  return layout;
}

Eigen::MatrixXd layout_to_array(const ElectrodeLayout& layout) {
  return layout.as_matrix();
}

py::array_t<std::uint8_t> mask_to_array(const EkgRecord& record) {
  py::array_t<std::uint8_t> out({record.frames(), kNumLeads});
  auto view = out.mutable_unchecked<2>();
  for (int t = 0; t < record.frames(); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      view(t, l) = static_cast<std::uint8_t>(record.mask_at(t, l));
    }
  }
  return out;
}

void mask_from_array(EkgRecord& record, const py::array_t<std::uint8_t>& mask) {
  const auto view = mask.unchecked<2>();
  if (view.shape(0) != record.samples.rows() || view.shape(1) != kNumLeads) {
    throw DimensionMismatch("mask must be T x 12");
  }
  record.mask.assign(static_cast<std::size_t>(view.shape(0)) * kNumLeads,
                     MaskState::Observed);
  for (py::ssize_t t = 0; t < view.shape(0); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (view(t, l) > 2) throw InvalidConfig("mask values must be 0, 1, or 2");
      record.set_mask(static_cast<int>(t), l,
                      static_cast<MaskState>(view(t, l)));
    }
  }
}

std::vector<DipoleState> trajectory_from_arrays(
    const Eigen::MatrixXd& locations, const Eigen::MatrixXd& moments) {
  if (locations.rows() != moments.rows() || locations.cols() != 3 ||
      moments.cols() != 3) {
    throw DimensionMismatch("trajectory arrays must both be T x 3");
  }
  std::vector<DipoleState> trajectory(locations.rows());
  for (int t = 0; t < locations.rows(); ++t) {
    trajectory[t].location = locations.row(t);
    trajectory[t].moment = moments.row(t);
  }
  return trajectory;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Moving-dipole EKG generative model: forward model, MAP fitting, "
            "PPCA baseline, masking and evaluation";

  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometryError");
  py::register_exception<NoObservedData>(m, "NoObservedDataError");
  py::register_exception<NoHeldOutData>(m, "NoHeldOutDataError");
  py::register_exception<InsufficientData>(m, "InsufficientDataError");
  py::register_exception<InvalidConfig>(m, "InvalidConfigError");

  m.attr("LEAD_NAMES") = lead_names();
  m.attr("ELECTRODE_NAMES") = electrode_names();
  m.attr("OBSERVED") = static_cast<int>(MaskState::Observed);
  m.attr("HELD_OUT") = static_cast<int>(MaskState::HeldOut);
  m.attr("MISSING") = static_cast<int>(MaskState::Missing);

  // ----------------------------------------------------------- records --
  py::class_<EkgRecord>(m, "EkgRecord")
      .def(py::init([](const Eigen::MatrixXd& samples, double sample_rate_hz,
                       const std::string& record_id) {
             if (samples.cols() != kNumLeads) {
               throw DimensionMismatch("samples must be T x 12");
             }
             EkgRecord record;
             record.record_id = record_id;
             record.sample_rate_hz = sample_rate_hz;
             record.samples = samples;
             record.mask.assign(
                 static_cast<std::size_t>(samples.rows()) * kNumLeads,
                 MaskState::Observed);
             return record;
           }),
           py::arg("samples"), py::arg("sample_rate_hz"),
           py::arg("record_id") = "record")
      .def_readwrite("record_id", &EkgRecord::record_id)
      .def_readwrite("sample_rate_hz", &EkgRecord::sample_rate_hz)
      .def_property(
          "samples", [](const EkgRecord& r) { return r.samples; },
          [](EkgRecord& r, const Eigen::MatrixXd& samples) {
            if (samples.rows() != r.samples.rows() ||
                samples.cols() != kNumLeads) {
              throw DimensionMismatch("samples shape mismatch");
            }
            r.samples = samples;
          })
      .def_property("mask", &mask_to_array, &mask_from_array)
      .def_property_readonly("frames", &EkgRecord::frames)
      .def("__repr__", [](const EkgRecord& r) {
        return "<EkgRecord '" + r.record_id + "' " +
               std::to_string(r.frames()) + "x12 @ " +
               std::to_string(r.sample_rate_hz) + " Hz>";
      });

  m.def("read_record", &read_record, py::arg("path"));
  m.def("write_record", &write_record, py::arg("record"), py::arg("path"));

  py::class_<MaskScheme> mask_scheme(m, "MaskScheme");
  py::enum_<MaskScheme::Kind>(mask_scheme, "Kind")
      .value("PTB_HOLDOUT", MaskScheme::Kind::PtbHoldout)
      .value("ED_LAYOUT", MaskScheme::Kind::EdLayout);
  mask_scheme
      .def(py::init([](const std::string& kind, double holdout_fraction,
                       double window_seconds, double segment_seconds,
                       const std::vector<std::string>& long_leads,
                       std::uint64_t seed) {
             MaskScheme scheme;
             if (kind == "ptb") {
               scheme.kind = MaskScheme::Kind::PtbHoldout;
             } else if (kind == "ed") {
               scheme.kind = MaskScheme::Kind::EdLayout;
             } else {
               throw InvalidConfig("mask kind must be 'ptb' or 'ed'");
             }
             scheme.holdout_fraction = holdout_fraction;
             scheme.window_seconds = window_seconds;
             scheme.segment_seconds = segment_seconds;
             scheme.long_leads.clear();
             for (const auto& name : long_leads) {
               const int idx = lead_index(name);
               if (idx < 0) throw InvalidConfig("unknown lead " + name);
               scheme.long_leads.push_back(idx);
             }
             scheme.seed = seed;
             return scheme;
           }),
           py::arg("kind"), py::arg("holdout_fraction") = 0.1,
           py::arg("window_seconds") = 1.0, py::arg("segment_seconds") = 2.5,
           py::arg("long_leads") = std::vector<std::string>{"II", "V1", "V5"},
           py::arg("seed") = 0);
  m.def("apply_mask_scheme", &apply_mask_scheme, py::arg("record"),
        py::arg("scheme"));

  // ----------------------------------------------------- forward model --
  m.def(
      "dipole_potential",
      [](const Vec3& location, const Vec3& moment, const Vec3& electrode,
         double kappa, double min_distance) {
        return dipole_potential({location, moment}, electrode,
                                Conductivity{kappa}, min_distance);
      },
      py::arg("location"), py::arg("moment"), py::arg("electrode"),
      py::arg("kappa") = 0.2, py::arg("min_distance") = kDefaultMinDistance);
  m.def(
      "electrode_potentials",
      [](const Vec3& location, const Vec3& moment,
         const Eigen::MatrixXd& layout, double kappa) {
        return Eigen::VectorXd(electrode_potentials(
            {location, moment}, layout_from_array(layout),
            Conductivity{kappa}));
      },
      py::arg("location"), py::arg("moment"), py::arg("layout"),
      py::arg("kappa") = 0.2);
  m.def(
      "leads_from_dipole",
      [](const Vec3& location, const Vec3& moment,
         const Eigen::MatrixXd& layout, double kappa) {
        return Eigen::VectorXd(leads_from_dipole(
            {location, moment}, layout_from_array(layout),
            Conductivity{kappa}));
      },
      py::arg("location"), py::arg("moment"), py::arg("layout"),
      py::arg("kappa") = 0.2);
  m.def("lead_matrix", [] { return Eigen::MatrixXd(lead_matrix()); });
  m.def("precordial_prior_means", [] {
    Eigen::MatrixXd out(6, 3);
    const auto means = precordial_prior_means();
    for (int k = 0; k < 6; ++k) out.row(k) = means[k].transpose();
    return out;
  });
  m.def("default_prior_mean_layout", [] {
    return prior_mean_layout(default_electrode_priors()).as_matrix();
  });

  // -------------------------------------------------------- map fitting --
  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("sigma_noise", &FitConfig::sigma_noise)
      .def_readwrite("sigma_s", &FitConfig::sigma_s)
      .def_readwrite("sigma_p", &FitConfig::sigma_p)
      .def_readwrite("max_outer_iterations", &FitConfig::max_outer_iterations)
      .def_readwrite("lbfgs_memory", &FitConfig::lbfgs_memory)
      .def_readwrite("lbfgs_max_iters", &FitConfig::lbfgs_max_iters)
      .def_readwrite("gradient_tolerance", &FitConfig::gradient_tolerance)
      .def_readwrite("n_restarts", &FitConfig::n_restarts)
      .def_readwrite("rng_seed", &FitConfig::rng_seed)
      .def_readwrite("degeneracy_penalty_weight",
                     &FitConfig::degeneracy_penalty_weight)
      .def_readwrite("min_distance", &FitConfig::min_distance)
      .def_readwrite("kappa", &FitConfig::kappa);

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("locations",
                             [](const FitResult& r) {
                               Eigen::MatrixXd out(r.trajectory.size(), 3);
                               for (std::size_t t = 0; t < r.trajectory.size();
                                    ++t) {
                                 out.row(t) =
                                     r.trajectory[t].location.transpose();
                               }
                               return out;
                             })
      .def_property_readonly("moments",
                             [](const FitResult& r) {
                               Eigen::MatrixXd out(r.trajectory.size(), 3);
                               for (std::size_t t = 0; t < r.trajectory.size();
                                    ++t) {
                                 out.row(t) =
                                     r.trajectory[t].moment.transpose();
                               }
                               return out;
                             })
      .def_property_readonly(
          "layout", [](const FitResult& r) { return layout_to_array(r.layout); })
      .def_readonly("log_joint", &FitResult::log_joint)
      .def_readonly("reconstruction", &FitResult::reconstruction)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations);

  m.def(
      "fit_dipole",
      [](const EkgRecord& record, const FitConfig& config) {
        return fit(record, default_electrode_priors(), config);
      },
      py::arg("record"), py::arg("config") = FitConfig{},
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "impute_dipole",
      [](const FitResult& result, const EkgRecord& record) {
        return impute(result, record);
      },
      py::arg("result"), py::arg("record"));
  m.def(
      "log_joint",
      [](const Eigen::MatrixXd& locations, const Eigen::MatrixXd& moments,
         const Eigen::MatrixXd& layout, const EkgRecord& record,
         const FitConfig& config) {
        return log_joint(trajectory_from_arrays(locations, moments),
                         layout_from_array(layout), record,
                         default_electrode_priors(), config);
      },
      py::arg("locations"), py::arg("moments"), py::arg("layout"),
      py::arg("record"), py::arg("config") = FitConfig{});
  m.def(
      "log_joint_gradient",
      [](const Eigen::MatrixXd& locations, const Eigen::MatrixXd& moments,
         const Eigen::MatrixXd& layout, const EkgRecord& record,
         const FitConfig& config) {
        return log_joint_gradient(trajectory_from_arrays(locations, moments),
                                  layout_from_array(layout), record,
                                  default_electrode_priors(), config);
      },
      py::arg("locations"), py::arg("moments"), py::arg("layout"),
      py::arg("record"), py::arg("config") = FitConfig{});

  // --------------------------------------------------------------- ppca --
  py::class_<PpcaConfig>(m, "PpcaConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &PpcaConfig::max_iters)
      .def_readwrite("tol", &PpcaConfig::tol)
      .def_readwrite("seed", &PpcaConfig::seed)
      .def_readwrite("center", &PpcaConfig::center)
      .def_readwrite("min_noise_variance", &PpcaConfig::min_noise_variance);

  py::class_<PpcaFit>(m, "PpcaFit")
      .def_property_readonly(
          "factors", [](const PpcaFit& f) { return f.model.factors; })
      .def_property_readonly("mean",
                             [](const PpcaFit& f) { return f.model.mean; })
      .def_property_readonly(
          "noise_variance",
          [](const PpcaFit& f) { return f.model.noise_variance; })
      .def_readonly("latent_means", &PpcaFit::latent_means)
      .def_readonly("log_likelihood_trace", &PpcaFit::log_likelihood_trace)
      .def_readonly("converged", &PpcaFit::converged);

  m.def("ppca_fit", &ppca_fit, py::arg("record"), py::arg("n_components"),
        py::arg("config") = PpcaConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def("ppca_impute", &ppca_impute, py::arg("fit"), py::arg("record"));

  // --------------------------------------------------------- evaluation --
  m.def(
      "holdout_rmse",
      [](const EkgRecord& truth, const Eigen::MatrixXd& imputed) {
        const RecordScore score = holdout_rmse(truth, imputed);
        py::dict per_lead;
        for (int l = 0; l < kNumLeads; ++l) {
          if (score.per_lead_rmse[l]) {
            per_lead[py::str(lead_names()[l])] = *score.per_lead_rmse[l];
          }
        }
        return py::make_tuple(score.pooled_rmse, per_lead);
      },
      py::arg("truth"), py::arg("imputed"));
  m.def(
      "bootstrap_median",
      [](const std::vector<double>& values, int n_bootstrap,
         std::uint64_t seed) {
        return bootstrap_median(values, n_bootstrap, seed).median_samples;
      },
      py::arg("values"), py::arg("n_bootstrap") = 1000, py::arg("seed") = 0);

  // -------------------------------------------------------------- synth --
  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init([](const std::string& kind, int frames,
                       double sample_rate_hz, double noise_sigma,
                       std::uint64_t seed, const std::string& noise_domain,
                       double loop_radius, int beats, double moment_scale,
                       int n_components, double factor_scale,
                       const std::string& record_id) {
             SynthSpec spec;
             if (kind == "dipole_loop") {
               spec.kind = SynthSpec::Kind::DipoleLoop;
             } else if (kind == "low_rank") {
               spec.kind = SynthSpec::Kind::LowRank;
             } else {
               throw InvalidConfig("kind must be dipole_loop or low_rank");
             }
             spec.frames = frames;
             spec.sample_rate_hz = sample_rate_hz;
             spec.noise_sigma = noise_sigma;
             spec.seed = seed;
             if (noise_domain == "lead") {
               spec.noise_domain = SynthSpec::NoiseDomain::Lead;
             } else if (noise_domain == "electrode") {
               spec.noise_domain = SynthSpec::NoiseDomain::Electrode;
             } else {
               throw InvalidConfig("noise_domain must be lead or electrode");
             }
             spec.loop_radius = loop_radius;
             spec.beats = beats;
             spec.moment_scale = moment_scale;
             spec.n_components = n_components;
             spec.factor_scale = factor_scale;
             spec.record_id = record_id;
             return spec;
           }),
           py::arg("kind") = "dipole_loop", py::arg("frames") = 2500,
           py::arg("sample_rate_hz") = 250.0, py::arg("noise_sigma") = 0.02,
           py::arg("seed") = 0, py::arg("noise_domain") = "lead",
           py::arg("loop_radius") = 0.02, py::arg("beats") = 12,
           py::arg("moment_scale") = 1e-4, py::arg("n_components") = 3,
           py::arg("factor_scale") = 0.5, py::arg("record_id") = "synth");

  m.def(
      "generate",
      [](const SynthSpec& spec) {
        auto [record, truth] = generate(spec);
        py::dict truth_dict;
        if (spec.kind == SynthSpec::Kind::DipoleLoop) {
          Eigen::MatrixXd locations(truth.trajectory.size(), 3);
          Eigen::MatrixXd moments(truth.trajectory.size(), 3);
          for (std::size_t t = 0; t < truth.trajectory.size(); ++t) {
            locations.row(t) = truth.trajectory[t].location.transpose();
            moments.row(t) = truth.trajectory[t].moment.transpose();
          }
          truth_dict["locations"] = locations;
          truth_dict["moments"] = moments;
          truth_dict["layout"] = layout_to_array(truth.layout);
        } else {
          truth_dict["factors"] = truth.factors;
          truth_dict["latents"] = truth.latents;
          truth_dict["mean"] = truth.mean;
        }
        return py::make_tuple(record, truth_dict);
      },
      py::arg("spec"));
}
