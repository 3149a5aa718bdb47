#include "ekgdipole/map_fit.hpp"

#include "ekgdipole/forward.hpp"
#include "ekgdipole/lbfgs.hpp"
#include "ekgdipole/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ekgdipole {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
  if (v >= 0.0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Shared per-fit constants of the objective.
struct ObjectiveTerms {
  const EkgRecord& record;
  const ElectrodePriorSet& priors;
  const FitConfig& config;
  double field_const;       // 1 / (4 pi kappa)
  double inv_noise_var;     // 1 / sigma_noise^2 (mV^-2)
  double loglik_const;      // -0.5 ln(2 pi sigma_noise^2) per observed entry
  const LeadMatrix& leads;  // O

  explicit ObjectiveTerms(const EkgRecord& rec, const ElectrodePriorSet& pri,
                          const FitConfig& cfg)
      : record(rec),
        priors(pri),
        config(cfg),
        field_const(1.0 / (4.0 * std::numbers::pi * cfg.kappa)),
        inv_noise_var(1.0 / (cfg.sigma_noise * cfg.sigma_noise)),
        loglik_const(-0.5 * (kLog2Pi + 2.0 * std::log(cfg.sigma_noise))),
        leads(lead_matrix()) {}

  // Likelihood + degeneracy barrier of one frame. Gradient sinks are
  // optional and accumulated into (not overwritten).
  double frame_terms(const Vec3& s, const Vec3& p,
                     const ElectrodeLayout& layout, int t, Vec3* grad_s,
                     Vec3* grad_p, std::array<Vec3, kNumElectrodes>* grad_r) const {
    Eigen::Matrix<double, kNumElectrodes, 1> phi;
    std::array<Vec3, kNumElectrodes> u;
    std::array<double, kNumElectrodes> dist{};
    double value = 0.0;

    const double w_pen = config.degeneracy_penalty_weight;
    const double d_min = config.min_distance;
    for (int e = 0; e < kNumElectrodes; ++e) {
      u[e] = layout.positions[e] - s;
      const double d = u[e].norm();
      dist[e] = d;
      const double inv_d3 = 1.0 / (d * d * d);
      phi[e] = field_const * u[e].dot(p) * inv_d3;

      const double v = (d_min - d) / d_min;
      value -= w_pen * softplus(v);
      if (grad_s || grad_r) {
        const double dpen_dd = w_pen * sigmoid(v) / d_min;  // d(logj)/dd
        const Vec3 dir = u[e] / d;
        if (grad_s) *grad_s += dpen_dd * (-dir);
        if (grad_r) (*grad_r)[e] += dpen_dd * dir;
      }
    }

    // Observed-lead Gaussian log-likelihood; m = 1000 * O * phi (mV).
    Eigen::Matrix<double, kNumLeads, 1> model =
        1000.0 * (leads * phi);
    Eigen::Matrix<double, kNumElectrodes, 1> grad_phi;
    grad_phi.setZero();
    bool any_obs = false;
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) != MaskState::Observed) continue;
      any_obs = true;
      const double resid = record.samples(t, l) - model[l];
      value += loglik_const - 0.5 * resid * resid * inv_noise_var;
      if (grad_s || grad_p || grad_r) {
        grad_phi += (resid * inv_noise_var * 1000.0) *
                    leads.row(l).transpose();
      }
    }

    if (any_obs && (grad_s || grad_p || grad_r)) {
      for (int e = 0; e < kNumElectrodes; ++e) {
        if (grad_phi[e] == 0.0) continue;
        const double d = dist[e];
        const double inv_d3 = 1.0 / (d * d * d);
        const double inv_d5 = inv_d3 / (d * d);
        if (grad_p) {
          *grad_p += grad_phi[e] * field_const * inv_d3 * u[e];
        }
        if (grad_s || grad_r) {
          // dphi/ds = c (-p/d^3 + 3 (u.p) u / d^5); dphi/dr = -dphi/ds.
          const Vec3 dphi_ds =
              field_const * (-p * inv_d3 + 3.0 * u[e].dot(p) * inv_d5 * u[e]);
          if (grad_s) *grad_s += grad_phi[e] * dphi_ds;
          if (grad_r) (*grad_r)[e] -= grad_phi[e] * dphi_ds;
        }
      }
    }
    return value;
  }

  // Full log-joint; fills the 6T+27 gradient when grad is non-null.
  double eval(const std::vector<DipoleState>& trajectory,
              const ElectrodeLayout& layout, Vector* grad) const {
    const int T = record.frames();
    if (static_cast<int>(trajectory.size()) != T) {
      throw DimensionMismatch("trajectory length " +
                              std::to_string(trajectory.size()) +
                              " != record frames " + std::to_string(T));
    }
    if (grad) grad->setZero(6 * T + 3 * kNumElectrodes);

    std::array<Vec3, kNumElectrodes> grad_r;
    grad_r.fill(Vec3::Zero());
    double value = 0.0;
    for (int t = 0; t < T; ++t) {
      Vec3 gs = Vec3::Zero();
      Vec3 gp = Vec3::Zero();
      value += frame_terms(trajectory[t].location, trajectory[t].moment,
                           layout, t, grad ? &gs : nullptr,
                           grad ? &gp : nullptr, grad ? &grad_r : nullptr);
      DipoleState prior_grad;
      value += log_prior_dipole(trajectory[t], config.sigma_s, config.sigma_p,
                                grad ? &prior_grad : nullptr);
      if (grad) {
        grad->segment<3>(6 * t) = gs + prior_grad.location;
        grad->segment<3>(6 * t + 3) = gp + prior_grad.moment;
      }
    }

    std::array<Vec3, kNumElectrodes> prior_grad_r;
    value += log_prior_electrodes(layout, priors,
                                  grad ? &prior_grad_r : nullptr);
    if (grad) {
      for (int e = 0; e < kNumElectrodes; ++e) {
        grad->segment<3>(6 * T + 3 * e) = grad_r[e] + prior_grad_r[e];
      }
    }
    return value;
  }
};

// Moment posterior with an optional degeneracy check; the optimizer path
// runs unchecked (the soft barrier handles near-collisions).
MomentPosterior moment_posterior_impl(
    const Vec3& location, const ElectrodeLayout& layout,
    const Eigen::Matrix<double, kNumLeads, 1>& leads,
    const std::array<MaskState, kNumLeads>& mask, const FitConfig& config,
    bool check_geometry) {
  int n_obs = 0;
  for (int l = 0; l < kNumLeads; ++l) {
    if (mask[l] == MaskState::Observed) ++n_obs;
  }
  if (n_obs == 0) {
    throw NoObservedData("conditional moment posterior needs >= 1 observed lead");
  }

  const auto coeffs = moment_coefficients(
      location, layout, Conductivity{config.kappa},
      check_geometry ? config.min_distance : 0.0);

  Eigen::MatrixXd design(n_obs, 3);
  Eigen::VectorXd y(n_obs);
  const LeadMatrix& O = lead_matrix();
  int row = 0;
  for (int l = 0; l < kNumLeads; ++l) {
    if (mask[l] != MaskState::Observed) continue;
    design.row(row) = 1000.0 * (O.row(l) * coeffs);
    y[row] = leads[l];
    ++row;
  }

  const double ridge =
      (config.sigma_noise * config.sigma_noise) /
      (config.sigma_p * config.sigma_p);
  Eigen::Matrix3d normal = design.transpose() * design;
  normal.diagonal().array() += ridge;
  const Eigen::Vector3d rhs = design.transpose() * y;

  const Eigen::LDLT<Eigen::Matrix3d> solver(normal);
  Eigen::Vector3d mean = solver.solve(rhs);
  mean += solver.solve(rhs - normal * mean);  // one refinement step

  MomentPosterior posterior;
  posterior.mean = mean;
  posterior.covariance = (config.sigma_noise * config.sigma_noise) *
                         solver.solve(Eigen::Matrix3d::Identity());
  return posterior;
}

std::array<MaskState, kNumLeads> frame_mask(const EkgRecord& record, int t) {
  std::array<MaskState, kNumLeads> mask;
  for (int l = 0; l < kNumLeads; ++l) mask[l] = record.mask_at(t, l);
  return mask;
}

// One restart of the alternating optimization. Returns the outer-round
// count through `iterations_out` and the final joint gradient norm check
// through `converged_out`.
std::pair<std::vector<DipoleState>, ElectrodeLayout> run_restart(
    const ObjectiveTerms& terms, const EkgRecord& record,
    const ElectrodePriorSet& priors, const FitConfig& config, int restart,
    const std::vector<int>& active_frames, double* log_joint_out,
    bool* converged_out, int* iterations_out) {
  auto [trajectory, layout] = initialize(record, priors, config, restart);
  const int T = record.frames();
  const std::size_t n_active = active_frames.size();
  const Eigen::Index n_joint =
      static_cast<Eigen::Index>(6 * n_active) + 3 * kNumElectrodes;

  opt::LbfgsParams frame_params;
  frame_params.memory = 5;
  frame_params.max_iterations = 15;
  frame_params.gradient_tolerance = config.gradient_tolerance;

  opt::LbfgsParams joint_params;
  joint_params.memory = config.lbfgs_memory;
  joint_params.max_iterations = config.lbfgs_max_iters;
  joint_params.gradient_tolerance = config.gradient_tolerance;

  const FitConfig& cfg = config;
  auto update_moment = [&](int t) {
    trajectory[t].moment =
        moment_posterior_impl(trajectory[t].location, layout,
                              record.samples.row(t).transpose(),
                              frame_mask(record, t), cfg,
                              /*check_geometry=*/false)
            .mean;
  };

  double current = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int outer = 0;
  Vector joint_x(n_joint), joint_grad(n_joint);

  // The raw parameters span wildly different magnitudes (meters vs
  // ampere-meters); the joint pass runs in prior-scaled units so the
  // L-BFGS curvature model is well conditioned.
  Vector param_scale(n_joint);
  for (std::size_t i = 0; i < n_active; ++i) {
    param_scale.segment<3>(6 * i).setConstant(config.sigma_s);
    param_scale.segment<3>(6 * i + 3).setConstant(config.sigma_p);
  }
  for (int e = 0; e < kNumElectrodes; ++e) {
    param_scale.segment<3>(6 * n_active + 3 * e)
        .setConstant(priors.priors[e].sigma);
  }

  auto pack = [&](Vector& x) {
    for (std::size_t i = 0; i < n_active; ++i) {
      const int t = active_frames[i];
      x.segment<3>(6 * i) = trajectory[t].location;
      x.segment<3>(6 * i + 3) = trajectory[t].moment;
    }
    for (int e = 0; e < kNumElectrodes; ++e) {
      x.segment<3>(6 * n_active + 3 * e) = layout.positions[e];
    }
    x.array() /= param_scale.array();
  };
  auto unpack = [&](const Vector& scaled) {
    const Vector x = scaled.cwiseProduct(param_scale);
    for (std::size_t i = 0; i < n_active; ++i) {
      const int t = active_frames[i];
      trajectory[t].location = x.segment<3>(6 * i);
      trajectory[t].moment = x.segment<3>(6 * i + 3);
    }
    for (int e = 0; e < kNumElectrodes; ++e) {
      layout.positions[e] = x.segment<3>(6 * n_active + 3 * e);
    }
  };

  // Joint objective over active frames + layout, as a minimization in the
  // scaled coordinates.
  Vector full_grad;
  auto joint_objective = [&](const Vector& x, Vector& grad) -> double {
    unpack(x);
    const double value = terms.eval(trajectory, layout, &full_grad);
    for (std::size_t i = 0; i < n_active; ++i) {
      const int t = active_frames[i];
      grad.segment<6>(6 * i) = -full_grad.segment<6>(6 * t);
    }
    grad.tail(3 * kNumElectrodes) = -full_grad.tail(3 * kNumElectrodes);
    grad.array() *= param_scale.array();
    return -value;
  };

  for (outer = 1; outer <= config.max_outer_iterations; ++outer) {
    // (a) Per-frame block updates: exact moment posterior, then a few
    // L-BFGS steps on the location, then the moment again. Frames are
    // independent given the layout.
    for (int t : active_frames) {
      update_moment(t);
      Vector s = trajectory[t].location;
      const Vec3 p = trajectory[t].moment;
      auto frame_objective = [&](const Vector& x, Vector& grad) -> double {
        const Vec3 loc(x[0], x[1], x[2]);
        Vec3 gs = Vec3::Zero();
        double value =
            terms.frame_terms(loc, p, layout, t, &gs, nullptr, nullptr);
        value += -1.5 * (kLog2Pi + 2.0 * std::log(cfg.sigma_s)) -
                 0.5 * loc.squaredNorm() / (cfg.sigma_s * cfg.sigma_s);
        gs -= loc / (cfg.sigma_s * cfg.sigma_s);
        grad[0] = -gs[0]; grad[1] = -gs[1]; grad[2] = -gs[2];
        return -value;
      };
      opt::minimize(frame_objective, s, frame_params);
      trajectory[t].location = Vec3(s[0], s[1], s[2]);
      update_moment(t);
    }

    // (b) Joint refinement over everything, including the layout.
    pack(joint_x);
    const auto report = opt::minimize(joint_objective, joint_x, joint_params);
    unpack(joint_x);
    const double value = -report.objective;
    const bool scaled_converged =
        report.grad_inf_norm < config.gradient_tolerance;
    if (scaled_converged || value - current < 1e-9 * (1.0 + std::abs(value))) {
      current = std::max(current, value);
      break;
    }
    current = value;
  }

  // Convergence is reported on the raw log-joint gradient over the
  // parameters that were optimized (fixed zero-observation frames excluded).
  Vector final_grad;
  *log_joint_out = terms.eval(trajectory, layout, &final_grad);
  double grad_inf = final_grad.tail(3 * kNumElectrodes).cwiseAbs().maxCoeff();
  for (int t : active_frames) {
    grad_inf = std::max(grad_inf,
                        final_grad.segment<6>(6 * t).cwiseAbs().maxCoeff());
  }
  converged = grad_inf < config.gradient_tolerance;
  *converged_out = converged;
  *iterations_out = std::min(outer, config.max_outer_iterations);
  return {std::move(trajectory), layout};
}

}  // namespace

void FitConfig::validate() const {
  if (!(sigma_noise > 0.0) || !(sigma_s > 0.0) || !(sigma_p > 0.0)) {
    throw InvalidConfig("fit sigmas must be > 0");
  }
  if (max_outer_iterations < 1 || lbfgs_memory < 1 || lbfgs_max_iters < 1 ||
      n_restarts < 1) {
    throw InvalidConfig("fit iteration counts must be >= 1");
  }
  if (!(gradient_tolerance > 0.0) || !(gradient_tolerance < 1.0)) {
    throw InvalidConfig("gradient_tolerance must be in (0, 1)");
  }
  if (!(degeneracy_penalty_weight > 0.0)) {
    throw InvalidConfig("degeneracy_penalty_weight must be > 0");
  }
  if (!(min_distance > 0.0) || !(kappa > 0.0)) {
    throw InvalidConfig("min_distance and kappa must be > 0");
  }
}

double log_joint(const std::vector<DipoleState>& trajectory,
                 const ElectrodeLayout& layout, const EkgRecord& record,
                 const ElectrodePriorSet& priors, const FitConfig& config) {
  config.validate();
  return ObjectiveTerms(record, priors, config).eval(trajectory, layout, nullptr);
}

Vector log_joint_gradient(const std::vector<DipoleState>& trajectory,
                          const ElectrodeLayout& layout,
                          const EkgRecord& record,
                          const ElectrodePriorSet& priors,
                          const FitConfig& config) {
  config.validate();
  Vector grad;
  ObjectiveTerms(record, priors, config).eval(trajectory, layout, &grad);
  return grad;
}

MomentPosterior conditional_moment_posterior(
    const Vec3& location, const ElectrodeLayout& layout,
    const Eigen::Matrix<double, kNumLeads, 1>& leads,
    const std::array<MaskState, kNumLeads>& mask, const FitConfig& config) {
  config.validate();
  return moment_posterior_impl(location, layout, leads, mask, config,
                               /*check_geometry=*/true);
}

std::pair<std::vector<DipoleState>, ElectrodeLayout> initialize(
    const EkgRecord& record, const ElectrodePriorSet& priors,
    const FitConfig& config, int restart_index) {
  config.validate();
  if (record.frames() == 0) throw InsufficientData("empty record");
  Rng rng(derive_seed(config.rng_seed, static_cast<std::uint64_t>(restart_index)));

  ElectrodeLayout layout = prior_mean_layout(priors);
  if (restart_index > 0) {
    const double scale = 0.25 * restart_index;
    for (int e = 0; e < kNumElectrodes; ++e) {
      const double sigma = scale * priors.priors[e].sigma;
      layout.positions[e] += Vec3(rng.normal(0.0, sigma),
                                  rng.normal(0.0, sigma),
                                  rng.normal(0.0, sigma));
    }
  }

  const int T = record.frames();
  std::vector<DipoleState> trajectory(T);
  const double jitter = 0.02 * config.sigma_s;
  for (int t = 0; t < T; ++t) {
    trajectory[t].location = Vec3(rng.normal(0.0, jitter),
                                  rng.normal(0.0, jitter),
                                  rng.normal(0.0, jitter));
  }
  for (int t = 0; t < T; ++t) {
    if (record.observed_in_frame(t) == 0) {
      trajectory[t] = DipoleState{};  // prior mode
      continue;
    }
    trajectory[t].moment =
        moment_posterior_impl(trajectory[t].location, layout,
                              record.samples.row(t).transpose(),
                              frame_mask(record, t), config,
                              /*check_geometry=*/false)
            .mean;
  }
  return {std::move(trajectory), layout};
}

FitResult fit(const EkgRecord& record, const ElectrodePriorSet& priors,
              const FitConfig& config) {
  config.validate();
  record.validate();
  if (record.count(MaskState::Observed) == 0) {
    throw NoObservedData("record has no observed entries");
  }

  std::vector<int> active_frames;
  for (int t = 0; t < record.frames(); ++t) {
    if (record.observed_in_frame(t) > 0) active_frames.push_back(t);
  }

  const ObjectiveTerms terms(record, priors, config);
  FitResult best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < config.n_restarts; ++restart) {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    auto [trajectory, layout] =
        run_restart(terms, record, priors, config, restart, active_frames,
                    &value, &converged, &iterations);
    if (value > best_value) {
      best_value = value;
      best.trajectory = std::move(trajectory);
      best.layout = layout;
      best.log_joint = value;
      best.converged = converged;
      best.iterations = iterations;
    }
  }

  const int T = record.frames();
  best.reconstruction.resize(T, kNumLeads);
  for (int t = 0; t < T; ++t) {
    best.reconstruction.row(t) =
        leads_from_dipole(best.trajectory[t], best.layout,
                          Conductivity{config.kappa}, 0.0)
            .transpose();
  }
  return best;
}

Matrix impute(const FitResult& result, const EkgRecord& record) {
  if (result.reconstruction.rows() != record.frames()) {
    throw DimensionMismatch("fit result does not match record length");
  }
  Matrix out = result.reconstruction;
  for (int t = 0; t < record.frames(); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) == MaskState::Observed) {
        out(t, l) = record.samples(t, l);
      }
    }
  }
  return out;
}

}  // namespace ekgdipole
