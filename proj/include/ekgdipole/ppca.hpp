#pragma once

#include "ekgdipole/record.hpp"
#include "ekgdipole/types.hpp"

#include <cstdint>
#include <vector>

namespace ekgdipole {

struct PpcaConfig {
  int max_iters = 500;
  double tol = 1e-8;  // relative log-likelihood change
  std::uint64_t seed = 0;
  bool center = true;  // estimate an explicit mean vector within EM
  double min_noise_variance = 1e-12;  // floor for exactly low-rank data

  void validate() const;
};

struct PpcaModel {
  Matrix factors;       // 12 x K, mV per unit latent
  Vector mean;          // 12, mV
  double noise_variance = 0.0;  // mV^2
  int n_components = 0;
};

struct PpcaFit {
  PpcaModel model;
  Matrix latent_means;  // T x K, posterior mean of z_t
  std::vector<double> log_likelihood_trace;  // observed-data ll per iteration
  bool converged = false;
};

// EM fit of x_t = mu + F z_t + eps on the Observed entries of the record
// (HeldOut and Missing entries never enter the likelihood). E-step: exact
// Gaussian posterior of z_t given the observed subvector; M-step:
// closed-form row-wise updates of F, mu, then sigma^2.
// Throws InsufficientData when any lead has fewer than K+1 observed samples
// or T < K. Hitting max_iters leaves converged=false (not an error).
PpcaFit ppca_fit(const EkgRecord& record, int n_components,
                 const PpcaConfig& config = {});

// mu + F E[z_t | observed] at HeldOut/Missing entries, observed passthrough.
Matrix ppca_impute(const PpcaFit& fit, const EkgRecord& record);

}  // namespace ekgdipole
