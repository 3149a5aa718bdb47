#include "ekgdipole/ppca.hpp"

#include "ekgdipole/synth.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>

using namespace ekgdipole;
using ekgtest::rel_err;

namespace {

EkgRecord low_rank_record(int frames, int rank, double noise, uint64_t seed) {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::LowRank;
  spec.frames = frames;
  spec.n_components = rank;
  spec.noise_sigma = noise;
  spec.seed = seed;
  return generate(spec).first;
}

// Largest principal angle (radians) between the column spans of A and B.
double max_principal_angle(const Matrix& a, const Matrix& b) {
  const Eigen::HouseholderQR<Matrix> qa(a), qb(b);
  const Matrix ua = qa.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix ub = qb.householderQ() * Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(ua.transpose() * ub);
  const double smallest =
      svd.singularValues()[svd.singularValues().size() - 1];
  return std::acos(std::min(1.0, smallest));
}

}  // namespace

TEST_CASE("exact low-rank data drives the noise variance to the floor") {
  EkgRecord record = low_rank_record(400, 3, 0.0, 10);
  PpcaConfig config;
  config.max_iters = 300;
  const PpcaFit fit = ppca_fit(record, 3, config);
  CHECK(fit.model.noise_variance < 1e-8);

  const Matrix imputed = ppca_impute(fit, record);
  // Reconstruction at the latent means reproduces the data.
  double sq = 0.0;
  for (int t = 0; t < record.frames(); ++t) {
    const Vector recon =
        fit.model.mean + fit.model.factors * fit.latent_means.row(t).transpose();
    sq += (recon - record.samples.row(t).transpose()).squaredNorm();
  }
  CHECK(std::sqrt(sq / (record.frames() * kNumLeads)) < 1e-8);
}

TEST_CASE("fully observed fit matches the top-K SVD subspace") {
  EkgRecord record = low_rank_record(600, 3, 0.05, 21);
  PpcaConfig config;
  config.max_iters = 2000;
  config.tol = 1e-12;
  const PpcaFit fit = ppca_fit(record, 3, config);

  // Independent oracle: SVD of the centered data matrix.
  Vector mean = Vector::Zero(kNumLeads);
  for (int l = 0; l < kNumLeads; ++l) {
    mean[l] = record.samples.col(l).mean();
  }
  Matrix centered = record.samples.rowwise() - mean.transpose();
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Matrix top3 = svd.matrixV().leftCols(3);

  CHECK(max_principal_angle(fit.model.factors, top3) < 1e-6);
}

TEST_CASE("log-likelihood trace is non-decreasing") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    EkgRecord record = low_rank_record(300, 4, 0.1, seed);
    // Knock out a third of the entries.
    Rng rng(seed + 100);
    for (int t = 0; t < record.frames(); ++t) {
      for (int l = 0; l < kNumLeads; ++l) {
        const double u = rng.uniform();
        if (u < 0.2) {
          record.set_mask(t, l, MaskState::Missing);
          record.samples(t, l) = std::numeric_limits<double>::quiet_NaN();
        } else if (u < 0.33) {
          record.set_mask(t, l, MaskState::HeldOut);
        }
      }
    }
    const PpcaFit fit = ppca_fit(record, 3, {});
    for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i) {
      CHECK(fit.log_likelihood_trace[i] >=
            fit.log_likelihood_trace[i - 1] -
                1e-10 * std::abs(fit.log_likelihood_trace[i - 1]));
    }
  }
}

TEST_CASE("missing-at-random imputation is close to the oracle projection") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::LowRank;
  spec.frames = 2500;
  spec.n_components = 3;
  spec.noise_sigma = 0.02;
  spec.seed = 42;
  auto [clean, truth] = generate(spec);

  // 50% missing at random; the held-out half keeps ground truth so we can
  // score it.
  EkgRecord record = clean;
  Rng rng(4242);
  for (int t = 0; t < record.frames(); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (rng.uniform() < 0.5) record.set_mask(t, l, MaskState::HeldOut);
    }
  }

  const PpcaFit fit = ppca_fit(record, 3, {});
  const Matrix imputed = ppca_impute(fit, record);

  // Oracle: posterior mean under the true factors/mean/noise.
  const Matrix& factors = truth.factors;
  const double noise_var = spec.noise_sigma * spec.noise_sigma;
  double fit_sq = 0.0, oracle_sq = 0.0;
  long n = 0;
  for (int t = 0; t < record.frames(); ++t) {
    std::vector<int> obs;
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) == MaskState::Observed) obs.push_back(l);
    }
    Matrix f_obs(obs.size(), 3);
    Vector delta(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      f_obs.row(i) = factors.row(obs[i]);
      delta[i] = record.samples(t, obs[i]) - truth.mean[obs[i]];
    }
    Eigen::Matrix3d gram = f_obs.transpose() * f_obs;
    gram.diagonal().array() += noise_var;
    const Vector z = gram.ldlt().solve(f_obs.transpose() * delta);
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) != MaskState::HeldOut) continue;
      const double oracle_value = truth.mean[l] + factors.row(l).dot(z);
      const double truth_value = clean.samples(t, l);
      oracle_sq += (oracle_value - truth_value) * (oracle_value - truth_value);
      fit_sq += (imputed(t, l) - truth_value) * (imputed(t, l) - truth_value);
      ++n;
    }
  }
  const double fit_rmse = std::sqrt(fit_sq / n);
  const double oracle_rmse = std::sqrt(oracle_sq / n);
  CHECK(fit_rmse <= 1.1 * oracle_rmse);
}

TEST_CASE("fully unobserved frame imputes to the mean") {
  EkgRecord record = low_rank_record(200, 2, 0.05, 31);
  for (int l = 0; l < kNumLeads; ++l) {
    record.set_mask(7, l, MaskState::HeldOut);
  }
  const PpcaFit fit = ppca_fit(record, 2, {});
  const Matrix imputed = ppca_impute(fit, record);
  for (int l = 0; l < kNumLeads; ++l) {
    CHECK(imputed(7, l) == doctest::Approx(fit.model.mean[l]).epsilon(1e-12));
  }
}

TEST_CASE("fully observed record imputes to itself") {
  EkgRecord record = low_rank_record(100, 3, 0.1, 32);
  const PpcaFit fit = ppca_fit(record, 3, {});
  CHECK(ppca_impute(fit, record) == record.samples);
}

TEST_CASE("imputation is invariant to factor rotation") {
  EkgRecord record = low_rank_record(150, 3, 0.05, 33);
  for (int t = 0; t < record.frames(); t += 3) {
    record.set_mask(t, t % kNumLeads, MaskState::HeldOut);
  }
  const PpcaFit fit = ppca_fit(record, 3, {});
  const Matrix imputed = ppca_impute(fit, record);

  // Rotate the factors and the latent means consistently.
  Eigen::Matrix3d rot =
      Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  PpcaFit rotated = fit;
  rotated.model.factors = fit.model.factors * rot;
  rotated.latent_means = fit.latent_means * rot;
  const Matrix imputed_rotated = ppca_impute(rotated, record);
  CHECK((imputed - imputed_rotated).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("insufficient data errors") {
  EkgRecord record = low_rank_record(100, 3, 0.1, 34);
  // Lead 5 keeps only 3 observed samples: too few for K=3.
  for (int t = 0; t < record.frames() - 3; ++t) {
    record.set_mask(t, 5, MaskState::Missing);
    record.samples(t, 5) = std::numeric_limits<double>::quiet_NaN();
  }
  CHECK_THROWS_AS(ppca_fit(record, 3, {}), InsufficientData);

  EkgRecord tiny = low_rank_record(2, 1, 0.1, 35);
  CHECK_THROWS_AS(ppca_fit(tiny, 3, {}), InsufficientData);
}
