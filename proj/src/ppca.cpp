#include "ekgdipole/ppca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace ekgdipole {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

using ObsPattern = std::uint16_t;  // bit l set = lead l observed

ObsPattern pattern_of(const EkgRecord& record, int t) {
  ObsPattern p = 0;
  for (int l = 0; l < kNumLeads; ++l) {
    if (record.mask_at(t, l) == MaskState::Observed) {
      p = static_cast<ObsPattern>(p | (1u << l));
    }
  }
  return p;
}

std::vector<int> pattern_indices(ObsPattern p) {
  std::vector<int> idx;
  for (int l = 0; l < kNumLeads; ++l) {
    if (p & (1u << l)) idx.push_back(l);
  }
  return idx;
}

// Per observation pattern: everything that depends only on (F, mu, sigma2)
// and the observed index set, shared by all frames with that pattern.
struct PatternCache {
  std::vector<int> idx;
  Matrix factors_obs;                // |o| x K
  Eigen::MatrixXd posterior_cov;     // K x K, sigma2 (sigma2 I + Fo^T Fo)^-1
  Eigen::LLT<Eigen::MatrixXd> gram;  // sigma2 I + Fo^T Fo
  double noise_variance = 0.0;
  double marginal_logdet = 0.0;      // logdet(Fo Fo^T + sigma2 I)
};

PatternCache build_pattern_cache(ObsPattern p, const Matrix& factors,
                                 double noise_variance) {
  PatternCache cache;
  cache.idx = pattern_indices(p);
  const int n_obs = static_cast<int>(cache.idx.size());
  const int K = static_cast<int>(factors.cols());
  cache.noise_variance = noise_variance;
  cache.factors_obs.resize(n_obs, K);
  for (int i = 0; i < n_obs; ++i) {
    cache.factors_obs.row(i) = factors.row(cache.idx[i]);
  }
  Eigen::MatrixXd gram = cache.factors_obs.transpose() * cache.factors_obs;
  gram.diagonal().array() += noise_variance;
  cache.gram.compute(gram);
  cache.posterior_cov =
      noise_variance * cache.gram.solve(Eigen::MatrixXd::Identity(K, K));

  // Determinant lemma keeps this well-behaved when sigma2 is tiny:
  // logdet(Fo Fo^T + s I_n) = (n - K) log s + logdet(s I_K + Fo^T Fo).
  cache.marginal_logdet = (n_obs - K) * std::log(noise_variance);
  for (int i = 0; i < K; ++i) {
    cache.marginal_logdet += 2.0 * std::log(cache.gram.matrixL()(i, i));
  }
  return cache;
}

struct EStep {
  Matrix latent_means;                       // T x K
  std::map<ObsPattern, PatternCache> cache;  // keyed by pattern
  std::vector<ObsPattern> patterns;          // per frame
  double log_likelihood = 0.0;
};

EStep e_step(const EkgRecord& record, const Matrix& factors,
             const Vector& mean, double noise_variance) {
  const int T = record.frames();
  const int K = static_cast<int>(factors.cols());
  EStep out;
  out.latent_means.setZero(T, K);
  out.patterns.resize(T);

  for (int t = 0; t < T; ++t) {
    const ObsPattern p = pattern_of(record, t);
    out.patterns[t] = p;
    if (p == 0) continue;  // prior: E[z] = 0, contributes nothing to ll
    auto it = out.cache.find(p);
    if (it == out.cache.end()) {
      it = out.cache.emplace(p, build_pattern_cache(p, factors, noise_variance))
               .first;
    }
    const PatternCache& pc = it->second;
    const int n_obs = static_cast<int>(pc.idx.size());
    Vector delta(n_obs);
    for (int i = 0; i < n_obs; ++i) {
      delta[i] = record.samples(t, pc.idx[i]) - mean[pc.idx[i]];
    }
    const Vector projected = pc.gram.solve(pc.factors_obs.transpose() * delta);
    out.latent_means.row(t) = projected.transpose();

    // Woodbury: delta^T (Fo Fo^T + s I)^-1 delta
    //         = (delta^T delta - delta^T Fo (s I + Fo^T Fo)^-1 Fo^T delta) / s.
    const double quad =
        (delta.squaredNorm() - delta.dot(pc.factors_obs * projected)) /
        pc.noise_variance;
    out.log_likelihood +=
        -0.5 * (n_obs * kLog2Pi + pc.marginal_logdet + quad);
  }
  return out;
}

}  // namespace

void PpcaConfig::validate() const {
  if (max_iters < 1) throw InvalidConfig("ppca max_iters must be >= 1");
  if (!(tol > 0.0)) throw InvalidConfig("ppca tol must be > 0");
  if (!(min_noise_variance > 0.0)) {
    throw InvalidConfig("ppca min_noise_variance must be > 0");
  }
}

PpcaFit ppca_fit(const EkgRecord& record, int n_components,
                 const PpcaConfig& config) {
  config.validate();
  record.validate();
  const int T = record.frames();
  const int K = n_components;
  if (K < 1 || K > kNumLeads - 1) {
    throw InvalidConfig("n_components must be in [1, 11]");
  }
  if (T < K) throw InsufficientData("record shorter than n_components");

  std::vector<int> obs_per_lead(kNumLeads, 0);
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) == MaskState::Observed) ++obs_per_lead[l];
    }
  }
  for (int l = 0; l < kNumLeads; ++l) {
    if (obs_per_lead[l] < K + 1) {
      throw InsufficientData("lead " + lead_names()[l] + " has " +
                             std::to_string(obs_per_lead[l]) +
                             " observed samples, needs >= " +
                             std::to_string(K + 1));
    }
  }

  // Initialization: per-lead observed means, then the SVD of the
  // mean-imputed centered data.
  Vector mean = Vector::Zero(kNumLeads);
  if (config.center) {
    for (int l = 0; l < kNumLeads; ++l) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t) {
        if (record.mask_at(t, l) == MaskState::Observed) {
          acc += record.samples(t, l);
        }
      }
      mean[l] = acc / obs_per_lead[l];
    }
  }

  Matrix centered = Matrix::Zero(T, kNumLeads);
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (record.mask_at(t, l) == MaskState::Observed) {
        centered(t, l) = record.samples(t, l) - mean[l];
      }
    }
  }
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  Vector eigvals(kNumLeads);
  eigvals.setZero();
  for (int i = 0; i < svd.singularValues().size() && i < kNumLeads; ++i) {
    const double sv = svd.singularValues()[i];
    eigvals[i] = sv * sv / T;
  }
  double noise_variance = 0.0;
  for (int i = K; i < kNumLeads; ++i) noise_variance += eigvals[i];
  noise_variance =
      std::max(noise_variance / (kNumLeads - K), std::max(1e-8, config.min_noise_variance));
  Matrix factors(kNumLeads, K);
  for (int k = 0; k < K; ++k) {
    const double scale = std::sqrt(std::max(eigvals[k] - noise_variance, 1e-10));
    factors.col(k) = svd.matrixV().col(k) * scale;
  }

  PpcaFit fit;
  fit.model.n_components = K;
  fit.converged = false;

  double prev_ll = -std::numeric_limits<double>::infinity();
  EStep estep;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    estep = e_step(record, factors, mean, noise_variance);
    fit.log_likelihood_trace.push_back(estep.log_likelihood);

    if (iter > 0) {
      const double rel = std::abs(estep.log_likelihood - prev_ll) /
                         (std::abs(prev_ll) + 1e-300);
      if (rel < config.tol) {
        fit.converged = true;
        break;
      }
    }
    prev_ll = estep.log_likelihood;

    // M-step. Row-wise regression of lead j on the augmented latent
    // (z, 1) over the frames where j is observed.
    const int aug = config.center ? K + 1 : K;
    Matrix new_factors(kNumLeads, K);
    Vector new_mean = Vector::Zero(kNumLeads);
    for (int l = 0; l < kNumLeads; ++l) {
      Eigen::MatrixXd s_mat = Eigen::MatrixXd::Zero(aug, aug);
      Vector b = Vector::Zero(aug);
      for (int t = 0; t < T; ++t) {
        if (record.mask_at(t, l) != MaskState::Observed) continue;
        const PatternCache& pc = estep.cache.at(estep.patterns[t]);
        const Vector m = estep.latent_means.row(t).transpose();
        s_mat.topLeftCorner(K, K) += pc.posterior_cov + m * m.transpose();
        if (config.center) {
          s_mat.topRightCorner(K, 1) += m;
          s_mat.bottomLeftCorner(1, K) += m.transpose();
          s_mat(K, K) += 1.0;
        }
        b.head(K) += record.samples(t, l) * m;
        if (config.center) b[K] += record.samples(t, l);
      }
      const Vector w = s_mat.ldlt().solve(b);
      new_factors.row(l) = w.head(K).transpose();
      if (config.center) new_mean[l] = w[K];
    }

    // sigma^2 given the new (F, mu), with the E-step moments.
    double rss = 0.0;
    long n_obs_total = 0;
    for (int t = 0; t < T; ++t) {
      if (estep.patterns[t] == 0) continue;
      const PatternCache& pc = estep.cache.at(estep.patterns[t]);
      const Vector m = estep.latent_means.row(t).transpose();
      for (int l : pc.idx) {
        const double fitted = new_mean[l] + new_factors.row(l).dot(m);
        const double resid = record.samples(t, l) - fitted;
        rss += resid * resid +
               new_factors.row(l) * pc.posterior_cov *
                   new_factors.row(l).transpose();
        ++n_obs_total;
      }
    }
    factors = new_factors;
    mean = new_mean;
    noise_variance = std::max(rss / n_obs_total, config.min_noise_variance);
  }

  // Final E-step so latent_means match the returned parameters.
  estep = e_step(record, factors, mean, noise_variance);
  fit.model.factors = factors;
  fit.model.mean = mean;
  fit.model.noise_variance = noise_variance;
  fit.latent_means = estep.latent_means;
  return fit;
}

Matrix ppca_impute(const PpcaFit& fit, const EkgRecord& record) {
  if (fit.latent_means.rows() != record.frames()) {
    throw DimensionMismatch("ppca fit does not match record length");
  }
  Matrix out(record.frames(), kNumLeads);
  for (int t = 0; t < record.frames(); ++t) {
    const Vector reconstructed =
        fit.model.mean + fit.model.factors * fit.latent_means.row(t).transpose();
    for (int l = 0; l < kNumLeads; ++l) {
      out(t, l) = record.mask_at(t, l) == MaskState::Observed
                      ? record.samples(t, l)
                      : reconstructed[l];
    }
  }
  return out;
}

}  // namespace ekgdipole
