#include "ekgdipole/evaluation.hpp"

#include "ekgdipole/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ekgdipole {

namespace {

std::string format_mv(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

}  // namespace

RecordScore holdout_rmse(const EkgRecord& truth, const Matrix& imputed) {
  if (imputed.rows() != truth.frames() || imputed.cols() != kNumLeads) {
    throw DimensionMismatch("imputed matrix shape does not match record");
  }
  double pooled_sq = 0.0;
  long pooled_n = 0;
  std::array<double, kNumLeads> lead_sq{};
  std::array<long, kNumLeads> lead_n{};
  for (int t = 0; t < truth.frames(); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (truth.mask_at(t, l) != MaskState::HeldOut) continue;
      const double resid = truth.samples(t, l) - imputed(t, l);
      pooled_sq += resid * resid;
      ++pooled_n;
      lead_sq[l] += resid * resid;
      ++lead_n[l];
    }
  }
  if (pooled_n == 0) {
    throw NoHeldOutData("record " + truth.record_id + " has no HeldOut entries");
  }
  RecordScore score;
  score.pooled_rmse = std::sqrt(pooled_sq / pooled_n);
  for (int l = 0; l < kNumLeads; ++l) {
    if (lead_n[l] > 0) {
      score.per_lead_rmse[l] = std::sqrt(lead_sq[l] / lead_n[l]);
    }
  }
  return score;
}

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInput("percentile of empty list");
  std::sort(values.begin(), values.end());
  const double pos = (q / 100.0) * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

BootstrapSummary bootstrap_median(const std::vector<double>& values,
                                  int n_bootstrap, std::uint64_t seed) {
  if (values.empty()) throw EmptyInput("bootstrap of empty list");
  if (n_bootstrap < 1) throw InvalidConfig("n_bootstrap must be >= 1");

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  BootstrapSummary summary;
  summary.n_bootstrap = n_bootstrap;
  summary.seed = seed;
  summary.median_samples.reserve(n_bootstrap);

  Rng rng(seed);
  std::vector<double> resample(sorted.size());
  for (int b = 0; b < n_bootstrap; ++b) {
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      resample[i] = sorted[rng.uniform_index(sorted.size())];
    }
    summary.median_samples.push_back(median(resample));
  }
  return summary;
}

ComparisonTable compare_models(const std::vector<EvalReport>& reports,
                               int n_bootstrap, std::uint64_t seed) {
  if (reports.empty()) throw EmptyInput("no reports to compare");

  std::vector<std::string> record_ids;
  for (const auto& [id, score] : reports.front().scores) {
    record_ids.push_back(id);
  }
  for (const auto& report : reports) {
    if (report.scores.size() != record_ids.size()) {
      throw RecordSetMismatch("model " + report.model_label +
                              " covers a different record set");
    }
    for (const auto& id : record_ids) {
      if (!report.scores.count(id)) {
        throw RecordSetMismatch("model " + report.model_label +
                                " is missing record " + id);
      }
    }
  }

  // Per-record pooled RMSEs, aligned across models by sorted record id.
  std::sort(record_ids.begin(), record_ids.end());
  const std::size_t n_records = record_ids.size();
  std::vector<std::vector<double>> aligned(reports.size());
  for (std::size_t m = 0; m < reports.size(); ++m) {
    aligned[m].reserve(n_records);
    for (const auto& id : record_ids) {
      aligned[m].push_back(reports[m].scores.at(id).pooled_rmse);
    }
  }

  ComparisonTable table;
  for (std::size_t m = 0; m < reports.size(); ++m) {
    BootstrapSummary boot = bootstrap_median(aligned[m], n_bootstrap, seed);
    ModelSummaryRow row;
    row.model = reports[m].model_label;
    row.median_rmse = median(aligned[m]);
    row.ci_lo = percentile(boot.median_samples, 2.5);
    row.ci_hi = percentile(boot.median_samples, 97.5);
    table.rows.push_back(row);
    table.bootstraps.emplace(row.model, std::move(boot));
  }

  // Paired bootstrap for differences: one shared index stream so the same
  // resampled record multiset feeds every model.
  if (reports.size() > 1) {
    std::vector<std::vector<double>> diff_samples;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < reports.size(); ++a) {
      for (std::size_t b = a + 1; b < reports.size(); ++b) {
        pairs.emplace_back(a, b);
      }
    }
    diff_samples.resize(pairs.size());

    Rng rng(derive_seed(seed, 0x70617273ULL));  // independent paired stream
    std::vector<std::size_t> idx(n_records);
    std::vector<double> sample(n_records);
    for (int bs = 0; bs < n_bootstrap; ++bs) {
      for (std::size_t i = 0; i < n_records; ++i) {
        idx[i] = rng.uniform_index(n_records);
      }
      std::vector<double> medians(reports.size());
      for (std::size_t m = 0; m < reports.size(); ++m) {
        for (std::size_t i = 0; i < n_records; ++i) {
          sample[i] = aligned[m][idx[i]];
        }
        medians[m] = median(sample);
      }
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        diff_samples[p].push_back(medians[pairs[p].first] -
                                  medians[pairs[p].second]);
      }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      PairwiseDifference diff;
      diff.model_a = reports[pairs[p].first].model_label;
      diff.model_b = reports[pairs[p].second].model_label;
      diff.median_diff = median(diff_samples[p]);
      diff.ci_lo = percentile(diff_samples[p], 2.5);
      diff.ci_hi = percentile(diff_samples[p], 97.5);
      table.differences.push_back(diff);
    }
  }
  return table;
}

std::string ComparisonTable::to_text() const {
  std::ostringstream out;
  out << "model            median_rmse_mv   ci_2.5     ci_97.5\n";
  for (const auto& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %-16.6f %-10.6f %-10.6f\n",
                  row.model.c_str(), row.median_rmse, row.ci_lo, row.ci_hi);
    out << line;
  }
  if (!differences.empty()) {
    out << "\npairwise median differences (paired bootstrap)\n";
    for (const auto& diff : differences) {
      char line[200];
      std::snprintf(line, sizeof(line),
                    "%s - %s: %.6f  [%.6f, %.6f]\n", diff.model_a.c_str(),
                    diff.model_b.c_str(), diff.median_diff, diff.ci_lo,
                    diff.ci_hi);
      out << line;
    }
  }
  return out.str();
}

std::string ComparisonTable::summary_csv() const {
  std::ostringstream out;
  out << "model,median_rmse_mv,ci_lo_2.5,ci_hi_97.5\n";
  for (const auto& row : rows) {
    out << row.model << ',' << format_mv(row.median_rmse) << ','
        << format_mv(row.ci_lo) << ',' << format_mv(row.ci_hi) << "\n";
  }
  return out.str();
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "record_id,model,lead,rmse_mv\n";
  for (const auto& report : reports) {
    for (const auto& [id, score] : report.scores) {
      out << id << ',' << report.model_label << ",ALL,"
          << format_mv(score.pooled_rmse) << "\n";
      for (int l = 0; l < kNumLeads; ++l) {
        if (score.per_lead_rmse[l]) {
          out << id << ',' << report.model_label << ',' << lead_names()[l]
              << ',' << format_mv(*score.per_lead_rmse[l]) << "\n";
        }
      }
    }
  }
  return out.str();
}

}  // namespace ekgdipole
