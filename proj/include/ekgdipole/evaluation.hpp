#pragma once

#include "ekgdipole/record.hpp"
#include "ekgdipole/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ekgdipole {

// Per-record held-out reconstruction error: the pooled RMSE over every
// HeldOut entry plus per-lead RMSEs (absent when a lead has none).
struct RecordScore {
  double pooled_rmse = 0.0;
  std::array<std::optional<double>, kNumLeads> per_lead_rmse{};
};

struct EvalReport {
  std::string model_label;
  std::map<std::string, RecordScore> scores;  // record_id -> score
};

struct BootstrapSummary {
  std::vector<double> median_samples;  // one median per resample
  int n_bootstrap = 0;
  std::uint64_t seed = 0;
};

struct ModelSummaryRow {
  std::string model;
  double median_rmse = 0.0;  // plain median of the per-record RMSEs
  double ci_lo = 0.0;        // 2.5 percentile of the bootstrap medians
  double ci_hi = 0.0;        // 97.5 percentile
};

struct PairwiseDifference {
  std::string model_a;
  std::string model_b;
  double median_diff = 0.0;  // median over paired bootstrap of med_a - med_b
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ComparisonTable {
  std::vector<ModelSummaryRow> rows;
  std::vector<PairwiseDifference> differences;
  std::map<std::string, BootstrapSummary> bootstraps;  // per model

  std::string to_text() const;
  std::string summary_csv() const;  // model,median_rmse_mv,ci_lo_2.5,ci_hi_97.5
};

// RMSE over HeldOut entries only. Throws NoHeldOutData when the record has
// none, DimensionMismatch when shapes differ.
RecordScore holdout_rmse(const EkgRecord& truth, const Matrix& imputed);

// Medians of n_bootstrap with-replacement resamples of `values`. The input
// is sorted internally, so the result is permutation-invariant; even-length
// medians use the midpoint of the two central order statistics.
BootstrapSummary bootstrap_median(const std::vector<double>& values,
                                  int n_bootstrap, std::uint64_t seed);

// Sorted-copy median with the midpoint convention.
double median(std::vector<double> values);

// Linear-interpolation percentile (q in [0, 100]) of already-meaningful
// samples; sorts a copy.
double percentile(std::vector<double> values, double q);

// Per-model bootstrap summaries plus paired bootstrap median differences.
// All reports must cover the same record-id set (RecordSetMismatch).
ComparisonTable compare_models(const std::vector<EvalReport>& reports,
                               int n_bootstrap, std::uint64_t seed);

// report.csv rows: record_id,model,lead,rmse_mv with lead=ALL for pooled.
std::string report_csv(const std::vector<EvalReport>& reports);

}  // namespace ekgdipole
