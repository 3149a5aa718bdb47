#pragma once

#include "ekgdipole/evaluation.hpp"
#include "ekgdipole/record.hpp"

#include <string>
#include <vector>

namespace ekgdipole {

// 12-lead reconstruction overlay: observed signal solid, held-out truth
// dashed, model imputation overlaid. Long traces are downsampled to keep
// the file size reasonable.
std::string reconstruction_overlay_svg(const EkgRecord& truth,
                                       const Matrix& imputed,
                                       const std::string& model_label);

// Box-style summary of the bootstrap median-RMSE distributions, one box per
// model (2.5/25/50/75/97.5 percentiles).
std::string median_distribution_svg(const ComparisonTable& table);

}  // namespace ekgdipole
