#pragma once

#include "ekgdipole/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ekgdipole {

enum class MaskState : std::uint8_t { Observed = 0, HeldOut = 1, Missing = 2 };

// A 12-lead record: T x 12 samples in millivolts plus a per-entry mask.
// HeldOut entries keep their ground-truth value in `samples` (they are
// evaluable); Missing entries hold NaN.
struct EkgRecord {
  std::string record_id;
  double sample_rate_hz = 0.0;
  Matrix samples;               // T x 12
  std::vector<MaskState> mask;  // row-major T x 12

  int frames() const { return static_cast<int>(samples.rows()); }

  MaskState mask_at(int t, int lead) const {
    return mask[static_cast<std::size_t>(t) * kNumLeads + lead];
  }
  void set_mask(int t, int lead, MaskState m) {
    mask[static_cast<std::size_t>(t) * kNumLeads + lead] = m;
  }

  int count(MaskState m) const;
  int observed_in_frame(int t) const;

  // Checks the shape, the mask partition, and finiteness of samples at
  // non-Missing entries.
  void validate() const;
};

struct MaskScheme {
  enum class Kind { PtbHoldout, EdLayout };

  Kind kind = Kind::PtbHoldout;
  double holdout_fraction = 0.1;
  double window_seconds = 1.0;
  // EdLayout only: length of the single observed chunk per short lead; the
  // chunk for lead group q (standard 3x4 report layout) starts at
  // q * segment_seconds.
  double segment_seconds = 2.5;
  std::vector<int> long_leads = {1, 6, 10};  // II, V1, V5
  std::uint64_t seed = 0;

  void validate() const;
};

// Reads the CSV contract: header `time_s,I,II,...,V6`, one row per sample,
// empty cell => Missing. When `<path>.mask.csv` / `<path>.truth.csv`
// sidecars exist they restore HeldOut entries and their ground truth.
// record_id is the file stem. Throws ParseError, NonUniformSampling,
// UnknownLeadHeader.
EkgRecord read_record(const std::filesystem::path& path);

// Inverse of read_record. HeldOut/Missing cells are written empty; a
// `<path>.mask.csv` sidecar (tokens O/H/M) is written when any entry is not
// Observed, and a `<path>.truth.csv` sidecar when any entry is HeldOut.
void write_record(const EkgRecord& record, const std::filesystem::path& path);

// Returns a copy of `record` with the scheme's mask applied. Ground truth is
// retained for HeldOut entries; Missing never becomes Observed.
EkgRecord apply_mask_scheme(const EkgRecord& record, const MaskScheme& scheme);

}  // namespace ekgdipole
