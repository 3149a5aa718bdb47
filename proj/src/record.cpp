#include "ekgdipole/record.hpp"

#include "ekgdipole/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ekgdipole {

namespace {

constexpr const char* kHeader =
    "time_s,I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6";

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string token;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(token);
      token.clear();
    } else {
      token.push_back(ch);
    }
  }
  fields.push_back(token);
  return fields;
}

double parse_number(const std::string& field, const std::string& where) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || end != begin + field.size() || !std::isfinite(value)) {
    throw ParseError("malformed numeric field '" + field + "' " + where);
  }
  return value;
}

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

struct CsvTable {
  std::vector<double> times;
  std::vector<std::array<std::string, kNumLeads>> cells;
};

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string());
  {
    auto header = split_csv_line(line);
    auto expected = split_csv_line(kHeader);
    if (header != expected) {
      throw UnknownLeadHeader("unexpected header in " + path.string() + ": '" +
                              line + "'");
    }
  }
  CsvTable table;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != kNumLeads + 1) {
      throw ParseError("row " + std::to_string(row) + " of " + path.string() +
                       " has " + std::to_string(fields.size()) +
                       " fields, expected 13");
    }
    table.times.push_back(
        parse_number(fields[0], "in time column of " + path.string()));
    std::array<std::string, kNumLeads> cells;
    for (int l = 0; l < kNumLeads; ++l) cells[l] = fields[l + 1];
    table.cells.push_back(std::move(cells));
  }
  return table;
}

// Sampling must be uniform to rel. 1e-6; the tolerance is floored at twice
// the 1e-6 s quantum of the 6-decimal time column.
double infer_sample_rate(const std::vector<double>& times,
                         const std::string& where) {
  if (times.size() < 2) {
    throw ParseError("need at least 2 samples to infer the rate in " + where);
  }
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw NonUniformSampling("non-increasing time in " + where);
  const double tol = std::max(1e-6 * dt, 2.0000001e-6);
  for (std::size_t i = 1; i + 1 < times.size(); ++i) {
    const double delta = times[i + 1] - times[i];
    if (std::abs(delta - dt) > tol) {
      throw NonUniformSampling("non-uniform sampling at row " +
                               std::to_string(i + 1) + " of " + where);
    }
  }
  return 1.0 / dt;
}

}  // namespace

int EkgRecord::count(MaskState m) const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), m));
}

int EkgRecord::observed_in_frame(int t) const {
  int n = 0;
  for (int l = 0; l < kNumLeads; ++l) {
    if (mask_at(t, l) == MaskState::Observed) ++n;
  }
  return n;
}

void EkgRecord::validate() const {
  if (samples.cols() != kNumLeads) {
    throw DimensionMismatch("record must have 12 lead columns");
  }
  if (mask.size() != static_cast<std::size_t>(samples.rows()) * kNumLeads) {
    throw DimensionMismatch("mask size does not match samples");
  }
  if (!(sample_rate_hz > 0.0)) {
    throw InvalidConfig("sample_rate_hz must be > 0");
  }
  for (int t = 0; t < frames(); ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      if (mask_at(t, l) != MaskState::Missing &&
          !std::isfinite(samples(t, l))) {
        throw InvalidConfig("non-finite sample at non-Missing entry (" +
                            std::to_string(t) + "," + std::to_string(l) + ")");
      }
    }
  }
}

void MaskScheme::validate() const {
  if (!(holdout_fraction > 0.0) || holdout_fraction > 0.5) {
    throw InvalidConfig("holdout_fraction must be in (0, 0.5]");
  }
  if (!(window_seconds > 0.0)) {
    throw InvalidConfig("window_seconds must be > 0");
  }
  if (kind == Kind::EdLayout) {
    if (!(segment_seconds > 0.0)) {
      throw InvalidConfig("segment_seconds must be > 0");
    }
    for (int l : long_leads) {
      if (l < 0 || l >= kNumLeads) {
        throw InvalidConfig("long lead index out of range");
      }
    }
  }
}

EkgRecord read_record(const std::filesystem::path& path) {
  CsvTable data = read_csv_table(path);
  EkgRecord record;
  record.record_id = path.stem().string();
  record.sample_rate_hz = infer_sample_rate(data.times, path.string());
  const int T = static_cast<int>(data.times.size());
  record.samples.resize(T, kNumLeads);
  record.mask.assign(static_cast<std::size_t>(T) * kNumLeads,
                     MaskState::Observed);

  const auto mask_path =
      std::filesystem::path(path.string() + ".mask.csv");
  const auto truth_path =
      std::filesystem::path(path.string() + ".truth.csv");
  const bool have_mask = std::filesystem::exists(mask_path);

  CsvTable mask_table;
  CsvTable truth_table;
  bool have_truth = false;
  if (have_mask) {
    mask_table = read_csv_table(mask_path);
    if (static_cast<int>(mask_table.cells.size()) != T) {
      throw ParseError("mask sidecar row count differs from " + path.string());
    }
    have_truth = std::filesystem::exists(truth_path);
    if (have_truth) {
      truth_table = read_csv_table(truth_path);
      if (static_cast<int>(truth_table.cells.size()) != T) {
        throw ParseError("truth sidecar row count differs from " +
                         path.string());
      }
    }
  }

  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < kNumLeads; ++l) {
      const std::string& cell = data.cells[t][l];
      MaskState m = cell.empty() ? MaskState::Missing : MaskState::Observed;
      if (have_mask) {
        const std::string& token = mask_table.cells[t][l];
        if (token == "O") {
          m = MaskState::Observed;
        } else if (token == "H") {
          m = MaskState::HeldOut;
        } else if (token == "M") {
          m = MaskState::Missing;
        } else {
          throw ParseError("bad mask token '" + token + "' in " +
                           mask_path.string());
        }
        if ((m == MaskState::Observed) != !cell.empty()) {
          throw ParseError("mask sidecar disagrees with data cell (" +
                           std::to_string(t) + "," + std::to_string(l) +
                           ") in " + path.string());
        }
      }
      switch (m) {
        case MaskState::Observed:
          record.samples(t, l) =
              parse_number(cell, "in " + path.string());
          break;
        case MaskState::HeldOut: {
          if (!have_truth) {
            throw ParseError("HeldOut entries but no truth sidecar for " +
                             path.string());
          }
          const std::string& truth_cell = truth_table.cells[t][l];
          record.samples(t, l) =
              parse_number(truth_cell, "in " + truth_path.string());
          break;
        }
        case MaskState::Missing:
          record.samples(t, l) = std::numeric_limits<double>::quiet_NaN();
          break;
      }
      record.set_mask(t, l, m);
    }
  }
  record.validate();
  return record;
}

void write_record(const EkgRecord& record, const std::filesystem::path& path) {
  record.validate();
  const int T = record.frames();
  const bool any_not_observed =
      record.count(MaskState::Observed) != T * kNumLeads;
  const bool any_held_out = record.count(MaskState::HeldOut) > 0;

  std::ofstream data(path, std::ios::binary);
  if (!data) throw ParseError("cannot write " + path.string());
  data << kHeader << "\n";
  for (int t = 0; t < T; ++t) {
    data << format_fixed6(t / record.sample_rate_hz);
    for (int l = 0; l < kNumLeads; ++l) {
      data << ',';
      if (record.mask_at(t, l) == MaskState::Observed) {
        data << format_fixed6(record.samples(t, l));
      }
    }
    data << "\n";
  }
  data.close();

  const auto mask_path = std::filesystem::path(path.string() + ".mask.csv");
  const auto truth_path = std::filesystem::path(path.string() + ".truth.csv");
  std::filesystem::remove(mask_path);
  std::filesystem::remove(truth_path);

  if (any_not_observed) {
    std::ofstream mask(mask_path, std::ios::binary);
    if (!mask) throw ParseError("cannot write " + mask_path.string());
    mask << kHeader << "\n";
    for (int t = 0; t < T; ++t) {
      mask << format_fixed6(t / record.sample_rate_hz);
      for (int l = 0; l < kNumLeads; ++l) {
        switch (record.mask_at(t, l)) {
          case MaskState::Observed: mask << ",O"; break;
          case MaskState::HeldOut: mask << ",H"; break;
          case MaskState::Missing: mask << ",M"; break;
        }
      }
      mask << "\n";
    }
  }

  if (any_held_out) {
    std::ofstream truth(truth_path, std::ios::binary);
    if (!truth) throw ParseError("cannot write " + truth_path.string());
    truth << kHeader << "\n";
    for (int t = 0; t < T; ++t) {
      truth << format_fixed6(t / record.sample_rate_hz);
      for (int l = 0; l < kNumLeads; ++l) {
        truth << ',';
        if (record.mask_at(t, l) == MaskState::HeldOut) {
          truth << format_fixed6(record.samples(t, l));
        }
      }
      truth << "\n";
    }
  }
}

namespace {

struct Interval {
  int begin;
  int end;  // exclusive
};

bool intersects(const std::vector<Interval>& set, int begin, int end) {
  for (const auto& iv : set) {
    if (begin < iv.end && iv.begin < end) return true;
  }
  return false;
}

// Places HeldOut windows on one lead until `target` samples are held out.
// Windows need every covered cell currently Observed; starts avoiding the
// cross-lead `occupied` set are preferred, overlap is the fallback (12 leads
// of windows cannot always be pairwise disjoint in time).
void place_holdout_windows(EkgRecord& record, int lead, int target,
                           int window_len, Rng& rng,
                           std::vector<Interval>& occupied) {
  const int T = record.frames();
  int placed = 0;
  while (placed < target) {
    const int len = std::min(window_len, target - placed);
    std::vector<int> valid;
    std::vector<int> preferred;
    for (int s = 0; s + len <= T; ++s) {
      bool free = true;
      for (int t = s; t < s + len; ++t) {
        if (record.mask_at(t, lead) != MaskState::Observed) {
          free = false;
          break;
        }
      }
      if (!free) continue;
      valid.push_back(s);
      if (!intersects(occupied, s, s + len)) preferred.push_back(s);
    }
    if (valid.empty()) break;
    const std::vector<int>& pool = preferred.empty() ? valid : preferred;
    const int start = pool[rng.uniform_index(pool.size())];
    for (int t = start; t < start + len; ++t) {
      record.set_mask(t, lead, MaskState::HeldOut);
    }
    occupied.push_back({start, start + len});
    placed += len;
  }
}

void apply_holdout(EkgRecord& record, const MaskScheme& scheme, Rng& rng) {
  const int window_len = std::max(
      1, static_cast<int>(
             std::llround(scheme.window_seconds * record.sample_rate_hz)));
  std::vector<Interval> occupied;
  for (int lead = 0; lead < kNumLeads; ++lead) {
    int observed = 0;
    for (int t = 0; t < record.frames(); ++t) {
      if (record.mask_at(t, lead) == MaskState::Observed) ++observed;
    }
    const int target =
        static_cast<int>(std::llround(scheme.holdout_fraction * observed));
    place_holdout_windows(record, lead, target, window_len, rng, occupied);
  }
}

}  // namespace

EkgRecord apply_mask_scheme(const EkgRecord& record, const MaskScheme& scheme) {
  record.validate();
  scheme.validate();
  EkgRecord out = record;
  Rng rng(scheme.seed);

  if (scheme.kind == MaskScheme::Kind::EdLayout) {
    const int chunk_len = static_cast<int>(
        std::floor(scheme.segment_seconds * record.sample_rate_hz));
    if (chunk_len < 1) throw InvalidConfig("segment shorter than one sample");
    const int last_start = static_cast<int>(
        std::floor(3.0 * scheme.segment_seconds * record.sample_rate_hz));
    if (last_start + chunk_len > record.frames()) {
      throw InsufficientLength(
          "record too short for the 4-column layout: need " +
          std::to_string(last_start + chunk_len) + " samples, have " +
          std::to_string(record.frames()));
    }
    for (int lead = 0; lead < kNumLeads; ++lead) {
      if (std::find(scheme.long_leads.begin(), scheme.long_leads.end(),
                    lead) != scheme.long_leads.end()) {
        continue;
      }
      const int quarter = lead / 3;  // standard 3x4 report layout
      const int begin = static_cast<int>(std::floor(
          quarter * scheme.segment_seconds * record.sample_rate_hz));
      const int end = begin + chunk_len;
      for (int t = 0; t < out.frames(); ++t) {
        if (t < begin || t >= end) {
          out.set_mask(t, lead, MaskState::Missing);
          out.samples(t, lead) = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  }

  apply_holdout(out, scheme, rng);
  out.validate();
  return out;
}

}  // namespace ekgdipole
