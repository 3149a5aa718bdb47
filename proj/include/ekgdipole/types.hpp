#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace ekgdipole {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// 9 physical electrodes produce the 12 standard leads.
inline constexpr int kNumElectrodes = 9;
inline constexpr int kNumLeads = 12;

// Distance below which the point-dipole field is treated as degenerate.
inline constexpr double kDefaultMinDistance = 1e-3;  // meters

// Electrode column order: la, ra, ll, v1..v6. Row I = la - ra pins this
// ordering; the lead matrix blocks assume it.
const std::array<std::string, kNumElectrodes>& electrode_names();

// Lead row order: I, II, III, aVR, aVL, aVF, V1..V6.
const std::array<std::string, kNumLeads>& lead_names();

// Index of a lead name (exact match), -1 if unknown.
int lead_index(const std::string& name);

struct DegenerateGeometry : std::runtime_error {
  explicit DegenerateGeometry(const std::string& what, int electrode_index = -1)
      : std::runtime_error(what), electrode(electrode_index) {}
  int electrode;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonUniformSampling : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownLeadHeader : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientLength : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoObservedData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoHeldOutData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RecordSetMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-frame latent state: dipole location s (meters) and moment p
// (ampere-meters).
struct DipoleState {
  Vec3 location = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
};

// Torso conductivity in siemens per meter.
struct Conductivity {
  double kappa = 0.2;
};

// Positions of the 9 electrodes, in electrode_names() order, meters.
struct ElectrodeLayout {
  std::array<Vec3, kNumElectrodes> positions{};

  // Throws std::invalid_argument on non-finite entries or near-coincident
  // electrodes (pairwise distance <= 1e-6 m).
  void validate() const;

  Eigen::Matrix<double, kNumElectrodes, 3> as_matrix() const;
  static ElectrodeLayout from_matrix(
      const Eigen::Matrix<double, kNumElectrodes, 3>& m);
};

// Fixed 12x9 electrode-to-lead transform.
using LeadMatrix = Eigen::Matrix<double, kNumLeads, kNumElectrodes>;

}  // namespace ekgdipole
