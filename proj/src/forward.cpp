#include "ekgdipole/forward.hpp"

#include <cmath>
#include <numbers>

namespace ekgdipole {

const std::array<std::string, kNumElectrodes>& electrode_names() {
  static const std::array<std::string, kNumElectrodes> names = {
      "la", "ra", "ll", "v1", "v2", "v3", "v4", "v5", "v6"};
  return names;
}

const std::array<std::string, kNumLeads>& lead_names() {
  static const std::array<std::string, kNumLeads> names = {
      "I", "II", "III", "aVR", "aVL", "aVF",
      "V1", "V2", "V3", "V4", "V5", "V6"};
  return names;
}

int lead_index(const std::string& name) {
  const auto& names = lead_names();
  for (int i = 0; i < kNumLeads; ++i) {
    if (names[i] == name) return i;
  }
  return -1;
}

void ElectrodeLayout::validate() const {
  for (int e = 0; e < kNumElectrodes; ++e) {
    if (!positions[e].allFinite()) {
      throw std::invalid_argument("electrode position " + electrode_names()[e] +
                                  " is not finite");
    }
  }
  for (int i = 0; i < kNumElectrodes; ++i) {
    for (int j = i + 1; j < kNumElectrodes; ++j) {
      if ((positions[i] - positions[j]).norm() <= 1e-6) {
        throw std::invalid_argument("electrodes " + electrode_names()[i] +
                                    " and " + electrode_names()[j] +
                                    " coincide");
      }
    }
  }
}

Eigen::Matrix<double, kNumElectrodes, 3> ElectrodeLayout::as_matrix() const {
  Eigen::Matrix<double, kNumElectrodes, 3> m;
  for (int e = 0; e < kNumElectrodes; ++e) m.row(e) = positions[e].transpose();
  return m;
}

ElectrodeLayout ElectrodeLayout::from_matrix(
    const Eigen::Matrix<double, kNumElectrodes, 3>& m) {
  ElectrodeLayout layout;
  for (int e = 0; e < kNumElectrodes; ++e) layout.positions[e] = m.row(e);
  return layout;
}

double dipole_potential(const DipoleState& state, const Vec3& electrode,
                        Conductivity kappa, double min_distance) {
  const Vec3 u = electrode - state.location;
  const double d = u.norm();
  if (d < min_distance) {
    throw DegenerateGeometry("dipole within " + std::to_string(min_distance) +
                             " m of an electrode (distance " +
                             std::to_string(d) + ")");
  }
  const double c = 1.0 / (4.0 * std::numbers::pi * kappa.kappa);
  return c * u.dot(state.moment) / (d * d * d);
}

Eigen::Matrix<double, kNumElectrodes, 1> electrode_potentials(
    const DipoleState& state, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance) {
  Eigen::Matrix<double, kNumElectrodes, 1> phi;
  for (int e = 0; e < kNumElectrodes; ++e) {
    try {
      phi[e] = dipole_potential(state, layout.positions[e], kappa, min_distance);
    } catch (const DegenerateGeometry& err) {
      throw DegenerateGeometry(std::string(err.what()) + " (electrode " +
                                   electrode_names()[e] + ")",
                               e);
    }
  }
  return phi;
}

Eigen::Matrix<double, kNumElectrodes, 3> moment_coefficients(
    const Vec3& location, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance) {
  const double c = 1.0 / (4.0 * std::numbers::pi * kappa.kappa);
  Eigen::Matrix<double, kNumElectrodes, 3> coeffs;
  for (int e = 0; e < kNumElectrodes; ++e) {
    const Vec3 u = layout.positions[e] - location;
    const double d = u.norm();
    if (d < min_distance) {
      throw DegenerateGeometry(
          "dipole within " + std::to_string(min_distance) + " m of electrode " +
              electrode_names()[e],
          e);
    }
    coeffs.row(e) = (c / (d * d * d)) * u.transpose();
  }
  return coeffs;
}

const LeadMatrix& lead_matrix() {
  static const LeadMatrix O = [] {
    LeadMatrix m = LeadMatrix::Zero();
    // Limb leads (columns la, ra, ll).
    m(0, 0) = 1.0;  m(0, 1) = -1.0;                  // I   = la - ra
    m(1, 1) = -1.0; m(1, 2) = 1.0;                   // II  = ll - ra
    m(2, 0) = -1.0; m(2, 2) = 1.0;                   // III = ll - la
    m(3, 0) = -0.5; m(3, 1) = 1.0;  m(3, 2) = -0.5;  // aVR = ra - (la+ll)/2
    m(4, 0) = 1.0;  m(4, 1) = -0.5; m(4, 2) = -0.5;  // aVL = la - (ra+ll)/2
    m(5, 0) = -0.5; m(5, 1) = -0.5; m(5, 2) = 1.0;   // aVF = ll - (ra+la)/2
    // Precordial leads: V_i = v_i - (la+ra+ll)/3.
    for (int i = 0; i < 6; ++i) {
      m(6 + i, 0) = m(6 + i, 1) = m(6 + i, 2) = -1.0 / 3.0;
      m(6 + i, 3 + i) = 1.0;
    }
    return m;
  }();
  return O;
}

Eigen::Matrix<double, kNumLeads, 1> leads_from_dipole(
    const DipoleState& state, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance) {
  return 1000.0 * (lead_matrix() *
                   electrode_potentials(state, layout, kappa, min_distance));
}

}  // namespace ekgdipole
