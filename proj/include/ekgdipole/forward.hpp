#pragma once

#include "ekgdipole/types.hpp"

namespace ekgdipole {

// Potential (volts) induced at `electrode` by a point dipole in a uniform
// conductor: (1 / 4*pi*kappa) * (r - s)^T p / |r - s|^3.
//
// Throws DegenerateGeometry when |r - s| < min_distance. Pass
// min_distance = 0 to disable the guard (optimizer-internal use; the MAP
// objective handles near-collisions with a soft barrier instead).
double dipole_potential(const DipoleState& state, const Vec3& electrode,
                        Conductivity kappa,
                        double min_distance = kDefaultMinDistance);

// All 9 electrode potentials (volts) in layout order. DegenerateGeometry
// carries the offending electrode index.
Eigen::Matrix<double, kNumElectrodes, 1> electrode_potentials(
    const DipoleState& state, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance = kDefaultMinDistance);

// The potential is linear in the moment: phi = C(s, layout) * p with C the
// 9x3 coefficient matrix whose row e is (1/4*pi*kappa) (r_e - s)^T / |r_e - s|^3.
Eigen::Matrix<double, kNumElectrodes, 3> moment_coefficients(
    const Vec3& location, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance = kDefaultMinDistance);

// The constant 12x9 electrode-to-lead matrix, rows in lead_names() order,
// columns in electrode_names() order.
const LeadMatrix& lead_matrix();

// The 12 lead values in millivolts: 1000 * O * electrode_potentials(...).
Eigen::Matrix<double, kNumLeads, 1> leads_from_dipole(
    const DipoleState& state, const ElectrodeLayout& layout, Conductivity kappa,
    double min_distance = kDefaultMinDistance);

}  // namespace ekgdipole
