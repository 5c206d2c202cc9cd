#pragma once

namespace pinc {

/// Reference scales mapping physical variables to the unit interval.
/// All fields are strictly positive; rho_ref only matters for the ideal gas.
struct NormalizationRefs {
  double t_ref = 1.0;
  double x_ref = 1.0;
  double P_ref = 1.0;
  double V_ref = 1.0;
  double rho_ref = 1.0;

  void validate() const;
  bool operator==(const NormalizationRefs&) const = default;
};

}  // namespace pinc
