#pragma once

#include <vector>

namespace sna {

/// Pre-characterized DC current table I_DC = f(V_in, V_out) for a driver
/// cell. Currents flow out of the cell into the output node. Both grids are
/// uniform and ascending; i_a is indexed [vin][vout].
struct VccsTable {
  std::vector<double> vin_grid;
  std::vector<double> vout_grid;
  std::vector<std::vector<double>> i_a;

  // Throws Error when grids are too short, non-uniform, or the matrix does
  // not match the grids, or any entry is non-finite.
  void validate() const;

  bool operator==(const VccsTable&) const = default;
};

struct VccsEval {
  double i_a;
  double di_dvin;   // bilinear slope, used as Newton transconductance
  double di_dvout;  // bilinear slope, used as Newton conductance
};

/// Bilinear interpolation on the cell containing (vin, vout). Arguments
/// outside the grid are clamped to the boundary; the interpolant is flat
/// there, so the partial along a clamped axis is zero.
VccsEval vccs_eval(const VccsTable& table, double vin, double vout);

}  // namespace sna
