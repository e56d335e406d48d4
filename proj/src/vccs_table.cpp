#include "sna/vccs_table.hpp"

#include <algorithm>
#include <cmath>

#include "sna/error.hpp"

namespace sna {

namespace {

void check_uniform(const std::vector<double>& g, const char* axis) {
  if (g.size() < 2) throw Error(std::string(axis) + " grid needs at least 2 points");
  double step = g[1] - g[0];
  if (!(step > 0)) throw Error(std::string(axis) + " grid must be ascending");
  for (size_t i = 1; i < g.size(); ++i) {
    double d = g[i] - g[i - 1];
    if (!(d > 0) || std::abs(d - step) > 1e-9 * std::max(std::abs(step), 1.0))
      throw Error(std::string(axis) + " grid must be uniform and ascending");
  }
}

// Index of the cell whose [g[k], g[k+1]] interval contains v, clamped so a
// valid cell is always returned. Also returns the clamped coordinate.
struct CellPos {
  size_t k;
  double u;  // in [0, 1] within the cell
};

CellPos locate(const std::vector<double>& g, double v) {
  double lo = g.front(), hi = g.back();
  double vc = std::clamp(v, lo, hi);
  double step = (hi - lo) / double(g.size() - 1);
  size_t k = std::min<size_t>(size_t((vc - lo) / step), g.size() - 2);
  double u = (vc - g[k]) / (g[k + 1] - g[k]);
  return {k, std::clamp(u, 0.0, 1.0)};
}

}  // namespace

void VccsTable::validate() const {
  check_uniform(vin_grid, "vin");
  check_uniform(vout_grid, "vout");
  if (i_a.size() != vin_grid.size())
    throw Error("current matrix row count does not match vin grid");
  for (const auto& row : i_a) {
    if (row.size() != vout_grid.size())
      throw Error("current matrix column count does not match vout grid");
    for (double x : row)
      if (!std::isfinite(x)) throw Error("current matrix has a non-finite entry");
  }
}

VccsEval vccs_eval(const VccsTable& table, double vin, double vout) {
  CellPos a = locate(table.vin_grid, vin);
  CellPos b = locate(table.vout_grid, vout);
  double i00 = table.i_a[a.k][b.k];
  double i01 = table.i_a[a.k][b.k + 1];
  double i10 = table.i_a[a.k + 1][b.k];
  double i11 = table.i_a[a.k + 1][b.k + 1];

  double u = a.u, w = b.u;
  VccsEval out;
  out.i_a = (1 - u) * ((1 - w) * i00 + w * i01) + u * ((1 - w) * i10 + w * i11);

  bool in_clamped = vin < table.vin_grid.front() || vin > table.vin_grid.back();
  bool out_clamped = vout < table.vout_grid.front() || vout > table.vout_grid.back();
  double din = table.vin_grid[a.k + 1] - table.vin_grid[a.k];
  double dout = table.vout_grid[b.k + 1] - table.vout_grid[b.k];
  out.di_dvin =
      in_clamped ? 0.0 : ((1 - w) * (i10 - i00) + w * (i11 - i01)) / din;
  out.di_dvout =
      out_clamped ? 0.0 : ((1 - u) * (i01 - i00) + u * (i11 - i10)) / dout;
  return out;
}

}  // namespace sna
