#include "sna/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sna/error.hpp"
#include "sna/vccs_table.hpp"

namespace sna {

void NoiseRejectionCurve::validate() const {
  if (points.empty()) throw Error("noise rejection curve has no points");
  for (size_t i = 0; i < points.size(); ++i) {
    const NrcPoint& p = points[i];
    if (!(p.width_s > 0) || !std::isfinite(p.width_s))
      throw Error("NRC widths must be positive and finite");
    if (!(p.amplitude_v > 0) || !std::isfinite(p.amplitude_v))
      throw Error("NRC amplitudes must be positive and finite");
    if (i > 0) {
      if (!(p.width_s > points[i - 1].width_s))
        throw Error("NRC widths must be strictly increasing");
      if (p.amplitude_v > points[i - 1].amplitude_v)
        throw Error("NRC amplitudes must be non-increasing with width");
    }
  }
}

// ---------------------------------------------------------------------------
// VCCS table sweep

VccsTable build_vccs_table(const Circuit& cell, const std::string& in_pin,
                           const std::string& out_pin,
                           const std::map<std::string, double>& other_inputs,
                           double vdd, int grid_points) {
  if (grid_points < 2) throw Error("VCCS grid needs at least 2 points per axis");
  if (!(vdd > 0)) throw Error("vdd must be positive");
  std::string in = to_lower(in_pin), out = to_lower(out_pin);
  if (in == out) throw Error("input and output pins must differ");
  auto nodes = cell.node_names();
  auto has = [&](const std::string& n) {
    return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
  };
  if (!has(in)) throw Error("unknown input pin '" + in_pin + "'");
  if (!has(out)) throw Error("unknown output pin '" + out_pin + "'");

  Circuit work = cell;
  work.add({"_char_in", VSource{in, "0", Dc{0.0}}});
  work.add({"_char_out", VSource{out, "0", Dc{0.0}}});
  int side = 0;
  for (const auto& [pin, volts] : other_inputs) {
    std::string p = to_lower(pin);
    if (!has(p)) throw Error("unknown side input '" + pin + "'");
    work.add({"_char_s" + std::to_string(side++), VSource{p, "0", Dc{volts}}});
  }

  VccsTable table;
  const double lo = -0.2 * vdd;
  const double step = 1.4 * vdd / (grid_points - 1);
  for (int k = 0; k < grid_points; ++k) {
    table.vin_grid.push_back(lo + k * step);
    table.vout_grid.push_back(lo + k * step);
  }

  Simulator sim(work, SimOptions{});
  table.i_a.assign(grid_points, std::vector<double>(grid_points, 0.0));
  for (int i = 0; i < grid_points; ++i) {
    for (int j = 0; j < grid_points; ++j) {
      std::map<std::string, double> force{{"_char_in", table.vin_grid[i]},
                                          {"_char_out", table.vout_grid[j]}};
      try {
        auto dc = sim.solve_dc(force);
        // The forcing source absorbs exactly what the cell delivers.
        table.i_a[i][j] = -dc.source_i.at("_char_out");
      } catch (const ConvergenceError& e) {
        std::ostringstream msg;
        msg << "VCCS sweep did not converge at (vin=" << table.vin_grid[i]
            << ", vout=" << table.vout_grid[j] << "): " << e.what();
        throw ConvergenceError(msg.str(), e.last_residual_a);
      }
    }
  }
  table.validate();
  return table;
}

double holding_resistance(const VccsTable& table, double v_in_q, double v_out_q) {
  VccsEval e = vccs_eval(table, v_in_q, v_out_q);
  if (!std::isfinite(e.di_dvout) || !(e.di_dvout < 0))
    throw Error("driver does not hold at this quiescent point (dI/dVout >= 0)");
  return -1.0 / e.di_dvout;
}

// ---------------------------------------------------------------------------
// Thevenin driver fit
//
// The measured crossings pin three numbers, of which one (t20, say) is only
// a time translation. In normalized time (tau = r_th * c_probe = 1, unit
// swing) the output shape depends on the single parameter s = slew/tau, so
// the fit is a 1-D root-find: for each candidate s, match the 20-80 width
// (fixes tau, hence r_th = tau/c_probe and slew = s*tau) and the 20%
// crossing (fixes t0), then score the 50% crossing. The naive sequential
// recipe (slew from the width, t0 = t50 - slew/2, then root-find r_th on
// t50) degenerates: it makes r_th = 0 a root for every measurement. The
// 20-80 asymmetry is also not monotone in s; it rises from 0.339 (pure RC)
// through 0.5 near s = 3, peaks around 0.52, and falls back to 0.5 from
// above, so ramp-dominated shapes can have two exact (r_th, slew) roots.
// Both are computed and the full measured waveform picks the branch.

namespace {

// Ramp response of an RC divider, tau = 1, swing 0 -> 1, ramp length s.
double thevenin_norm_v(double s, double t) {
  if (t <= 0) return 0.0;
  if (t <= s) return (t + std::expm1(-t)) / s;
  return 1.0 + std::expm1(-s) / s * std::exp(-(t - s));
}

double thevenin_norm_cross(double s, double frac) {
  double lo = 0.0, hi = s + 60.0;
  for (int k = 0; k < 100; ++k) {
    double mid = 0.5 * (lo + hi);
    (thevenin_norm_v(s, mid) < frac ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct NormShape {
  double t20, width, asym;
};

NormShape norm_shape(double s) {
  double t20 = thevenin_norm_cross(s, 0.2);
  double t50 = thevenin_norm_cross(s, 0.5);
  double t80 = thevenin_norm_cross(s, 0.8);
  return {t20, t80 - t20, (t50 - t20) / (t80 - t20)};
}

}  // namespace

TheveninDriver fit_thevenin(const Circuit& cell, const std::string& in_pin,
                            const std::string& out_pin,
                            const SaturatedRamp& input_ramp, double vdd,
                            double c_probe_f) {
  if (!(c_probe_f > 0)) throw Error("probe capacitance must be positive");
  if (!(input_ramp.slew_s > 0)) throw Error("input ramp slew must be positive");
  std::string out = to_lower(out_pin);

  Circuit work = cell;
  work.add({"_vin", VSource{to_lower(in_pin), "0", input_ramp}});
  work.add({"_cl", Capacitor{out, "0", c_probe_f}});

  double m20 = 0, m50 = 0, m80 = 0;
  double start_rail = 0, end_rail = 0;
  Waveform w;
  bool found = false;
  const double base = input_ramp.t0_s + input_ramp.slew_s;
  double extra = std::max(base, 100e-12);
  for (int attempt = 0; attempt < 6 && !found; ++attempt, extra *= 2) {
    SimOptions opts;
    opts.t_stop_s = base + extra;
    opts.dt_s = opts.t_stop_s / 8000;
    w = transient(work, opts, {out}).at(out);
    double v0 = w.v.front();
    if (std::abs(v0) <= 0.15 * vdd)
      start_rail = 0;
    else if (std::abs(v0 - vdd) <= 0.15 * vdd)
      start_rail = vdd;
    else
      throw Error("cell output does not rest at a rail before switching");
    end_rail = vdd - start_rail;
    bool rising = end_rail > start_rail;
    auto cross = [&](double frac, double& t_out) {
      double level = start_rail + frac * (end_rail - start_rail);
      for (size_t k = 1; k < w.size(); ++k) {
        bool before = rising ? w.v[k - 1] < level : w.v[k - 1] > level;
        bool after = rising ? w.v[k] >= level : w.v[k] <= level;
        if (before && after) {
          double u = (level - w.v[k - 1]) / (w.v[k] - w.v[k - 1]);
          t_out = w.t_s[k - 1] + u * (w.t_s[k] - w.t_s[k - 1]);
          return true;
        }
      }
      return false;
    };
    found = cross(0.2, m20) && cross(0.5, m50) && cross(0.8, m80);
  }
  if (!found)
    throw Error("cell output never crosses the 20/50/80% thresholds on the probe load");

  const double width = m80 - m20;
  const double asym = (m50 - m20) / width;

  // Mean squared deviation of the candidate model from the measured output
  // over a window spanning the transition and its tail.
  auto residual = [&](double s) {
    NormShape shape = norm_shape(s);
    double tau = width / shape.width;
    double t0 = m20 - tau * shape.t20;
    double w_lo = m20 - width, w_hi = m80 + 2 * width;
    double sum = 0;
    size_t n = 0;
    for (size_t k = 0; k < w.size(); ++k) {
      if (w.t_s[k] < w_lo || w.t_s[k] > w_hi) continue;
      double model = start_rail +
                     (end_rail - start_rail) * thevenin_norm_v(s, (w.t_s[k] - t0) / tau);
      sum += (model - w.v[k]) * (model - w.v[k]);
      ++n;
    }
    return n ? sum / n : 0.0;
  };

  // Root-find over u = log10(s); r_th is a strictly decreasing function of s
  // at matched width, so this is the 1-D search in r_th. Collect every sign
  // change of the t50 mismatch, refine each by bisection, and keep the
  // candidate whose full waveform agrees best.
  const double u_lo = -3.0, u_hi = 5.0;
  const int scan = 161;
  auto mismatch = [&](double u) { return norm_shape(std::pow(10, u)).asym - asym; };
  std::vector<double> candidates{std::pow(10, u_lo), std::pow(10, u_hi)};
  double prev_u = u_lo, prev_g = mismatch(u_lo);
  for (int k = 1; k < scan; ++k) {
    double u = u_lo + (u_hi - u_lo) * k / (scan - 1);
    double g = mismatch(u);
    if ((prev_g < 0) != (g < 0)) {
      double a = prev_u, b = u;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (a + b);
        ((mismatch(mid) < 0) == (prev_g < 0) ? a : b) = mid;
      }
      candidates.push_back(std::pow(10, 0.5 * (a + b)));
    }
    prev_u = u;
    prev_g = g;
  }
  double best_s = candidates.front(), best_res = residual(candidates.front());
  for (size_t k = 1; k < candidates.size(); ++k) {
    double res = residual(candidates[k]);
    if (res < best_res) {
      best_res = res;
      best_s = candidates[k];
    }
  }

  NormShape shape = norm_shape(best_s);
  double tau = width / shape.width;
  double r_th = std::max(tau / c_probe_f, 1e-6);
  double slew = std::max(best_s * tau, 1e-18);
  double t0 = m20 - tau * shape.t20;
  return {r_th, SaturatedRamp{t0, slew, start_rail, end_rail}};
}

// ---------------------------------------------------------------------------
// Noise rejection curve

NoiseRejectionCurve build_nrc(const Circuit& receiver, const std::string& in_pin,
                              const std::string& out_pin, double vdd,
                              const std::vector<double>& widths, double load_f,
                              double v_quiet) {
  if (widths.empty()) throw Error("NRC needs at least one width");
  for (size_t i = 0; i < widths.size(); ++i) {
    if (!(widths[i] > 0)) throw Error("NRC widths must be positive");
    if (i > 0 && !(widths[i] > widths[i - 1]))
      throw Error("NRC widths must be strictly increasing");
  }
  if (load_f < 0) throw Error("load capacitance must be non-negative");
  std::string in = to_lower(in_pin), out = to_lower(out_pin);
  const double dir = v_quiet < 0.5 * vdd ? 1.0 : -1.0;

  auto output_deviation = [&](double w, double amp) {
    double t0 = 0.25 * w;
    Circuit work = receiver;
    work.add({"_vin",
              VSource{in, "0", TriangleGlitch{t0, t0 + w, t0 + 2 * w, v_quiet,
                                              v_quiet + dir * amp}}});
    if (load_f > 0) work.add({"_cl", Capacitor{out, "0", load_f}});
    SimOptions opts;
    opts.t_stop_s = t0 + 2 * w + std::max(2 * w, 200e-12);
    Waveform wave = transient(work, opts, {out}).at(out);
    double quiescent = wave.v.front();
    double peak = 0;
    for (double v : wave.v) peak = std::max(peak, std::abs(v - quiescent));
    return peak;
  };

  NoiseRejectionCurve curve;
  double prev = vdd;
  for (double w : widths) {
    NrcPoint p;
    p.width_s = w;
    if (output_deviation(w, vdd) < 0.5 * vdd) {
      p.amplitude_v = vdd;
      p.saturated = true;
    } else {
      double lo = 0.0, hi = vdd;
      while (hi - lo > 0.5e-3) {
        double mid = 0.5 * (lo + hi);
        (output_deviation(w, mid) >= 0.5 * vdd ? hi : lo) = mid;
      }
      p.amplitude_v = 0.5 * (lo + hi);
    }
    if (!(p.amplitude_v > 0))
      throw Error("receiver fails at zero glitch amplitude; quiescent point unstable");
    // Wider glitches inject more charge, so clamp out sub-millivolt bisection
    // noise to keep the curve monotone as typed.
    p.amplitude_v = std::min(p.amplitude_v, prev);
    prev = p.amplitude_v;
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

double receiver_cap(const Circuit& receiver, const std::string& in_pin) {
  std::string pin = to_lower(in_pin);
  double total = 0;
  bool any = false;
  for (const auto& e : receiver.elements) {
    const auto* m = std::get_if<Mosfet>(&e.kind);
    if (!m || m->g != pin) continue;
    total += receiver.models.at(m->model).cgate_f_per_m2 * m->width_m * m->length_m;
    any = true;
  }
  if (!any) throw Error("no transistor gate connects to pin '" + in_pin + "'");
  return total;
}

double dc_switching_threshold(const Circuit& receiver, const std::string& in_pin,
                              const std::string& out_pin, double vdd,
                              double v_quiet) {
  std::string in = to_lower(in_pin), out = to_lower(out_pin);
  Circuit work = receiver;
  work.add({"_vin", VSource{in, "0", Dc{v_quiet}}});
  Simulator sim(work, SimOptions{});
  double out_q = sim.solve_dc({{"_vin", v_quiet}}).node_v.at(out);
  const double dir = v_quiet < 0.5 * vdd ? 1.0 : -1.0;
  auto deviation = [&](double u) {
    return std::abs(sim.solve_dc({{"_vin", v_quiet + dir * u}}).node_v.at(out) -
                    out_q);
  };
  if (deviation(vdd) < 0.5 * vdd)
    throw Error("receiver output never deviates by vdd/2 over the input sweep");
  double lo = 0.0, hi = vdd;
  for (int k = 0; k < 60; ++k) {
    double mid = 0.5 * (lo + hi);
    (deviation(mid) >= 0.5 * vdd ? hi : lo) = mid;
  }
  return v_quiet + dir * 0.5 * (lo + hi);
}

}  // namespace sna
