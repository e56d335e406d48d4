#include "sna/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sna/error.hpp"

namespace sna {

void ClusterSpec::validate() const {
  if (!(vdd > 0) || !std::isfinite(vdd)) throw Error("cluster vdd must be positive");
  victim.vccs.validate();
  if (victim.v_in_q < victim.vccs.vin_grid.front() ||
      victim.v_in_q > victim.vccs.vin_grid.back() ||
      victim.v_out_q < victim.vccs.vout_grid.front() ||
      victim.v_out_q > victim.vccs.vout_grid.back())
    throw Error("victim quiescent point lies outside the VCCS grid");
  if (!(victim.receiver.cap_f > 0) || !std::isfinite(victim.receiver.cap_f))
    throw Error("victim receiver capacitance must be positive");
  if (interconnect.nets.empty()) throw Error("cluster has no interconnect nets");
  if (!interconnect.find(victim.net))
    throw Error("victim net '" + victim.net + "' not in the interconnect model");
  for (const auto& net : interconnect.nets) {
    const PiModel& pi = net.pi;
    if (pi.c_near_f < 0 || pi.c_far_f < 0 || pi.r_ohms < 0 ||
        !std::isfinite(pi.c_near_f + pi.c_far_f + pi.r_ohms))
      throw Error("pi model of net '" + net.name + "' has negative or non-finite values");
  }
  for (const auto& cpl : interconnect.couplings) {
    if (!(cpl.farads > 0) || !std::isfinite(cpl.farads))
      throw Error("coupling capacitance must be positive");
    if (cpl.net_a == cpl.net_b) throw Error("coupling connects a net to itself");
    if (!interconnect.find(cpl.net_a) || !interconnect.find(cpl.net_b))
      throw Error("coupling references an unknown net");
  }
  std::map<std::string, int> net_use{{victim.net, 1}};
  for (const auto& agg : aggressors) {
    if (!(agg.driver.r_th_ohms > 0) || !std::isfinite(agg.driver.r_th_ohms))
      throw Error("aggressor r_th must be positive");
    if (!(agg.driver.ramp.slew_s > 0)) throw Error("aggressor ramp slew must be positive");
    if (!std::isfinite(agg.offset_s)) throw Error("aggressor offset must be finite");
    if (!(agg.receiver.cap_f > 0) || !std::isfinite(agg.receiver.cap_f))
      throw Error("aggressor receiver capacitance must be positive");
    if (!interconnect.find(agg.net))
      throw Error("aggressor net '" + agg.net + "' not in the interconnect model");
    if (++net_use[agg.net] > 1)
      throw Error("net '" + agg.net + "' has more than one driver");
  }
}

std::string macro_near_node(const std::string& net) { return net + ".near"; }

std::string macro_far_node(const ClusterSpec& spec, const std::string& net) {
  const CoupledPiModel::Net* n = spec.interconnect.find(net);
  if (!n) throw Error("unknown net '" + net + "'");
  // a resistanceless pi collapses to a single node
  if (n->pi.degenerate_fallback || n->pi.r_ohms <= 0) return macro_near_node(net);
  return net + ".far";
}

namespace {

/// Pi stages, inter-net couplings, and receiver caps; shared by the
/// macromodel and the linear-baseline circuits. The per-net reductions
/// grounded the coupling far plates, so each c_far already contains that
/// net's coupling share; it is moved back onto the explicit coupling caps
/// here (clamped at zero, remainder taken from the near cap) to conserve
/// total capacitance.
void add_interconnect(Circuit& c, const ClusterSpec& spec) {
  for (const auto& net : spec.interconnect.nets) {
    std::string nn = macro_near_node(net.name);
    std::string nf = macro_far_node(spec, net.name);
    double share = spec.interconnect.coupling_total(net.name);
    double far = net.pi.c_far_f - share;
    double near = net.pi.c_near_f;
    if (far < 0) {
      near += far;
      far = 0;
    }
    if (near < 0) near = 0;
    if (nf == nn) {
      near += far;
      far = 0;
    } else {
      c.add({"rpi." + net.name, Resistor{nn, nf, net.pi.r_ohms}});
    }
    if (near > 0) c.add({"cnear." + net.name, Capacitor{nn, "0", near}});
    if (far > 0) c.add({"cfar." + net.name, Capacitor{nf, "0", far}});
  }
  for (const auto& cpl : spec.interconnect.couplings)
    c.add({"ccpl." + cpl.net_a + "." + cpl.net_b,
           Capacitor{macro_far_node(spec, cpl.net_a),
                     macro_far_node(spec, cpl.net_b), cpl.farads}});

  c.add({"crcv." + spec.victim.net,
         Capacitor{macro_far_node(spec, spec.victim.net), "0",
                   spec.victim.receiver.cap_f}});
  for (const auto& agg : spec.aggressors)
    c.add({"crcv." + agg.net,
           Capacitor{macro_far_node(spec, agg.net), "0", agg.receiver.cap_f}});
}

void add_aggressors(Circuit& c, const ClusterSpec& spec, int active) {
  for (size_t k = 0; k < spec.aggressors.size(); ++k) {
    const AggressorSpec& agg = spec.aggressors[k];
    SaturatedRamp ramp = agg.driver.ramp;
    if (active >= 0 && static_cast<int>(k) != active) ramp.v_end = ramp.v_start;
    SourceSpec src = shift_source(SourceSpec{ramp}, agg.offset_s);
    std::string tag = std::to_string(k);
    c.add({"vagg" + tag, VSource{"agg" + tag + ".src", "0", src}});
    c.add({"ragg" + tag, Resistor{"agg" + tag + ".src", macro_near_node(agg.net),
                                  agg.driver.r_th_ohms}});
  }
}

Waveform to_deviation(Waveform w) {
  double q = w.v.front();
  for (double& v : w.v) v -= q;
  return w;
}

/// Peak magnitude and its time, parabola-refined around the best sample.
void peak_of(const Waveform& w, double& peak, double& t_peak) {
  size_t best = 0;
  for (size_t k = 1; k < w.size(); ++k)
    if (std::abs(w.v[k]) > std::abs(w.v[best])) best = k;
  peak = std::abs(w.v[best]);
  t_peak = w.t_s[best];
  if (best == 0 || best + 1 >= w.size()) return;
  double t0 = w.t_s[best - 1], t1 = w.t_s[best], t2 = w.t_s[best + 1];
  double y0 = std::abs(w.v[best - 1]), y1 = std::abs(w.v[best]),
         y2 = std::abs(w.v[best + 1]);
  if (std::abs(t1 - t0 - (t2 - t1)) > 1e-15 * (t2 - t0)) return;  // uneven grid
  double denom = y0 - 2 * y1 + y2;
  if (denom >= 0) return;  // not a local max
  double delta = 0.5 * (y0 - y2) / denom;
  if (std::abs(delta) <= 1.0) t_peak = t1 + delta * (t1 - t0);
}

constexpr double kMeasurablePeakV = 1e-3;

}  // namespace

Circuit assemble_macromodel(const ClusterSpec& spec) {
  spec.validate();
  Circuit c;
  c.add({"vnoise", VSource{"vic.in", "0", spec.victim.input_noise}});
  c.add({"gvic", TableVccs{"vic.in", macro_near_node(spec.victim.net),
                           spec.victim.vccs}});
  add_aggressors(c, spec, -1);
  add_interconnect(c, spec);
  return c;
}

std::pair<Waveform, Waveform> simulate_combined(const ClusterSpec& spec,
                                                const SimOptions& opts) {
  Circuit c = assemble_macromodel(spec);
  std::string nn = macro_near_node(spec.victim.net);
  std::string nf = macro_far_node(spec, spec.victim.net);
  auto waves = transient(c, opts, {nn, nf});
  return {to_deviation(waves.at(nn)), to_deviation(waves.at(nf))};
}

Waveform simulate_superposition(const ClusterSpec& spec, const SimOptions& opts) {
  // propagated component: the nonlinear macromodel with quiet aggressors
  ClusterSpec prop = spec;
  for (auto& agg : prop.aggressors) agg.driver.ramp.v_end = agg.driver.ramp.v_start;
  Waveform propagated = simulate_combined(prop, opts).second;
  if (spec.aggressors.empty()) return propagated;

  double r_hold =
      holding_resistance(spec.victim.vccs, spec.victim.v_in_q, spec.victim.v_out_q);
  std::string nf = macro_far_node(spec, spec.victim.net);

  std::vector<Waveform> parts{propagated};
  for (size_t k = 0; k < spec.aggressors.size(); ++k) {
    Circuit c;
    c.add({"vhold", VSource{"hold.src", "0", Dc{spec.victim.v_out_q}}});
    c.add({"rhold", Resistor{"hold.src", macro_near_node(spec.victim.net), r_hold}});
    add_aggressors(c, spec, static_cast<int>(k));
    add_interconnect(c, spec);
    parts.push_back(to_deviation(transient(c, opts, {nf}).at(nf)));
  }

  // align the component peaks at the latest one, then sum on a uniform grid
  std::vector<double> peaks(parts.size()), t_peaks(parts.size());
  double target = 0;
  bool any = false;
  for (size_t k = 0; k < parts.size(); ++k) {
    peak_of(parts[k], peaks[k], t_peaks[k]);
    if (peaks[k] >= kMeasurablePeakV) {
      target = any ? std::max(target, t_peaks[k]) : t_peaks[k];
      any = true;
    }
  }
  double dt = opts.base_dt();
  Waveform sum;
  for (double t = 0;; t += dt) {
    if (t > opts.t_stop_s) t = opts.t_stop_s;
    double total = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
      double shift = (any && peaks[k] >= kMeasurablePeakV) ? target - t_peaks[k] : 0;
      total += parts[k].value_at(t - shift);
    }
    sum.t_s.push_back(t);
    sum.v.push_back(total);
    if (t >= opts.t_stop_s) break;
  }
  return sum;
}

AlignmentResult worst_case_alignment(const ClusterSpec& spec, const SimOptions& opts) {
  AlignmentResult out{spec, 0.0, {}};

  struct Contributor {
    std::string label;
    double t_peak = 0;
    bool measurable = false;
  };
  std::vector<Contributor> items;

  for (size_t k = 0; k < spec.aggressors.size(); ++k) {
    ClusterSpec solo = spec;
    solo.victim.input_noise = SourceSpec{Dc{spec.victim.v_in_q}};
    for (size_t j = 0; j < solo.aggressors.size(); ++j)
      if (j != k)
        solo.aggressors[j].driver.ramp.v_end = solo.aggressors[j].driver.ramp.v_start;
    Waveform dev = simulate_combined(solo, opts).second;
    Contributor item{"aggressor" + std::to_string(k)};
    double peak;
    peak_of(dev, peak, item.t_peak);
    item.measurable = peak >= kMeasurablePeakV;
    items.push_back(item);
  }

  bool has_glitch = !std::holds_alternative<Dc>(spec.victim.input_noise);
  if (has_glitch) {
    ClusterSpec solo = spec;
    for (auto& agg : solo.aggressors)
      agg.driver.ramp.v_end = agg.driver.ramp.v_start;
    Waveform dev = simulate_combined(solo, opts).second;
    Contributor item{"input_noise"};
    double peak;
    peak_of(dev, peak, item.t_peak);
    item.measurable = peak >= kMeasurablePeakV;
    items.push_back(item);
  }

  double target = 0;
  bool any = false;
  for (const auto& item : items) {
    if (!item.measurable) {
      out.unmeasurable.push_back(item.label);
      continue;
    }
    target = any ? std::max(target, item.t_peak) : item.t_peak;
    any = true;
  }
  if (!any) return out;

  for (size_t k = 0; k < spec.aggressors.size(); ++k)
    if (items[k].measurable)
      out.spec.aggressors[k].offset_s += target - items[k].t_peak;
  if (has_glitch && items.back().measurable)
    out.spec.victim.input_noise =
        shift_source(spec.victim.input_noise, target - items.back().t_peak);
  out.common_peak_time_s = target;
  return out;
}

NoiseMetrics noise_metrics(const Waveform& w, double quiescent_v) {
  if (w.size() == 0) throw Error("noise metrics need a nonempty waveform");
  NoiseMetrics m;
  for (double v : w.v) m.peak_v = std::max(m.peak_v, std::abs(v - quiescent_v));
  if (m.peak_v == 0) return m;

  const double half = 0.5 * m.peak_v;
  // split each sample interval at the zero crossing of the deviation so both
  // integrals run over pieces where |deviation| is linear
  auto piece = [&](double t1, double d1, double t2, double d2) {
    double a = std::abs(d1), b = std::abs(d2);
    m.area_v_s += 0.5 * (a + b) * (t2 - t1);
    if (a >= half && b >= half) {
      m.width_s += t2 - t1;
    } else if (a >= half || b >= half) {
      double tc = t1 + (t2 - t1) * (half - a) / (b - a);
      m.width_s += a >= half ? tc - t1 : t2 - tc;
    }
  };
  for (size_t k = 1; k < w.size(); ++k) {
    double t1 = w.t_s[k - 1], t2 = w.t_s[k];
    double d1 = w.v[k - 1] - quiescent_v, d2 = w.v[k] - quiescent_v;
    if (d1 * d2 < 0) {
      double tz = t1 + (t2 - t1) * d1 / (d1 - d2);
      piece(t1, d1, tz, 0.0);
      piece(tz, 0.0, t2, d2);
    } else {
      piece(t1, d1, t2, d2);
    }
  }
  return m;
}

NrcVerdict nrc_check(const NoiseMetrics& m, const NoiseRejectionCurve& nrc) {
  nrc.validate();
  const auto& pts = nrc.points;
  double limit;
  if (m.width_s <= pts.front().width_s) {
    limit = pts.front().amplitude_v;
  } else if (m.width_s >= pts.back().width_s) {
    limit = pts.back().amplitude_v;
  } else {
    size_t k = 1;
    while (pts[k].width_s < m.width_s) ++k;
    double u = (m.width_s - pts[k - 1].width_s) /
               (pts[k].width_s - pts[k - 1].width_s);
    limit = pts[k - 1].amplitude_v + u * (pts[k].amplitude_v - pts[k - 1].amplitude_v);
  }
  if (m.peak_v > limit + 1e-3) return NrcVerdict::Fail;
  if (m.peak_v < limit - 1e-3) return NrcVerdict::Pass;
  return NrcVerdict::Boundary;
}

const char* to_string(NrcVerdict v) {
  switch (v) {
    case NrcVerdict::Pass: return "pass";
    case NrcVerdict::Fail: return "fail";
    case NrcVerdict::Boundary: return "boundary";
  }
  return "unknown";
}

}  // namespace sna
