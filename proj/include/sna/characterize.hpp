#pragma once

#include <map>
#include <string>
#include <vector>

#include "sna/netlist.hpp"
#include "sna/simcore.hpp"

namespace sna {

/// Linear aggressor driver: saturated ramp behind a driving resistance.
struct TheveninDriver {
  double r_th_ohms = 0;
  SaturatedRamp ramp;
};

/// Receiver reduced to its input capacitance.
struct ReceiverModel {
  double cap_f = 0;
};

struct NrcPoint {
  double width_s = 0;
  double amplitude_v = 0;
  bool saturated = false;  // never failed even at vdd amplitude
};

/// Amplitude-vs-width failure boundary; glitches above the curve fail.
struct NoiseRejectionCurve {
  std::vector<NrcPoint> points;  // widths strictly increasing, amplitudes non-increasing
  void validate() const;
};

/// Sweeps (v_in, v_out) over [-0.2 vdd, 1.2 vdd] on a grid_points x grid_points
/// grid with the output pin forced, recording the DC current delivered by the
/// cell into out_pin. Side inputs are pinned at the given levels.
///
/// Grids with grid_points = 7k+1 (15, 22, 29, ...) place 0 and vdd exactly on
/// grid nodes, which quiet-cluster equilibrium checks rely on.
VccsTable build_vccs_table(const Circuit& cell, const std::string& in_pin,
                           const std::string& out_pin,
                           const std::map<std::string, double>& other_inputs,
                           double vdd, int grid_points = 25);

/// Small-signal output resistance -1/(dI/dVout) at the quiescent point.
double holding_resistance(const VccsTable& table, double v_in_q, double v_out_q);

/// Fits a saturated-ramp-behind-resistance driver so that it reproduces the
/// cell's measured 20/50/80% output crossings on the probe load. The 20-80
/// width and waveform asymmetry pin (slew, r_th); t0 then matches t50 exactly.
TheveninDriver fit_thevenin(const Circuit& cell, const std::string& in_pin,
                            const std::string& out_pin,
                            const SaturatedRamp& input_ramp, double vdd,
                            double c_probe_f);

/// Per-width bisection (to 1 mV) of the triangular glitch amplitude at which
/// the receiver output deviation first reaches vdd/2. The glitch rides on
/// v_quiet and points toward the opposite rail; its half-height width equals
/// the requested width. Widths that never fail are recorded saturated at vdd.
NoiseRejectionCurve build_nrc(const Circuit& receiver, const std::string& in_pin,
                              const std::string& out_pin, double vdd,
                              const std::vector<double>& widths, double load_f,
                              double v_quiet = 0.0);

/// Sum of cgate_per_area * W * L over transistors whose gate is on in_pin.
double receiver_cap(const Circuit& receiver, const std::string& in_pin);

/// Input level at which the receiver output deviates by vdd/2 from its
/// quiescent value (DC). Used as the wide-glitch limit of the NRC.
double dc_switching_threshold(const Circuit& receiver, const std::string& in_pin,
                              const std::string& out_pin, double vdd,
                              double v_quiet = 0.0);

}  // namespace sna
