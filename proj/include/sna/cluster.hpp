#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sna/characterize.hpp"
#include "sna/mor.hpp"
#include "sna/netlist.hpp"
#include "sna/simcore.hpp"

namespace sna {

struct VictimSpec {
  VccsTable vccs;
  double v_in_q = 0;
  double v_out_q = 0;
  SourceSpec input_noise;  // rides on v_in_q; Dc{v_in_q} means quiet
  ReceiverModel receiver;
  std::string net;  // name of the victim net in the interconnect model
};

struct AggressorSpec {
  TheveninDriver driver;
  ReceiverModel receiver;
  double offset_s = 0;  // switching-time shift applied to the ramp
  std::string net;
};

/// Victim driver table + Thevenin aggressors + coupled-pi interconnect.
struct ClusterSpec {
  VictimSpec victim;
  std::vector<AggressorSpec> aggressors;
  CoupledPiModel interconnect;
  double vdd = 0;

  void validate() const;
};

struct NoiseMetrics {
  double peak_v = 0;    // max |deviation from quiescent|
  double width_s = 0;   // total time with |deviation| >= 0.5*peak
  double area_v_s = 0;  // integral of |deviation| dt
};

enum class NrcVerdict { Pass, Fail, Boundary };

/// Node names used by the assembled macromodel circuit.
std::string macro_near_node(const std::string& net);
std::string macro_far_node(const ClusterSpec& spec, const std::string& net);

/// Builds the simulatable macromodel circuit: table VCCS at the victim
/// driving point, saturated ramps behind r_th for the aggressors, per-net pi
/// stages with the pair coupling lumped between far nodes (and removed from
/// the far ground caps so total capacitance is conserved), receiver caps at
/// the far nodes.
Circuit assemble_macromodel(const ClusterSpec& spec);

/// Nonlinear transient of the macromodel. Returns (driving-point, far-node)
/// waveforms as deviations from the run's own DC operating point.
std::pair<Waveform, Waveform> simulate_combined(const ClusterSpec& spec,
                                                const SimOptions& opts);

/// Linear-victim baseline: injected noise per aggressor on the holding-
/// resistance circuit, propagated noise from the macromodel with quiet
/// aggressors, components summed sample-wise after peak alignment.
Waveform simulate_superposition(const ClusterSpec& spec, const SimOptions& opts);

struct AlignmentResult {
  ClusterSpec spec;
  double common_peak_time_s = 0;
  std::vector<std::string> unmeasurable;  // contributors with peak < 1 mV
};

/// Shifts every noise contributor so the individual victim-deviation peaks
/// coincide at the latest common time.
AlignmentResult worst_case_alignment(const ClusterSpec& spec, const SimOptions& opts);

NoiseMetrics noise_metrics(const Waveform& w, double quiescent_v);

/// Curve lookup at m.width with a +-1 mV boundary band; widths beyond the
/// last point reuse the last amplitude.
NrcVerdict nrc_check(const NoiseMetrics& m, const NoiseRejectionCurve& nrc);

const char* to_string(NrcVerdict v);

}  // namespace sna
