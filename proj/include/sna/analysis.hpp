#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sna/cluster.hpp"
#include "sna/netlist.hpp"

namespace sna {

enum class AnalysisMode { Oracle, Macromodel, Superposition };

std::optional<AnalysisMode> parse_mode(const std::string& s);
const char* to_string(AnalysisMode m);

/// Parsed cluster config file (sectioned key=value; see the repository's
/// annotated example). Relative paths inside the file are resolved against
/// the config file's own directory, so configs are location-independent.
struct ClusterConfig {
  struct VictimCfg {
    std::string cell, in, out, net;
    std::map<std::string, double> pins;  // side inputs, pin.<name> = volts
    std::string vccs_csv;
    double v_in_q = 0, v_out_q = 0;
    SourceSpec glitch = Dc{0};
    double receiver_cap_f = 0;
  };
  struct AggressorCfg {
    std::string cell, in, out, net;
    std::map<std::string, double> pins;
    std::string thevenin_csv;
    SaturatedRamp input_ramp;  // drives the transistor cell in oracle mode
    double offset_s = 0;
    double receiver_cap_f = 0;
  };
  VictimCfg victim;
  std::vector<AggressorCfg> aggressors;
  std::string interconnect_netlist;
  std::string interconnect_reduced_csv;
  double vdd = 0;
  SimOptions sim;
  std::string nrc_csv;
};

ClusterConfig load_cluster_config(const std::string& path);

/// Macromodel view of the config: loads the VCCS/thevenin/reduced artifacts.
ClusterSpec build_cluster_spec(const ClusterConfig& cfg);

/// Full transistor-level view of the config: cells + unreduced interconnect.
struct OracleCircuit {
  Circuit circuit;
  std::string near_node;  // victim driving point
  std::string far_node;   // victim receiver input
};
OracleCircuit build_oracle_circuit(const ClusterConfig& cfg);

struct ModeResult {
  Waveform far_dev;                  // victim receiver-input deviation
  std::optional<Waveform> near_dev;  // driving point; oracle/macromodel only
  NoiseMetrics metrics;              // of far_dev, where the NRC applies
  double solve_seconds = 0;          // solve phase only
};

ModeResult run_mode(const ClusterConfig& cfg, AnalysisMode mode);
ModeResult run_mode(const ClusterConfig& cfg, AnalysisMode mode,
                    const ClusterSpec& prebuilt);

/// Three-mode comparison with oracle as the error reference.
struct AnalysisReport {
  ModeResult oracle, macromodel, superposition;
  std::map<std::string, NrcVerdict> verdicts;  // per mode name
  double err_pct(double value, double ref) const;
  std::string to_csv() const;  // metric,oracle,superposition,...  (no timings)
};

AnalysisReport run_compare(const ClusterConfig& cfg);

}  // namespace sna
