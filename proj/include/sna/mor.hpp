#pragma once

#include <map>
#include <string>
#include <vector>

#include "sna/netlist.hpp"

namespace sna {

/// First three driving-point admittance series coefficients,
/// Y(s) = m1*s + m2*s^2 + m3*s^3 + O(s^4). Units F, F*s, F*s^2.
struct AdmittanceMoments {
  double m1 = 0;
  double m2 = 0;
  double m3 = 0;
};

/// 3-element reduced driving-point model: c_near at the port, then r, c_far.
struct PiModel {
  double c_near_f = 0;
  double r_ohms = 0;
  double c_far_f = 0;
  bool degenerate_fallback = false;  // pure-capacitor fallback was taken
};

struct Coupling {
  std::string net_a, net_b;
  double farads = 0;
};

/// Per-net pi models plus lumped coupling capacitances between far nodes.
struct CoupledPiModel {
  struct Net {
    std::string name;
    PiModel pi;
  };
  std::vector<Net> nets;
  std::vector<Coupling> couplings;  // net pair -> total coupling, symmetric

  const Net* find(const std::string& name) const;
  double coupling_total(const std::string& net) const;
};

/// Moments of the driving-point admittance of an R/C-only network, computed
/// by recursive solves G x_k = -C x_{k-1} with the port voltage-driven.
AdmittanceMoments admittance_moments(const Circuit& net, const std::string& port);

/// Moment-matched pi reduction; degenerate moment sets fall back to a pure
/// capacitor {m1, 0, 0} with the fallback flag set.
PiModel reduce_to_pi(const AdmittanceMoments& moments);

struct NetInput {
  std::string name;
  Circuit circuit;  // R/C of this net only, couplings removed
  std::string port;
};

/// Reduces every net and lumps coupling between the far pi nodes. Couplings
/// are node-level entries ((nodeA, nodeB), farads); during each per-net
/// reduction the far plate of every coupling capacitor is grounded, so each
/// net's m1 includes its share of the coupling capacitance.
CoupledPiModel build_coupled_pi(const std::vector<NetInput>& cluster_nets,
                                const std::vector<std::pair<std::pair<std::string, std::string>, double>>& couplings);

// ---------------------------------------------------------------------------
// Interconnect partitioning (input side of the reduction flow)

struct InterconnectNet {
  std::string name, port, recv;
  Circuit circuit;  // in-net R and C only
};

struct PartitionedInterconnect {
  std::vector<InterconnectNet> nets;
  // node-level couplings: ((nodeA, nodeB), farads) with nodeA in nets[i] etc.
  std::vector<std::pair<std::pair<std::string, std::string>, double>> node_couplings;
  std::map<std::string, std::string> node_net;  // node -> net name

  std::vector<std::pair<std::pair<std::string, std::string>, double>> net_couplings() const;
};

/// Splits a full interconnect circuit (R/C elements plus .net cards) into
/// per-net circuits and a coupling list. Net membership is resistive
/// connectivity from each declared port.
PartitionedInterconnect partition_interconnect(const Circuit& interconnect);

/// Convenience: partition + reduce.
CoupledPiModel reduce_interconnect(const Circuit& interconnect);

}  // namespace sna
