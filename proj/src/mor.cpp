#include "sna/mor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "sna/error.hpp"

namespace sna {

// ---------------------------------------------------------------------------
// Moments

AdmittanceMoments admittance_moments(const Circuit& net, const std::string& port) {
  std::string p = to_lower(port);
  std::vector<std::string> names = net.node_names();
  if (std::find(names.begin(), names.end(), p) == names.end())
    throw Error("port node '" + port + "' not present in the net");
  std::map<std::string, int> ids;
  for (int i = 0; i < int(names.size()); ++i) ids[names[i]] = i;
  const int nn = int(names.size());
  const int n = nn + 1;  // +1 for the port drive branch current
  const int br = nn;
  const int pid = ids.at(p);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  double gtot = 0;

  auto idof = [&](const std::string& node) -> int {
    return node == "0" ? -1 : ids.at(node);
  };
  auto stamp = [](Eigen::MatrixXd& m, int a, int b, double v) {
    if (a >= 0) m(a, a) += v;
    if (b >= 0) m(b, b) += v;
    if (a >= 0 && b >= 0) {
      m(a, b) -= v;
      m(b, a) -= v;
    }
  };

  for (const auto& e : net.elements) {
    if (const auto* r = std::get_if<Resistor>(&e.kind)) {
      stamp(M, idof(r->n1), idof(r->n2), 1.0 / r->ohms);
      gtot += 1.0 / r->ohms;
    } else if (const auto* c = std::get_if<Capacitor>(&e.kind)) {
      stamp(C, idof(c->n1), idof(c->n2), c->farads);
    } else {
      throw Error("moment reduction accepts only R and C elements; '" + e.name +
                  "' is neither");
    }
  }
  // Port driven by a unit voltage; branch current flows into the network.
  M(pid, br) = -1.0;
  M(br, pid) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw SingularError("floating resistive island in net '" + port + "' reduction");

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[br] = 1.0;
  Eigen::VectorXd x = lu.solve(rhs);
  double m0 = x[br];
  if (std::abs(m0) > 1e-9 * (1.0 + gtot))
    throw Error("net has a resistive DC path to ground; admittance is not purely capacitive");

  AdmittanceMoments m;
  double* out[3] = {&m.m1, &m.m2, &m.m3};
  for (int k = 0; k < 3; ++k) {
    rhs = -(C * x);
    rhs[br] = 0.0;
    x = lu.solve(rhs);
    *out[k] = x[br];
  }
  return m;
}

PiModel reduce_to_pi(const AdmittanceMoments& m) {
  if (!(m.m1 > 0)) throw Error("m1 must be positive (total capacitance at the port)");
  PiModel fallback{m.m1, 0.0, 0.0, true};
  if (m.m2 == 0.0 || m.m3 == 0.0) return fallback;
  double c_far = m.m2 * m.m2 / m.m3;
  double r = -m.m3 * m.m3 / (m.m2 * m.m2 * m.m2);
  // The c_far > m1 guard needs slack: a pure series RC gives c_far == m1 up
  // to rounding, which must not trip the fallback.
  if (!std::isfinite(c_far) || !std::isfinite(r) || c_far > m.m1 * (1.0 + 1e-9) ||
      r < 0)
    return fallback;
  double c_near = std::max(0.0, m.m1 - c_far);
  return {c_near, r, c_far, false};
}

// ---------------------------------------------------------------------------
// Coupled-pi assembly

const CoupledPiModel::Net* CoupledPiModel::find(const std::string& name) const {
  for (const auto& n : nets)
    if (n.name == name) return &n;
  return nullptr;
}

double CoupledPiModel::coupling_total(const std::string& net) const {
  double total = 0;
  for (const auto& c : couplings)
    if (c.net_a == net || c.net_b == net) total += c.farads;
  return total;
}

CoupledPiModel build_coupled_pi(
    const std::vector<NetInput>& cluster_nets,
    const std::vector<std::pair<std::pair<std::string, std::string>, double>>& couplings) {
  if (cluster_nets.empty()) throw Error("no nets to reduce");

  std::map<std::string, int> owner;
  for (int i = 0; i < int(cluster_nets.size()); ++i) {
    owner[to_lower(cluster_nets[i].port)] = i;
    for (const auto& node : cluster_nets[i].circuit.node_names()) {
      auto [it, fresh] = owner.emplace(node, i);
      if (!fresh && it->second != i)
        throw Error("node '" + node + "' appears in two nets");
    }
  }

  std::vector<Circuit> work;
  work.reserve(cluster_nets.size());
  for (const auto& n : cluster_nets) work.push_back(n.circuit);

  CoupledPiModel model;
  int tag = 0;
  for (const auto& [nodes, farads] : couplings) {
    std::string na = to_lower(nodes.first), nb = to_lower(nodes.second);
    if (!(farads > 0)) throw Error("coupling capacitance must be positive");
    auto ia = owner.find(na), ib = owner.find(nb);
    if (ia == owner.end() || ib == owner.end())
      throw Error("coupling endpoint '" + (ia == owner.end() ? na : nb) +
                  "' belongs to no net");
    if (ia->second == ib->second)
      throw Error("coupling between '" + na + "' and '" + nb +
                  "' lies inside one net");
    // Ground the far plate on each side for the per-net reduction.
    work[ia->second].add({"_cgnd" + std::to_string(tag++), Capacitor{na, "0", farads}});
    work[ib->second].add({"_cgnd" + std::to_string(tag++), Capacitor{nb, "0", farads}});

    const std::string &name_a = cluster_nets[ia->second].name,
                      &name_b = cluster_nets[ib->second].name;
    std::string lo = std::min(name_a, name_b), hi = std::max(name_a, name_b);
    auto match = std::find_if(model.couplings.begin(), model.couplings.end(),
                              [&](const Coupling& c) {
                                return c.net_a == lo && c.net_b == hi;
                              });
    if (match != model.couplings.end())
      match->farads += farads;
    else
      model.couplings.push_back({lo, hi, farads});
  }

  for (size_t i = 0; i < cluster_nets.size(); ++i) {
    try {
      AdmittanceMoments m = admittance_moments(work[i], cluster_nets[i].port);
      model.nets.push_back({cluster_nets[i].name, reduce_to_pi(m)});
    } catch (const SingularError& e) {
      throw SingularError("net '" + cluster_nets[i].name + "': " + e.what());
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Partitioning

namespace {

struct UnionFind {
  std::map<std::string, int> id;
  std::vector<int> parent;

  int node(const std::string& n) {
    auto [it, fresh] = id.emplace(n, int(parent.size()));
    if (fresh) parent.push_back(it->second);
    return it->second;
  }
  int root(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void join(int a, int b) { parent[root(a)] = root(b); }
};

}  // namespace

PartitionedInterconnect partition_interconnect(const Circuit& interconnect) {
  if (interconnect.nets.empty())
    throw Error("interconnect netlist declares no .net cards");

  UnionFind uf;
  for (const auto& e : interconnect.elements) {
    if (const auto* r = std::get_if<Resistor>(&e.kind)) {
      uf.join(uf.node(r->n1), uf.node(r->n2));
    } else if (const auto* c = std::get_if<Capacitor>(&e.kind)) {
      uf.node(c->n1);
      uf.node(c->n2);
    } else {
      throw Error("interconnect may contain only R and C elements; '" + e.name +
                  "' is neither");
    }
  }

  PartitionedInterconnect out;
  std::map<int, int> root_net;  // island root -> net index
  for (const auto& decl : interconnect.nets) {
    int idx = int(out.nets.size());
    for (const auto& existing : out.nets)
      if (existing.name == decl.name)
        throw Error("duplicate .net name '" + decl.name + "'");
    if (!uf.id.count(decl.port)) uf.node(decl.port);
    int root = uf.root(uf.node(decl.port));
    auto [it, fresh] = root_net.emplace(root, idx);
    if (!fresh)
      throw Error("nets '" + out.nets[it->second].name + "' and '" + decl.name +
                  "' are resistively shorted");
    if (!decl.recv.empty()) {
      if (!uf.id.count(decl.recv) ||
          uf.root(uf.node(decl.recv)) != root)
        throw Error("receiver node '" + decl.recv + "' is not part of net '" +
                    decl.name + "'");
    }
    out.nets.push_back({decl.name, decl.port, decl.recv, Circuit{}});
  }

  auto net_of = [&](const std::string& node) -> int {
    if (node == "0" || !uf.id.count(node)) return -1;
    auto it = root_net.find(uf.root(uf.node(node)));
    return it == root_net.end() ? -1 : it->second;
  };

  for (const auto& [node, raw_id] : uf.id) {
    int n = net_of(node);
    if (n >= 0) out.node_net[node] = out.nets[n].name;
  }

  for (const auto& e : interconnect.elements) {
    if (const auto* r = std::get_if<Resistor>(&e.kind)) {
      int n1 = net_of(r->n1), n2 = net_of(r->n2);
      int n = std::max(n1, n2);
      if (n < 0)
        throw Error("resistor '" + e.name + "' is not connected to any declared net");
      out.nets[n].circuit.add(e);
    } else if (const auto* c = std::get_if<Capacitor>(&e.kind)) {
      int n1 = net_of(c->n1), n2 = net_of(c->n2);
      if (n1 < 0 && c->n1 != "0")
        throw Error("node '" + c->n1 + "' is not reachable from any declared port");
      if (n2 < 0 && c->n2 != "0")
        throw Error("node '" + c->n2 + "' is not reachable from any declared port");
      if (n1 < 0 && n2 < 0)
        throw Error("capacitor '" + e.name + "' connects ground to ground");
      if (n1 >= 0 && n2 >= 0 && n1 != n2)
        out.node_couplings.push_back({{c->n1, c->n2}, c->farads});
      else
        out.nets[std::max(n1, n2)].circuit.add(e);
    }
  }
  return out;
}

std::vector<std::pair<std::pair<std::string, std::string>, double>>
PartitionedInterconnect::net_couplings() const {
  std::vector<std::pair<std::pair<std::string, std::string>, double>> out;
  for (const auto& [nodes, farads] : node_couplings) {
    std::string a = node_net.at(nodes.first), b = node_net.at(nodes.second);
    if (b < a) std::swap(a, b);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& entry) {
      return entry.first.first == a && entry.first.second == b;
    });
    if (it != out.end())
      it->second += farads;
    else
      out.push_back({{a, b}, farads});
  }
  return out;
}

CoupledPiModel reduce_interconnect(const Circuit& interconnect) {
  PartitionedInterconnect parts = partition_interconnect(interconnect);
  std::vector<NetInput> inputs;
  inputs.reserve(parts.nets.size());
  for (const auto& n : parts.nets) inputs.push_back({n.name, n.circuit, n.port});
  return build_coupled_pi(inputs, parts.node_couplings);
}

}  // namespace sna
