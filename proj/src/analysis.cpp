#include "sna/analysis.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "sna/csvio.hpp"
#include "sna/error.hpp"

namespace sna {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void cfg_error(const std::string& path, size_t line, const std::string& what) {
  throw Error(path + ":" + std::to_string(line) + ": " + what);
}

double num_value(const std::string& tok, const std::string& path, size_t line) {
  try {
    return parse_value(tok);
  } catch (const Error& e) {
    cfg_error(path, line, e.what());
  }
}

/// Element copy with every node moved into a namespace prefix. Ground stays
/// ground, pin_map overrides win over the prefix (that is how cell pins get
/// merged onto interconnect ports). Model references are prefixed too so two
/// cells with clashing model names can coexist.
Element prefix_element(const Element& e, const std::string& pfx,
                       const std::map<std::string, std::string>& pin_map) {
  auto ren = [&](const std::string& n) -> std::string {
    if (n == "0") return n;
    auto it = pin_map.find(n);
    return it != pin_map.end() ? it->second : pfx + n;
  };
  Element ne = e;
  ne.name = pfx + e.name;
  if (auto* r = std::get_if<Resistor>(&ne.kind)) {
    r->n1 = ren(r->n1);
    r->n2 = ren(r->n2);
  } else if (auto* c = std::get_if<Capacitor>(&ne.kind)) {
    c->n1 = ren(c->n1);
    c->n2 = ren(c->n2);
  } else if (auto* v = std::get_if<VSource>(&ne.kind)) {
    v->np = ren(v->np);
    v->nn = ren(v->nn);
  } else if (auto* m = std::get_if<Mosfet>(&ne.kind)) {
    m->d = ren(m->d);
    m->g = ren(m->g);
    m->s = ren(m->s);
    m->b = ren(m->b);
    m->model = pfx + m->model;
  } else if (auto* t = std::get_if<TableVccs>(&ne.kind)) {
    t->nin_ref = ren(t->nin_ref);
    t->nout = ren(t->nout);
  }
  return ne;
}

void add_cell(Circuit& out, const Circuit& cell, const std::string& pfx,
              const std::map<std::string, std::string>& pin_map) {
  for (const auto& e : cell.elements) out.add(prefix_element(e, pfx, pin_map));
  for (const auto& [name, model] : cell.models) out.models[pfx + name] = model;
}

bool has_node(const Circuit& c, const std::string& node) {
  for (const auto& n : c.node_names())
    if (n == node) return true;
  return false;
}

const NetDecl& find_net_decl(const Circuit& xc, const std::string& net,
                             const std::string& context) {
  for (const auto& d : xc.nets)
    if (d.name == net) return d;
  throw Error(context + ": interconnect netlist declares no net '" + net + "'");
}

Waveform to_deviation(Waveform w) {
  if (w.v.empty()) return w;
  double q = w.v.front();
  for (double& v : w.v) v -= q;
  return w;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::optional<AnalysisMode> parse_mode(const std::string& s) {
  std::string m = to_lower(s);
  if (m == "oracle") return AnalysisMode::Oracle;
  if (m == "macromodel") return AnalysisMode::Macromodel;
  if (m == "superposition") return AnalysisMode::Superposition;
  return std::nullopt;
}

const char* to_string(AnalysisMode m) {
  switch (m) {
    case AnalysisMode::Oracle: return "oracle";
    case AnalysisMode::Macromodel: return "macromodel";
    case AnalysisMode::Superposition: return "superposition";
  }
  return "?";
}

ClusterConfig load_cluster_config(const std::string& path) {
  std::istringstream in(read_text(path));
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute() || dir.empty()) return p;
    return (dir / p).string();
  };

  ClusterConfig cfg;
  std::map<int, ClusterConfig::AggressorCfg> aggressors;
  std::string section;
  int agg_index = 0;
  std::string line;
  size_t lineno = 0;
  bool saw_victim = false, saw_sim = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') cfg_error(path, lineno, "unterminated section header");
      section = to_lower(trim(line.substr(1, line.size() - 2)));
      if (section == "victim") {
        saw_victim = true;
      } else if (section.rfind("aggressor.", 0) == 0) {
        std::string idx = section.substr(10);
        try {
          agg_index = std::stoi(idx);
        } catch (const std::exception&) {
          cfg_error(path, lineno, "bad aggressor index '" + idx + "'");
        }
        if (agg_index < 1 || std::to_string(agg_index) != idx)
          cfg_error(path, lineno, "aggressor indices are positive integers");
        if (aggressors.count(agg_index))
          cfg_error(path, lineno, "duplicate section [aggressor." + idx + "]");
        aggressors[agg_index] = {};
      } else if (section == "sim") {
        saw_sim = true;
      } else if (section != "interconnect" && section != "nrc") {
        cfg_error(path, lineno, "unknown section [" + section + "]");
      }
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) cfg_error(path, lineno, "expected key = value");
    std::string key = to_lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) cfg_error(path, lineno, "expected key = value");
    auto num = [&] { return num_value(value, path, lineno); };
    auto source = [&]() -> SourceSpec {
      try {
        return parse_source_spec(value);
      } catch (const Error& e) {
        cfg_error(path, lineno, e.what());
      }
    };

    if (section == "victim") {
      auto& v = cfg.victim;
      if (key == "cell") v.cell = resolve(value);
      else if (key == "in") v.in = to_lower(value);
      else if (key == "out") v.out = to_lower(value);
      else if (key == "net") v.net = to_lower(value);
      else if (key == "vccs_csv") v.vccs_csv = resolve(value);
      else if (key == "v_in_q") v.v_in_q = num();
      else if (key == "v_out_q") v.v_out_q = num();
      else if (key == "glitch") v.glitch = source();
      else if (key == "receiver_cap") v.receiver_cap_f = num();
      else if (key.rfind("pin.", 0) == 0) v.pins[key.substr(4)] = num();
      else cfg_error(path, lineno, "unknown [victim] key '" + key + "'");
    } else if (section.rfind("aggressor.", 0) == 0) {
      auto& a = aggressors[agg_index];
      if (key == "cell") a.cell = resolve(value);
      else if (key == "in") a.in = to_lower(value);
      else if (key == "out") a.out = to_lower(value);
      else if (key == "net") a.net = to_lower(value);
      else if (key == "thevenin_csv") a.thevenin_csv = resolve(value);
      else if (key == "input") {
        SourceSpec s = source();
        const auto* ramp = std::get_if<SaturatedRamp>(&s);
        if (!ramp) cfg_error(path, lineno, "aggressor input must be an SRAMP source");
        a.input_ramp = *ramp;
      } else if (key == "offset") a.offset_s = num();
      else if (key == "receiver_cap") a.receiver_cap_f = num();
      else if (key.rfind("pin.", 0) == 0) a.pins[key.substr(4)] = num();
      else cfg_error(path, lineno, "unknown aggressor key '" + key + "'");
    } else if (section == "interconnect") {
      if (key == "netlist") cfg.interconnect_netlist = resolve(value);
      else if (key == "reduced_csv") cfg.interconnect_reduced_csv = resolve(value);
      else cfg_error(path, lineno, "unknown [interconnect] key '" + key + "'");
    } else if (section == "sim") {
      if (key == "vdd") cfg.vdd = num();
      else if (key == "t_stop") cfg.sim.t_stop_s = num();
      else if (key == "dt") cfg.sim.dt_s = num();
      else if (key == "reltol") cfg.sim.reltol = num();
      else cfg_error(path, lineno, "unknown [sim] key '" + key + "'");
    } else if (section == "nrc") {
      if (key == "csv") cfg.nrc_csv = resolve(value);
      else cfg_error(path, lineno, "unknown [nrc] key '" + key + "'");
    } else {
      cfg_error(path, lineno, "key outside any section");
    }
  }

  if (!saw_victim) throw Error(path + ": missing [victim] section");
  if (!saw_sim) throw Error(path + ": missing [sim] section");
  if (cfg.victim.net.empty()) throw Error(path + ": [victim] net not set");
  if (!(cfg.vdd > 0)) throw Error(path + ": [sim] vdd must be positive");
  if (!(cfg.sim.t_stop_s > 0)) throw Error(path + ": [sim] t_stop must be positive");
  for (auto& [idx, a] : aggressors) {
    if (a.net.empty())
      throw Error(path + ": [aggressor." + std::to_string(idx) + "] net not set");
    cfg.aggressors.push_back(std::move(a));
  }
  return cfg;
}

ClusterSpec build_cluster_spec(const ClusterConfig& cfg) {
  if (cfg.victim.vccs_csv.empty())
    throw Error("config sets no [victim] vccs_csv; run characterize vccs first");
  if (cfg.interconnect_reduced_csv.empty())
    throw Error("config sets no [interconnect] reduced_csv; run reduce first");
  ClusterSpec s;
  s.vdd = cfg.vdd;
  s.victim.vccs = read_vccs_csv(cfg.victim.vccs_csv);
  s.victim.v_in_q = cfg.victim.v_in_q;
  s.victim.v_out_q = cfg.victim.v_out_q;
  s.victim.input_noise = cfg.victim.glitch;
  s.victim.receiver.cap_f = cfg.victim.receiver_cap_f;
  s.victim.net = cfg.victim.net;
  for (const auto& a : cfg.aggressors) {
    if (a.thevenin_csv.empty())
      throw Error("aggressor on net '" + a.net +
                  "' sets no thevenin_csv; run characterize thevenin first");
    AggressorSpec spec;
    spec.driver = read_thevenin_csv(a.thevenin_csv);
    spec.receiver.cap_f = a.receiver_cap_f;
    spec.offset_s = a.offset_s;
    spec.net = a.net;
    s.aggressors.push_back(std::move(spec));
  }
  s.interconnect = read_coupled_pi_csv(cfg.interconnect_reduced_csv);
  s.validate();
  return s;
}

OracleCircuit build_oracle_circuit(const ClusterConfig& cfg) {
  if (cfg.interconnect_netlist.empty())
    throw Error("config sets no [interconnect] netlist; oracle mode needs it");
  if (cfg.victim.cell.empty()) throw Error("config sets no [victim] cell");
  Circuit xc = parse_netlist(read_text(cfg.interconnect_netlist));
  for (const auto& e : xc.elements)
    if (!std::holds_alternative<Resistor>(e.kind) &&
        !std::holds_alternative<Capacitor>(e.kind))
      throw Error("interconnect netlist has non-RC element '" + e.name + "'");

  OracleCircuit out;
  for (const auto& e : xc.elements) out.circuit.add(prefix_element(e, "x.", {}));

  // one driver cell per net; cell output pin node is merged onto the port
  auto place_cell = [&](const std::string& cell_path, const std::string& pfx,
                        const std::string& in, const std::string& out_pin,
                        const std::map<std::string, double>& pins,
                        const std::string& net, const SourceSpec& input) {
    if (in.empty() || out_pin.empty())
      throw Error("cell " + cell_path + ": in/out pins not set");
    Circuit cell = parse_netlist(read_text(cell_path));
    if (!has_node(cell, in))
      throw Error(cell_path + ": no input pin node '" + in + "'");
    if (!has_node(cell, out_pin))
      throw Error(cell_path + ": no output pin node '" + out_pin + "'");
    const NetDecl& decl = find_net_decl(xc, net, cell_path);
    add_cell(out.circuit, cell, pfx, {{out_pin, "x." + decl.port}});
    out.circuit.add({pfx + "vin", VSource{pfx + in, "0", input}});
    for (const auto& [pin, volts] : pins) {
      if (!has_node(cell, pin))
        throw Error(cell_path + ": no side pin node '" + pin + "'");
      out.circuit.add({pfx + "vpin_" + pin, VSource{pfx + pin, "0", Dc{volts}}});
    }
  };

  place_cell(cfg.victim.cell, "v.", cfg.victim.in, cfg.victim.out,
             cfg.victim.pins, cfg.victim.net, cfg.victim.glitch);
  for (size_t k = 0; k < cfg.aggressors.size(); ++k) {
    const auto& a = cfg.aggressors[k];
    if (a.cell.empty())
      throw Error("aggressor on net '" + a.net + "' sets no cell; oracle mode needs it");
    place_cell(a.cell, "a" + std::to_string(k + 1) + ".", a.in, a.out, a.pins,
               a.net, shift_source(SourceSpec{a.input_ramp}, a.offset_s));
  }

  // receiver loads sit at the declared receiver nodes
  auto add_receiver = [&](const std::string& net, double cap_f) {
    const NetDecl& decl = find_net_decl(xc, net, "receiver");
    if (decl.recv.empty())
      throw Error("net '" + net + "' declares no receiver node");
    if (!(cap_f > 0)) throw Error("net '" + net + "' needs a positive receiver_cap");
    out.circuit.add({"crcv_" + net, Capacitor{"x." + decl.recv, "0", cap_f}});
    return "x." + decl.recv;
  };
  out.far_node = add_receiver(cfg.victim.net, cfg.victim.receiver_cap_f);
  for (const auto& a : cfg.aggressors) add_receiver(a.net, a.receiver_cap_f);

  out.near_node = "x." + find_net_decl(xc, cfg.victim.net, "victim").port;
  return out;
}

ModeResult run_mode(const ClusterConfig& cfg, AnalysisMode mode) {
  if (mode == AnalysisMode::Oracle) return run_mode(cfg, mode, ClusterSpec{});
  return run_mode(cfg, mode, build_cluster_spec(cfg));
}

ModeResult run_mode(const ClusterConfig& cfg, AnalysisMode mode,
                    const ClusterSpec& prebuilt) {
  ModeResult r;
  if (mode == AnalysisMode::Oracle) {
    OracleCircuit oc = build_oracle_circuit(cfg);
    auto t0 = std::chrono::steady_clock::now();
    auto waves = transient(oc.circuit, cfg.sim, {oc.near_node, oc.far_node});
    r.solve_seconds = seconds_since(t0);
    r.far_dev = to_deviation(waves.at(oc.far_node));
    r.near_dev = to_deviation(waves.at(oc.near_node));
  } else if (mode == AnalysisMode::Macromodel) {
    auto t0 = std::chrono::steady_clock::now();
    auto [near, far] = simulate_combined(prebuilt, cfg.sim);
    r.solve_seconds = seconds_since(t0);
    r.far_dev = std::move(far);
    r.near_dev = std::move(near);
  } else {
    auto t0 = std::chrono::steady_clock::now();
    r.far_dev = simulate_superposition(prebuilt, cfg.sim);
    r.solve_seconds = seconds_since(t0);
  }
  r.metrics = noise_metrics(r.far_dev, 0.0);
  return r;
}

double AnalysisReport::err_pct(double value, double ref) const {
  return (value - ref) / ref * 100.0;
}

std::string AnalysisReport::to_csv() const {
  std::string out =
      "metric,oracle,superposition,superposition_err_pct,macromodel,macromodel_err_pct\n";
  auto row = [&](const std::string& name, double o, double s, double m) {
    out += name + "," + format_double(o) + "," + format_double(s) + "," +
           format_double(err_pct(s, o)) + "," + format_double(m) + "," +
           format_double(err_pct(m, o)) + "\n";
  };
  row("peak_v", oracle.metrics.peak_v, superposition.metrics.peak_v,
      macromodel.metrics.peak_v);
  row("area_v_s", oracle.metrics.area_v_s, superposition.metrics.area_v_s,
      macromodel.metrics.area_v_s);
  return out;
}

AnalysisReport run_compare(const ClusterConfig& cfg) {
  AnalysisReport rep;
  ClusterSpec spec = build_cluster_spec(cfg);
  rep.oracle = run_mode(cfg, AnalysisMode::Oracle, spec);
  rep.macromodel = run_mode(cfg, AnalysisMode::Macromodel, spec);
  rep.superposition = run_mode(cfg, AnalysisMode::Superposition, spec);
  if (!cfg.nrc_csv.empty()) {
    NoiseRejectionCurve nrc = read_nrc_csv(cfg.nrc_csv);
    rep.verdicts["oracle"] = nrc_check(rep.oracle.metrics, nrc);
    rep.verdicts["macromodel"] = nrc_check(rep.macromodel.metrics, nrc);
    rep.verdicts["superposition"] = nrc_check(rep.superposition.metrics, nrc);
  }
  return rep;
}

}  // namespace sna
