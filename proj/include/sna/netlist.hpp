#pragma once

#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sna/vccs_table.hpp"

namespace sna {

// ---------------------------------------------------------------------------
// Source waveforms

struct Dc {
  double volts = 0;
  bool operator==(const Dc&) const = default;
};

struct Pwl {
  std::vector<std::pair<double, double>> points;  // (time_s, volts), t strictly increasing
  bool operator==(const Pwl&) const = default;
};

/// Holds v_start before t0, ramps linearly to v_end over slew_s, holds after.
struct SaturatedRamp {
  double t0_s = 0;
  double slew_s = 0;
  double v_start = 0;
  double v_end = 0;
  bool operator==(const SaturatedRamp&) const = default;
};

/// Piecewise-linear glitch: base -> peak -> base, t0 < t_peak < t_end.
struct TriangleGlitch {
  double t0_s = 0;
  double t_peak_s = 0;
  double t_end_s = 0;
  double v_base = 0;
  double v_peak = 0;
  bool operator==(const TriangleGlitch&) const = default;
};

using SourceSpec = std::variant<Dc, Pwl, SaturatedRamp, TriangleGlitch>;

/// Piecewise-linear value of the source at time t. Total function.
double eval_source(const SourceSpec& spec, double t_s);

/// Same waveform delayed by dt_s (all time parameters shifted).
SourceSpec shift_source(const SourceSpec& spec, double dt_s);

// ---------------------------------------------------------------------------
// Devices

enum class Polarity { Nmos, Pmos };

struct MosfetModel {
  Polarity polarity = Polarity::Nmos;
  double vt0_v = 0;
  double kp_a_per_v2 = 0;
  double lambda_per_v = 0;
  double cgate_f_per_m2 = 8e-3;  // gate cap per area, optional CGATE= card key
  bool operator==(const MosfetModel&) const = default;
};

struct Resistor {
  std::string n1, n2;
  double ohms = 0;
  bool operator==(const Resistor&) const = default;
};

struct Capacitor {
  std::string n1, n2;
  double farads = 0;
  bool operator==(const Capacitor&) const = default;
};

struct VSource {
  std::string np, nn;
  SourceSpec spec;
  bool operator==(const VSource&) const = default;
};

struct Mosfet {
  std::string d, g, s, b;  // bulk is parsed but electrically tied to source
  std::string model;
  double width_m = 0;
  double length_m = 0;
  bool operator==(const Mosfet&) const = default;
};

/// Table-driven VCCS: injects i = f(v(nin_ref), v(nout)) into nout. Built
/// programmatically from characterization artifacts; has no netlist card.
struct TableVccs {
  std::string nin_ref, nout;
  VccsTable table;
  bool operator==(const TableVccs&) const = default;
};

struct Element {
  std::string name;  // lowercased; unique per circuit
  std::variant<Resistor, Capacitor, VSource, Mosfet, TableVccs> kind;
  bool operator==(const Element&) const = default;
};

/// A `.net` declaration naming one interconnect net: its driving port node
/// and (optionally) the receiver node used by full-network analyses.
struct NetDecl {
  std::string name, port, recv;
  bool operator==(const NetDecl&) const = default;
};

// ---------------------------------------------------------------------------
// Circuit

struct Circuit {
  std::vector<Element> elements;
  std::map<std::string, MosfetModel> models;
  std::vector<NetDecl> nets;

  /// Node names in order of first use, ground ("0") excluded.
  std::vector<std::string> node_names() const;

  const Element* find(const std::string& name) const;

  /// Appends one element; throws on duplicate name (case-insensitive).
  void add(Element e);

  /// Canonical netlist text; parse_netlist(to_netlist()) reproduces the
  /// circuit bit-exactly. Throws for TableVccs (no grammar card).
  std::string to_netlist() const;

  /// Duplicate names, model references, value positivity.
  void validate() const;

  bool operator==(const Circuit&) const = default;
};

/// Parse the SPICE-subset grammar. Errors carry 1-based line numbers.
Circuit parse_netlist(const std::string& text);

/// Engineering value with optional suffix f,p,n,u,m,k,meg,g (case-insensitive).
double parse_value(const std::string& token);

/// Source spec in card syntax: "DC 1.2", "PWL( t v ... )", "SRAMP( t0 slew v0 v1 )",
/// "TRI( t0 tpeak tend vbase vpeak )". Shared by netlist and config parsing.
SourceSpec parse_source_spec(const std::string& text);

std::string format_source_spec(const SourceSpec& spec);

std::string to_lower(std::string s);

}  // namespace sna
