#include "sna/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "sna/error.hpp"

namespace sna {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

static std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Values

double parse_value(const std::string& token) {
  if (token.empty()) throw Error("empty value");
  const char* begin = token.c_str();
  char* end = nullptr;
  double x = std::strtod(begin, &end);
  if (end == begin || !std::isfinite(x))
    throw Error("bad value '" + token + "'");
  std::string suffix = to_lower(std::string(end));
  if (suffix.empty()) return x;
  if (suffix == "meg") return x * 1e6;
  if (suffix.size() == 1) {
    switch (suffix[0]) {
      case 'f': return x * 1e-15;
      case 'p': return x * 1e-12;
      case 'n': return x * 1e-9;
      case 'u': return x * 1e-6;
      case 'm': return x * 1e-3;
      case 'k': return x * 1e3;
      case 'g': return x * 1e9;
    }
  }
  throw Error("bad unit suffix '" + std::string(end) + "' in '" + token + "'");
}

// ---------------------------------------------------------------------------
// Sources

double eval_source(const SourceSpec& spec, double t) {
  struct Visitor {
    double t;
    double operator()(const Dc& s) const { return s.volts; }
    double operator()(const Pwl& s) const {
      const auto& p = s.points;
      if (p.empty()) return 0;
      if (t <= p.front().first) return p.front().second;
      if (t >= p.back().first) return p.back().second;
      for (size_t i = 1; i < p.size(); ++i) {
        if (t <= p[i].first) {
          double u = (t - p[i - 1].first) / (p[i].first - p[i - 1].first);
          return p[i - 1].second + u * (p[i].second - p[i - 1].second);
        }
      }
      return p.back().second;
    }
    double operator()(const SaturatedRamp& s) const {
      if (t <= s.t0_s) return s.v_start;
      if (t >= s.t0_s + s.slew_s) return s.v_end;
      return s.v_start + (t - s.t0_s) / s.slew_s * (s.v_end - s.v_start);
    }
    double operator()(const TriangleGlitch& s) const {
      if (t <= s.t0_s || t >= s.t_end_s) return s.v_base;
      if (t <= s.t_peak_s) {
        double u = (t - s.t0_s) / (s.t_peak_s - s.t0_s);
        return s.v_base + u * (s.v_peak - s.v_base);
      }
      double u = (t - s.t_peak_s) / (s.t_end_s - s.t_peak_s);
      return s.v_peak + u * (s.v_base - s.v_peak);
    }
  };
  return std::visit(Visitor{t}, spec);
}

SourceSpec shift_source(const SourceSpec& spec, double dt) {
  struct Visitor {
    double dt;
    SourceSpec operator()(Dc s) const { return s; }
    SourceSpec operator()(Pwl s) const {
      for (auto& p : s.points) p.first += dt;
      return s;
    }
    SourceSpec operator()(SaturatedRamp s) const {
      s.t0_s += dt;
      return s;
    }
    SourceSpec operator()(TriangleGlitch s) const {
      s.t0_s += dt;
      s.t_peak_s += dt;
      s.t_end_s += dt;
      return s;
    }
  };
  return std::visit(Visitor{dt}, spec);
}

static void validate_source(const SourceSpec& spec, int line) {
  if (const auto* p = std::get_if<Pwl>(&spec)) {
    if (p->points.empty()) throw ParseError(line, "PWL needs at least one point");
    for (size_t i = 1; i < p->points.size(); ++i)
      if (p->points[i].first <= p->points[i - 1].first)
        throw ParseError(line, "PWL times must be strictly increasing");
  } else if (const auto* r = std::get_if<SaturatedRamp>(&spec)) {
    if (r->slew_s <= 0) throw ParseError(line, "SRAMP slew must be positive");
  } else if (const auto* g = std::get_if<TriangleGlitch>(&spec)) {
    if (!(g->t0_s < g->t_peak_s && g->t_peak_s < g->t_end_s))
      throw ParseError(line, "TRI needs t0 < tpeak < tend");
  }
}

// ---------------------------------------------------------------------------
// Tokenizer

static std::vector<std::string> tokenize(const std::string& line) {
  std::string padded;
  padded.reserve(line.size() + 8);
  for (char c : line) {
    if (c == '(' || c == ')' || c == '=' || c == ',') {
      padded += ' ';
      padded += c;
      padded += ' ';
    } else {
      padded += c;
    }
  }
  std::vector<std::string> toks;
  std::istringstream in(padded);
  std::string t;
  while (in >> t)
    if (t != ",") toks.push_back(t);  // commas are cosmetic separators
  return toks;
}

namespace {

// Cursor over one card's tokens; all errors carry the card's line number.
struct Cursor {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  int line;

  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    if (done()) throw ParseError(line, "unexpected end of line");
    return toks[pos];
  }
  std::string next() {
    if (done()) throw ParseError(line, "unexpected end of line");
    return toks[pos++];
  }
  double next_value() {
    std::string t = next();
    try {
      return parse_value(t);
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  }
  void expect(const std::string& tok) {
    std::string t = next();
    if (t != tok) throw ParseError(line, "expected '" + tok + "', got '" + t + "'");
  }
};

SourceSpec parse_source(Cursor& cur) {
  std::string kind = cur.next();
  if (kind == "dc") return Dc{cur.next_value()};
  if (kind == "pwl") {
    cur.expect("(");
    Pwl p;
    while (cur.peek() != ")") {
      double t = cur.next_value();
      double v = cur.next_value();
      p.points.emplace_back(t, v);
    }
    cur.expect(")");
    return p;
  }
  if (kind == "sramp") {
    cur.expect("(");
    SaturatedRamp r;
    r.t0_s = cur.next_value();
    r.slew_s = cur.next_value();
    r.v_start = cur.next_value();
    r.v_end = cur.next_value();
    cur.expect(")");
    return r;
  }
  if (kind == "tri") {
    cur.expect("(");
    TriangleGlitch g;
    g.t0_s = cur.next_value();
    g.t_peak_s = cur.next_value();
    g.t_end_s = cur.next_value();
    g.v_base = cur.next_value();
    g.v_peak = cur.next_value();
    cur.expect(")");
    return g;
  }
  throw ParseError(cur.line, "unknown source kind '" + kind + "'");
}

}  // namespace

SourceSpec parse_source_spec(const std::string& text) {
  auto toks = tokenize(to_lower(text));
  Cursor cur{toks, 0, 0};
  SourceSpec s = parse_source(cur);
  if (!cur.done()) throw Error("trailing tokens in source spec '" + text + "'");
  validate_source(s, 0);
  return s;
}

std::string format_source_spec(const SourceSpec& spec) {
  struct Visitor {
    std::string operator()(const Dc& s) const { return "dc " + fmt_g17(s.volts); }
    std::string operator()(const Pwl& s) const {
      std::string out = "pwl(";
      for (const auto& [t, v] : s.points) out += " " + fmt_g17(t) + " " + fmt_g17(v);
      return out + " )";
    }
    std::string operator()(const SaturatedRamp& s) const {
      return "sramp( " + fmt_g17(s.t0_s) + " " + fmt_g17(s.slew_s) + " " +
             fmt_g17(s.v_start) + " " + fmt_g17(s.v_end) + " )";
    }
    std::string operator()(const TriangleGlitch& s) const {
      return "tri( " + fmt_g17(s.t0_s) + " " + fmt_g17(s.t_peak_s) + " " +
             fmt_g17(s.t_end_s) + " " + fmt_g17(s.v_base) + " " +
             fmt_g17(s.v_peak) + " )";
    }
  };
  return std::visit(Visitor{}, spec);
}

// ---------------------------------------------------------------------------
// Circuit

namespace {

struct ElementNodeVisitor {
  std::vector<const std::string*> nodes;
  void operator()(const Resistor& r) { nodes = {&r.n1, &r.n2}; }
  void operator()(const Capacitor& c) { nodes = {&c.n1, &c.n2}; }
  void operator()(const VSource& v) { nodes = {&v.np, &v.nn}; }
  void operator()(const Mosfet& m) { nodes = {&m.d, &m.g, &m.s, &m.b}; }
  void operator()(const TableVccs& t) { nodes = {&t.nin_ref, &t.nout}; }
};

std::vector<const std::string*> element_nodes(const Element& e) {
  ElementNodeVisitor v;
  std::visit(v, e.kind);
  return v.nodes;
}

}  // namespace

std::vector<std::string> Circuit::node_names() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : elements) {
    for (const std::string* n : element_nodes(e)) {
      if (*n == "0" || seen.count(*n)) continue;
      seen.insert(*n);
      out.push_back(*n);
    }
  }
  return out;
}

const Element* Circuit::find(const std::string& name) const {
  std::string key = to_lower(name);
  for (const auto& e : elements)
    if (e.name == key) return &e;
  return nullptr;
}

void Circuit::add(Element e) {
  e.name = to_lower(e.name);
  if (find(e.name)) throw Error("duplicate element name '" + e.name + "'");
  elements.push_back(std::move(e));
}

void Circuit::validate() const {
  std::set<std::string> names;
  for (const auto& e : elements) {
    if (!names.insert(to_lower(e.name)).second)
      throw Error("duplicate element name '" + e.name + "'");
    for (const std::string* n : element_nodes(e))
      if (n->empty()) throw Error("element '" + e.name + "' has an empty node");
    if (const auto* r = std::get_if<Resistor>(&e.kind)) {
      if (!(r->ohms > 0)) throw Error("resistor '" + e.name + "' must be positive");
    } else if (const auto* c = std::get_if<Capacitor>(&e.kind)) {
      if (!(c->farads > 0)) throw Error("capacitor '" + e.name + "' must be positive");
    } else if (const auto* m = std::get_if<Mosfet>(&e.kind)) {
      if (!(m->width_m > 0 && m->length_m > 0))
        throw Error("mosfet '" + e.name + "' needs positive W and L");
      if (!models.count(m->model))
        throw Error("mosfet '" + e.name + "' references unknown model '" + m->model + "'");
    } else if (const auto* t = std::get_if<TableVccs>(&e.kind)) {
      t->table.validate();
    }
  }
  for (const auto& [name, m] : models) {
    if (!(m.kp_a_per_v2 > 0)) throw Error("model '" + name + "' needs KP > 0");
    if (m.lambda_per_v < 0) throw Error("model '" + name + "' needs LAMBDA >= 0");
  }
}

std::string Circuit::to_netlist() const {
  std::ostringstream out;
  for (const auto& [name, m] : models) {
    out << ".model " << name << ' '
        << (m.polarity == Polarity::Nmos ? "nmos" : "pmos")
        << " vt0=" << fmt_g17(m.vt0_v) << " kp=" << fmt_g17(m.kp_a_per_v2)
        << " lambda=" << fmt_g17(m.lambda_per_v)
        << " cgate=" << fmt_g17(m.cgate_f_per_m2) << '\n';
  }
  for (const auto& e : elements) {
    struct Visitor {
      std::ostringstream& out;
      const std::string& name;
      void operator()(const Resistor& r) {
        out << name << ' ' << r.n1 << ' ' << r.n2 << ' ' << fmt_g17(r.ohms) << '\n';
      }
      void operator()(const Capacitor& c) {
        out << name << ' ' << c.n1 << ' ' << c.n2 << ' ' << fmt_g17(c.farads) << '\n';
      }
      void operator()(const VSource& v) {
        out << name << ' ' << v.np << ' ' << v.nn << ' '
            << format_source_spec(v.spec) << '\n';
      }
      void operator()(const Mosfet& m) {
        out << name << ' ' << m.d << ' ' << m.g << ' ' << m.s << ' ' << m.b
            << ' ' << m.model << " w=" << fmt_g17(m.width_m)
            << " l=" << fmt_g17(m.length_m) << '\n';
      }
      void operator()(const TableVccs&) {
        throw Error("table VCCS elements have no netlist card");
      }
    };
    Visitor v{out, e.name};
    std::visit(v, e.kind);
  }
  for (const auto& n : nets) {
    out << ".net " << n.name << ' ' << n.port;
    if (!n.recv.empty()) out << ' ' << n.recv;
    out << '\n';
  }
  out << ".end\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Parser

Circuit parse_netlist(const std::string& text) {
  Circuit ckt;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool ended = false;

  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string line = to_lower(raw);
    // comment / blank
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '*') continue;

    auto toks = tokenize(line);
    if (toks.empty()) continue;
    Cursor cur{toks, 0, line_no};
    std::string head = cur.next();

    if (head == ".end") {
      ended = true;
      break;
    }
    if (head == ".model") {
      std::string name = cur.next();
      if (ckt.models.count(name))
        throw ParseError(line_no, "duplicate model '" + name + "'");
      MosfetModel m;
      std::string pol = cur.next();
      if (pol == "nmos")
        m.polarity = Polarity::Nmos;
      else if (pol == "pmos")
        m.polarity = Polarity::Pmos;
      else
        throw ParseError(line_no, "model polarity must be NMOS or PMOS");
      bool has_vt0 = false, has_kp = false;
      while (!cur.done()) {
        std::string key = cur.next();
        cur.expect("=");
        double val = cur.next_value();
        if (key == "vt0") {
          m.vt0_v = val;
          has_vt0 = true;
        } else if (key == "kp") {
          m.kp_a_per_v2 = val;
          has_kp = true;
        } else if (key == "lambda") {
          m.lambda_per_v = val;
        } else if (key == "cgate") {
          m.cgate_f_per_m2 = val;
        } else {
          throw ParseError(line_no, "unknown model parameter '" + key + "'");
        }
      }
      if (!has_vt0 || !has_kp)
        throw ParseError(line_no, "model '" + name + "' needs VT0= and KP=");
      ckt.models.emplace(name, m);
      continue;
    }
    if (head == ".net") {
      NetDecl n;
      n.name = cur.next();
      n.port = cur.next();
      if (!cur.done()) n.recv = cur.next();
      if (!cur.done()) throw ParseError(line_no, "trailing tokens on .net card");
      ckt.nets.push_back(n);
      continue;
    }
    if (head[0] == '.')
      throw ParseError(line_no, "unknown card '" + head + "'");

    Element e;
    e.name = head;
    switch (head[0]) {
      case 'r': {
        Resistor r;
        r.n1 = cur.next();
        r.n2 = cur.next();
        r.ohms = cur.next_value();
        if (!(r.ohms > 0)) throw ParseError(line_no, "resistance must be positive");
        e.kind = r;
        break;
      }
      case 'c': {
        Capacitor c;
        c.n1 = cur.next();
        c.n2 = cur.next();
        c.farads = cur.next_value();
        if (!(c.farads > 0)) throw ParseError(line_no, "capacitance must be positive");
        e.kind = c;
        break;
      }
      case 'v': {
        VSource v;
        v.np = cur.next();
        v.nn = cur.next();
        v.spec = parse_source(cur);
        validate_source(v.spec, line_no);
        e.kind = v;
        break;
      }
      case 'm': {
        Mosfet m;
        m.d = cur.next();
        m.g = cur.next();
        m.s = cur.next();
        m.b = cur.next();
        m.model = cur.next();
        for (int i = 0; i < 2; ++i) {
          std::string key = cur.next();
          cur.expect("=");
          double val = cur.next_value();
          if (key == "w")
            m.width_m = val;
          else if (key == "l")
            m.length_m = val;
          else
            throw ParseError(line_no, "expected W= or L=, got '" + key + "'");
        }
        if (!(m.width_m > 0 && m.length_m > 0))
          throw ParseError(line_no, "W and L must be positive");
        e.kind = m;
        break;
      }
      default:
        throw ParseError(line_no, "unknown element type '" + head + "'");
    }
    if (!cur.done())
      throw ParseError(line_no, "trailing tokens after element '" + head + "'");
    if (ckt.find(e.name))
      throw ParseError(line_no, "duplicate element name '" + e.name + "'");
    ckt.elements.push_back(std::move(e));
  }

  if (!ended) throw ParseError(line_no, "missing .end");
  try {
    ckt.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& err) {
    throw ParseError(line_no, err.what());
  }
  return ckt;
}

}  // namespace sna
