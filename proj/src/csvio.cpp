#include "sna/csvio.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "sna/error.hpp"

namespace sna {

namespace {

[[noreturn]] void bad_file(const std::string& path, size_t line, const std::string& what) {
  throw Error(path + ":" + std::to_string(line) + ": " + what);
}

/// Splits one CSV line on commas; strips a trailing CR so CRLF files work.
std::vector<std::string> split_fields(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_field(const std::string& s, const std::string& path, size_t line) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    bad_file(path, line, "expected a number, got '" + s + "'");
  return v;
}

struct CsvReader {
  std::string path;
  std::vector<std::vector<std::string>> rows;  // header excluded

  explicit CsvReader(const std::string& p, const std::string& header) : path(p) {
    std::ifstream f(p);
    if (!f) throw Error("cannot open " + p);
    std::string line;
    size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(f, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!saw_header) {
        if (line != header)
          bad_file(path, lineno, "expected header '" + header + "', got '" + line + "'");
        saw_header = true;
        continue;
      }
      rows.push_back(split_fields(line));
      lines.push_back(lineno);
    }
    if (!saw_header) throw Error(path + ": empty file, expected header '" + header + "'");
  }

  std::vector<size_t> lines;  // source line of each row, for error messages

  double num(size_t row, size_t col) const {
    return parse_field(rows[row][col], path, lines[row]);
  }

  void expect_cols(size_t row, size_t n) const {
    if (rows[row].size() != n)
      bad_file(path, lines[row],
               "expected " + std::to_string(n) + " fields, got " +
                   std::to_string(rows[row].size()));
  }
};

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp + " for writing");
    f << content;
    f.flush();
    if (!f) throw Error("write to " + tmp + " failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error("rename " + tmp + " -> " + path + ": " + std::strerror(errno));
  }
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_waveform_csv(const std::string& path, const Waveform& w) {
  if (w.t_s.size() != w.v.size()) throw Error("waveform time/value size mismatch");
  std::string out = "time_s,voltage_v\n";
  for (size_t k = 0; k < w.size(); ++k)
    out += format_double(w.t_s[k]) + "," + format_double(w.v[k]) + "\n";
  write_text_atomic(path, out);
}

Waveform read_waveform_csv(const std::string& path) {
  CsvReader r(path, "time_s,voltage_v");
  Waveform w;
  for (size_t k = 0; k < r.rows.size(); ++k) {
    r.expect_cols(k, 2);
    w.t_s.push_back(r.num(k, 0));
    w.v.push_back(r.num(k, 1));
  }
  return w;
}

void write_vccs_csv(const std::string& path, const VccsTable& t) {
  t.validate();
  std::string out = "vin_v,vout_v,i_a\n";
  for (size_t i = 0; i < t.vin_grid.size(); ++i)
    for (size_t j = 0; j < t.vout_grid.size(); ++j)
      out += format_double(t.vin_grid[i]) + "," + format_double(t.vout_grid[j]) +
             "," + format_double(t.i_a[i][j]) + "\n";
  write_text_atomic(path, out);
}

VccsTable read_vccs_csv(const std::string& path) {
  CsvReader r(path, "vin_v,vout_v,i_a");
  size_t rows = r.rows.size();
  size_t n = 0;
  while (n * n < rows) ++n;
  if (n < 2 || n * n != rows)
    throw Error(path + ": row count " + std::to_string(rows) +
                " is not a square grid");
  VccsTable t;
  t.i_a.assign(n, std::vector<double>(n, 0.0));
  for (size_t j = 0; j < n; ++j) {
    r.expect_cols(j, 3);
    t.vout_grid.push_back(r.num(j, 1));
  }
  for (size_t i = 0; i < n; ++i) t.vin_grid.push_back(r.num(i * n, 0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      size_t k = i * n + j;
      r.expect_cols(k, 3);
      if (r.num(k, 0) != t.vin_grid[i] || r.num(k, 1) != t.vout_grid[j])
        bad_file(path, r.lines[k], "row is out of row-major grid order");
      t.i_a[i][j] = r.num(k, 2);
    }
  t.validate();
  return t;
}

void write_nrc_csv(const std::string& path, const NoiseRejectionCurve& c) {
  c.validate();
  std::string out = "width_s,amplitude_v\n";
  for (const auto& p : c.points)
    out += format_double(p.width_s) + "," + format_double(p.amplitude_v) + "\n";
  write_text_atomic(path, out);
}

NoiseRejectionCurve read_nrc_csv(const std::string& path) {
  CsvReader r(path, "width_s,amplitude_v");
  NoiseRejectionCurve c;
  for (size_t k = 0; k < r.rows.size(); ++k) {
    r.expect_cols(k, 2);
    c.points.push_back({r.num(k, 0), r.num(k, 1), false});
  }
  c.validate();
  return c;
}

void write_coupled_pi_csv(const std::string& path, const CoupledPiModel& m) {
  std::string out = "net,c_near_f,r_ohms,c_far_f\n";
  for (const auto& net : m.nets)
    out += net.name + "," + format_double(net.pi.c_near_f) + "," +
           format_double(net.pi.r_ohms) + "," + format_double(net.pi.c_far_f) + "\n";
  for (const auto& c : m.couplings)
    out += "coupling," + c.net_a + "," + c.net_b + "," + format_double(c.farads) + "\n";
  write_text_atomic(path, out);
}

CoupledPiModel read_coupled_pi_csv(const std::string& path) {
  CsvReader r(path, "net,c_near_f,r_ohms,c_far_f");
  CoupledPiModel m;
  for (size_t k = 0; k < r.rows.size(); ++k) {
    r.expect_cols(k, 4);
    if (r.rows[k][0] == "coupling") {
      Coupling c;
      c.net_a = r.rows[k][1];
      c.net_b = r.rows[k][2];
      c.farads = r.num(k, 3);
      if (!m.find(c.net_a) || !m.find(c.net_b))
        bad_file(path, r.lines[k], "coupling references an unknown net");
      m.couplings.push_back(c);
    } else {
      if (!m.couplings.empty())
        bad_file(path, r.lines[k], "net rows must precede coupling rows");
      CoupledPiModel::Net net;
      net.name = r.rows[k][0];
      if (net.name.empty()) bad_file(path, r.lines[k], "empty net name");
      if (m.find(net.name)) bad_file(path, r.lines[k], "duplicate net " + net.name);
      net.pi.c_near_f = r.num(k, 1);
      net.pi.r_ohms = r.num(k, 2);
      net.pi.c_far_f = r.num(k, 3);
      net.pi.degenerate_fallback = net.pi.r_ohms <= 0;
      m.nets.push_back(net);
    }
  }
  if (m.nets.empty()) throw Error(path + ": no net rows");
  return m;
}

void write_thevenin_csv(const std::string& path, const TheveninDriver& d) {
  std::string out = "r_th_ohms,t0_s,slew_s,v_start_v,v_end_v\n";
  out += format_double(d.r_th_ohms) + "," + format_double(d.ramp.t0_s) + "," +
         format_double(d.ramp.slew_s) + "," + format_double(d.ramp.v_start) + "," +
         format_double(d.ramp.v_end) + "\n";
  write_text_atomic(path, out);
}

TheveninDriver read_thevenin_csv(const std::string& path) {
  CsvReader r(path, "r_th_ohms,t0_s,slew_s,v_start_v,v_end_v");
  if (r.rows.size() != 1)
    throw Error(path + ": expected exactly one data row, got " +
                std::to_string(r.rows.size()));
  r.expect_cols(0, 5);
  TheveninDriver d;
  d.r_th_ohms = r.num(0, 0);
  d.ramp.t0_s = r.num(0, 1);
  d.ramp.slew_s = r.num(0, 2);
  d.ramp.v_start = r.num(0, 3);
  d.ramp.v_end = r.num(0, 4);
  if (d.r_th_ohms <= 0) throw Error(path + ": r_th_ohms must be positive");
  if (d.ramp.slew_s <= 0) throw Error(path + ": slew_s must be positive");
  return d;
}

}  // namespace sna
