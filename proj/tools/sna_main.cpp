// sna: characterize cells, reduce interconnect, and analyze noise clusters.
//
// Exit codes: 0 success (and NRC pass), 2 usage/setup/solver error,
// 3 NRC fail, 4 NRC boundary.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sna/analysis.hpp"
#include "sna/characterize.hpp"
#include "sna/cluster.hpp"
#include "sna/csvio.hpp"
#include "sna/error.hpp"
#include "sna/mor.hpp"
#include "sna/netlist.hpp"

namespace {

constexpr int kExitError = 2;
constexpr int kExitNrcFail = 3;
constexpr int kExitNrcBoundary = 4;

sna::Circuit load_netlist(const std::string& path) {
  return sna::parse_netlist(sna::read_text(path));
}

std::map<std::string, double> parse_pins(const std::vector<std::string>& raw) {
  std::map<std::string, double> pins;
  for (const auto& s : raw) {
    size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw sna::Error("--pin expects name=volts, got '" + s + "'");
    pins[sna::to_lower(s.substr(0, eq))] = sna::parse_value(s.substr(eq + 1));
  }
  return pins;
}

std::vector<double> parse_widths(const std::string& csv) {
  std::vector<double> out;
  size_t start = 0;
  while (start <= csv.size()) {
    size_t comma = csv.find(',', start);
    std::string tok = csv.substr(start, comma - start);
    if (tok.empty()) throw sna::Error("empty width in '" + csv + "'");
    out.push_back(sna::parse_value(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw sna::Error("--widths needs at least one value");
  return out;
}

/// Side inputs for single-input characterizations (thevenin, nrc) are pinned
/// by adding DC sources directly to the cell copy.
void pin_side_inputs(sna::Circuit& cell, const std::map<std::string, double>& pins) {
  auto nodes = cell.node_names();
  for (const auto& [pin, volts] : pins) {
    if (std::find(nodes.begin(), nodes.end(), pin) == nodes.end())
      throw sna::Error("cell has no pin node '" + pin + "'");
    cell.add({"vpin_" + pin, sna::VSource{pin, "0", sna::Dc{volts}}});
  }
}

sna::SaturatedRamp parse_ramp(const std::string& text) {
  sna::SourceSpec s = sna::parse_source_spec(text);
  const auto* ramp = std::get_if<sna::SaturatedRamp>(&s);
  if (!ramp) throw sna::Error("--ramp expects an SRAMP( t0 slew v0 v1 ) source");
  return *ramp;
}

std::string describe(const sna::NoiseMetrics& m) {
  return "peak " + sna::format_double(m.peak_v) + " V, width " +
         sna::format_double(m.width_s) + " s, area " +
         sna::format_double(m.area_v_s) + " V*s";
}

int verdict_exit(sna::NrcVerdict v) {
  switch (v) {
    case sna::NrcVerdict::Pass: return 0;
    case sna::NrcVerdict::Fail: return kExitNrcFail;
    case sna::NrcVerdict::Boundary: return kExitNrcBoundary;
  }
  return kExitError;
}

// ---------------------------------------------------------------------------
// characterize

// value options stay strings so suffixed units ("20f", "1.2") parse uniformly
struct CharacterizeArgs {
  std::string cell, in, out, output;
  std::vector<std::string> pins;
  std::string vdd = "1.2";
  int grid = 25;
  std::string ramp = "SRAMP( 0 100p 0 1.2 )";
  std::string cload = "0";
  std::string widths;
  std::string quiet = "0";
};

void add_cell_flags(CLI::App* cmd, CharacterizeArgs& a, bool needs_out_pin) {
  cmd->add_option("--cell", a.cell, "cell netlist path")->required();
  cmd->add_option("--in", a.in, "input pin node")->required();
  if (needs_out_pin) cmd->add_option("--out", a.out, "output pin node")->required();
  cmd->add_option("--vdd", a.vdd, "supply voltage [V]");
  cmd->add_option("--pin", a.pins, "side input pin, name=volts (repeatable)");
}

int run_characterize_vccs(const CharacterizeArgs& a) {
  double vdd = sna::parse_value(a.vdd);
  sna::VccsTable t = sna::build_vccs_table(load_netlist(a.cell), a.in, a.out,
                                           parse_pins(a.pins), vdd, a.grid);
  sna::write_vccs_csv(a.output, t);
  std::printf("wrote %zu-row vccs table to %s (grid %d, vdd %s V)\n",
              t.vin_grid.size() * t.vout_grid.size(), a.output.c_str(), a.grid,
              sna::format_double(vdd).c_str());
  return 0;
}

int run_characterize_thevenin(const CharacterizeArgs& a) {
  sna::Circuit cell = load_netlist(a.cell);
  pin_side_inputs(cell, parse_pins(a.pins));
  double cload = sna::parse_value(a.cload);
  if (!(cload > 0)) throw sna::Error("--cload must be positive");
  sna::TheveninDriver d = sna::fit_thevenin(cell, a.in, a.out, parse_ramp(a.ramp),
                                            sna::parse_value(a.vdd), cload);
  sna::write_thevenin_csv(a.output, d);
  std::printf("wrote thevenin driver to %s (r_th %s ohm, slew %s s)\n",
              a.output.c_str(), sna::format_double(d.r_th_ohms).c_str(),
              sna::format_double(d.ramp.slew_s).c_str());
  return 0;
}

int run_characterize_nrc(const CharacterizeArgs& a) {
  sna::Circuit cell = load_netlist(a.cell);
  pin_side_inputs(cell, parse_pins(a.pins));
  sna::NoiseRejectionCurve nrc =
      sna::build_nrc(cell, a.in, a.out, sna::parse_value(a.vdd),
                     parse_widths(a.widths), sna::parse_value(a.cload),
                     sna::parse_value(a.quiet));
  sna::write_nrc_csv(a.output, nrc);
  std::printf("wrote %zu-point nrc to %s\n", nrc.points.size(), a.output.c_str());
  return 0;
}

int run_characterize_rcap(const CharacterizeArgs& a) {
  sna::Circuit cell = load_netlist(a.cell);
  double cap = sna::receiver_cap(cell, a.in);
  if (!a.output.empty())
    sna::write_text_atomic(a.output,
                           "pin,cap_f\n" + a.in + "," + sna::format_double(cap) + "\n");
  std::printf("receiver cap at pin %s: %s F\n", a.in.c_str(),
              sna::format_double(cap).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// analyze / compare

void apply_alignment(sna::ClusterConfig& cfg, const sna::ClusterSpec& spec,
                     const sna::SimOptions& opts) {
  sna::AlignmentResult res = sna::worst_case_alignment(spec, opts);
  for (size_t k = 0; k < cfg.aggressors.size(); ++k) {
    double shift = res.spec.aggressors[k].offset_s - spec.aggressors[k].offset_s;
    cfg.aggressors[k].offset_s += shift;
    if (shift != 0)
      std::printf("aligned aggressor %zu: offset shifted by %s s\n", k + 1,
                  sna::format_double(shift).c_str());
  }
  cfg.victim.glitch = res.spec.victim.input_noise;
  for (const auto& name : res.unmeasurable)
    std::printf("contributor %s has no measurable peak; left unshifted\n",
                name.c_str());
}

int run_analyze(const std::string& config_path, const std::string& mode_str,
                std::string waveform_out, const std::string& report_out,
                bool align) {
  auto mode = sna::parse_mode(mode_str);
  if (!mode)
    throw sna::Error("unknown mode '" + mode_str +
                     "' (expected oracle, macromodel, or superposition)");
  sna::ClusterConfig cfg = sna::load_cluster_config(config_path);
  if (align) apply_alignment(cfg, sna::build_cluster_spec(cfg), cfg.sim);
  sna::ModeResult r = sna::run_mode(cfg, *mode);

  if (waveform_out.empty()) waveform_out = "victim_" + std::string(to_string(*mode)) + ".csv";
  sna::write_waveform_csv(waveform_out, r.far_dev);

  std::string report = std::string(to_string(*mode)) + ": " + describe(r.metrics) +
                       "\nsolve time: " + sna::format_double(r.solve_seconds) +
                       " s\nwaveform: " + waveform_out + "\n";
  int code = 0;
  if (!cfg.nrc_csv.empty()) {
    sna::NrcVerdict v = sna::nrc_check(r.metrics, sna::read_nrc_csv(cfg.nrc_csv));
    report += "nrc verdict: " + std::string(to_string(v)) + "\n";
    code = verdict_exit(v);
  }
  std::fputs(report.c_str(), stdout);
  if (!report_out.empty()) sna::write_text_atomic(report_out, report);
  return code;
}

int run_compare(const std::string& config_path, const std::string& report_path,
                const std::string& waveform_prefix, bool align) {
  sna::ClusterConfig cfg = sna::load_cluster_config(config_path);
  if (align) apply_alignment(cfg, sna::build_cluster_spec(cfg), cfg.sim);
  sna::AnalysisReport rep = sna::run_compare(cfg);
  sna::write_text_atomic(report_path, rep.to_csv());

  std::fputs(rep.to_csv().c_str(), stdout);
  auto line = [&](const char* name, const sna::ModeResult& r) {
    std::printf("%-14s %s, solve %s s", name, describe(r.metrics).c_str(),
                sna::format_double(r.solve_seconds).c_str());
    auto it = rep.verdicts.find(name);
    if (it != rep.verdicts.end()) std::printf(", nrc %s", to_string(it->second));
    std::printf("\n");
  };
  line("oracle", rep.oracle);
  line("macromodel", rep.macromodel);
  line("superposition", rep.superposition);
  std::printf("report: %s\n", report_path.c_str());

  if (!waveform_prefix.empty()) {
    sna::write_waveform_csv(waveform_prefix + "oracle.csv", rep.oracle.far_dev);
    sna::write_waveform_csv(waveform_prefix + "macromodel.csv",
                            rep.macromodel.far_dev);
    sna::write_waveform_csv(waveform_prefix + "superposition.csv",
                            rep.superposition.far_dev);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"standard-cell noise cluster analysis"};
  app.require_subcommand(1);

  // characterize
  CharacterizeArgs ch;
  CLI::App* characterize =
      app.add_subcommand("characterize", "build per-cell artifacts");
  characterize->require_subcommand(1);

  CLI::App* vccs = characterize->add_subcommand("vccs", "DC current table");
  add_cell_flags(vccs, ch, true);
  vccs->add_option("--grid", ch.grid, "grid points per axis")
      ->check(CLI::Range(2, 1001));
  vccs->add_option("-o,--output", ch.output, "output CSV")->required();

  CLI::App* thev = characterize->add_subcommand("thevenin", "linear driver fit");
  add_cell_flags(thev, ch, true);
  thev->add_option("--ramp", ch.ramp, "input ramp, SRAMP( t0 slew v0 v1 )");
  thev->add_option("--cload", ch.cload, "probe load [F]")->required();
  thev->add_option("-o,--output", ch.output, "output CSV")->required();

  CLI::App* nrc = characterize->add_subcommand("nrc", "noise rejection curve");
  add_cell_flags(nrc, ch, true);
  nrc->add_option("--widths", ch.widths, "glitch widths, comma separated")
      ->required();
  nrc->add_option("--load", ch.cload, "receiver output load [F]");
  nrc->add_option("--quiet", ch.quiet, "quiescent input level [V]");
  nrc->add_option("-o,--output", ch.output, "output CSV")->required();

  CLI::App* rcap = characterize->add_subcommand("rcap", "receiver input cap");
  add_cell_flags(rcap, ch, false);
  rcap->add_option("-o,--output", ch.output, "optional output CSV");

  // reduce
  std::string reduce_in, reduce_out;
  CLI::App* reduce =
      app.add_subcommand("reduce", "reduce interconnect to a coupled-pi model");
  reduce->add_option("--interconnect", reduce_in, "RC netlist with .net cards")
      ->required();
  reduce->add_option("-o,--output", reduce_out, "output CSV")->required();

  // analyze
  std::string an_config, an_mode = "macromodel", an_wave, an_report;
  bool an_align = false;
  CLI::App* analyze = app.add_subcommand("analyze", "run one analysis mode");
  analyze->add_option("--config", an_config, "cluster config file")->required();
  analyze->add_option("--mode", an_mode, "oracle | macromodel | superposition");
  analyze->add_option("-o,--waveform", an_wave, "victim waveform CSV");
  analyze->add_option("--report", an_report, "also write the report text here");
  analyze->add_flag("--align", an_align, "worst-case align contributors first");

  // compare
  std::string cmp_config, cmp_report = "report.csv", cmp_prefix;
  bool cmp_align = false;
  CLI::App* compare =
      app.add_subcommand("compare", "run all three modes and report errors");
  compare->add_option("--config", cmp_config, "cluster config file")->required();
  compare->add_option("-o,--report", cmp_report, "report CSV path");
  compare->add_option("--waveforms", cmp_prefix,
                      "write per-mode victim waveforms with this prefix");
  compare->add_flag("--align", cmp_align, "worst-case align contributors first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (vccs->parsed()) return run_characterize_vccs(ch);
    if (thev->parsed()) return run_characterize_thevenin(ch);
    if (nrc->parsed()) return run_characterize_nrc(ch);
    if (rcap->parsed()) return run_characterize_rcap(ch);
    if (reduce->parsed()) {
      sna::CoupledPiModel m = sna::reduce_interconnect(load_netlist(reduce_in));
      sna::write_coupled_pi_csv(reduce_out, m);
      std::printf("wrote %zu-net reduced model to %s (%zu couplings)\n",
                  m.nets.size(), reduce_out.c_str(), m.couplings.size());
      return 0;
    }
    if (analyze->parsed())
      return run_analyze(an_config, an_mode, an_wave, an_report, an_align);
    if (compare->parsed())
      return run_compare(cmp_config, cmp_report, cmp_prefix, cmp_align);
  } catch (const sna::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
