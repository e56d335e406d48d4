#include "sna/analysis.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sna/csvio.hpp"
#include "sna/error.hpp"

using namespace sna;

namespace {

std::string data_path(const std::string& name) {
  return std::string(SNA_DATA_DIR) + "/" + name;
}

Circuit load_cell(const std::string& name) {
  std::ifstream f(data_path(name));
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_netlist(ss.str());
}

const char* kLinesNetlist =
    "* two coupled 2-segment lines\n"
    ".net vict in_v out_v\n"
    ".net aggr in_a out_a\n"
    "RV1 in_v m_v 50\n"
    "RV2 m_v out_v 50\n"
    "CV1 m_v 0 2f\n"
    "CV2 out_v 0 2f\n"
    "RA1 in_a m_a 50\n"
    "RA2 m_a out_a 50\n"
    "CA1 m_a 0 2f\n"
    "CA2 out_a 0 2f\n"
    "CC1 m_v m_a 2f\n"
    "CC2 out_v out_a 2f\n"
    ".end\n";

/// Writes the full artifact set (netlist, vccs/thevenin/nrc/pi CSVs, config)
/// into a scratch directory once; the config uses relative artifact paths so
/// it also exercises config-directory path resolution.
struct Fixture {
  std::filesystem::path dir;
  std::string config_path;

  Fixture() {
    dir = std::filesystem::temp_directory_path() / "sna_analysis_tests";
    std::filesystem::create_directories(dir);
    write_text_atomic((dir / "lines.sp").string(), kLinesNetlist);

    Circuit inv = load_cell("inv.sp");
    write_vccs_csv((dir / "vccs.csv").string(),
                   build_vccs_table(inv, "a", "y", {}, 1.2, 29));
    write_thevenin_csv(
        (dir / "agg.csv").string(),
        fit_thevenin(inv, "a", "y", SaturatedRamp{10e-12, 50e-12, 0.0, 1.2}, 1.2,
                     20e-15));
    write_nrc_csv((dir / "nrc.csv").string(),
                  build_nrc(inv, "a", "y", 1.2, {50e-12, 100e-12, 200e-12, 400e-12},
                            3e-15));
    write_coupled_pi_csv((dir / "pi.csv").string(),
                         reduce_interconnect(parse_netlist(kLinesNetlist)));

    std::string cfg =
        "# mini cluster: inverter victim, one coupled inverter aggressor\n"
        "[victim]\n"
        "cell = " + data_path("inv.sp") + "\n"
        "in = A\n"          // pin names are case-insensitive
        "out = y\n"
        "net = vict\n"
        "vccs_csv = vccs.csv\n"
        "v_in_q = 0\n"
        "v_out_q = 1.2\n"
        "glitch = TRI( 100p 250p 400p 0 0.72 )\n"
        "receiver_cap = 3f\n"
        "\n"
        "[aggressor.1]\n"
        "cell = " + data_path("inv.sp") + "\n"
        "in = a\n"
        "out = y\n"
        "net = aggr\n"
        "thevenin_csv = agg.csv\n"
        "input = SRAMP( 10p 50p 0 1.2 )   # rising input, falling output\n"
        "offset = 0\n"
        "receiver_cap = 3f\n"
        "\n"
        "[interconnect]\n"
        "netlist = lines.sp\n"
        "reduced_csv = pi.csv\n"
        "\n"
        "[sim]\n"
        "vdd = 1.2\n"
        "t_stop = 1.5n\n"
        "\n"
        "[nrc]\n"
        "csv = nrc.csv\n";
    config_path = (dir / "cluster.cfg").string();
    write_text_atomic(config_path, cfg);
  }

  std::string write_variant(const std::string& name, const std::string& text) const {
    std::string p = (dir / name).string();
    write_text_atomic(p, text);
    return p;
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("mode names parse case-insensitively") {
  CHECK(parse_mode("oracle") == AnalysisMode::Oracle);
  CHECK(parse_mode("Macromodel") == AnalysisMode::Macromodel);
  CHECK(parse_mode("SUPERPOSITION") == AnalysisMode::Superposition);
  CHECK(!parse_mode("spice").has_value());
  CHECK(std::string(to_string(AnalysisMode::Oracle)) == "oracle");
  CHECK(std::string(to_string(AnalysisMode::Macromodel)) == "macromodel");
  CHECK(std::string(to_string(AnalysisMode::Superposition)) == "superposition");
}

TEST_CASE("config loader reads sections, pins, and sources") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  CHECK(cfg.vdd == 1.2);
  CHECK(cfg.sim.t_stop_s == 1.5 * 1e-9);  // suffix parse multiplies, so match it
  CHECK(cfg.victim.in == "a");
  CHECK(cfg.victim.net == "vict");
  CHECK(cfg.victim.receiver_cap_f == 3.0 * 1e-15);
  const auto* tri = std::get_if<TriangleGlitch>(&cfg.victim.glitch);
  REQUIRE(tri != nullptr);
  CHECK(tri->t_peak_s == 250e-12);
  CHECK(tri->v_peak == 0.72);
  REQUIRE(cfg.aggressors.size() == 1);
  CHECK(cfg.aggressors[0].input_ramp.v_end == 1.2);
  CHECK(cfg.aggressors[0].net == "aggr");
  // relative artifact paths resolve against the config directory
  CHECK(std::filesystem::path(cfg.victim.vccs_csv).is_absolute());
  CHECK(std::filesystem::exists(cfg.victim.vccs_csv));
  CHECK(cfg.nrc_csv == (fixture().dir / "nrc.csv").string());
}

TEST_CASE("aggressor sections are ordered by index, not file order") {
  const auto& fx = fixture();
  std::string p = fx.write_variant("order.cfg",
                                   "[victim]\nnet = vict\n"
                                   "[aggressor.2]\nnet = b\n"
                                   "[aggressor.1]\nnet = a\n"
                                   "[sim]\nvdd = 1.2\nt_stop = 1n\n");
  ClusterConfig cfg = load_cluster_config(p);
  REQUIRE(cfg.aggressors.size() == 2);
  CHECK(cfg.aggressors[0].net == "a");
  CHECK(cfg.aggressors[1].net == "b");
}

TEST_CASE("config loader rejects malformed input") {
  const auto& fx = fixture();
  auto loading = [&](const std::string& name, const std::string& text) {
    return [p = fx.write_variant(name, text)] { load_cluster_config(p); };
  };
  CHECK_THROWS_AS(loading("m1.cfg", "[sim]\nvdd = 1.2\nt_stop = 1n\n")(), Error);
  CHECK_THROWS_AS(loading("m2.cfg", "[victim]\nnet = v\n")(), Error);
  CHECK_THROWS_AS(
      loading("m3.cfg", "[victim]\nnet = v\n[sim]\nvdd = 0\nt_stop = 1n\n")(),
      Error);
  CHECK_THROWS_AS(
      loading("m4.cfg", "[victim]\ncolor = red\n[sim]\nvdd = 1\nt_stop = 1n\n")(),
      Error);
  CHECK_THROWS_AS(
      loading("m5.cfg", "net = v\n[victim]\n[sim]\nvdd = 1\nt_stop = 1n\n")(),
      Error);
  CHECK_THROWS_AS(
      loading("m6.cfg", "[victim]\nnet = v\n[aggressor.zero]\n[sim]\nvdd = 1\nt_stop = 1n\n")(),
      Error);
  CHECK_THROWS_AS(
      loading("m7.cfg", "[victim]\nnet = v\nglitch = TRI( 5p 1p 9p 0 1 )\n[sim]\nvdd = 1\nt_stop = 1n\n")(),
      Error);
  CHECK_THROWS_AS(
      loading("m8.cfg",
              "[victim]\nnet = v\n[aggressor.1]\nnet = a\ninput = DC 0\n[sim]\nvdd = 1\nt_stop = 1n\n")(),
      Error);

  try {
    loading("m9.cfg", "[victim]\nnet == v\n[sim]\nvdd = 1\nt_stop = 1n\n")();
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("cluster spec is built from the referenced artifacts") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  ClusterSpec spec = build_cluster_spec(cfg);
  CHECK(spec.vdd == 1.2);
  CHECK(spec.victim.vccs.vin_grid.size() == 29);
  REQUIRE(spec.aggressors.size() == 1);
  CHECK(spec.aggressors[0].driver.r_th_ohms > 0);
  CHECK(spec.aggressors[0].driver.ramp.v_start == 1.2);  // falling output
  CHECK(spec.interconnect.find("vict") != nullptr);
  CHECK(spec.interconnect.coupling_total("vict") == doctest::Approx(4e-15));

  ClusterConfig bare = cfg;
  bare.victim.vccs_csv.clear();
  CHECK_THROWS_WITH_AS(build_cluster_spec(bare),
                       doctest::Contains("characterize vccs"), Error);
}

TEST_CASE("oracle circuit merges cells onto the interconnect") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  OracleCircuit oc = build_oracle_circuit(cfg);
  CHECK(oc.near_node == "x.in_v");
  CHECK(oc.far_node == "x.out_v");

  int res = 0, cap = 0, vsrc = 0, fet = 0;
  for (const auto& e : oc.circuit.elements) {
    if (std::holds_alternative<Resistor>(e.kind)) ++res;
    if (std::holds_alternative<Capacitor>(e.kind)) ++cap;
    if (std::holds_alternative<VSource>(e.kind)) ++vsrc;
    if (std::holds_alternative<Mosfet>(e.kind)) ++fet;
  }
  CHECK(res == 4);   // line segments
  CHECK(cap == 8);   // 4 ground + 2 coupling + 2 receivers
  CHECK(vsrc == 4);  // two rails + glitch + aggressor input
  CHECK(fet == 4);
  CHECK(oc.circuit.models.count("v.nch") == 1);
  CHECK(oc.circuit.models.count("a1.pch") == 1);
  // the cells' output pins were merged onto the ports: no dangling "v.y"
  for (const auto& n : oc.circuit.node_names()) {
    CHECK(n != "v.y");
    CHECK(n != "a1.y");
  }

  SUBCASE("non-RC interconnect elements are rejected") {
    ClusterConfig bad = cfg;
    bad.interconnect_netlist = fixture().write_variant(
        "badlines.sp", ".net vict p r\nRP p r 10\nVX p 0 DC 1\n.end\n");
    CHECK_THROWS_WITH_AS(build_oracle_circuit(bad), doctest::Contains("vx"), Error);
  }
  SUBCASE("config nets must be declared in the interconnect netlist") {
    ClusterConfig bad = cfg;
    bad.victim.net = "ghost";
    CHECK_THROWS_AS(build_oracle_circuit(bad), Error);
  }
  SUBCASE("missing cells or pins are reported") {
    ClusterConfig bad = cfg;
    bad.victim.cell.clear();
    CHECK_THROWS_AS(build_oracle_circuit(bad), Error);
    bad = cfg;
    bad.victim.in = "nope";
    CHECK_THROWS_AS(build_oracle_circuit(bad), Error);
  }
}

TEST_CASE("quiet configs report zero noise in every mode") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  cfg.victim.glitch = Dc{0.0};
  cfg.aggressors.clear();
  for (auto mode : {AnalysisMode::Oracle, AnalysisMode::Macromodel,
                    AnalysisMode::Superposition}) {
    ModeResult r = run_mode(cfg, mode);
    CAPTURE(to_string(mode));
    CHECK(r.metrics.peak_v < 1e-6);
    CHECK(r.far_dev.size() > 100);
    CHECK((mode == AnalysisMode::Superposition) != r.near_dev.has_value());
  }
}

TEST_CASE("macromodel tracks the transistor-level oracle") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  ModeResult oracle = run_mode(cfg, AnalysisMode::Oracle);
  ModeResult macro = run_mode(cfg, AnalysisMode::Macromodel);
  ModeResult sup = run_mode(cfg, AnalysisMode::Superposition);

  REQUIRE(oracle.metrics.peak_v > 20e-3);
  CHECK(std::abs(macro.metrics.peak_v - oracle.metrics.peak_v) <
        0.25 * oracle.metrics.peak_v);
  CHECK(std::abs(macro.metrics.area_v_s - oracle.metrics.area_v_s) <
        0.25 * oracle.metrics.area_v_s);
  CHECK(sup.metrics.peak_v > 5e-3);
  // overlapping same-polarity noise: the linear sum does not exceed combined
  CHECK(sup.metrics.area_v_s <= macro.metrics.area_v_s * 1.02);
  CHECK(oracle.solve_seconds > 0);
  CHECK(macro.solve_seconds > 0);
}

TEST_CASE("compare reports carry both metric rows and verdicts") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  AnalysisReport rep = run_compare(cfg);
  std::string csv = rep.to_csv();

  std::istringstream in(csv);
  std::string header, row_peak, row_area, extra;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row_peak));
  REQUIRE(std::getline(in, row_area));
  CHECK(!std::getline(in, extra));
  CHECK(header ==
        "metric,oracle,superposition,superposition_err_pct,macromodel,macromodel_err_pct");
  CHECK(row_peak.rfind("peak_v,", 0) == 0);
  CHECK(row_area.rfind("area_v_s,", 0) == 0);
  // timing lives in the struct, never in the CSV
  CHECK(csv.find("seconds") == std::string::npos);

  CHECK(std::isfinite(rep.err_pct(rep.macromodel.metrics.peak_v,
                                  rep.oracle.metrics.peak_v)));
  REQUIRE(rep.verdicts.size() == 3);
  CHECK(rep.verdicts.count("oracle") == 1);
  CHECK(rep.verdicts.count("macromodel") == 1);
  CHECK(rep.verdicts.count("superposition") == 1);

  ClusterConfig no_nrc = cfg;
  no_nrc.nrc_csv.clear();
  CHECK(run_compare(no_nrc).verdicts.empty());
}

TEST_CASE("compare output is deterministic across reruns") {
  ClusterConfig cfg = load_cluster_config(fixture().config_path);
  AnalysisReport a = run_compare(cfg);
  AnalysisReport b = run_compare(cfg);
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.oracle.far_dev.v == b.oracle.far_dev.v);
  CHECK(a.superposition.far_dev.v == b.superposition.far_dev.v);
}
