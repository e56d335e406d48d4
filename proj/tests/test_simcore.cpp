#include <doctest.h>

#include <cmath>
#include <random>

#include "sna/error.hpp"
#include "sna/netlist.hpp"
#include "sna/simcore.hpp"
#include "sna/vccs_table.hpp"

using namespace sna;

namespace {

// Inverter used by the DC examples: W/L = 2 pull-down, W/L = 4 pull-up.
const char* kInverter =
    ".model nch NMOS VT0=0.4 KP=200u LAMBDA=0.1\n"
    ".model pch PMOS VT0=-0.4 KP=100u LAMBDA=0.08\n"
    "M1 out in 0 0 nch W=0.26u L=0.13u\n"
    "M2 out in vdd vdd pch W=0.52u L=0.13u\n"
    "Vdd vdd 0 DC 1.2\n"
    "Vin in 0 DC 0\n"
    ".end\n";

double inverter_balance_vout(const Circuit& ckt, double vin, double vdd) {
  const auto& m1 = std::get<Mosfet>(ckt.find("m1")->kind);
  const auto& m2 = std::get<Mosfet>(ckt.find("m2")->kind);
  const MosfetModel& nch = ckt.models.at(m1.model);
  const MosfetModel& pch = ckt.models.at(m2.model);
  // Net current pulled out of the output node; monotone increasing in vout.
  auto f = [&](double vout) {
    double in = mosfet_current(nch, m1.width_m, m1.length_m, vin, vout);
    double ip = mosfet_current(pch, m2.width_m, m2.length_m, vin - vdd, vout - vdd);
    return in + ip;
  };
  double lo = 0.0, hi = vdd;
  for (int k = 0; k < 100; ++k) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("dc: series resistor divider") {
  Circuit ckt = parse_netlist(
      "V1 in 0 DC 1\n"
      "R1 in mid 1k\n"
      "R2 mid 0 1k\n"
      ".end\n");
  auto op = dc_operating_point(ckt);
  CHECK(op.at("mid") == doctest::Approx(0.5).epsilon(1e-9));

  Simulator sim(ckt, SimOptions{});
  auto dc = sim.solve_dc();
  CHECK(dc.source_i.at("v1") == doctest::Approx(0.5e-3).epsilon(1e-9));
}

TEST_CASE("dc: inverter output at the rails") {
  Circuit ckt = parse_netlist(kInverter);
  auto op = dc_operating_point(ckt);
  CHECK(op.at("out") == doctest::Approx(1.2).epsilon(1e-7));

  auto high = dc_operating_point(ckt, {{"vin", 1.2}});
  CHECK(high.at("out") == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
}

TEST_CASE("dc: inverter midpoint matches a scalar current-balance root") {
  Circuit ckt = parse_netlist(kInverter);
  double expected = inverter_balance_vout(ckt, 0.6, 1.2);
  auto op = dc_operating_point(ckt, {{"vin", 0.6}});
  CHECK(op.at("out") == doctest::Approx(expected).epsilon(2e-5));
}

TEST_CASE("dc: override rejects unknown source names") {
  Circuit ckt = parse_netlist("V1 a 0 DC 1\nR1 a 0 1k\n.end\n");
  CHECK_THROWS_AS(dc_operating_point(ckt, {{"nosuch", 1.0}}), Error);
}

TEST_CASE("mosfet_current level-1 regions") {
  MosfetModel n{Polarity::Nmos, 0.4, 100e-6, 0.0};
  CHECK(mosfet_current(n, 2e-6, 1e-6, 0.2, 1.0) == 0.0);  // cutoff
  CHECK(mosfet_current(n, 2e-6, 1e-6, 1.4, 1.2) ==
        doctest::Approx(100e-6).epsilon(1e-12));  // saturation, vov=1
  // triode spot check: vgs=1.0, vds=0.3 -> beta*(0.6*0.3 - 0.045)
  CHECK(mosfet_current(n, 2e-6, 1e-6, 1.0, 0.3) ==
        doctest::Approx(200e-6 * (0.6 * 0.3 - 0.045)).epsilon(1e-12));

  MosfetModel nl{Polarity::Nmos, 0.4, 100e-6, 0.07};
  for (double vgs : {0.6, 0.9, 1.2}) {
    double vov = vgs - 0.4;
    double below = mosfet_current(nl, 1e-6, 1e-6, vgs, vov - 1e-9);
    double above = mosfet_current(nl, 1e-6, 1e-6, vgs, vov + 1e-9);
    CHECK(std::abs(below - above) < 1e-12);
  }

  MosfetModel p{Polarity::Pmos, -0.4, 100e-6, 0.07};
  MosfetModel mirror{Polarity::Nmos, 0.4, 100e-6, 0.07};
  for (double vgs : {-1.2, -0.6, 0.1})
    for (double vds : {-1.2, -0.5, 0.0})
      CHECK(mosfet_current(p, 1e-6, 1e-6, vgs, vds) ==
            doctest::Approx(-mosfet_current(mirror, 1e-6, 1e-6, -vgs, -vds))
                .epsilon(1e-14));
}

TEST_CASE("vccs_eval interpolation") {
  VccsTable t;
  t.vin_grid = {0.0, 0.5, 1.0};
  t.vout_grid = {0.0, 0.5, 1.0};
  t.i_a = {{1e-6, 2e-6, 3e-6}, {4e-6, 5e-6, 6e-6}, {7e-6, 8e-6, 9e-6}};
  t.validate();

  SUBCASE("grid nodes reproduce stored values exactly") {
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j)
        CHECK(vccs_eval(t, t.vin_grid[i], t.vout_grid[j]).i_a == t.i_a[i][j]);
  }

  SUBCASE("cell center averages the four corners") {
    VccsTable c;
    c.vin_grid = {0.0, 1.0};
    c.vout_grid = {0.0, 1.0};
    c.i_a = {{0.0, 2e-6}, {4e-6, 6e-6}};
    CHECK(vccs_eval(c, 0.5, 0.5).i_a == doctest::Approx(3e-6).epsilon(1e-12));
  }

  SUBCASE("queries beyond the grid clamp to the boundary") {
    auto edge = vccs_eval(t, 0.25, 1.0);
    auto beyond = vccs_eval(t, 0.25, 2.0);
    CHECK(beyond.i_a == edge.i_a);
    CHECK(beyond.di_dvout == 0.0);
    CHECK(vccs_eval(t, -5.0, -5.0).i_a == t.i_a[0][0]);
  }

  SUBCASE("partials match central differences away from cell boundaries") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int k = 0; k < 200; ++k) {
      double vin = u(rng), vout = u(rng);
      auto e = vccs_eval(t, vin, vout);
      double h = 1e-3;  // stays inside the 0.5-wide cell for these draws
      double fd_in =
          (vccs_eval(t, vin + h, vout).i_a - vccs_eval(t, vin - h, vout).i_a) /
          (2 * h);
      double fd_out =
          (vccs_eval(t, vin, vout + h).i_a - vccs_eval(t, vin, vout - h).i_a) /
          (2 * h);
      CHECK(e.di_dvin == doctest::Approx(fd_in).epsilon(1e-9));
      CHECK(e.di_dvout == doctest::Approx(fd_out).epsilon(1e-9));
    }
  }

  SUBCASE("interpolant is continuous across cell boundaries") {
    for (double v : {0.5}) {
      auto lo = vccs_eval(t, v - 1e-12, 0.3);
      auto hi = vccs_eval(t, v + 1e-12, 0.3);
      CHECK(lo.i_a == doctest::Approx(hi.i_a).epsilon(1e-9));
    }
  }

  SUBCASE("validation rejects malformed tables") {
    VccsTable bad = t;
    bad.vout_grid = {0.0, 0.4, 1.0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = t;
    bad.i_a.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = t;
    bad.i_a[1][1] = std::nan("");
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

TEST_CASE("dc: table vccs stamps as a current into its output node") {
  // Linear table i = 1 mS * (0.6 - vout) against a 1 kOhm load: vout = 0.3.
  VccsTable t;
  t.vin_grid = {0.0, 1.2};
  int np = 15;
  for (int k = 0; k < np; ++k) {
    double vout = -0.24 + k * (1.68 / (np - 1));
    t.vout_grid.push_back(vout);
  }
  t.i_a.assign(2, std::vector<double>());
  for (int r = 0; r < 2; ++r)
    for (double vout : t.vout_grid) t.i_a[r].push_back(1e-3 * (0.6 - vout));

  Circuit ckt;
  ckt.add({"g1", TableVccs{"in", "out", t}});
  ckt.add({"r1", Resistor{"out", "0", 1000.0}});
  ckt.add({"vin", VSource{"in", "0", Dc{0.6}}});
  auto op = dc_operating_point(ckt);
  CHECK(op.at("out") == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("transient: RC step response tracks the closed form within 0.5%") {
  const double r = 1000.0, c = 1e-12, rc = r * c;
  Circuit ckt = parse_netlist(
      "V1 in 0 SRAMP( 0 1e-18 0 1 )\n"
      "R1 in out 1k\n"
      "C1 out 0 1p\n"
      ".end\n");
  SimOptions opts;
  opts.dt_s = rc / 100.0;
  opts.t_stop_s = 5 * rc;
  auto waves = transient(ckt, opts, {"out"});
  const Waveform& w = waves.at("out");
  REQUIRE(w.size() > 400);
  CHECK(w.t_s.front() == 0.0);
  for (size_t k = 0; k < w.size(); ++k) {
    double expected = 1.0 - std::exp(-w.t_s[k] / rc);
    CHECK(std::abs(w.v[k] - expected) < 0.005);
  }
  CHECK(w.v.back() > 0.99);
}

TEST_CASE("transient: zero sources give identically zero waveforms") {
  Circuit ckt = parse_netlist(
      ".model nch NMOS VT0=0.4 KP=200u LAMBDA=0.1\n"
      "M1 out in 0 0 nch W=1u L=0.13u\n"
      "V1 in 0 DC 0\n"
      "R1 out mid 1k\n"
      "C1 mid 0 10f\n"
      ".end\n");
  SimOptions opts;
  opts.t_stop_s = 1e-9;
  auto waves = transient(ckt, opts, {"out", "mid"});
  for (const auto& [node, w] : waves)
    for (double v : w.v) CHECK(v == 0.0);
}

namespace {

// Discrete charge through one capacitor, honoring which scheme produced each
// step so the companion identity makes the sum exact.
double integrate_cap_current(const Simulator::TransientResult& tr, size_t cap) {
  double q = 0;
  for (size_t k = 1; k < tr.t.size(); ++k) {
    double h = tr.t[k] - tr.t[k - 1];
    if (tr.scheme[k] == 0)
      q += tr.cap_i[k][cap] * h;
    else
      q += 0.5 * (tr.cap_i[k][cap] + tr.cap_i[k - 1][cap]) * h;
  }
  return q;
}

}  // namespace

TEST_CASE("transient: capacitor charge balance holds for assorted shapes") {
  const char* shapes[] = {
      "V1 in 0 SRAMP( 0 1e-18 0 1 )\n",
      "V1 in 0 TRI( 100p 250p 600p 0 0.8 )\n",
      "V1 in 0 PWL( 0 0 200p 1 400p 0.25 900p 0.7 )\n",
  };
  for (const char* src : shapes) {
    Circuit ckt = parse_netlist(std::string(src) +
                                "R1 in out 2k\n"
                                "C1 out 0 50f\n"
                                "C2 out mid 20f\n"
                                "R2 mid 0 5k\n"
                                ".end\n");
    SimOptions opts;
    opts.t_stop_s = 1e-9;
    Simulator sim(ckt, opts);
    auto tr = sim.run_transient();
    for (size_t cap = 0; cap < tr.cap_names.size(); ++cap) {
      double c = std::get<Capacitor>(ckt.find(tr.cap_names[cap])->kind).farads;
      double dv = tr.cap_v.back()[cap] - tr.cap_v.front()[cap];
      double q = integrate_cap_current(tr, cap);
      CHECK(std::abs(q - c * dv) <=
            opts.reltol * std::max(std::abs(c * dv), 1e-18));
    }
  }
}

TEST_CASE("transient: linear circuits superpose within 10*reltol") {
  auto run = [](const char* a, const char* b) {
    Circuit ckt = parse_netlist(std::string() +
                                "V1 ina 0 " + a + "\n" +
                                "V2 inb 0 " + b + "\n" +
                                "R1 ina x 1k\n"
                                "R2 inb x 2k\n"
                                "C1 x 0 100f\n"
                                "R3 x y 4k\n"
                                "C2 y 0 50f\n"
                                ".end\n");
    SimOptions opts;
    opts.t_stop_s = 2e-9;
    return transient(ckt, opts, {"y"}).at("y");
  };
  Waveform both = run("PWL( 0 0 300p 1 600p 0.2 )", "SRAMP( 100p 400p 0 -0.7 )");
  Waveform only_a = run("PWL( 0 0 300p 1 600p 0.2 )", "DC 0");
  Waveform only_b = run("DC 0", "SRAMP( 100p 400p 0 -0.7 )");
  REQUIRE(both.size() == only_a.size());
  double scale = 0;
  for (double v : both.v) scale = std::max(scale, std::abs(v));
  for (size_t k = 0; k < both.size(); ++k) {
    double sum = only_a.v[k] + only_b.v[k];
    CHECK(std::abs(both.v[k] - sum) <= 10 * 1e-3 * std::max(scale, 1.0));
  }
}

TEST_CASE("newton: converged solution does not depend on voltage limiting") {
  Circuit ckt = parse_netlist(kInverter);
  SimOptions tight;
  tight.vlimit_v = 0.5;
  SimOptions loose;
  loose.vlimit_v = 1e9;
  auto a = Simulator(ckt, tight).solve_dc({{"vin", 0.6}});
  auto b = Simulator(ckt, loose).solve_dc({{"vin", 0.6}});
  CHECK(std::abs(a.node_v.at("out") - b.node_v.at("out")) < 1e-5);
}

TEST_CASE("newton: iteration budget exhaustion reports the residual") {
  Circuit ckt = parse_netlist(kInverter);
  SimOptions opts;
  opts.max_newton_iters = 1;
  Simulator sim(ckt, opts);
  CHECK_THROWS_AS(sim.solve_dc(), ConvergenceError);
  try {
    sim.solve_dc();
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual_a >= 0.0);
  }
}

TEST_CASE("options are validated before a transient run") {
  Circuit ckt = parse_netlist("R1 a 0 1k\nV1 a 0 DC 1\n.end\n");
  SimOptions opts;
  opts.t_stop_s = 0;  // invalid
  Simulator sim(ckt, opts);
  CHECK_THROWS_AS(sim.run_transient(), Error);
  SimOptions neg;
  neg.t_stop_s = 1e-9;
  neg.reltol = -1;
  CHECK_THROWS_AS(Simulator(ckt, neg).run_transient(), Error);
}

TEST_CASE("waveform interpolation clamps outside the sampled range") {
  Waveform w;
  w.t_s = {0.0, 1.0, 2.0};
  w.v = {0.0, 1.0, 0.5};
  CHECK(w.value_at(-1.0) == 0.0);
  CHECK(w.value_at(0.5) == doctest::Approx(0.5));
  CHECK(w.value_at(1.5) == doctest::Approx(0.75));
  CHECK(w.value_at(9.0) == 0.5);
  Waveform s = w.shifted(0.25);
  CHECK(s.t_s[0] == 0.25);
  CHECK(s.value_at(1.25) == doctest::Approx(1.0));
}

TEST_CASE("unknown probe nodes are rejected") {
  Circuit ckt = parse_netlist("R1 a 0 1k\nV1 a 0 DC 1\n.end\n");
  SimOptions opts;
  opts.t_stop_s = 1e-9;
  CHECK_THROWS_AS(transient(ckt, opts, {"nosuch"}), Error);
}
