#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sna/netlist.hpp"
#include "sna/vccs_table.hpp"

namespace sna {

struct SimOptions {
  double dt_s = 0;  // base timestep; <=0 means t_stop_s / 2000
  double t_stop_s = 0;
  double reltol = 1e-3;
  double vabstol_v = 1e-6;
  double iabstol_a = 1e-9;
  int max_newton_iters = 50;
  double gmin_s = 1e-12;
  int max_step_halvings = 8;
  double vlimit_v = 0.5;  // per-iteration Newton voltage step clamp

  double base_dt() const { return dt_s > 0 ? dt_s : t_stop_s / 2000.0; }
  void validate() const;
};

/// Sampled voltage trace, t strictly increasing from 0.
struct Waveform {
  std::vector<double> t_s;
  std::vector<double> v;

  size_t size() const { return t_s.size(); }
  /// Linear interpolation; clamps outside the sampled range.
  double value_at(double t) const;
  double back_t() const { return t_s.back(); }
  Waveform shifted(double dt) const;  // same samples, times + dt
};

/// Level-1 drain current for the given gate-source / drain-source bias.
/// PMOS is mapped onto the NMOS equations with negated terminal differences.
double mosfet_current(const MosfetModel& model, double w_m, double l_m,
                      double vgs, double vds);

// ---------------------------------------------------------------------------
// Engine

class Simulator {
 public:
  Simulator(const Circuit& circuit, SimOptions opts);

  struct DcResult {
    Eigen::VectorXd x;  // node voltages then source branch currents
    std::map<std::string, double> node_v;
    std::map<std::string, double> source_i;  // current delivered into np
    int iterations = 0;
  };

  /// Newton DC solution with capacitors open and every node shunted by gmin.
  /// source_values overrides named V-sources with fixed DC levels.
  DcResult solve_dc(const std::map<std::string, double>& source_values = {});

  struct TransientResult {
    std::vector<double> t;               // accepted steps, t[0] == 0
    std::vector<Eigen::VectorXd> x;      // full state per step
    std::vector<int> scheme;             // scheme[k]: step k-1 -> k (0 BE, 1 trap)
    std::vector<std::string> cap_names;  // capacitor bookkeeping for charge checks
    std::vector<std::vector<double>> cap_i;  // [step][cap]
    std::vector<std::vector<double>> cap_v;  // [step][cap]
  };

  /// Trapezoidal transient from the t=0 operating point; backward Euler on
  /// the first step and on every retry after a dt halving.
  TransientResult run_transient();

  int node_index(const std::string& name) const;  // -1 is ground
  const std::vector<std::string>& node_order() const { return node_names_; }
  Waveform waveform(const TransientResult& tr, const std::string& node) const;

 private:
  struct CompiledR { int n1, n2; double g; };
  struct CompiledC { int n1, n2; double farads; };
  struct CompiledV { int np, nn, branch; SourceSpec spec; };
  struct CompiledM { int d, g, s; const MosfetModel* model; double w, l; };
  struct CompiledVccs { int nin, nout; const VccsTable* table; };

  enum class Mode { Dc, Transient };

  void compile(const Circuit& circuit);
  // One Newton solve of the (companion-discretized) system at time t.
  // cap_geq/cap_ieq describe the companion model; empty in DC mode.
  int newton(Eigen::VectorXd& x, Mode mode, double t,
             const std::vector<double>& cap_geq,
             const std::vector<double>& cap_ieq,
             const std::map<std::string, double>* source_override);
  void assemble(const Eigen::VectorXd& x, Mode mode, double t,
                const std::vector<double>& cap_geq,
                const std::vector<double>& cap_ieq,
                const std::map<std::string, double>* source_override,
                Eigen::MatrixXd& jac, Eigen::VectorXd& resid,
                Eigen::VectorXd& iscale) const;

  SimOptions opts_;
  std::vector<std::string> node_names_;
  std::map<std::string, int> node_ids_;
  std::vector<CompiledR> resistors_;
  std::vector<CompiledC> caps_;
  std::vector<CompiledV> vsources_;
  std::vector<CompiledM> mosfets_;
  std::vector<CompiledVccs> vccs_;
  std::vector<std::string> cap_names_, vsource_names_;
  std::vector<std::unique_ptr<MosfetModel>> model_pool_;
  std::vector<std::unique_ptr<VccsTable>> table_pool_;
  int n_nodes_ = 0;
  int n_unknowns_ = 0;
};

// ---------------------------------------------------------------------------
// Spec-surface wrappers

std::map<std::string, double> dc_operating_point(
    const Circuit& circuit, const std::map<std::string, double>& source_values = {});

std::map<std::string, Waveform> transient(const Circuit& circuit,
                                          const SimOptions& opts,
                                          const std::set<std::string>& probes);

}  // namespace sna
