#include "sna/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sna/error.hpp"

namespace sna {

void SimOptions::validate() const {
  if (dt_s < 0) throw Error("dt must be positive (or 0 for the default)");
  if (!(t_stop_s > 0)) throw Error("t_stop must be positive");
  if (!(reltol > 0 && vabstol_v > 0 && iabstol_a > 0))
    throw Error("tolerances must be positive");
  if (max_newton_iters < 1) throw Error("max_newton_iters must be >= 1");
  if (gmin_s < 0) throw Error("gmin must be non-negative");
  if (max_step_halvings < 0) throw Error("max_step_halvings must be non-negative");
  if (!(vlimit_v > 0)) throw Error("vlimit must be positive");
}

double Waveform::value_at(double t) const {
  if (t_s.empty()) throw Error("empty waveform");
  if (t <= t_s.front()) return v.front();
  if (t >= t_s.back()) return v.back();
  auto it = std::upper_bound(t_s.begin(), t_s.end(), t);
  size_t k = size_t(it - t_s.begin());
  double u = (t - t_s[k - 1]) / (t_s[k] - t_s[k - 1]);
  return v[k - 1] + u * (v[k] - v[k - 1]);
}

Waveform Waveform::shifted(double dt) const {
  Waveform w = *this;
  for (double& t : w.t_s) t += dt;
  return w;
}

// ---------------------------------------------------------------------------
// Level-1 device

namespace {

struct MosEval {
  double id;   // current into the drain terminal
  double gm;   // d id / d vgs
  double gds;  // d id / d vds
};

// Evaluates the level-1 equations in the NMOS frame; PMOS is reflected by
// negating vgs, vds and vt0. gm/gds come out positive in both polarities.
MosEval mos_eval(const MosfetModel& m, double w_m, double l_m, double vgs,
                 double vds) {
  double sign = m.polarity == Polarity::Nmos ? 1.0 : -1.0;
  double vg = sign * vgs;
  double vd = sign * vds;
  double vt = sign * m.vt0_v;
  double vov = vg - vt;
  if (vov <= 0) return {0.0, 0.0, 0.0};
  double beta = m.kp_a_per_v2 * (w_m / l_m);
  double lam = m.lambda_per_v;
  double cl = 1.0 + lam * vd;
  double i, gm, gds;
  if (vd < vov) {
    double core = vov * vd - 0.5 * vd * vd;
    i = beta * core * cl;
    gm = beta * vd * cl;
    gds = beta * ((vov - vd) * cl + core * lam);
  } else {
    i = 0.5 * beta * vov * vov * cl;
    gm = beta * vov * cl;
    gds = 0.5 * beta * vov * vov * lam;
  }
  return {sign * i, gm, gds};
}

}  // namespace

double mosfet_current(const MosfetModel& model, double w_m, double l_m,
                      double vgs, double vds) {
  return mos_eval(model, w_m, l_m, vgs, vds).id;
}

// ---------------------------------------------------------------------------
// Compilation

Simulator::Simulator(const Circuit& circuit, SimOptions opts) : opts_(opts) {
  circuit.validate();
  compile(circuit);
}

void Simulator::compile(const Circuit& circuit) {
  node_names_ = circuit.node_names();
  for (int i = 0; i < int(node_names_.size()); ++i)
    node_ids_[node_names_[i]] = i;
  n_nodes_ = int(node_names_.size());

  auto id_of = [&](const std::string& n) -> int {
    if (n == "0") return -1;
    return node_ids_.at(n);
  };

  for (const auto& e : circuit.elements) {
    if (const auto* r = std::get_if<Resistor>(&e.kind)) {
      resistors_.push_back({id_of(r->n1), id_of(r->n2), 1.0 / r->ohms});
    } else if (const auto* c = std::get_if<Capacitor>(&e.kind)) {
      caps_.push_back({id_of(c->n1), id_of(c->n2), c->farads});
      cap_names_.push_back(e.name);
    } else if (const auto* v = std::get_if<VSource>(&e.kind)) {
      int branch = n_nodes_ + int(vsources_.size());
      vsources_.push_back({id_of(v->np), id_of(v->nn), branch, v->spec});
      vsource_names_.push_back(e.name);
    } else if (const auto* m = std::get_if<Mosfet>(&e.kind)) {
      model_pool_.push_back(
          std::make_unique<MosfetModel>(circuit.models.at(m->model)));
      mosfets_.push_back({id_of(m->d), id_of(m->g), id_of(m->s),
                          model_pool_.back().get(), m->width_m, m->length_m});
    } else if (const auto* t = std::get_if<TableVccs>(&e.kind)) {
      table_pool_.push_back(std::make_unique<VccsTable>(t->table));
      vccs_.push_back({id_of(t->nin_ref), id_of(t->nout), table_pool_.back().get()});
    }
  }
  n_unknowns_ = n_nodes_ + int(vsources_.size());
}

int Simulator::node_index(const std::string& name) const {
  std::string key = to_lower(name);
  if (key == "0") return -1;
  auto it = node_ids_.find(key);
  if (it == node_ids_.end()) throw Error("unknown node '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Assembly

void Simulator::assemble(const Eigen::VectorXd& x, Mode mode, double t,
                         const std::vector<double>& cap_geq,
                         const std::vector<double>& cap_ieq,
                         const std::map<std::string, double>* source_override,
                         Eigen::MatrixXd& jac, Eigen::VectorXd& resid,
                         Eigen::VectorXd& iscale) const {
  jac.setZero();
  resid.setZero();
  iscale.setZero();

  auto vat = [&](int n) { return n < 0 ? 0.0 : x[n]; };
  auto J = [&](int i, int j, double g) {
    if (i >= 0 && j >= 0) jac(i, j) += g;
  };
  auto R = [&](int i, double leaving) {
    if (i >= 0) resid[i] += leaving;
  };
  auto S = [&](int i, double i_abs) {
    if (i >= 0) iscale[i] += std::abs(i_abs);
  };

  for (int n = 0; n < n_nodes_; ++n) {
    jac(n, n) += opts_.gmin_s;
    resid[n] += opts_.gmin_s * x[n];
  }

  for (const auto& r : resistors_) {
    double i = r.g * (vat(r.n1) - vat(r.n2));
    R(r.n1, i);
    R(r.n2, -i);
    J(r.n1, r.n1, r.g);
    J(r.n1, r.n2, -r.g);
    J(r.n2, r.n1, -r.g);
    J(r.n2, r.n2, r.g);
    S(r.n1, i);
    S(r.n2, i);
  }

  if (mode == Mode::Transient) {
    for (size_t k = 0; k < caps_.size(); ++k) {
      const auto& c = caps_[k];
      double geq = cap_geq[k];
      double i = geq * (vat(c.n1) - vat(c.n2)) - cap_ieq[k];
      R(c.n1, i);
      R(c.n2, -i);
      J(c.n1, c.n1, geq);
      J(c.n1, c.n2, -geq);
      J(c.n2, c.n1, -geq);
      J(c.n2, c.n2, geq);
      S(c.n1, i);
      S(c.n2, i);
    }
  }

  for (size_t k = 0; k < vsources_.size(); ++k) {
    const auto& s = vsources_[k];
    double ib = x[s.branch];  // current delivered into np
    R(s.np, -ib);
    R(s.nn, ib);
    J(s.np, s.branch, -1.0);
    J(s.nn, s.branch, 1.0);
    S(s.np, ib);
    S(s.nn, ib);
    double vset;
    if (source_override) {
      auto it = source_override->find(vsource_names_[k]);
      vset = it != source_override->end() ? it->second : eval_source(s.spec, t);
    } else {
      vset = eval_source(s.spec, t);
    }
    resid[s.branch] = vat(s.np) - vat(s.nn) - vset;
    J(s.branch, s.np, 1.0);
    J(s.branch, s.nn, -1.0);
    iscale[s.branch] = std::abs(vat(s.np)) + std::abs(vat(s.nn)) + std::abs(vset);
  }

  for (const auto& m : mosfets_) {
    double vd0 = vat(m.d), vs0 = vat(m.s);
    bool nmos = m.model->polarity == Polarity::Nmos;
    // Evaluate with drain/source swapped when the device is biased backwards
    // so the level-1 frame always sees a forward vds.
    bool swap = nmos ? (vd0 < vs0) : (vd0 > vs0);
    int nD = swap ? m.s : m.d;
    int nS = swap ? m.d : m.s;
    MosEval e = mos_eval(*m.model, m.w, m.l, vat(m.g) - vat(nS), vat(nD) - vat(nS));
    R(nD, e.id);
    R(nS, -e.id);
    double gsum = e.gm + e.gds;
    J(nD, m.g, e.gm);
    J(nD, nD, e.gds);
    J(nD, nS, -gsum);
    J(nS, m.g, -e.gm);
    J(nS, nD, -e.gds);
    J(nS, nS, gsum);
    S(nD, e.id);
    S(nS, e.id);
  }

  for (const auto& v : vccs_) {
    VccsEval e = vccs_eval(*v.table, vat(v.nin), vat(v.nout));
    // Table current is delivered by the driver into nout.
    R(v.nout, -e.i_a);
    J(v.nout, v.nin, -e.di_dvin);
    J(v.nout, v.nout, -e.di_dvout);
    S(v.nout, e.i_a);
  }
}

// ---------------------------------------------------------------------------
// Newton

int Simulator::newton(Eigen::VectorXd& x, Mode mode, double t,
                      const std::vector<double>& cap_geq,
                      const std::vector<double>& cap_ieq,
                      const std::map<std::string, double>* source_override) {
  const int n = n_unknowns_;
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd resid(n), iscale(n), delta(n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(n);
  double last_resid = 0;

  for (int iter = 1; iter <= opts_.max_newton_iters; ++iter) {
    assemble(x, mode, t, cap_geq, cap_ieq, source_override, jac, resid, iscale);

    bool resid_ok = true;
    last_resid = 0;
    for (int i = 0; i < n; ++i) {
      double tol = (i < n_nodes_)
                       ? opts_.iabstol_a + opts_.reltol * iscale[i]
                       : opts_.vabstol_v + opts_.reltol * iscale[i];
      if (std::abs(resid[i]) > tol) resid_ok = false;
      if (i < n_nodes_) last_resid = std::max(last_resid, std::abs(resid[i]));
    }

    lu.compute(jac);
    delta = lu.solve(-resid);
    if (!delta.allFinite()) throw SingularError("singular system matrix");

    bool dv_ok = true;
    for (int i = 0; i < n; ++i) {
      if (i < n_nodes_) delta[i] = std::clamp(delta[i], -opts_.vlimit_v, opts_.vlimit_v);
      double tol = (i < n_nodes_)
                       ? opts_.vabstol_v + opts_.reltol * std::abs(x[i])
                       : opts_.iabstol_a + opts_.reltol * std::abs(x[i]);
      if (std::abs(delta[i]) > tol) dv_ok = false;
    }
    x += delta;
    if (resid_ok && dv_ok) return iter;
  }
  std::ostringstream msg;
  msg << "newton failed to converge after " << opts_.max_newton_iters
      << " iterations at t=" << t;
  throw ConvergenceError(msg.str(), last_resid);
}

// ---------------------------------------------------------------------------
// DC

Simulator::DcResult Simulator::solve_dc(
    const std::map<std::string, double>& source_values) {
  std::map<std::string, double> lowered;
  for (const auto& [name, volts] : source_values) {
    std::string key = to_lower(name);
    if (std::find(vsource_names_.begin(), vsource_names_.end(), key) ==
        vsource_names_.end())
      throw Error("unknown source '" + name + "' in DC override");
    lowered[key] = volts;
  }
  DcResult r;
  r.x = Eigen::VectorXd::Zero(n_unknowns_);
  r.iterations = newton(r.x, Mode::Dc, 0.0, {}, {}, &lowered);
  for (int i = 0; i < n_nodes_; ++i) r.node_v[node_names_[i]] = r.x[i];
  for (size_t k = 0; k < vsource_names_.size(); ++k)
    r.source_i[vsource_names_[k]] = r.x[n_nodes_ + int(k)];
  return r;
}

// ---------------------------------------------------------------------------
// Transient

Simulator::TransientResult Simulator::run_transient() {
  opts_.validate();
  const double t_stop = opts_.t_stop_s;
  const double base = opts_.base_dt();

  TransientResult tr;
  tr.cap_names = cap_names_;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_unknowns_);
  newton(x, Mode::Dc, 0.0, {}, {}, nullptr);

  auto vb = [&](const CompiledC& c) {
    double v1 = c.n1 < 0 ? 0.0 : x[c.n1];
    double v2 = c.n2 < 0 ? 0.0 : x[c.n2];
    return v1 - v2;
  };

  std::vector<double> vcap(caps_.size()), icap(caps_.size(), 0.0);
  for (size_t k = 0; k < caps_.size(); ++k) vcap[k] = vb(caps_[k]);

  tr.t.push_back(0.0);
  tr.x.push_back(x);
  tr.scheme.push_back(0);
  tr.cap_i.push_back(icap);
  tr.cap_v.push_back(vcap);

  std::vector<double> geq(caps_.size()), ieq(caps_.size());
  double t = 0;
  int level = 0;  // current dt = base / 2^level
  bool force_be = true;
  const size_t step_cap = 2'000'000;

  while (t_stop - t > 1e-9 * t_stop) {
    double h = std::min(base / double(1 << level), t_stop - t);
    bool trap = !force_be;
    for (size_t k = 0; k < caps_.size(); ++k) {
      if (trap) {
        geq[k] = 2.0 * caps_[k].farads / h;
        ieq[k] = geq[k] * vcap[k] + icap[k];
      } else {
        geq[k] = caps_[k].farads / h;
        ieq[k] = geq[k] * vcap[k];
      }
    }
    Eigen::VectorXd xtry = x;
    try {
      newton(xtry, Mode::Transient, t + h, geq, ieq, nullptr);
    } catch (const ConvergenceError&) {
      ++level;
      if (level > opts_.max_step_halvings) throw;
      force_be = true;
      continue;
    }
    t += h;
    x = std::move(xtry);
    for (size_t k = 0; k < caps_.size(); ++k) {
      double vnew = vb(caps_[k]);
      icap[k] = geq[k] * vnew - ieq[k];
      vcap[k] = vnew;
    }
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.scheme.push_back(trap ? 1 : 0);
    tr.cap_i.push_back(icap);
    tr.cap_v.push_back(vcap);
    force_be = false;
    if (level > 0) --level;
    if (tr.t.size() > step_cap) throw Error("transient exceeded step budget");
  }
  return tr;
}

Waveform Simulator::waveform(const TransientResult& tr,
                             const std::string& node) const {
  int idx = node_index(node);
  Waveform w;
  w.t_s = tr.t;
  w.v.resize(tr.t.size());
  for (size_t k = 0; k < tr.t.size(); ++k)
    w.v[k] = idx < 0 ? 0.0 : tr.x[k][idx];
  return w;
}

// ---------------------------------------------------------------------------
// Wrappers

std::map<std::string, double> dc_operating_point(
    const Circuit& circuit, const std::map<std::string, double>& source_values) {
  Simulator sim(circuit, SimOptions{});
  return sim.solve_dc(source_values).node_v;
}

std::map<std::string, Waveform> transient(const Circuit& circuit,
                                          const SimOptions& opts,
                                          const std::set<std::string>& probes) {
  Simulator sim(circuit, opts);
  auto tr = sim.run_transient();
  std::map<std::string, Waveform> out;
  for (const auto& p : probes) out[to_lower(p)] = sim.waveform(tr, p);
  return out;
}

}  // namespace sna
