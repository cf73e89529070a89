#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgsim/comm_graph.hpp"
#include "mgsim/dg.hpp"
#include "mgsim/dq.hpp"
#include "mgsim/network.hpp"
#include "mgsim/secondary.hpp"

namespace mgsim {

// Full experiment description. Defaults are filled by scenario_io; the
// engine only validates and runs.
struct Scenario {
    std::vector<DGParams> dg_params;
    NetworkModel network;
    CommGraph graph;
    SecondaryConfig secondary;
    std::vector<LoadEvent> events;
    double t_end = 1.5;
    double dt = 2e-5;
    int common_frame_dg = 0;
    int log_decimation = 10;

    int n_dg() const { return static_cast<int>(dg_params.size()); }

    void validate() const {
        if (dg_params.empty()) throw std::invalid_argument("scenario: needs at least one DG");
        for (const auto& p : dg_params) p.validate();
        network.validate();
        if (static_cast<int>(network.dg_bus.size()) != n_dg())
            throw std::invalid_argument("scenario: every DG needs a bus attachment");
        graph.validate();
        if (graph.n != n_dg()) throw std::invalid_argument("scenario: graph agent count does not match DG count");
        secondary.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("scenario: sim.dt must be > 0");
        if (!(t_end > 0.0)) throw std::invalid_argument("scenario: sim.t_end must be > 0");
        if (common_frame_dg < 0 || common_frame_dg >= n_dg())
            throw std::invalid_argument("scenario: common_frame_dg out of range");
        if (log_decimation < 1) throw std::invalid_argument("scenario: sim.decimation must be >= 1");
        for (size_t k = 0; k + 1 < events.size(); ++k)
            if (events[k + 1].t < events[k].t) throw std::invalid_argument("scenario: events must be sorted by time");
        for (const auto& e : events) network.load_by_id(e.load_id);
    }
};

struct TimeSeriesLog {
    std::vector<double> t;
    // per-DG channels, indexed [dg][sample]
    std::vector<std::vector<double>> v_od, v_oq, P, Q, omega, dv_n;
    std::vector<std::vector<double>> bus_vmag;  // [bus][sample]
    std::vector<std::int64_t> msg_count;
    std::vector<std::string> bus_names;
    std::vector<std::string> warnings;
    double t_activate = std::numeric_limits<double>::infinity();
    double v_ref = std::numeric_limits<double>::quiet_NaN();

    int n_dg() const { return static_cast<int>(v_od.size()); }
    int n_samples() const { return static_cast<int>(t.size()); }
};

// Channel lookup by the same names used in the CSV header, e.g. "dg3_vod".
inline const std::vector<double>& log_channel(const TimeSeriesLog& log, const std::string& name) {
    for (int k = 0; k < log.n_dg(); ++k) {
        const std::string tag = "dg" + std::to_string(k + 1) + "_";
        if (name == tag + "vod") return log.v_od[k];
        if (name == tag + "voq") return log.v_oq[k];
        if (name == tag + "P") return log.P[k];
        if (name == tag + "Q") return log.Q[k];
        if (name == tag + "omega") return log.omega[k];
        if (name == tag + "dvn") return log.dv_n[k];
    }
    throw std::invalid_argument("log: unknown channel '" + name + "'");
}

struct RunMetrics {
    std::vector<double> settling_time;  // seconds after activation; NaN when not settled
    std::vector<bool> settled;
    std::vector<double> final_error;  // |v_od - v_ref| at t_end [V]
    std::int64_t total_messages = 0;
    double peak_deviation = 0.0;  // max |v_od - v_ref| over the whole horizon [V]
    double t_activate = std::numeric_limits<double>::infinity();
    double v_ref = std::numeric_limits<double>::quiet_NaN();
    double t_end = 0.0;
};

struct RunResult {
    TimeSeriesLog log;
    RunMetrics metrics;
};

// Classical fixed-step 4th order Runge-Kutta. f(t, x) -> dx/dt.
template <class F>
Eigen::VectorXd rk4_step(F&& f, const Eigen::VectorXd& x, double t, double dt) {
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + 0.5 * dt, (x + (0.5 * dt) * k1).eval());
    const Eigen::VectorXd k3 = f(t + 0.5 * dt, (x + (0.5 * dt) * k2).eval());
    const Eigen::VectorXd k4 = f(t + dt, (x + dt * k3).eval());
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// DG states plus the secondary corrections, flattened for integration:
// [dg0 (13) | dg1 (13) | ... | dv_n (one per agent)].
class CoupledSystem {
  public:
    CoupledSystem(std::vector<DGParams> params, NetworkModel net, int common_frame_dg)
        : params_(std::move(params)), common_dg_(common_frame_dg) {
        set_network(std::move(net));
    }

    int n_dg() const { return static_cast<int>(params_.size()); }
    int state_size() const { return DGState::kSize * n_dg() + n_dg(); }
    const NetworkModel& network() const { return net_; }
    const std::vector<DGParams>& params() const { return params_; }
    int common_frame_dg() const { return common_dg_; }

    void set_network(NetworkModel net) {
        net.validate();
        net_ = std::move(net);
        dg_bus_idx_.clear();
        for (const auto& b : net_.dg_bus) dg_bus_idx_.push_back(net_.bus_index(b));
        solver_.emplace(build_admittance(net_, params_[common_dg_].omega_n));
    }

    DGState dg_state(const Eigen::VectorXd& x, int k) const {
        std::array<double, DGState::kSize> a;
        for (int f = 0; f < DGState::kSize; ++f) a[f] = x[DGState::kSize * k + f];
        return DGState::from_array(a);
    }

    void set_dg_state(Eigen::VectorXd& x, int k, const DGState& s) const {
        const auto a = s.to_array();
        for (int f = 0; f < DGState::kSize; ++f) x[DGState::kSize * k + f] = a[f];
    }

    double dv_n(const Eigen::VectorXd& x, int k) const { return x[DGState::kSize * n_dg() + k]; }

    std::vector<double> output_voltages(const Eigen::VectorXd& x) const {
        std::vector<double> v(n_dg());
        for (int k = 0; k < n_dg(); ++k) v[k] = x[DGState::kSize * k + 9];
        return v;
    }

    // Bus voltages in the common frame for the given system state.
    std::vector<DqPair> bus_voltages(const Eigen::VectorXd& x) const {
        std::vector<DqPair> inj(net_.buses.size(), DqPair{});
        for (int k = 0; k < n_dg(); ++k) {
            const DGState s = dg_state(x, k);
            const DqPair i_common = frame_to_common({s.i_od, s.i_oq}, s.delta);
            inj[dg_bus_idx_[k]] = inj[dg_bus_idx_[k]] + i_common;
        }
        return solver_->solve(inj);
    }

    // Composed rate function. Held neighbor samples stay constant inside an
    // integration step; dv_n integrates at zero rate until activation.
    Eigen::VectorXd rates(const Eigen::VectorXd& x, const SecondaryState& sec, const CommGraph& g,
                          const SecondaryConfig& cfg) const {
        const std::vector<DqPair> v_bus = bus_voltages(x);
        const DGState common = dg_state(x, common_dg_);
        const double omega_com = droop_frequency(common, params_[common_dg_]);

        Eigen::VectorXd dx(state_size());
        for (int k = 0; k < n_dg(); ++k) {
            const DGState s = dg_state(x, k);
            const DGRates r = dg_rates(s, v_bus[dg_bus_idx_[k]], dv_n(x, k), omega_com, params_[k]);
            const auto a = r.to_array();
            for (int f = 0; f < DGState::kSize; ++f) dx[DGState::kSize * k + f] = a[f];
        }
        const int off = DGState::kSize * n_dg();
        for (int k = 0; k < n_dg(); ++k)
            dx[off + k] = sec.active ? consensus_rate(k, sec.held_v, g, cfg) : 0.0;
        return dx;
    }

  private:
    std::vector<DGParams> params_;
    int common_dg_ = 0;
    NetworkModel net_;
    std::vector<int> dg_bus_idx_;
    std::optional<BusVoltageSolver> solver_;
};

namespace detail {

// Per-field scales used for finite-difference steps in the Newton solve.
inline double state_scale(int field) {
    static constexpr double scales[DGState::kSize] = {0.1,  1e3, 1e3, 1e-2, 1e-2, 1e-2, 1e-2,
                                                      10.0, 10.0, 100.0, 100.0, 10.0, 10.0};
    return scales[field];
}

// Warm start: hold every DG at (V_n, 0) in the common frame, solve the
// network through the coupling impedances, then back-fill integrator and
// filter states from the steady-state relations.
inline Eigen::VectorXd equilibrium_seed(const CoupledSystem& sys) {
    const auto& net = sys.network();
    const auto& params = sys.params();
    const int nb = static_cast<int>(net.buses.size());
    const double omega = params[sys.common_frame_dg()].omega_n;

    Eigen::MatrixXcd Y = build_admittance(net, omega);
    Eigen::VectorXcd I = Eigen::VectorXcd::Zero(nb);
    for (int k = 0; k < sys.n_dg(); ++k) {
        const int b = net.bus_index(net.dg_bus[k]);
        const std::complex<double> zc(params[k].r_c, -omega * params[k].L_c);
        Y(b, b) += 1.0 / zc;
        I(b) += params[k].V_n / zc;
    }
    const Eigen::VectorXcd Vb = Y.partialPivLu().solve(I);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.state_size());
    for (int k = 0; k < sys.n_dg(); ++k) {
        const auto& p = params[k];
        const int b = net.bus_index(net.dg_bus[k]);
        const std::complex<double> zc(p.r_c, -omega * p.L_c);
        const std::complex<double> io = (std::complex<double>(p.V_n, 0.0) - Vb(b)) / zc;

        DGState s;
        s.delta = 0.0;
        s.v_od = p.V_n;
        s.v_oq = 0.0;
        s.i_od = io.real();
        s.i_oq = io.imag();
        s.i_ld = s.i_od + omega * p.C_f * s.v_oq;
        s.i_lq = s.i_oq - omega * p.C_f * s.v_od;
        const PowerPair pw = instantaneous_power({s.v_od, s.v_oq}, {s.i_od, s.i_oq});
        s.P = pw.p;
        s.Q = pw.q;
        if (p.K_iv > 0.0) {
            s.phi_d = (s.i_ld - p.F * s.i_od - p.omega_n * p.C_f * s.v_oq) / p.K_iv;
            s.phi_q = (s.i_lq - p.F * s.i_oq + p.omega_n * p.C_f * s.v_od) / p.K_iv;
        }
        const double v_id = s.v_od + p.r_f * s.i_ld + omega * p.L_f * s.i_lq;
        const double v_iq = s.v_oq + p.r_f * s.i_lq - omega * p.L_f * s.i_ld;
        if (p.K_ic > 0.0) {
            s.gamma_d = (v_id - p.omega_n * p.L_f * s.i_lq) / p.K_ic;
            s.gamma_q = (v_iq + p.omega_n * p.L_f * s.i_ld) / p.K_ic;
        }
        sys.set_dg_state(x, k, s);
    }
    return x;
}

}  // namespace detail

// Droop operating point with secondary control at zero: solves the coupled
// rate function for a root by damped Newton iteration. The common-frame DG's
// angle equation (identically zero) is replaced by the constraint delta = 0.
inline Eigen::VectorXd find_equilibrium(const CoupledSystem& sys, const CommGraph& g, const SecondaryConfig& cfg,
                                        double tol = 1e-9, int max_iter = 60) {
    const int n = sys.n_dg();
    const int nx = DGState::kSize * n;  // dv_n block stays zero and is excluded
    const int slack_row = DGState::kSize * sys.common_frame_dg();
    SecondaryState sec(n);  // inactive

    auto residual = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.state_size());
        full.head(nx) = y;
        Eigen::VectorXd r = sys.rates(full, sec, g, cfg).head(nx);
        r[slack_row] = y[slack_row];
        return r;
    };

    Eigen::VectorXd y = detail::equilibrium_seed(sys).head(nx);
    Eigen::VectorXd r = residual(y);

    for (int iter = 0; iter < max_iter; ++iter) {
        if (r.lpNorm<Eigen::Infinity>() < tol) return [&] {
                Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.state_size());
                full.head(nx) = y;
                return full;
            }();

        Eigen::MatrixXd J(nx, nx);
        for (int c = 0; c < nx; ++c) {
            const double h = 1e-7 * std::max(std::abs(y[c]), detail::state_scale(c % DGState::kSize));
            Eigen::VectorXd yp = y, ym = y;
            yp[c] += h;
            ym[c] -= h;
            J.col(c) = (residual(yp) - residual(ym)) / (2.0 * h);
        }
        const Eigen::VectorXd step = J.partialPivLu().solve(-r);
        if (!step.allFinite())
            throw std::runtime_error("find_equilibrium: singular Jacobian (residual " + std::to_string(r.norm()) + ")");

        double lambda = 1.0;
        const double r0 = r.norm();
        bool accepted = false;
        for (int bt = 0; bt < 12; ++bt) {
            Eigen::VectorXd y_new = y + lambda * step;
            Eigen::VectorXd r_new = residual(y_new);
            if (r_new.allFinite() && (r_new.norm() < r0 || r_new.lpNorm<Eigen::Infinity>() < tol)) {
                y = std::move(y_new);
                r = std::move(r_new);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted)
            throw std::runtime_error("find_equilibrium: line search stalled (residual " + std::to_string(r0) + ")");
    }
    if (r.lpNorm<Eigen::Infinity>() < tol) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(sys.state_size());
        full.head(nx) = y;
        return full;
    }
    std::ostringstream msg;
    msg << "find_equilibrium: no convergence after " << max_iter << " iterations (residual inf-norm "
        << r.lpNorm<Eigen::Infinity>() << ")";
    throw std::runtime_error(msg.str());
}

inline Eigen::VectorXd find_equilibrium(const Scenario& scn) {
    scn.validate();
    CoupledSystem sys(scn.dg_params, scn.network, scn.common_frame_dg);
    return find_equilibrium(sys, scn.graph, scn.secondary);
}

// Earliest logged time at or after activation from which the channel stays
// inside target +- band through the end of the log. nullopt when it never
// does.
inline std::optional<double> settling_time(const TimeSeriesLog& log, const std::string& channel, double target,
                                           double band) {
    if (!(band > 0.0)) throw std::invalid_argument("settling_time: band must be > 0");
    const auto& series = log_channel(log, channel);
    const int ns = log.n_samples();
    int first = 0;
    while (first < ns && log.t[first] < log.t_activate) ++first;
    if (first >= ns) return std::nullopt;
    int settle = ns;  // first index from which everything stays in band
    for (int k = ns - 1; k >= first; --k) {
        if (std::abs(series[k] - target) > band) break;
        settle = k;
    }
    if (settle == ns) return std::nullopt;
    if (settle < first) settle = first;
    return log.t[settle];
}

namespace detail {

inline RunMetrics compute_metrics(const TimeSeriesLog& log) {
    const int n = log.n_dg();
    RunMetrics m;
    m.t_activate = log.t_activate;
    m.v_ref = log.v_ref;
    m.t_end = log.t.empty() ? 0.0 : log.t.back();
    m.total_messages = log.msg_count.empty() ? 0 : log.msg_count.back();
    m.settling_time.assign(n, std::numeric_limits<double>::quiet_NaN());
    m.settled.assign(n, false);
    m.final_error.assign(n, std::numeric_limits<double>::quiet_NaN());
    if (log.n_samples() == 0) return m;

    for (int k = 0; k < n; ++k) {
        m.final_error[k] = std::abs(log.v_od[k].back() - log.v_ref);
        for (double v : log.v_od[k]) m.peak_deviation = std::max(m.peak_deviation, std::abs(v - log.v_ref));
    }
    if (!std::isfinite(log.t_activate) || log.t_activate > m.t_end) return m;

    int act = 0;
    while (act < log.n_samples() && log.t[act] < log.t_activate) ++act;
    // one band per run: 2% of the largest deviation at the activation instant
    double dev0 = 0.0;
    for (int k = 0; k < n; ++k) dev0 = std::max(dev0, std::abs(log.v_od[k][act] - log.v_ref));
    const double band = std::max(0.02 * dev0, 1e-3);
    for (int k = 0; k < n; ++k) {
        const auto ts = settling_time(log, "dg" + std::to_string(k + 1) + "_vod", log.v_ref, band);
        if (ts) {
            m.settled[k] = true;
            m.settling_time[k] = *ts - log.t_activate;
        }
    }
    return m;
}

}  // namespace detail

// Integrates the coupled system over [0, t_end] from the droop equilibrium,
// applying load events and the sampled secondary exchange on the step grid.
inline RunResult run_scenario(const Scenario& scn) {
    scn.validate();
    CoupledSystem sys(scn.dg_params, scn.network, scn.common_frame_dg);
    const int n = sys.n_dg();

    RunResult out;
    TimeSeriesLog& log = out.log;
    log.bus_names = scn.network.buses;
    log.v_ref = scn.secondary.v_ref;
    log.t_activate = scn.secondary.t_activate;

    const auto steps = static_cast<std::int64_t>(std::llround(scn.t_end / scn.dt));
    if (steps < 1) throw std::invalid_argument("scenario: t_end shorter than one step");

    // events snap to the step grid
    std::vector<std::pair<std::int64_t, LoadEvent>> timed;
    for (const auto& e : scn.events) {
        const auto k = static_cast<std::int64_t>(std::llround(e.t / scn.dt));
        if (std::abs(k * scn.dt - e.t) > 1e-12)
            log.warnings.push_back("event at t=" + std::to_string(e.t) + " snapped to step grid t=" +
                                   std::to_string(k * scn.dt));
        if (k > steps) {
            log.warnings.push_back("event at t=" + std::to_string(e.t) + " is past t_end; ignored");
            continue;
        }
        timed.emplace_back(k, e);
    }

    Eigen::VectorXd x = find_equilibrium(sys, scn.graph, scn.secondary);
    SecondaryState sec(n);

    log.v_od.assign(n, {});
    log.v_oq.assign(n, {});
    log.P.assign(n, {});
    log.Q.assign(n, {});
    log.omega.assign(n, {});
    log.dv_n.assign(n, {});
    log.bus_vmag.assign(scn.network.buses.size(), {});

    auto log_sample = [&](double t) {
        log.t.push_back(t);
        for (int k = 0; k < n; ++k) {
            const DGState s = sys.dg_state(x, k);
            log.v_od[k].push_back(s.v_od);
            log.v_oq[k].push_back(s.v_oq);
            log.P[k].push_back(s.P);
            log.Q[k].push_back(s.Q);
            log.omega[k].push_back(droop_frequency(s, scn.dg_params[k]));
            log.dv_n[k].push_back(sys.dv_n(x, k));
        }
        const auto vb = sys.bus_voltages(x);
        for (size_t b = 0; b < vb.size(); ++b) log.bus_vmag[b].push_back(norm(vb[b]));
        log.msg_count.push_back(sec.msg_count);
    };

    auto check_finite = [&](double t) {
        for (int k = 0; k < n; ++k)
            for (int f = 0; f < DGState::kSize; ++f)
                if (!std::isfinite(x[DGState::kSize * k + f])) {
                    std::ostringstream msg;
                    msg << "simulation aborted at t=" << t << ": channel dg" << (k + 1) << "."
                        << DGState::field_name(f) << " is not finite";
                    throw std::runtime_error(msg.str());
                }
        for (int k = 0; k < n; ++k)
            if (!std::isfinite(sys.dv_n(x, k))) {
                std::ostringstream msg;
                msg << "simulation aborted at t=" << t << ": channel dg" << (k + 1) << ".dv_n is not finite";
                throw std::runtime_error(msg.str());
            }
    };

    log_sample(0.0);
    size_t next_event = 0;
    for (std::int64_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * scn.dt;
        while (next_event < timed.size() && timed[next_event].first == i) {
            sys.set_network(apply_event(sys.network(), timed[next_event].second));
            ++next_event;
        }
        sec = sample_and_hold(t, sys.output_voltages(x), scn.graph, scn.secondary, sec);
        x = rk4_step([&](double, const Eigen::VectorXd& xx) { return sys.rates(xx, sec, scn.graph, scn.secondary); },
                     x, t, scn.dt);
        check_finite(t + scn.dt);
        if ((i + 1) % scn.log_decimation == 0) log_sample(static_cast<double>(i + 1) * scn.dt);
    }

    out.metrics = detail::compute_metrics(log);
    return out;
}

struct ComparisonReport {
    bool conclusive = false;
    double settling_ratio = std::numeric_limits<double>::quiet_NaN();  // other / base, on the slowest DG
    double message_ratio = std::numeric_limits<double>::quiet_NaN();   // other / base
    std::vector<double> final_error_base;
    std::vector<double> final_error_other;
};

// Compares two runs of the same plant under different communication
// topologies; base is the reference (zonal) run.
inline ComparisonReport compare_runs(const RunMetrics& base, const RunMetrics& other) {
    ComparisonReport rep;
    rep.final_error_base = base.final_error;
    rep.final_error_other = other.final_error;
    const bool all_settled = !base.settled.empty() && !other.settled.empty() &&
                             std::all_of(base.settled.begin(), base.settled.end(), [](bool b) { return b; }) &&
                             std::all_of(other.settled.begin(), other.settled.end(), [](bool b) { return b; });
    if (base.total_messages > 0)
        rep.message_ratio = static_cast<double>(other.total_messages) / static_cast<double>(base.total_messages);
    if (!all_settled) return rep;  // inconclusive
    const double base_max = *std::max_element(base.settling_time.begin(), base.settling_time.end());
    const double other_max = *std::max_element(other.settling_time.begin(), other.settling_time.end());
    if (base_max > 0.0) {
        rep.settling_ratio = other_max / base_max;
        rep.conclusive = true;
    } else if (other_max == 0.0) {
        rep.settling_ratio = 1.0;  // both settled instantly
        rep.conclusive = true;
    }
    return rep;
}

}  // namespace mgsim
