#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mgsim/dq.hpp"

namespace mgsim {

// Per-inverter constants: output LC filter, coupling inductor, cascaded
// controller gains, droop gains and nominal set-points.
//
// Defaults are the shared parameter set used by all DGs unless a scenario
// overrides them per unit.
struct DGParams {
    double r_f = 0.1;        // filter resistance [ohm]
    double L_f = 1.35e-3;    // filter inductance [H]
    double C_f = 50e-6;      // filter capacitance [F]
    double r_c = 0.03;       // coupling resistance [ohm]
    double L_c = 0.35e-3;    // coupling inductance [H]
    double omega_c = 31.41;  // power measurement low-pass cutoff [rad/s]
    double K_pv = 0.05;      // voltage loop proportional gain
    double K_iv = 390.0;     // voltage loop integral gain
    double K_pc = 10.5;      // current loop proportional gain
    double K_ic = 16e3;      // current loop integral gain
    double F = 0.75;         // output current feed-forward gain
    double m = 9.4e-5;       // frequency droop gain [rad/s per W]
    double n = 1.3e-3;       // voltage droop gain [V per var]
    double omega_n = 2.0 * M_PI * 60.0;  // nominal frequency set-point [rad/s]
    double V_n = 381.0;                  // nominal voltage set-point [V]

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw std::invalid_argument(std::string("DGParams.") + name + " must be > 0");
        };
        positive(r_f, "r_f");
        positive(L_f, "L_f");
        positive(C_f, "C_f");
        positive(r_c, "r_c");
        positive(L_c, "L_c");
        positive(omega_c, "omega_c");
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0)) throw std::invalid_argument(std::string("DGParams.") + name + " must be >= 0");
        };
        nonneg(m, "m");
        nonneg(n, "n");
        nonneg(K_pv, "K_pv");
        nonneg(K_iv, "K_iv");
        nonneg(K_pc, "K_pc");
        nonneg(K_ic, "K_ic");
        if (!(F >= 0.0 && F <= 1.0)) throw std::invalid_argument("DGParams.F must be in [0, 1]");
    }
};

// The 13 dynamic states of one inverter. Also used as the carrier for
// their time derivatives.
struct DGState {
    double delta = 0.0;    // local frame angle relative to the common frame [rad], unwrapped
    double P = 0.0;        // filtered active power [W]
    double Q = 0.0;        // filtered reactive power [var]
    double phi_d = 0.0;    // voltage loop integrator [V s]
    double phi_q = 0.0;
    double gamma_d = 0.0;  // current loop integrator [A s]
    double gamma_q = 0.0;
    double i_ld = 0.0;     // filter inductor current [A]
    double i_lq = 0.0;
    double v_od = 0.0;     // output capacitor voltage [V]
    double v_oq = 0.0;
    double i_od = 0.0;     // coupling inductor current [A]
    double i_oq = 0.0;

    static constexpr int kSize = 13;

    std::array<double, kSize> to_array() const {
        return {delta, P, Q, phi_d, phi_q, gamma_d, gamma_q, i_ld, i_lq, v_od, v_oq, i_od, i_oq};
    }
    static DGState from_array(const std::array<double, kSize>& a) {
        DGState s;
        s.delta = a[0];
        s.P = a[1];
        s.Q = a[2];
        s.phi_d = a[3];
        s.phi_q = a[4];
        s.gamma_d = a[5];
        s.gamma_q = a[6];
        s.i_ld = a[7];
        s.i_lq = a[8];
        s.v_od = a[9];
        s.v_oq = a[10];
        s.i_od = a[11];
        s.i_oq = a[12];
        return s;
    }
    static const char* field_name(int k) {
        static const char* names[kSize] = {"delta", "P",    "Q",    "phi_d", "phi_q", "gamma_d", "gamma_q",
                                           "i_ld",  "i_lq", "v_od", "v_oq",  "i_od",  "i_oq"};
        return names[k];
    }
};

using DGRates = DGState;

struct PowerPair {
    double p = 0.0;  // instantaneous active power [W]
    double q = 0.0;  // instantaneous reactive power [var]
};

inline PowerPair instantaneous_power(DqPair v_o, DqPair i_o) {
    return {v_o.d * i_o.d + v_o.q * i_o.q, v_o.d * i_o.q - v_o.q * i_o.d};
}

// First-order low-pass on the power measurement. The same form applies to
// active and reactive power.
inline double power_filter_rate(double inst, double filtered, double omega_c) {
    return omega_c * (inst - filtered);
}

struct DroopSetpoints {
    double omega = 0.0;  // frequency set-point [rad/s]
    DqPair v_star;       // voltage set-point [V], q component always 0
};

// dv_n is the secondary-control correction added to the nominal voltage
// set-point; zero while secondary control is inactive.
inline DroopSetpoints droop_setpoints(double P, double Q, double dv_n, const DGParams& p) {
    return {p.omega_n - p.m * P, {(p.V_n + dv_n) - p.n * Q, 0.0}};
}

inline double droop_frequency(const DGState& x, const DGParams& p) { return p.omega_n - p.m * x.P; }

struct DroopGains {
    double m = 0.0;
    double n = 0.0;
};

inline DroopGains droop_gains(double d_omega_max, double P_max, double dV_max, double Q_max) {
    if (!(P_max > 0.0)) throw std::invalid_argument("droop_gains: P_max must be > 0");
    if (!(Q_max > 0.0)) throw std::invalid_argument("droop_gains: Q_max must be > 0");
    return {d_omega_max / P_max, dV_max / Q_max};
}

struct VoltageLoopOut {
    DqPair i_l_star;  // filter current reference [A]
    DqPair dphi_dt;   // voltage integrator rates [V]
};

inline VoltageLoopOut voltage_controller(DqPair v_star, DqPair v_o, DqPair i_o, DqPair phi, const DGParams& p) {
    VoltageLoopOut out;
    out.dphi_dt = v_star - v_o;
    out.i_l_star.d = p.F * i_o.d + p.omega_n * p.C_f * v_o.q + p.K_pv * (v_star.d - v_o.d) + p.K_iv * phi.d;
    out.i_l_star.q = p.F * i_o.q - p.omega_n * p.C_f * v_o.d + p.K_pv * (v_star.q - v_o.q) + p.K_iv * phi.q;
    return out;
}

struct CurrentLoopOut {
    DqPair v_i_star;   // inverter bridge voltage reference [V]
    DqPair dgamma_dt;  // current integrator rates [A]
};

inline CurrentLoopOut current_controller(DqPair i_l_star, DqPair i_l, DqPair gamma, const DGParams& p) {
    CurrentLoopOut out;
    out.dgamma_dt = i_l_star - i_l;
    out.v_i_star.d = p.omega_n * p.L_f * i_l.q + p.K_pc * (i_l_star.d - i_l.d) + p.K_ic * gamma.d;
    out.v_i_star.q = -p.omega_n * p.L_f * i_l.d + p.K_pc * (i_l_star.q - i_l.q) + p.K_ic * gamma.q;
    return out;
}

struct LclRates {
    DqPair di_l;  // [A/s]
    DqPair dv_o;  // [V/s]
    DqPair di_o;  // [A/s]
};

// State equations of the output LC filter and coupling inductor. v_b is the
// bus voltage expressed in this DG's local frame.
inline LclRates lcl_rates(const DGState& x, DqPair v_i, DqPair v_b, double omega, const DGParams& p) {
    LclRates r;
    r.di_l.d = (-p.r_f * x.i_ld + v_i.d - x.v_od) / p.L_f - omega * x.i_lq;
    r.di_l.q = (-p.r_f * x.i_lq + v_i.q - x.v_oq) / p.L_f + omega * x.i_ld;
    r.dv_o.d = (x.i_ld - x.i_od) / p.C_f - omega * x.v_oq;
    r.dv_o.q = (x.i_lq - x.i_oq) / p.C_f + omega * x.v_od;
    r.di_o.d = (-p.r_c * x.i_od + x.v_od - v_b.d) / p.L_c - omega * x.i_oq;
    r.di_o.q = (-p.r_c * x.i_oq + x.v_oq - v_b.q) / p.L_c + omega * x.i_od;
    return r;
}

// Full rate vector of one DG. v_b_common is its bus voltage in the common
// frame; omega_com the frequency of the common-frame DG. The inverter bridge
// is ideal: v_i equals the current controller's reference.
inline DGRates dg_rates(const DGState& x, DqPair v_b_common, double dv_n, double omega_com, const DGParams& p) {
    const DqPair v_o{x.v_od, x.v_oq};
    const DqPair i_o{x.i_od, x.i_oq};
    const DqPair i_l{x.i_ld, x.i_lq};

    const DroopSetpoints sp = droop_setpoints(x.P, x.Q, dv_n, p);
    const VoltageLoopOut vl = voltage_controller(sp.v_star, v_o, i_o, {x.phi_d, x.phi_q}, p);
    const CurrentLoopOut cl = current_controller(vl.i_l_star, i_l, {x.gamma_d, x.gamma_q}, p);
    const DqPair v_b = frame_to_local(v_b_common, x.delta);
    const LclRates f = lcl_rates(x, cl.v_i_star, v_b, sp.omega, p);
    const PowerPair s = instantaneous_power(v_o, i_o);

    DGRates r{};
    r.delta = omega_com - sp.omega;
    r.P = power_filter_rate(s.p, x.P, p.omega_c);
    r.Q = power_filter_rate(s.q, x.Q, p.omega_c);
    r.phi_d = vl.dphi_dt.d;
    r.phi_q = vl.dphi_dt.q;
    r.gamma_d = cl.dgamma_dt.d;
    r.gamma_q = cl.dgamma_dt.q;
    r.i_ld = f.di_l.d;
    r.i_lq = f.di_l.q;
    r.v_od = f.dv_o.d;
    r.v_oq = f.dv_o.q;
    r.i_od = f.di_o.d;
    r.i_oq = f.di_o.q;
    return r;
}

}  // namespace mgsim
