#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mgsim/dg.hpp"

using namespace mgsim;
using Catch::Approx;

namespace {

// scalar RK4, local to the tests
template <class F>
double rk4_scalar(F f, double x, double t, double dt) {
    const double k1 = f(t, x);
    const double k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const double k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const double k4 = f(t + dt, x + dt * k3);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::Matrix<double, 6, 1> lcl_rates_vec(const DGParams& p, DqPair v_i, DqPair v_b, double omega,
                                          const Eigen::Matrix<double, 6, 1>& z) {
    DGState x;
    x.i_ld = z[0];
    x.i_lq = z[1];
    x.v_od = z[2];
    x.v_oq = z[3];
    x.i_od = z[4];
    x.i_oq = z[5];
    const LclRates r = lcl_rates(x, v_i, v_b, omega, p);
    Eigen::Matrix<double, 6, 1> rv;
    rv << r.di_l.d, r.di_l.q, r.dv_o.d, r.dv_o.q, r.di_o.d, r.di_o.q;
    return rv;
}

}  // namespace

TEST_CASE("instantaneous power from dq components") {
    PowerPair s = instantaneous_power({381.0, 0.0}, {10.0, 0.0});
    CHECK(s.p == Approx(3810.0));
    CHECK(s.q == Approx(0.0).margin(1e-12));

    s = instantaneous_power({1.0, 1.0}, {1.0, 1.0});
    CHECK(s.p == Approx(2.0));
    CHECK(s.q == Approx(0.0).margin(1e-12));

    s = instantaneous_power({3.0, 4.0}, {4.0, 3.0});
    CHECK(s.p == Approx(24.0));
    CHECK(s.q == Approx(-7.0));
}

TEST_CASE("power filter rate") {
    CHECK(power_filter_rate(500.0, 500.0, 31.41) == 0.0);
    CHECK(power_filter_rate(100.0, 0.0, 31.41) == Approx(3141.0));
}

TEST_CASE("power filter step response is first order") {
    const double wc = 31.41;
    const double step = 100.0;
    const double dt = 1e-5;
    double p = 0.0;
    double t = 0.0;
    auto f = [&](double, double x) { return power_filter_rate(step, x, wc); };
    const double t_end = 5.0 / wc;
    while (t < t_end - 0.5 * dt) {
        p = rk4_scalar(f, p, t, dt);
        t += dt;
    }
    CHECK(p == Approx(step * (1.0 - std::exp(-wc * t))).epsilon(1e-9));
    // within 1% of the final value after five time constants
    CHECK(std::abs(p - step) < 0.01 * step);

    // DC gain is one: hold much longer and the output pins to the input
    while (t < 20.0 / wc) {
        p = rk4_scalar(f, p, t, dt);
        t += dt;
    }
    CHECK(std::abs(p - step) < 1e-6 * step);
}

TEST_CASE("droop setpoints") {
    DGParams p;

    DroopSetpoints sp = droop_setpoints(0.0, 0.0, 0.0, p);
    CHECK(sp.omega == Approx(2.0 * M_PI * 60.0));
    CHECK(sp.v_star.d == Approx(381.0));
    CHECK(sp.v_star.q == 0.0);

    sp = droop_setpoints(10000.0, 0.0, 0.0, p);
    CHECK(sp.omega == Approx(2.0 * M_PI * 60.0 - 0.94).epsilon(1e-12));
    CHECK(sp.omega == Approx(376.0512).margin(1e-3));

    sp = droop_setpoints(0.0, 5000.0, 0.0, p);
    CHECK(sp.v_star.d == Approx(374.5));

    // the secondary correction shifts the voltage set-point one for one
    sp = droop_setpoints(0.0, 5000.0, 2.5, p);
    CHECK(sp.v_star.d == Approx(377.0));

    DGState x;
    x.P = 10000.0;
    CHECK(droop_frequency(x, p) == Approx(2.0 * M_PI * 60.0 - 0.94).epsilon(1e-12));
}

TEST_CASE("droop setpoints are affine in the load") {
    DGParams p;
    const DroopSetpoints a = droop_setpoints(3000.0, 700.0, 0.0, p);
    const DroopSetpoints b = droop_setpoints(6000.0, 1400.0, 0.0, p);
    CHECK(p.omega_n - b.omega == Approx(2.0 * (p.omega_n - a.omega)).epsilon(1e-12));
    CHECK(p.V_n - b.v_star.d == Approx(2.0 * (p.V_n - a.v_star.d)).epsilon(1e-12));
}

TEST_CASE("droop gain sizing") {
    const DroopGains g = droop_gains(0.94, 10000.0, 5.0, 2000.0);
    CHECK(g.m == Approx(9.4e-5));
    CHECK(g.n == Approx(2.5e-3));
    CHECK(droop_gains(0.94, 10000.0, 0.0, 2000.0).n == 0.0);
    CHECK_THROWS_AS(droop_gains(0.94, 0.0, 5.0, 2000.0), std::invalid_argument);
    CHECK_THROWS_AS(droop_gains(0.94, 10000.0, 5.0, 0.0), std::invalid_argument);
}

TEST_CASE("voltage controller") {
    DGParams p;

    SECTION("all terms vanish at the origin") {
        const VoltageLoopOut out = voltage_controller({0, 0}, {0, 0}, {0, 0}, {0, 0}, p);
        CHECK(out.i_l_star.d == 0.0);
        CHECK(out.i_l_star.q == 0.0);
        CHECK(out.dphi_dt.d == 0.0);
        CHECK(out.dphi_dt.q == 0.0);
    }
    SECTION("output current feed-forward") {
        const VoltageLoopOut out = voltage_controller({0, 0}, {0, 0}, {10.0, 0.0}, {0, 0}, p);
        CHECK(out.i_l_star.d == Approx(7.5));
    }
    SECTION("proportional path") {
        const VoltageLoopOut out = voltage_controller({2.0, 0.0}, {0, 0}, {0, 0}, {0, 0}, p);
        CHECK(out.i_l_star.d == Approx(0.1));
        CHECK(out.dphi_dt.d == Approx(2.0));
        CHECK(out.dphi_dt.q == 0.0);
    }
    SECTION("integral path") {
        const VoltageLoopOut out = voltage_controller({0, 0}, {0, 0}, {0, 0}, {1e-3, 0.0}, p);
        CHECK(out.i_l_star.d == Approx(p.K_iv * 1e-3));
    }
}

TEST_CASE("current controller") {
    DGParams p;

    SECTION("all terms vanish at the origin") {
        const CurrentLoopOut out = current_controller({0, 0}, {0, 0}, {0, 0}, p);
        CHECK(out.v_i_star.d == 0.0);
        CHECK(out.v_i_star.q == 0.0);
    }
    SECTION("proportional path") {
        const CurrentLoopOut out = current_controller({1.0, 0.0}, {0, 0}, {0, 0}, p);
        CHECK(out.v_i_star.d == Approx(10.5));
        CHECK(out.dgamma_dt.d == Approx(1.0));
    }
    SECTION("integral path") {
        const CurrentLoopOut out = current_controller({0, 0}, {0, 0}, {1e-3, 0.0}, p);
        CHECK(out.v_i_star.d == Approx(16.0));
    }
}

TEST_CASE("filter and coupling rates") {
    DGParams p;

    SECTION("origin is the unforced equilibrium") {
        DGState x;
        const LclRates r = lcl_rates(x, {0, 0}, {0, 0}, 0.0, p);
        CHECK(r.di_l.d == 0.0);
        CHECK(r.di_l.q == 0.0);
        CHECK(r.dv_o.d == 0.0);
        CHECK(r.dv_o.q == 0.0);
        CHECK(r.di_o.d == 0.0);
        CHECK(r.di_o.q == 0.0);
    }
    SECTION("resistive decay of the inductor current") {
        DGState x;
        x.i_ld = 1.0;
        const LclRates r = lcl_rates(x, {0, 0}, {0, 0}, 0.0, p);
        CHECK(r.di_l.d == Approx(-0.1 / 1.35e-3).epsilon(1e-12));
        CHECK(r.di_l.d == Approx(-74.074).margin(1e-2));
    }
    SECTION("steady state found by a linear solve has vanishing rates") {
        // for fixed (v_i, v_b, omega) the subsystem is linear: rates = A z + b
        const DqPair v_i{390.0, 4.0};
        const DqPair v_b{370.0, -6.0};
        const double w = 377.0;
        Eigen::Matrix<double, 6, 6> A;
        for (int j = 0; j < 6; ++j) {
            Eigen::Matrix<double, 6, 1> ej = Eigen::Matrix<double, 6, 1>::Zero();
            ej[j] = 1.0;
            A.col(j) = lcl_rates_vec(p, {0, 0}, {0, 0}, w, ej);
        }
        const Eigen::Matrix<double, 6, 1> b =
            lcl_rates_vec(p, v_i, v_b, w, Eigen::Matrix<double, 6, 1>::Zero());
        const Eigen::Matrix<double, 6, 1> z = A.fullPivLu().solve(-b);
        CHECK(lcl_rates_vec(p, v_i, v_b, w, z).cwiseAbs().maxCoeff() < 1e-9);
    }
    SECTION("rates agree with the assembled linear map everywhere") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        const DqPair v_i{u(rng), u(rng)};
        const DqPair v_b{u(rng), u(rng)};
        const double w = 377.0;
        Eigen::Matrix<double, 6, 6> A;
        for (int j = 0; j < 6; ++j) {
            Eigen::Matrix<double, 6, 1> ej = Eigen::Matrix<double, 6, 1>::Zero();
            ej[j] = 1.0;
            A.col(j) = lcl_rates_vec(p, {0, 0}, {0, 0}, w, ej);
        }
        const Eigen::Matrix<double, 6, 1> b =
            lcl_rates_vec(p, v_i, v_b, w, Eigen::Matrix<double, 6, 1>::Zero());
        for (int it = 0; it < 50; ++it) {
            Eigen::Matrix<double, 6, 1> z;
            for (int j = 0; j < 6; ++j) z[j] = u(rng);
            const Eigen::Matrix<double, 6, 1> direct = lcl_rates_vec(p, v_i, v_b, w, z);
            const Eigen::Matrix<double, 6, 1> mapped = A * z + b;
            CHECK((direct - mapped).cwiseAbs().maxCoeff() <
                  1e-12 * (1.0 + mapped.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("frame transforms") {
    CHECK(frame_to_common({1.0, 0.0}, 0.0).d == Approx(1.0));
    CHECK(frame_to_common({1.0, 0.0}, 0.0).q == Approx(0.0).margin(1e-15));

    const DqPair r = frame_to_common({1.0, 0.0}, M_PI / 2.0);
    CHECK(r.d == Approx(0.0).margin(1e-15));
    CHECK(r.q == Approx(1.0));

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-400.0, 400.0);
    std::uniform_real_distribution<double> ang(-10.0, 10.0);
    for (int it = 0; it < 200; ++it) {
        const DqPair x{u(rng), u(rng)};
        const double d = ang(rng);
        const DqPair back = frame_to_local(frame_to_common(x, d), d);
        CHECK(std::abs(back.d - x.d) < 1e-12 * (1.0 + std::abs(x.d)));
        CHECK(std::abs(back.q - x.q) < 1e-12 * (1.0 + std::abs(x.q)));
        CHECK(norm(frame_to_common(x, d)) == Approx(norm(x)).margin(1e-12 * (1.0 + norm(x))));
    }
}

TEST_CASE("composed rate vector") {
    DGParams p;

    SECTION("secondary correction enters the voltage integrator one for one") {
        DGState x;
        x.v_od = 370.0;
        x.v_oq = 1.0;
        x.P = 3000.0;
        x.Q = 500.0;
        const DGRates a = dg_rates(x, {370.0, 1.0}, 0.0, 377.0, p);
        const DGRates b = dg_rates(x, {370.0, 1.0}, 1.0, 377.0, p);
        CHECK(b.phi_d - a.phi_d == Approx(1.0).epsilon(1e-12));
        CHECK(b.phi_q == Approx(a.phi_q).margin(1e-12));
    }
    SECTION("frame angle holds when locked to the common frequency") {
        DGState x;
        x.P = 4000.0;
        const double w = p.omega_n - p.m * x.P;
        const DGRates r = dg_rates(x, {0, 0}, 0.0, w, p);
        CHECK(r.delta == Approx(0.0).margin(1e-12));
    }
    SECTION("finite inputs give finite rates") {
        DGState x;
        x.delta = 0.3;
        x.P = 8000.0;
        x.Q = -2000.0;
        x.v_od = 390.0;
        x.i_od = 25.0;
        const DGRates r = dg_rates(x, {360.0, 40.0}, 2.0, 376.0, p);
        for (double v : r.to_array()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("parameter validation") {
    DGParams p;
    p.L_f = 0.0;
    CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("L_f"));
    p = DGParams{};
    p.F = 1.5;
    CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("F"));
    CHECK_NOTHROW(DGParams{}.validate());
}
