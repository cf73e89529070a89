#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mgsim/comm_graph.hpp"

namespace mgsim {

struct SecondaryConfig {
    double v_ref = 381.0;     // [V]
    double t_activate = 0.6;  // [s]
    double T_comm = 1e-3;     // sampling period of the message exchange [s]

    void validate() const {
        if (!(T_comm > 0.0)) throw std::invalid_argument("secondary.T_comm must be > 0");
        if (!(t_activate >= 0.0)) throw std::invalid_argument("secondary.t_activate must be >= 0");
    }
};

// Runtime state of the secondary layer. dv_n is each agent's set-point
// correction (integrated by the engine); held_v the neighbor voltages from
// the most recent exchange.
struct SecondaryState {
    std::vector<double> dv_n;
    std::vector<double> held_v;
    std::int64_t msg_count = 0;
    bool active = false;
    std::int64_t samples_taken = 0;

    explicit SecondaryState(int n = 0) : dv_n(n, 0.0), held_v(n, 0.0) {}
};

// Consensus tracking rate of agent i, evaluated on the held neighbor
// samples. Negative feedback drives every output voltage to the reference.
inline double consensus_rate(int i, std::span<const double> v_od_held, const CommGraph& g,
                             const SecondaryConfig& cfg) {
    double err = g.pinning(i) * (v_od_held[i] - cfg.v_ref);
    for (int j = 0; j < g.n; ++j) {
        const double a = g.adjacency(i, j);
        if (a > 0.0) err += a * (v_od_held[i] - v_od_held[j]);
    }
    return -g.coupling(i) * err;
}

// Sampled message exchange. At every multiple of T_comm past the activation
// time each agent transmits its output voltage to its out-neighbors; the
// leader's reference delivery is virtual and not counted.
inline SecondaryState sample_and_hold(double t, std::span<const double> v_od_now, const CommGraph& g,
                                      const SecondaryConfig& cfg, SecondaryState s) {
    if (t < cfg.t_activate) return s;
    if (!s.active) {
        s.active = true;
        s.samples_taken = 0;
    }
    // number of sampling instants due at time t: instants t_activate + k*T_comm, k >= 0
    const auto due = static_cast<std::int64_t>(std::floor((t - cfg.t_activate) / cfg.T_comm + 1e-9)) + 1;
    if (due > s.samples_taken) {
        s.held_v.assign(v_od_now.begin(), v_od_now.end());
        s.msg_count += (due - s.samples_taken) * g.directed_edge_count();
        s.samples_taken = due;
    }
    return s;
}

}  // namespace mgsim
