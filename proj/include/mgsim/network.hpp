#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgsim/dq.hpp"

namespace mgsim {

struct Line {
    std::string from;
    std::string to;
    double r = 0.0;  // [ohm]
    double l = 0.0;  // [H]
};

struct Load {
    std::string id;
    std::string bus;
    double r = 0.0;  // [ohm]
    double l = 0.0;  // [H]
    bool enabled = true;
};

// Electrical layout: buses, series lines, shunt loads and the bus each DG
// feeds through its coupling inductor. Treated as a quasi-static phasor
// network at nominal frequency; dq quantities map to complex numbers as
// x_D + j*x_Q.
struct NetworkModel {
    std::vector<std::string> buses;
    std::vector<Line> lines;
    std::vector<Load> loads;
    std::vector<std::string> dg_bus;  // DG index -> bus id

    int bus_index(const std::string& id) const {
        auto it = std::find(buses.begin(), buses.end(), id);
        if (it == buses.end()) throw std::invalid_argument("network: unknown bus '" + id + "'");
        return static_cast<int>(it - buses.begin());
    }

    const Load& load_by_id(const std::string& id) const {
        for (const auto& ld : loads)
            if (ld.id == id) return ld;
        throw std::invalid_argument("network: unknown load '" + id + "'");
    }

    void validate() const {
        if (buses.empty()) throw std::invalid_argument("network: no buses");
        for (size_t i = 0; i < buses.size(); ++i)
            for (size_t j = i + 1; j < buses.size(); ++j)
                if (buses[i] == buses[j]) throw std::invalid_argument("network: duplicate bus '" + buses[i] + "'");
        for (const auto& ln : lines) {
            bus_index(ln.from);
            bus_index(ln.to);
            if (ln.from == ln.to) throw std::invalid_argument("network: line from bus to itself");
            if (!(ln.r > 0.0)) throw std::invalid_argument("network: line resistance must be > 0");
            if (!(ln.l >= 0.0)) throw std::invalid_argument("network: line inductance must be >= 0");
        }
        for (const auto& ld : loads) {
            bus_index(ld.bus);
            if (!(ld.r > 0.0)) throw std::invalid_argument("network: load '" + ld.id + "' resistance must be > 0");
            if (!(ld.l >= 0.0)) throw std::invalid_argument("network: load '" + ld.id + "' inductance must be >= 0");
        }
        for (size_t i = 0; i < loads.size(); ++i)
            for (size_t j = i + 1; j < loads.size(); ++j)
                if (loads[i].id == loads[j].id)
                    throw std::invalid_argument("network: duplicate load id '" + loads[i].id + "'");
        for (const auto& b : dg_bus) bus_index(b);

        // connectivity over lines
        if (buses.size() > 1) {
            std::vector<char> seen(buses.size(), 0);
            std::queue<int> q;
            q.push(0);
            seen[0] = 1;
            while (!q.empty()) {
                int k = q.front();
                q.pop();
                for (const auto& ln : lines) {
                    int a = bus_index(ln.from), b = bus_index(ln.to);
                    if (a == k && !seen[b]) seen[b] = 1, q.push(b);
                    if (b == k && !seen[a]) seen[a] = 1, q.push(a);
                }
            }
            for (size_t k = 0; k < buses.size(); ++k)
                if (!seen[k]) throw std::invalid_argument("network: bus '" + buses[k] + "' is not connected");
        }
    }
};

// Nodal admittance assembly at a fixed frequency. Every line contributes a
// series admittance, every enabled load a shunt admittance at its bus.
// dq pairs pack as d + j*q; with the q axis lagging d, the quasi-static drop
// across an RL branch is (r - j*omega*l)*I, so reactance enters conjugated.
inline Eigen::MatrixXcd build_admittance(const NetworkModel& net, double omega_nom) {
    const int nb = static_cast<int>(net.buses.size());
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
    for (const auto& ln : net.lines) {
        const int a = net.bus_index(ln.from);
        const int b = net.bus_index(ln.to);
        const std::complex<double> y = 1.0 / std::complex<double>(ln.r, -omega_nom * ln.l);
        Y(a, a) += y;
        Y(b, b) += y;
        Y(a, b) -= y;
        Y(b, a) -= y;
    }
    for (const auto& ld : net.loads) {
        if (!ld.enabled) continue;
        const int b = net.bus_index(ld.bus);
        Y(b, b) += 1.0 / std::complex<double>(ld.r, -omega_nom * ld.l);
    }
    for (int k = 0; k < nb; ++k)
        if (std::abs(Y(k, k)) == 0.0)
            throw std::runtime_error("network: bus '" + net.buses[k] + "' has no incident line or load; admittance is singular");
    return Y;
}

// Cached factorization for repeated bus-voltage solves against one topology.
class BusVoltageSolver {
  public:
    explicit BusVoltageSolver(Eigen::MatrixXcd Y) : Y_(std::move(Y)), lu_(Y_) {
        if (!(lu_.rcond() > 1e-12))
            throw std::runtime_error("network: admittance matrix is singular or near-singular (rcond <= 1e-12)");
    }

    // injections: per-bus current in the common frame. Returns per-bus voltage.
    std::vector<DqPair> solve(std::span<const DqPair> injections) const {
        const int nb = static_cast<int>(Y_.rows());
        if (static_cast<int>(injections.size()) != nb)
            throw std::invalid_argument("network: injection vector size does not match bus count");
        Eigen::VectorXcd I(nb);
        for (int k = 0; k < nb; ++k) I(k) = std::complex<double>(injections[k].d, injections[k].q);
        Eigen::VectorXcd V = lu_.solve(I);
        const double in = I.norm();
        if (in > 0.0 && (Y_ * V - I).norm() > 1e-10 * in)
            throw std::runtime_error("network: bus voltage solve residual exceeds 1e-10");
        std::vector<DqPair> out(nb);
        for (int k = 0; k < nb; ++k) out[k] = {V(k).real(), V(k).imag()};
        return out;
    }

    const Eigen::MatrixXcd& matrix() const { return Y_; }

  private:
    Eigen::MatrixXcd Y_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

inline std::vector<DqPair> solve_bus_voltages(const Eigen::MatrixXcd& Y, std::span<const DqPair> injections) {
    return BusVoltageSolver(Y).solve(injections);
}

struct LoadEvent {
    enum class Kind { toggle, scale };
    double t = 0.0;
    std::string load_id;
    Kind kind = Kind::toggle;
    double factor = 1.0;  // impedance multiplier, scale events only
};

// Returns the network with one load changed. The admittance matrix must be
// rebuilt by the caller.
inline NetworkModel apply_event(NetworkModel net, const LoadEvent& e) {
    for (auto& ld : net.loads) {
        if (ld.id != e.load_id) continue;
        switch (e.kind) {
            case LoadEvent::Kind::toggle:
                ld.enabled = !ld.enabled;
                break;
            case LoadEvent::Kind::scale:
                if (!(e.factor > 0.0)) throw std::invalid_argument("network event: scale factor must be > 0");
                ld.r *= e.factor;
                ld.l *= e.factor;
                break;
        }
        return net;
    }
    throw std::invalid_argument("network event: unknown load '" + e.load_id + "'");
}

}  // namespace mgsim
