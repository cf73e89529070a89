#pragma once

#include <cmath>

namespace mgsim {

// One d-q pair in a rotating reference frame. Units depend on context
// (volts or amperes).
struct DqPair {
    double d = 0.0;
    double q = 0.0;
};

inline DqPair operator+(DqPair a, DqPair b) { return {a.d + b.d, a.q + b.q}; }
inline DqPair operator-(DqPair a, DqPair b) { return {a.d - b.d, a.q - b.q}; }
inline DqPair operator*(double s, DqPair x) { return {s * x.d, s * x.q}; }

inline double norm(DqPair x) { return std::hypot(x.d, x.q); }

// Rotation by +delta: a DG's local frame into the common frame.
inline DqPair frame_to_common(DqPair x, double delta) {
    const double c = std::cos(delta);
    const double s = std::sin(delta);
    return {c * x.d - s * x.q, s * x.d + c * x.q};
}

// Rotation by -delta: common frame back into the local frame.
inline DqPair frame_to_local(DqPair x, double delta) {
    return frame_to_common(x, -delta);
}

}  // namespace mgsim
