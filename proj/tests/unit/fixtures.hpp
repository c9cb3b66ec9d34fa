#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <string>

#include "sscert/network.hpp"
#include "sscert/powerflow.hpp"

#ifndef SSCERT_DATA_DIR
#error "SSCERT_DATA_DIR must point at the bundled case files"
#endif

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(SSCERT_DATA_DIR) + "/" + name; }

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Slack bus 1, load bus 2, one line z = 0.01 + 0.1j. Demand in MW / MVAr on
// a 100 MVA base; charging in p.u.
inline std::string two_bus_text(double pd_mw = 0.0, double charging = 0.0, double qd_mvar = 0.0) {
    return "function mpc = two_bus\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "  1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
           "  2 1 " + num(pd_mw) + " " + num(qd_mvar) + " 0 0 1 1 0 230 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "  1 0 0 300 -300 1 100 1 250 10 0 0 0 0 0 0 0 0 0 0 0;\n"
           "];\n"
           "mpc.branch = [\n"
           "  1 2 0.01 0.1 " + num(charging) + " 250 250 250 0 0 1 -360 360;\n"
           "];\n";
}

inline sscert::PowerNetwork two_bus(double pd_mw = 0.0, double charging = 0.0, double qd_mvar = 0.0) {
    return sscert::parse_matpower(two_bus_text(pd_mw, charging, qd_mvar));
}

// Two-bus case whose load bus injects 1 p.u. of active power at exactly unit
// voltage. With V = 1, P = (r (1 - cos d) + x sin d) / |z|^2, which is
// |z| sin(d - atan2(r, x)) = |z|^2 - r.
inline sscert::PowerNetwork two_bus_unit_injection(double r = 0.01, double x = 0.1) {
    const double zn = std::hypot(r, x);
    const double d = std::atan2(r, x) + std::asin((zn * zn - r) / zn);
    const double a = 1.0 - std::cos(d);
    const double b = -std::sin(d);
    const double q = (x * a + r * b) / (zn * zn);
    return two_bus(-100.0, 0.0, -100.0 * q);
}

// Largest constant-power load (p.u., unity power factor) the two-bus line
// carries with the load voltage at v_low and the source at 1. With
// S = conj(y) (V^2 - V e^{j d}) and conj(y) = z / |z|^2, Q = 0 pins
// cos(d - atan2(r, x)) = V x / |z|; the upper PV branch takes the smaller |d|.
inline double two_bus_load_at_voltage(double v_low, double r = 0.01, double x = 0.1) {
    const double zn = std::hypot(r, x);
    const double d = std::atan2(r, x) - std::acos(v_low * x / zn);
    const double a = v_low * v_low - v_low * std::cos(d);
    const double b = -v_low * std::sin(d);
    return -(r * a - x * b) / (zn * zn);
}

}  // namespace fixtures
