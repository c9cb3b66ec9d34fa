#pragma once

// Generated by tests/oracles/reference_pf.py from the case file; do not edit.
#include <array>

namespace reference_case9 {
inline constexpr std::array<int, 9> bus_ids{1, 2, 3, 4, 5, 6, 7, 8, 9};
inline constexpr std::array<double, 9> vm{1.040000000000000e+00, 1.025000000000000e+00, 1.025000000000000e+00, 1.025788392844011e+00, 1.012654324017776e+00, 1.032352949002368e+00, 1.015882583627499e+00, 1.025769372386454e+00, 9.956308580482950e-01};
inline constexpr std::array<double, 9> va{0.000000000000000e+00, 1.619666502577891e-01, 8.141526955003156e-02, -3.869024592716515e-02, -6.435720399466972e-02, 3.432567095103446e-02, 1.269789996849908e-02, 6.492103233838449e-02, -6.961778523216880e-02};
}  // namespace reference_case9
