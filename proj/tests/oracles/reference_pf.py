"""Independent reference power flow for the frozen test values.

Builds the conventional bus admittance matrix straight from the MATPOWER
tables and runs a dense polar Newton iteration. Shares no code with the C++
library. Prints a C++ header with the solved magnitudes and angles.

    python3 reference_pf.py ../../data/case9.m > ../unit/reference_case9.hpp
"""
import re
import sys

import numpy as np


def table(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";").strip()
        if line:
            rows.append([float(v) for v in line.split()])
    return np.array(rows)


def main(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)", text).group(1))
    bus, gen, br = table(text, "bus"), table(text, "gen"), table(text, "branch")
    ids = [int(b) for b in bus[:, 0]]
    idx = {b: i for i, b in enumerate(ids)}
    n = len(ids)

    Y = np.zeros((n, n), dtype=complex)
    for row in br:
        if row[10] == 0:
            continue
        f, t = idx[int(row[0])], idx[int(row[1])]
        ys = 1.0 / complex(row[2], row[3])
        bc = row[4]
        tap = row[8] if row[8] != 0 else 1.0
        a = tap * np.exp(1j * np.deg2rad(row[9]))
        Y[f, f] += (ys + 0.5j * bc) / (tap * tap)
        Y[t, t] += ys + 0.5j * bc
        Y[f, t] += -ys / np.conj(a)
        Y[t, f] += -ys / a
    for i, row in enumerate(bus):
        Y[i, i] += complex(row[4], row[5]) / base

    kind = bus[:, 1].astype(int)
    p = -bus[:, 2] / base
    q = -bus[:, 3] / base
    vm = bus[:, 7].copy()
    va = np.deg2rad(bus[:, 8])
    for g in gen:
        if g[7] <= 0:
            continue
        k = idx[int(g[0])]
        p[k] += g[1] / base
        q[k] += g[2] / base
        vm[k] = g[5]
    va[:] = 0.0
    for i in range(n):
        if kind[i] == 1:
            vm[i] = 1.0

    pv = [i for i in range(n) if kind[i] == 2]
    pq = [i for i in range(n) if kind[i] == 1]
    ang = pv + pq
    for _ in range(50):
        v = vm * np.exp(1j * va)
        s = v * np.conj(Y @ v)
        mis = np.concatenate([(s.real - p)[ang], (s.imag - q)[pq]])
        if np.max(np.abs(mis)) < 1e-13:
            break
        # dense Jacobian by complex derivatives
        dS_dva = 1j * np.diag(v) @ np.conj(np.diag(Y @ v) - Y @ np.diag(v))
        dS_dvm = np.diag(v) @ np.conj(Y @ np.diag(v / vm)) + np.diag(v / vm) @ np.conj(np.diag(Y @ v))
        J = np.block([
            [dS_dva.real[np.ix_(ang, ang)], dS_dvm.real[np.ix_(ang, pq)]],
            [dS_dva.imag[np.ix_(pq, ang)], dS_dvm.imag[np.ix_(pq, pq)]],
        ])
        dx = np.linalg.solve(J, -mis)
        va[ang] += dx[: len(ang)]
        vm[pq] += dx[len(ang):]
    else:
        raise SystemExit("reference solver did not converge")

    fmt = lambda xs: ", ".join(f"{x:.15e}" for x in xs)
    print("#pragma once")
    print()
    print("// Generated by tests/oracles/reference_pf.py from the case file; do not edit.")
    print("#include <array>")
    print()
    print("namespace reference_case9 {")
    print(f"inline constexpr std::array<int, {n}> bus_ids{{{', '.join(str(i) for i in ids)}}};")
    print(f"inline constexpr std::array<double, {n}> vm{{{fmt(vm)}}};")
    print(f"inline constexpr std::array<double, {n}> va{{{fmt(va)}}};")
    print("}  // namespace reference_case9")


if __name__ == "__main__":
    main(sys.argv[1])
