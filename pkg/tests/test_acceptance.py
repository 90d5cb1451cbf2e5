"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints a single PASS/FAIL line (run with `pytest -s` to see
them).  Criteria 2 and 10 encode quantitative readings of figure-level
claims that the validated model does not reproduce as literally stated;
they are implemented faithfully and allowed to fail rather than
loosened.  The analysis lives in the project decisions ledger.
"""

import math
import time

import numpy as np
import pytest

from qfd.coefficients import (
    coefficients_analytic_small_u,
    coefficients_brute,
    coefficients_e1,
    make_kernel_table,
    coefficients_from_table,
    markov_limit,
    time_grid,
)
from qfd.decoherence import (
    cumulative_diffusion,
    decoherence_table,
    quadratic_ratio_fit,
    sweep_level_spacing,
    sweep_material_particle,
    sweep_velocity,
    tau_d_numeric,
)
from qfd.dynamics import QubitState, asymptotic_population, coherence_difference, evolve
from qfd.model import (
    KinematicsParams,
    MaterialParams,
    ParticleParams,
    kernel_P,
    orientation_weights,
    preset,
    unit_orientation,
)
from qfd.numerics import exp_integral_e1, quartic_roots

_SUITE_T0 = time.time()

NV_NSI = preset("nv-nsi")
PLUS = QubitState(rho11=0.5, rho12=0.5)


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}: {detail}")


@pytest.fixture(scope="module")
def long_runs():
    """Shared 2000-cycle traces for the dynamics criteria."""
    mat, part = NV_NSI
    t0 = time.time()
    grid = time_grid(part.delta_tilde, mat.gamma_tilde, 2000.0, 400)
    table = make_kernel_table(mat.gamma_tilde, grid)
    table_time = time.time() - t0
    traces = {}
    timings = {}
    for u in (0.0, 0.003, 0.15, 0.3):
        t0 = time.time()
        traces[u] = coefficients_from_table(table, part, KinematicsParams(u=u))
        # a cold standalone run would also pay the kernel-table cost
        timings[u] = table_time + time.time() - t0
    return grid, traces, timings


def test_criterion_1_asymptotic_dichotomy(long_runs):
    """Slow motion ends in the pure ground state, fast motion in a mixed
    state with the purity pinned by the plateau population."""
    grid, traces, build_times = long_runs
    t0 = time.time()
    slow = evolve(PLUS, traces[0.003])
    slow_runtime = build_times[0.003] + time.time() - t0
    t0 = time.time()
    fast = evolve(PLUS, traces[0.3])
    fast_runtime = build_times[0.3] + time.time() - t0

    n = slow.cycles
    assert n[-1] >= 50.0
    ok_slow = slow.rho11[-1] <= 1e-3 and slow.purity[-1] >= 0.999
    last10 = fast.rho11[n >= n[-1] - 10.0]
    plateau_stable = float(last10.max() - last10.min()) <= 1e-3
    p = fast.rho11[-1]
    ok_fast = (
        0.0 < p < 0.5
        and plateau_stable
        and abs(fast.purity[-1] - (p * p + (1 - p) ** 2)) <= 1e-3
    )
    ok_time = slow_runtime <= 10.0 and fast_runtime <= 10.0
    verdict(
        1,
        ok_slow and ok_fast and ok_time,
        f"rho11(slow)={slow.rho11[-1]:.2e} purity={slow.purity[-1]:.6f}; "
        f"rho11(fast)={p:.4f} stable to {last10.max() - last10.min():.1e}; "
        f"runtimes {slow_runtime:.1f}s/{fast_runtime:.1f}s",
    )
    assert ok_slow and ok_fast and ok_time


def test_criterion_2_threshold_location():
    """Asymptotic population departs from <= 1e-3 inside u = delta/2 +- 20%.

    Implemented exactly as stated.  The validated model (three
    independent routes agree to every digit) crosses the 1e-3 level at
    u ~ 0.06 = 0.3 delta; the bracket [0.08, 0.12] corresponds to the
    visually resolvable ~1e-2 level of the population insert.  See the
    decisions ledger - this criterion is left honestly red.
    """
    mat, part = NV_NSI
    us = np.linspace(0.01, 0.3, 30)
    pops = np.array(
        [asymptotic_population(mat, part, KinematicsParams(u=u)) for u in us]
    )
    crossed = pops > 1e-3
    assert np.any(crossed)
    onset = float(us[np.argmax(crossed)])
    onset_visible = float(us[np.argmax(pops > 1e-2)]) if np.any(pops > 1e-2) else None
    ok = 0.08 <= onset <= 0.12
    verdict(
        2,
        ok,
        f"1e-3 onset at u={onset:.3f} (spec bracket [0.08, 0.12]); "
        f"1e-2-level onset at u={onset_visible:.3f}",
    )
    assert ok, (
        f"onset {onset:.3f} outside [0.08, 0.12]; the 1e-2-level onset "
        f"{onset_visible:.3f} does sit in the bracket (see ledger)"
    )


def test_criterion_3_coherence_velocity_ordering(long_runs):
    """Coherences die faster at higher velocity; the gap to the static
    curve peaks at finite time, grows with u and fades away."""
    grid, traces, _ = long_runs
    runs = {u: evolve(PLUS, traces[u]) for u in (0.0, 0.15, 0.3)}
    cyc = runs[0.0].cycles
    mask = cyc >= 1.0
    mags = {u: np.abs(r.rho12) for u, r in runs.items()}
    ordering = bool(
        np.all(mags[0.0][mask] >= mags[0.15][mask] - 1e-15)
        and np.all(mags[0.15][mask] >= mags[0.3][mask] - 1e-15)
    )
    d15 = coherence_difference(traces[0.15], traces[0.0])
    d30 = coherence_difference(traces[0.3], traces[0.0])
    i15, i30 = int(np.argmax(np.abs(d15))), int(np.argmax(np.abs(d30)))
    interior = 0 < i15 < d15.size - 1 and 0 < i30 < d30.size - 1
    decays = abs(d15[-1]) < 0.01 * abs(d15[i15]) and abs(d30[-1]) < 0.01 * abs(d30[i30])
    grows = abs(d30[i30]) > abs(d15[i15])
    ok = ordering and interior and decays and grows
    verdict(
        3,
        ok,
        f"ordering={ordering}; peaks |d|={abs(d15[i15]):.3e}@N={cyc[i15]:.0f}, "
        f"{abs(d30[i30]):.3e}@N={cyc[i30]:.0f}; decayed to "
        f"{abs(d30[-1]):.1e}",
    )
    assert ok


def test_criterion_4_quadratic_law_and_ba():
    """Velocity rate is quadratic with the tabulated curvature ratios."""
    t0 = time.time()
    mat, part = NV_NSI
    us = np.geomspace(1e-3, 3e-2, 8)
    rows = sweep_velocity(mat, part, us)
    slope = float(
        np.polyfit(np.log(us), np.log(np.abs([r.rate for r in rows])), 1)[0]
    )
    fit_nv, _ = quadratic_ratio_fit(
        mat, part, [0.001, 0.002, 0.004, 0.008, 0.016, 0.03]
    )
    nv_time = time.time() - t0

    t0 = time.time()
    mat_rb, part_rb = preset("rb-nsi")
    fit_rb, _ = quadratic_ratio_fit(mat_rb, part_rb, [0.05, 0.1, 0.15, 0.2, 0.3, 0.4])
    rb_time = time.time() - t0

    ok_slope = abs(slope - 2.0) <= 0.1
    ok_nv = abs(fit_nv.b_over_a - 6.417) <= 0.10 * 6.417
    ok_rb = abs(fit_rb.b_over_a - 0.216) <= 0.10 * 0.216
    ok_time = nv_time <= 120.0 and rb_time <= 120.0
    ok = ok_slope and ok_nv and ok_rb and ok_time
    verdict(
        4,
        ok,
        f"slope={slope:.3f}; b/a NV={fit_nv.b_over_a:.4f} (6.417+-10%), "
        f"Rb={fit_rb.b_over_a:.4f} (0.216+-10%); fits {nv_time:.0f}s/{rb_time:.0f}s",
    )
    assert ok


def test_criterion_5_analytic_vs_numeric_coefficient():
    """Small-velocity expansion reproduces the reference coefficients to
    2% over cycles 1-6 and the late-time plateau sits on the Markov value."""
    mat, part = NV_NSI
    kin = KinematicsParams(u=0.003, a_nm=5.0)
    grid = time_grid(part.delta_tilde, mat.gamma_tilde, 6.0, 400)
    ref = coefficients_e1(mat, part, kin, grid)
    ana = coefficients_analytic_small_u(mat, part, kin, grid)
    mask = grid >= 2 * math.pi / part.delta_tilde
    devs = {}
    for name in ("D", "f", "zeta"):
        num = np.max(np.abs(getattr(ana, name)[mask] - getattr(ref, name)[mask]))
        devs[name] = num / np.max(np.abs(getattr(ref, name)[mask]))
    mk = markov_limit(mat, part, kin)
    plateau_dev = abs(ref.D[-1] - mk.D_inf) / mk.D_inf
    ok = all(v <= 0.02 for v in devs.values()) and plateau_dev <= 0.01
    verdict(
        5,
        ok,
        "rel Linf deviations "
        + ", ".join(f"{k}={v:.2e}" for k, v in devs.items())
        + f"; plateau vs Markov {plateau_dev:.2e}",
    )
    assert ok


def test_criterion_6_oracle_equivalence():
    """Closed-kernel route equals raw double quadrature to 1e-6 across
    damping and velocity."""
    t0 = time.time()
    worst = 0.0
    for gt in (0.003, 1.0):
        mat = MaterialParams(omega_s=2.47e14, gamma_tilde=gt, name="x")
        part = ParticleParams(delta_tilde=0.2, r0_tilde=1e-2, orientation=(1, 0, 0))
        grid = np.linspace(0.0, 60.0, 20)
        for u in (0.0, 0.003, 0.3):
            kin = KinematicsParams(u=u)
            a = coefficients_e1(mat, part, kin, grid)
            b = coefficients_brute(mat, part, kin, grid)
            for name in ("D", "f", "zeta"):
                worst = max(
                    worst,
                    float(np.max(np.abs(getattr(a, name) - getattr(b, name)))),
                )
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and elapsed <= 300.0
    verdict(6, ok, f"max |e1 - brute| = {worst:.2e} over 6 configs in {elapsed:.0f}s")
    assert ok


def test_criterion_7_polarization_ordering():
    """Perpendicular dipole decoheres fastest; along the motion faster
    than transverse."""
    mat, part = NV_NSI
    kin = KinematicsParams(u=0.3)
    table = decoherence_table(mat, part.delta_tilde)
    taus = {}
    for label, orient in {"z": (0, 0, 1), "x": (1, 0, 0), "y": (0, 1, 0)}.items():
        p = part.with_orientation(orient)
        taus[label] = tau_d_numeric(mat, p, kin, table=table).tau_d
    tol = 1e-10 * max(taus.values())
    ok = (
        taus["z"] < taus["x"] - 3 * tol
        and taus["x"] < taus["y"] - 3 * tol
    )
    verdict(
        7,
        ok,
        f"tau_z={taus['z']:.1f} < tau_x={taus['x']:.1f} < tau_y={taus['y']:.1f}",
    )
    assert ok


def test_criterion_8_material_particle_contrast():
    """Motion effect two orders of magnitude stronger for a low-gap
    particle on n-Si than for Rb on gold at matched physical speeds."""
    rows = sweep_material_particle(
        ["nv-nsi", "rb-au"], [0.0, math.pi / 2], [0.0, math.pi / 2]
    )
    peaks = {}
    for r in rows:
        key = (r.material, r.particle)
        peaks[key] = max(peaks.get(key, 0.0), abs(r.rate))
    ratio = peaks[("n-Si", "NV")] / peaks[("Au", "Rb")]
    ok = 30.0 <= ratio <= 300.0
    verdict(8, ok, f"peak rate ratio NV/n-Si : Rb/Au = {ratio:.1f}")
    assert ok


def test_criterion_9_property_suite(long_runs):
    """Cross-module invariants re-checked in one place."""
    failures = []

    # exponential-integral reflection symmetry
    rng = np.random.default_rng(17)
    z = rng.uniform(0.1, 50, 100) * np.exp(1j * rng.uniform(-0.9 * np.pi, 0.9 * np.pi, 100))
    refl = np.max(
        np.abs(exp_integral_e1(np.conj(z)) - np.conj(exp_integral_e1(z)))
        / np.abs(exp_integral_e1(z))
    )
    if refl > 1e-12:
        failures.append(f"E1 reflection {refl:.1e}")

    # quartic conjugate closure
    for seed in range(50):
        c = np.random.default_rng(seed).uniform(-3, 3, 5)
        c[0] = c[0] if abs(c[0]) > 0.1 else 1.0
        roots = quartic_roots(*c)
        scale = max(np.max(np.abs(roots)), 1.0)
        for r in roots:
            if np.min(np.abs(roots - np.conj(r))) > 1e-10 * scale:
                failures.append("quartic closure")

    # static envelope identity on a sphere grid
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = unit_orientation(rng.normal(size=3))
        if abs(kernel_P(0.0, n) - orientation_weights(n).d_i / 8.0) > 1e-14:
            failures.append("P(0) identity")

    # velocity parity of the coefficients
    mat, part = NV_NSI
    g = time_grid(part.delta_tilde, mat.gamma_tilde, 1.0, 64)
    tp = coefficients_e1(mat, part, KinematicsParams(u=0.2), g)
    tm = coefficients_e1(mat, part, KinematicsParams(u=-0.2), g)
    if not all(
        np.array_equal(getattr(tp, k), getattr(tm, k)) for k in ("D", "f", "zeta")
    ):
        failures.append("u parity")

    # orientation linearity
    n = unit_orientation((0.4, -0.5, 0.768114574786861))
    kin = KinematicsParams(u=0.2)
    full = coefficients_e1(mat, part.with_orientation(n), kin, g)
    axes = [
        coefficients_e1(mat, part.with_orientation(o), kin, g)
        for o in ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    ]
    combo = sum(w * t.D for w, t in zip((n[0] ** 2, n[1] ** 2, n[2] ** 2), axes))
    if np.max(np.abs(full.D - combo)) > 1e-12:
        failures.append("orientation linearity")

    # state invariants along a stored run
    _, traces, _ = long_runs
    res = evolve(PLUS, traces[0.15])
    if not (
        np.all((res.rho11 >= 0) & (res.rho11 <= 1))
        and np.all(np.abs(res.rho12) ** 2 <= res.rho11 * (1 - res.rho11) + 1e-9)
    ):
        failures.append("trace/positivity")

    # decoherence-time definition consistency
    kin = KinematicsParams(u=0.15)
    _, cum_d = cumulative_diffusion(mat, part, kin)
    tau = tau_d_numeric(mat, part, kin).tau_d
    if abs(cum_d(tau) - 1.0) > 1e-6:
        failures.append("cumD(tau)=1")

    # coupling invariance of the normalized rate
    from dataclasses import replace

    def rate(r0t):
        p = replace(part, r0_tilde=r0t)
        t0 = tau_d_numeric(mat, p, KinematicsParams(u=0.0)).tau_d
        tu = tau_d_numeric(mat, p, KinematicsParams(u=0.02)).tau_d
        return tu / t0 - 1.0

    r1, r2 = rate(1e-2), rate(2e-2)
    if abs(r1 - r2) > 5e-3 * abs(r1):
        failures.append("rate r0 invariance")

    ok = not failures
    verdict(9, ok, "all invariants hold" if ok else "; ".join(failures))
    assert ok, failures


def test_criterion_10_level_spacing_sweep():
    """Normalized rate over delta in [0.05, 0.5] shows an interior
    extremum and approaches one far from resonance.

    Implemented exactly as stated.  With the response function pinned by
    the curvature ratios of criterion 4 (h = J), the converged curve on
    this window is monotone: the interior extremum the wording expects
    only appears past the resonance (around delta ~ 1.5, verified in the
    module tests).  Left honestly red; see the decisions ledger.
    """
    mat, part = NV_NSI
    kin = KinematicsParams(u=0.003)
    deltas = np.linspace(0.05, 0.5, 10)
    rows = sweep_level_spacing(mat, part, kin, deltas)
    rates = np.array([r.rate for r in rows])
    has_extremum = any(r.flag == "extremum" for r in rows[1:-1])
    peak = float(np.max(np.abs(rates)))
    approaches_one = abs(rates[-1]) < 0.5 * peak
    ok = has_extremum and approaches_one
    verdict(
        10,
        ok,
        f"rates {rates[0]:+.2e}..{rates[-1]:+.2e}, interior extremum: "
        f"{has_extremum} (monotone below resonance; extremum exists near "
        f"delta~1.5, outside the stated window)",
    )
    assert ok, "no interior extremum on [0.05, 0.5]; see ledger"


def test_suite_runtime_budget():
    elapsed = time.time() - _SUITE_T0
    verdict(0, elapsed <= 600.0, f"acceptance suite elapsed {elapsed:.0f}s (budget 600s)")
    assert elapsed <= 600.0
