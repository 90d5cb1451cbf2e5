"""Reduced density-matrix evolution under the secular master equation.

With the coefficient trace in hand the equation integrates in closed
form.  Writing rm = rho11 - rho22 and using the cumulative integrals
cumD, cumF of the trace:

    rm(t)    = e^{-4 cumD} rm(0) - 4 e^{-4 cumD} int_0^t zeta e^{4 cumD} dt'
    rho12(t) = rho12(0) e^{-2 cumD} e^{-i (Dt t + 2 cumF)}
    rho21(t) = conj(rho12(t))

so the trace is one exactly and hermiticity is structural.  The
decoherence function is the coherence envelope e^{-2 cumD}.

Documentation note, not asserted anywhere: the populations obey the same
equation with or without the secular approximation (dropping the
fast-oscillating terms only decouples the two off-diagonal elements),
so rho11 here is exact to second order in the coupling even though only
the secular equation is implemented.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from qfd.coefficients import CoefficientTrace, MarkovCoefficients, markov_limit
from qfd.errors import GridError, PhysicsError
from qfd.model import KinematicsParams, MaterialParams, ParticleParams
from qfd.numerics import cumulative_integral

POSITIVITY_SLACK = 1e-9


@dataclass(frozen=True)
class QubitState:
    """Two-level reduced state: excited population and coherence at time t."""

    rho11: float
    rho12: complex
    t: float = 0.0

    def __post_init__(self):
        if not -POSITIVITY_SLACK <= self.rho11 <= 1.0 + POSITIVITY_SLACK:
            raise PhysicsError(f"population out of [0, 1]: rho11 = {self.rho11}")
        bound = self.rho11 * (1.0 - self.rho11) + POSITIVITY_SLACK
        if abs(self.rho12) ** 2 > bound:
            raise PhysicsError(
                f"coherence violates positivity: |rho12|^2 = {abs(self.rho12) ** 2}"
                f" > rho11 rho22 + slack = {bound}"
            )

    @property
    def purity(self) -> float:
        r22 = 1.0 - self.rho11
        return self.rho11**2 + r22**2 + 2.0 * abs(self.rho12) ** 2


@dataclass(frozen=True)
class EvolutionResult:
    """Time-ordered evolution data on the trace grid."""

    t: np.ndarray
    rho11: np.ndarray
    rho12: np.ndarray  # complex; rho21 = conj(rho12) implicitly
    purity: np.ndarray
    xi: np.ndarray  # accumulated coherence phase
    decoherence_factor: np.ndarray  # e^{-2 cumD}
    delta_tilde: float

    @property
    def states(self) -> list[QubitState]:
        return [
            QubitState(rho11=float(r), rho12=complex(c), t=float(tt))
            for tt, r, c in zip(self.t, self.rho11, self.rho12)
        ]

    @property
    def cycles(self) -> np.ndarray:
        return self.t * self.delta_tilde / (2.0 * np.pi)

    def to_csv(self) -> str:
        """CSV export: t, N_cycles, rho11, re_rho12, im_rho12, abs_rho12,
        purity, decoherence_factor, xi."""
        buf = io.StringIO()
        buf.write(
            "t,N_cycles,rho11,re_rho12,im_rho12,abs_rho12,purity,decoherence_factor,xi\n"
        )
        cyc = self.cycles
        for i in range(self.t.size):
            c = self.rho12[i]
            buf.write(
                f"{self.t[i]:.17g},{cyc[i]:.17g},{self.rho11[i]:.17g},"
                f"{c.real:.17g},{c.imag:.17g},{abs(c):.17g},"
                f"{self.purity[i]:.17g},{self.decoherence_factor[i]:.17g},"
                f"{self.xi[i]:.17g}\n"
            )
        return buf.getvalue()


def evolve(
    initial: QubitState,
    trace: CoefficientTrace,
    delta_tilde: float | None = None,
) -> EvolutionResult:
    """Evolve the reduced state over the full span of a coefficient trace.

    The population sector integrates the dissipative drive against the
    accumulated diffusion; exponentials are arranged so every argument is
    nonpositive and long horizons cannot overflow.  Positivity is checked
    on every sample and violations beyond the slack abort loudly.
    """
    dt = trace.delta_tilde if delta_tilde is None else float(delta_tilde)
    if delta_tilde is not None and abs(dt - trace.delta_tilde) > 1e-12:
        raise GridError(
            f"delta_tilde {dt} does not match the trace ({trace.delta_tilde})"
        )
    g = trace.grid
    cum_d = trace.cumD
    rm0 = 2.0 * initial.rho11 - 1.0

    # int_0^t zeta e^{4 cumD} dt', evaluated against the endpoint value so
    # only nonpositive exponents are ever exponentiated
    emax = 4.0 * float(np.max(cum_d))
    if emax < 600.0:
        v = cumulative_integral(g, trace.zeta * np.exp(4.0 * cum_d))
        rm = np.exp(-4.0 * cum_d) * (rm0 - 4.0 * v)
    else:  # very long horizons: stepwise form, arguments always <= 0
        rm = np.empty_like(cum_d)
        rm[0] = rm0
        dcum = np.diff(cum_d)
        dtg = np.diff(g)
        zl, zr = trace.zeta[:-1], trace.zeta[1:]
        for i in range(1, g.size):
            decay = np.exp(-4.0 * dcum[i - 1])
            drive = 0.5 * dtg[i - 1] * (zl[i - 1] * decay + zr[i - 1])
            rm[i] = decay * rm[i - 1] - 4.0 * drive

    rho11 = 0.5 * (1.0 + rm)
    if np.any(rho11 < -POSITIVITY_SLACK) or np.any(rho11 > 1.0 + POSITIVITY_SLACK):
        worst = float(rho11[np.argmax(np.abs(rho11 - 0.5))])
        raise PhysicsError(f"population left [0, 1] beyond slack: rho11 = {worst}")
    rho11 = np.clip(rho11, 0.0, 1.0)

    envelope = np.exp(-2.0 * cum_d)
    xi = dt * g + 2.0 * trace.cumF
    rho12 = initial.rho12 * envelope * np.exp(-1j * xi)

    bound = rho11 * (1.0 - rho11) + POSITIVITY_SLACK
    if np.any(np.abs(rho12) ** 2 > bound):
        i = int(np.argmax(np.abs(rho12) ** 2 - bound))
        raise PhysicsError(
            f"coherence positivity broke at t = {g[i]}: |rho12|^2 = "
            f"{abs(rho12[i]) ** 2}, rho11 rho22 = {rho11[i] * (1 - rho11[i])}"
        )

    purity = rho11**2 + (1.0 - rho11) ** 2 + 2.0 * np.abs(rho12) ** 2
    return EvolutionResult(
        t=g,
        rho11=rho11,
        rho12=rho12,
        purity=purity,
        xi=xi,
        decoherence_factor=envelope,
        delta_tilde=dt,
    )


def asymptotic_population(
    mat: MaterialParams,
    part: ParticleParams,
    kin: KinematicsParams,
    markov: MarkovCoefficients | None = None,
) -> float:
    """Stationary excited-state population rho11(inf) = (1 - zeta/D)/2.

    Built from the exact stationary coefficients; exponentially small
    below the excitation threshold u = delta_tilde / 2 and finite above,
    clipped into [0, 1/2].
    """
    mk = markov if markov is not None else markov_limit(mat, part, kin)
    rm_inf = -mk.zeta_inf / mk.D_inf
    return float(np.clip(0.5 * (1.0 + rm_inf), 0.0, 0.5))


def coherence_difference(
    trace_u: CoefficientTrace,
    trace_0: CoefficientTrace,
    initial_rho12: complex = 0.5,
) -> np.ndarray:
    """Signed coherence gap |rho12(t; u)| - |rho12(t; 0)| on a shared grid.

    Negative while motion accelerates the coherence decay; the magnitude
    peaks at a finite time and dies off as both coherences vanish.
    """
    if trace_u.grid.shape != trace_0.grid.shape or np.any(trace_u.grid != trace_0.grid):
        raise GridError("coherence difference requires identical grids")
    amp = abs(initial_rho12)
    return amp * (np.exp(-2.0 * trace_u.cumD) - np.exp(-2.0 * trace_0.cumD))
