"""Closed first/second-order moment equations of the two cavity modes.

Because the reduced master equation is quadratic in the mode operators the
eight moments stored in :class:`MomentState` obey a closed, affine ODE system.
Conjugate moments (``<a+>``, ``<a+^2>``, ``<a+ b>``, ``<a+ b+>``) are never
stored; they are obtained by complex conjugation.

Steady states are available two ways: closed-form expressions and a direct
block-wise linear solve of ``drift = 0``.  The linear solve is authoritative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy.integrate import DOP853, RK45

from .errors import IntegrationError, SingularSystemError, ValidityError
from .params import (
    SystemParams,
    StabilityReport,
    check_stability,
    decay_rates,
    drift_blocks,
    singular_denominators,
)

__all__ = [
    "MOMENT_FIELDS",
    "MomentState",
    "SteadyStateMoments",
    "SteadyStateComparison",
    "Trajectory",
    "drift",
    "residual",
    "evolve",
    "steady_state_closed_form",
    "steady_state_linear_solve",
    "compare_steady_states",
    "relative_deviation",
]

MOMENT_FIELDS = ("m_a", "m_b", "s_aa", "s_bb", "n_a", "n_b", "x_abdag", "x_ab")

# floor (relative to the state scale) below which a moment counts as zero when
# forming relative deviations
_ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class MomentState:
    """``<a>, <b>, <a^2>, <b^2>, <a+a>, <b+b>, <a b+>, <a b>``."""

    m_a: complex = 0j
    m_b: complex = 0j
    s_aa: complex = 0j
    s_bb: complex = 0j
    n_a: complex = 0j
    n_b: complex = 0j
    x_abdag: complex = 0j
    x_ab: complex = 0j

    def __post_init__(self):
        for name in MOMENT_FIELDS:
            object.__setattr__(self, name, complex(getattr(self, name)))

    @classmethod
    def vacuum(cls) -> "MomentState":
        return cls()

    @classmethod
    def coherent(cls, alpha, beta) -> "MomentState":
        """Moments of the product coherent state ``|alpha> (x) |beta>``."""
        alpha, beta = complex(alpha), complex(beta)
        return cls(alpha, beta, alpha**2, beta**2, abs(alpha) ** 2, abs(beta) ** 2,
                   alpha * beta.conjugate(), alpha * beta)

    @classmethod
    def from_array(cls, values: Sequence[complex]) -> "MomentState":
        values = np.asarray(values, dtype=complex)
        if values.shape != (8,):
            raise ValueError(f"expected 8 moments, got shape {values.shape}")
        return cls(*values)

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in MOMENT_FIELDS], dtype=complex)

    def as_dict(self) -> dict[str, complex]:
        return {f: getattr(self, f) for f in MOMENT_FIELDS}

    @property
    def scale(self) -> float:
        """Largest moment magnitude, floored at one."""
        return max(1.0, float(np.max(np.abs(self.to_array()))))


@dataclass(frozen=True)
class SteadyStateMoments:
    state: MomentState
    source: str  # "closed_form" | "closed_form_uncorrected" | "linear_solve"
    residual_norm: float

    def __getattr__(self, name):
        # forward moment fields (m_a, n_b, ...) to the wrapped state
        if name in MOMENT_FIELDS:
            return getattr(self.state, name)
        raise AttributeError(name)


def _drift_array(y: np.ndarray, p: SystemParams) -> np.ndarray:
    m_a, m_b, s_aa, s_bb, n_a, n_b, x_abdag, x_ab = y
    prep = p.prep
    r = decay_rates(p)
    g = p.gain_A * prep.rho_ac
    eps = p.epsilon
    conj = np.conjugate
    return np.array([
        -0.5 * r.mu_a * m_a - 0.5 * g * conj(m_b) + eps,
        -0.5 * r.mu_b * m_b + 0.5 * g * conj(m_a) + eps,
        -r.mu_a * s_aa - g * x_abdag + 2 * eps * m_a,
        # <a+ b> = conj(<a b+>)
        -r.mu_b * s_bb + g * conj(x_abdag) + 2 * eps * m_b,
        -r.mu_a * n_a - 0.5 * g * (x_ab + conj(x_ab)) + eps * (conj(m_a) + m_a)
        + p.gain_A * prep.rho_aa,
        -r.mu_b * n_b + 0.5 * g * (x_ab + conj(x_ab)) + eps * (conj(m_b) + m_b),
        -r.mu * x_abdag + 0.5 * g * (s_aa - conj(s_bb)) + eps * (m_a + conj(m_b)),
        -r.mu * x_ab + 0.5 * g * (n_a - n_b) + 0.5 * g + eps * (m_a + m_b),
    ], dtype=complex)


def drift(s: MomentState, p: SystemParams) -> MomentState:
    """Time derivative of every stored moment at state ``s``."""
    return MomentState.from_array(_drift_array(s.to_array(), p))


def residual(s: MomentState, p: SystemParams) -> float:
    """Max-norm of :func:`drift`; zero exactly at a steady state."""
    return float(np.max(np.abs(_drift_array(s.to_array(), p))))


# ---------------------------------------------------------------------------
# time evolution


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)  # (n_samples, 8) complex
    steps: int
    rejected_steps: int
    nfev: int
    tol: float
    method: str
    stability: StabilityReport | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> MomentState:
        return MomentState.from_array(self.states[i])

    @property
    def final(self) -> MomentState:
        return self.state(-1)

    def __iter__(self):
        for t, y in zip(self.times, self.states):
            yield float(t), MomentState.from_array(y)

    def csv_header(self) -> list[str]:
        cols = ["t"]
        for f in MOMENT_FIELDS:
            cols += [f"Re_{f}", f"Im_{f}"]
        return cols

    def to_csv(self, dest: str | PathLike | TextIO | None = None) -> str:
        """Write one row per sample; returns the CSV text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for t, y in zip(self.times, self.states):
            row = [_fmt(t)]
            for v in y:
                row += [_fmt(v.real), _fmt(v.imag)]
            w.writerow(row)
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


_METHODS = {"DOP853": DOP853, "RK45": RK45}


def evolve(
    s0: MomentState,
    p: SystemParams,
    t_final: float,
    tol: float = 1e-10,
    *,
    method: str = "DOP853",
    sample_times: Iterable[float] | None = None,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate the moment equations from ``s0`` up to ``t_final``.

    Uses an embedded Runge-Kutta pair with mixed error control
    (``atol = rtol = tol`` per component).  Samples are taken at every accepted
    step unless ``sample_times`` is given, in which case the dense output is
    evaluated there.  The last sample is always exactly ``t_final``.

    Unstable parameters are integrated anyway; the returned trajectory carries
    the :class:`StabilityReport` so callers can tell.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    try:
        solver_cls = _METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_METHODS)}") from None

    stability = check_stability(p)
    y0 = s0.to_array()
    solver = solver_cls(lambda t, y: _drift_array(y, p), 0.0, y0, t_final,
                        rtol=tol, atol=tol, max_step=max_step)
    n_stages = solver_cls.n_stages

    wanted = None
    if sample_times is not None:
        wanted = np.unique(np.asarray(list(sample_times), dtype=float))
        if wanted.size and (wanted[0] < 0 or wanted[-1] > t_final):
            raise ValueError("sample_times must lie within [0, t_final]")
        wanted = wanted[wanted < t_final]

    times = [0.0]
    states = [y0]
    next_idx = 0
    if wanted is not None:
        times, states = [], []
        while next_idx < len(wanted) and wanted[next_idx] == 0.0:
            times.append(0.0)
            states.append(y0)
            next_idx += 1

    steps = rejected = 0
    while solver.status == "running":
        before = solver.nfev
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at t={solver.t:.6g}: {msg}", t_fail=solver.t)
        attempts = (solver.nfev - before) // n_stages
        steps += 1
        rejected += max(attempts - 1, 0)
        if wanted is None:
            times.append(solver.t)
            states.append(solver.y.copy())
        else:
            dense = None
            while next_idx < len(wanted) and wanted[next_idx] <= solver.t:
                if dense is None:
                    dense = solver.dense_output()
                times.append(float(wanted[next_idx]))
                states.append(np.asarray(dense(wanted[next_idx]), dtype=complex))
                next_idx += 1
            if solver.status == "finished":
                times.append(solver.t)
                states.append(solver.y.copy())
    if times[-1] != t_final:  # pragma: no cover - solvers land on t_bound exactly
        times[-1] = t_final
    return Trajectory(np.asarray(times), np.asarray(states), steps, rejected,
                      solver.nfev, tol, method, stability)


# ---------------------------------------------------------------------------
# steady states


def _closed_form_moments(p: SystemParams, uncorrected: bool) -> np.ndarray:
    k, a, eta, eps = p.kappa, p.gain_A, p.eta, p.epsilon
    s = math.sqrt((1 - eta) * (1 + eta))
    den = k * k + k * a * eta            # kappa^2 + kappa A eta
    dsum = 2 * k + a * eta               # 2 kappa + A eta
    dminus = 2 * k - a * (1 - eta)       # 2 kappa - A (1 - eta)
    dplus = 2 * k + a * (1 + eta)        # 2 kappa + A (1 + eta)
    e2 = eps * eps
    tail = a**3 * (1 - eta * eta) * (2 - s)

    m_a = eps * (dplus - a * s) / den
    if uncorrected:
        m_b = eps * (dminus - a * s) / den
    else:
        # the sqrt term enters <b> with a plus sign; with a minus sign the
        # first-moment equations are not satisfied
        m_b = eps * (dminus + a * s) / den

    s_aa = (4 * e2 * (dplus - a * s) / (den * dminus)
            - e2 * a * s * dplus / den**2
            - e2 * tail / (dminus * den**2))
    s_bb = (4 * e2 * (dminus + a * s) / (den * dplus)
            + e2 * a * s * dminus / den**2
            + e2 * tail / (dplus * den**2))
    coherent_cross = (e2 * dminus * dplus / den**2
                      + e2 * a * a * s * (2 - s) / den**2)
    x_abdag = coherent_cross
    x_ab = k * a * s * dplus / (4 * den * dsum) + coherent_cross
    n_a = (a * (1 - eta) * (2 * k + a + a * eta) / (4 * den)
           - (k + a * eta) * a * a * (1 - eta * eta) / (4 * dsum * den)
           + s_aa)
    n_b = (k * a * a * (1 - eta * eta) / (4 * dsum * den)
           + s_bb)
    return np.array([m_a, m_b, s_aa, s_bb, n_a, n_b, x_abdag, x_ab], dtype=complex)


def steady_state_closed_form(p: SystemParams, *, uncorrected: bool = False) -> SteadyStateMoments:
    """Steady-state moments from the closed-form expressions.

    The eps**2 parts of ``<a+a>`` and ``<b+b>`` are literally the expressions
    for ``<a^2>`` and ``<b^2>``, which is how they are evaluated here.

    Parameters
    ----------
    p : SystemParams
        Requires ``eta > 0``, no vanishing denominator and stable drift.
    uncorrected : bool
        Evaluate ``<b>`` with a minus sign on the square-root term, a
        variant in circulation that fails the first-moment equations.  Only
        useful for auditing.

    Raises
    ------
    ValidityError
        If ``eta <= 0``.
    SingularSystemError
        If a denominator vanishes or the drift is not stable.
    """
    if not p.eta > 0:
        raise ValidityError(f"closed-form steady state requires eta > 0, got eta={p.eta}")
    bad = singular_denominators(p)
    if bad:
        raise SingularSystemError(f"closed-form denominator(s) vanish: {', '.join(bad)}", params=p)
    report = check_stability(p)
    if not report.stable:
        raise SingularSystemError(
            f"drift not stable (max Re eigenvalue {report.max_real_eigenvalue:.3g})", params=p)
    state = MomentState.from_array(_closed_form_moments(p, uncorrected))
    source = "closed_form_uncorrected" if uncorrected else "closed_form"
    return SteadyStateMoments(state, source, residual(state, p))


def _solve_block(name: str, m: np.ndarray, rhs: np.ndarray, p: SystemParams) -> np.ndarray:
    # singular or numerically singular blocks are reported, not silently solved
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(f"drift block {name!r} is singular (cond={cond:.3g})",
                                  block=name, params=p)
    return np.linalg.solve(m, rhs)


def steady_state_linear_solve(p: SystemParams) -> SteadyStateMoments:
    """Steady state from a direct solve of ``drift = 0``.

    Solved block by block: the 2x2 first-moment block, then the two 3x3
    second-moment blocks.  The second-moment blocks are solved for the
    centred moments (``<a^2> - <a>^2`` etc.), whose sources do not involve the
    drive; the products of means are added afterwards.  This is the same
    linear system, but it avoids recovering variances of order one from
    moments of order ``|<a>|^2`` in bright, ill-conditioned regimes.
    """
    report = check_stability(p)
    if not report.stable:
        raise SingularSystemError(
            f"drift not stable (max Re eigenvalue {report.max_real_eigenvalue:.3g}); "
            "no attracting steady state", params=p)
    blocks = drift_blocks(p)
    prep = p.prep
    g = p.gain_A * prep.rho_ac
    eps = p.epsilon

    # (<a>, <b+>)
    x = _solve_block("first", blocks["first"], -np.array([eps, eps], dtype=complex), p)
    m_a, m_b = x[0], np.conj(x[1])

    # centred (<a^2>, <b+^2>, <a b+>): no source once the means are removed
    y = _solve_block("squeeze", blocks["squeeze"], np.zeros(3), p)
    # centred (<a+a>, <b+b>, Re<a b>) and Im<a b>
    src = np.array([p.gain_A * prep.rho_aa, 0.0, 0.5 * g])
    z = _solve_block("population", blocks["population"], -src, p)
    _solve_block("coherence", blocks["coherence"], np.zeros(1), p)

    state = MomentState(
        m_a, m_b,
        y[0] + m_a * m_a,
        np.conj(y[1]) + m_b * m_b,
        z[0] + abs(m_a) ** 2,
        z[1] + abs(m_b) ** 2,
        y[2] + m_a * np.conj(m_b),
        z[2] + m_a * m_b,
    )
    return SteadyStateMoments(state, "linear_solve", residual(state, p))


def relative_deviation(value: complex, reference: complex, scale: float) -> float:
    """``|value - reference| / max(|reference|, 1e-12 * scale)``."""
    return abs(value - reference) / max(abs(reference), _ZERO_FLOOR * scale)


@dataclass(frozen=True)
class SteadyStateComparison:
    closed: SteadyStateMoments
    linear: SteadyStateMoments
    deviations: dict[str, float]
    rtol: float

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.deviations, key=self.deviations.get)
        return name, self.deviations[name]

    @property
    def suspect(self) -> bool:
        """True if the closed form disagrees with the linear solve beyond ``rtol``."""
        return self.worst[1] > self.rtol

    @property
    def mismatched(self) -> list[str]:
        return [k for k, v in self.deviations.items() if v > self.rtol]


def compare_steady_states(p: SystemParams, rtol: float = 1e-8, *, uncorrected: bool = False) -> SteadyStateComparison:
    """Evaluate both steady-state routes and report per-moment relative deviations.

    The linear solve is the reference; a disagreement marks the closed form
    suspect but both results are returned.
    """
    closed = steady_state_closed_form(p, uncorrected=uncorrected)
    linear = steady_state_linear_solve(p)
    scale = linear.state.scale
    devs = {f: relative_deviation(getattr(closed.state, f), getattr(linear.state, f), scale)
            for f in MOMENT_FIELDS}
    return SteadyStateComparison(closed, linear, devs, rtol)
