"""Brute-force master-equation oracle on a truncated two-mode Fock space.

Density matrices live on ``|n_a> (x) |n_b>`` with ``n_a, n_b = 0..n_max``
(index ``n_a * (n_max + 1) + n_b``).  Superoperators act on the row-major
vectorisation ``vec(rho)[i * D + j] = rho[i, j]``, for which

    vec(X rho Y) = kron(X, Y.T) @ vec(rho).

The truncation is a hard cutoff: ladder operators are simply cut at
``n_max``.  Nothing is renormalised, so truncation error shows up in the
moments and in the population of the outermost shells.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import DOP853

from .errors import LeakageError, SingularSystemError, TruncationError
from .moments import MOMENT_FIELDS, MomentState, steady_state_linear_solve
from .params import SystemParams, check_stability

__all__ = [
    "TruncationSpec",
    "TruncatedDensityMatrix",
    "Liouvillian",
    "OracleSteadyState",
    "OracleRun",
    "TruncationReport",
    "ladder_operators",
    "build_liouvillian",
    "oracle_steady_state",
    "oracle_evolve",
    "extract_moments",
    "moment_derivative",
    "truncation_check",
]

DEFAULT_MAX_HILBERT_DIM = 441  # n_max <= 20; Liouvillian dimension ~2e5
TAIL_THRESHOLD = 1e-4
_DIRECT_SOLVE_MAX = 5_000


@dataclass(frozen=True)
class TruncationSpec:
    n_max: int
    max_hilbert_dim: int = DEFAULT_MAX_HILBERT_DIM

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise TruncationError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.dim > self.max_hilbert_dim:
            raise TruncationError(
                f"Hilbert dimension {self.dim} for n_max={self.n_max} exceeds ceiling {self.max_hilbert_dim}")

    @property
    def levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.levels**2


def ladder_operators(n_max: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Truncated annihilators ``a (x) 1`` and ``1 (x) b`` as sparse matrices."""
    n = n_max + 1
    single = sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, format="csr")
    eye = sp.identity(n, format="csr")
    return sp.kron(single, eye, format="csr"), sp.kron(eye, single, format="csr")


@dataclass(frozen=True)
class TruncatedDensityMatrix:
    matrix: np.ndarray = field(repr=False)
    n_max: int

    def __post_init__(self):
        d = (self.n_max + 1) ** 2
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix for n_max={self.n_max}, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    # constructors -------------------------------------------------------
    @classmethod
    def from_ket(cls, psi, n_max: int) -> "TruncatedDensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls(np.outer(psi, psi.conj()), n_max)

    @classmethod
    def vacuum(cls, n_max: int) -> "TruncatedDensityMatrix":
        return cls.fock(0, 0, n_max)

    @classmethod
    def fock(cls, n_a: int, n_b: int, n_max: int) -> "TruncatedDensityMatrix":
        psi = np.zeros((n_max + 1) ** 2, dtype=complex)
        psi[n_a * (n_max + 1) + n_b] = 1.0
        return cls.from_ket(psi, n_max)

    @classmethod
    def coherent(cls, alpha, beta, n_max: int) -> "TruncatedDensityMatrix":
        """Product coherent state, amplitudes cut at ``n_max`` and renormalised."""
        def amps(z):
            c = np.empty(n_max + 1, dtype=complex)
            c[0] = math.exp(-abs(z) ** 2 / 2)
            for n in range(1, n_max + 1):
                c[n] = c[n - 1] * z / math.sqrt(n)
            return c
        psi = np.kron(amps(complex(alpha)), amps(complex(beta)))
        return cls.from_ket(psi / np.linalg.norm(psi), n_max)

    # diagnostics ----------------------------------------------------------
    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def validate(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8) -> list[str]:
        """Names of violated density-matrix invariants (empty if valid)."""
        problems = []
        if self.hermiticity_error() > herm_tol:
            problems.append(f"not Hermitian (max |rho - rho^dag| = {self.hermiticity_error():.3g})")
        if abs(self.trace - 1) > trace_tol:
            problems.append(f"trace {self.trace:.12g} != 1")
        if self.min_eigenvalue() < -eig_tol:
            problems.append(f"negative eigenvalue {self.min_eigenvalue():.3g}")
        return problems

    def photon_distribution(self) -> np.ndarray:
        """``P[n_a, n_b]`` from the diagonal."""
        n = self.n_max + 1
        return np.real(np.diag(self.matrix)).reshape(n, n)

    def tail_population(self) -> float:
        """Probability of occupying the cutoff shell ``n_a = n_max`` or ``n_b = n_max``."""
        p = self.photon_distribution()
        return float(p[-1, :].sum() + p[:, -1].sum() - p[-1, -1])

    def distribution_csv(self, dest: str | PathLike | TextIO | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_a", "n_b", "probability"])
        for (i, j), prob in np.ndenumerate(self.photon_distribution()):
            w.writerow([i, j, format(float(prob), ".17g")])
        text = buf.getvalue()
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                with open(dest, "w", newline="") as fh:
                    fh.write(text)
        return text


def _pre(x, eye):
    return sp.kron(x, eye, format="csr")


def _post(y, eye):
    return sp.kron(eye, y.T, format="csr")


def _sandwich(x, y):
    return sp.kron(x, y.T, format="csr")


@dataclass(frozen=True)
class Liouvillian:
    matrix: sp.csr_matrix = field(repr=False)
    params: SystemParams
    truncation: TruncationSpec
    terms: tuple[tuple[str, float, sp.csr_matrix], ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.truncation.dim

    def apply(self, rho: np.ndarray | TruncatedDensityMatrix) -> np.ndarray:
        """``L[rho]`` as a ``D x D`` matrix."""
        m = rho.matrix if isinstance(rho, TruncatedDensityMatrix) else np.asarray(rho)
        return (self.matrix @ m.reshape(-1)).reshape(self.dim, self.dim)

    def leakage(self, rho) -> float:
        """``|trace(L[rho])|``; zero up to rounding for this cutoff scheme."""
        return float(abs(np.trace(self.apply(rho))))


def build_liouvillian(p: SystemParams, t: TruncationSpec) -> Liouvillian:
    """Superoperator of the reduced master equation, assembled term by term.

    Terms, in order: drive on a, drive on b, gain on a (``A rho_aa``), cavity
    loss on a (``kappa``), loss on b (``A rho_cc + kappa``) and the two
    atomic-coherence cross terms with ``a+ b+`` and ``a b``.  Each is kept in
    :attr:`Liouvillian.terms` for inspection.
    """
    a, b = ladder_operators(t.n_max)
    ad = a.T.tocsr()
    bd = b.T.tocsr()
    eye = sp.identity(t.dim, format="csr")
    prep = p.prep
    A, k, eps = p.gain_A, p.kappa, p.epsilon

    def drive(x, xd):
        return _pre(xd, eye) - _post(xd, eye) - _pre(x, eye) + _post(x, eye)

    def dissipator(jump, jump_dag):
        # 2 J rho J+ - J+ J rho - rho J+ J, with the product formed in the
        # truncated space
        jj = (jump_dag @ jump).tocsr()
        return 2 * _sandwich(jump, jump_dag) - _pre(jj, eye) - _post(jj, eye)

    adbd = (ad @ bd).tocsr()
    ab = (a @ b).tocsr()
    terms = (
        ("drive_a", eps, drive(a, ad)),
        ("drive_b", eps, drive(b, bd)),
        ("gain_a", 0.5 * A * prep.rho_aa, dissipator(ad, a)),
        ("loss_a", 0.5 * k, dissipator(a, ad)),
        ("loss_b", 0.5 * (A * prep.rho_cc + k), dissipator(b, bd)),
        ("coherence_adag_bdag", 0.5 * A * prep.rho_ac,
         _post(adbd, eye) + _pre(adbd, eye) - 2 * _sandwich(ad, bd)),
        # rho_ca = conj(rho_ac) = rho_ac for the real coherence used here
        ("coherence_a_b", 0.5 * A * prep.rho_ac,
         _post(ab, eye) + _pre(ab, eye) - 2 * _sandwich(b, a)),
    )
    total = sp.csr_matrix((t.dim**2, t.dim**2))
    for _, coef, op in terms:
        if coef != 0.0:
            total = total + coef * op
    total.sum_duplicates()
    total.eliminate_zeros()
    return Liouvillian(total.tocsr(), p, t, terms)


# ---------------------------------------------------------------------------
# moments


def _moment_operators(n_max: int) -> dict[str, sp.csr_matrix]:
    a, b = ladder_operators(n_max)
    ad, bd = a.T.tocsr(), b.T.tocsr()
    return {
        "m_a": a,
        "m_b": b,
        "s_aa": (a @ a).tocsr(),
        "s_bb": (b @ b).tocsr(),
        "n_a": (ad @ a).tocsr(),
        "n_b": (bd @ b).tocsr(),
        "x_abdag": (a @ bd).tocsr(),
        "x_ab": (a @ b).tocsr(),
    }


def _expectations(matrix: np.ndarray, n_max: int) -> MomentState:
    # Tr(rho O) = sum_ij rho_ij O_ji
    ops = _moment_operators(n_max)
    return MomentState(**{f: complex(ops[f].T.multiply(matrix).sum()) for f in MOMENT_FIELDS})


def extract_moments(rho: TruncatedDensityMatrix) -> MomentState:
    """The eight stored moments as ``Tr(rho O)`` with truncated operators."""
    return _expectations(rho.matrix, rho.n_max)


def moment_derivative(rho: TruncatedDensityMatrix, liouvillian: Liouvillian) -> MomentState:
    """``d<O>/dt = Tr(L[rho] O)`` for each stored moment."""
    return _expectations(liouvillian.apply(rho), rho.n_max)


# ---------------------------------------------------------------------------
# steady state


@dataclass(frozen=True)
class OracleSteadyState:
    rho: TruncatedDensityMatrix
    solver: str
    residual: float  # max |L[rho]|

    @property
    def moments(self) -> MomentState:
        return extract_moments(self.rho)


def _predicted_occupation(p: SystemParams) -> float:
    s = steady_state_linear_solve(p).state
    return max(s.n_a.real, s.n_b.real)


def _constrained_system(L: sp.csr_matrix, dim: int):
    # replace the first equation (the <0,0|L[rho]|0,0> row) by trace(rho) = 1
    n = dim * dim
    keep = sp.diags((np.arange(n) != 0).astype(float), format="csr")
    trace_row = sp.csr_matrix((np.ones(dim), (np.zeros(dim, dtype=int), np.arange(dim) * (dim + 1))),
                              shape=(n, n))
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return (keep @ L + trace_row).tocsc(), rhs


def _finalise(vec: np.ndarray, dim: int, n_max: int) -> TruncatedDensityMatrix:
    m = vec.reshape(dim, dim)
    m = 0.5 * (m + m.conj().T)
    return TruncatedDensityMatrix(m / np.trace(m).real, n_max)


def _relaxation_time(p: SystemParams) -> float:
    slowest = -check_stability(p).max_real_eigenvalue
    return 1.0 / slowest


def oracle_steady_state(p: SystemParams, t: TruncationSpec, *, method: str = "auto",
                        check_budget: bool = True, residual_tol: float = 1e-10) -> OracleSteadyState:
    """Steady state of the truncated master equation.

    ``method`` is ``"direct"`` (sparse LU of the trace-constrained system),
    ``"gmres"`` (ILU-preconditioned GMRES on the same system), ``"evolve"``
    (long-time propagation with ``expm_multiply``) or ``"auto"``: direct for
    small systems, GMRES otherwise, falling back to propagation when the
    solve does not reach ``residual_tol``.
    """
    report = check_stability(p)
    if not report.stable:
        raise SingularSystemError("drift not stable; the oracle has no steady state to find", params=p)
    if check_budget:
        occ = _predicted_occupation(p)
        if occ > t.n_max / 3:
            raise TruncationError(
                f"predicted occupation {occ:.3g} per mode exceeds budget n_max/3 = {t.n_max / 3:.3g}")
    liou = build_liouvillian(p, t)
    L = liou.matrix
    dim = t.dim

    if method == "auto":
        order = ["direct" if dim * dim <= _DIRECT_SOLVE_MAX else "gmres", "evolve"]
    elif method in ("direct", "gmres", "evolve"):
        order = [method]
    else:
        raise ValueError(f"unknown method {method!r}")

    last = None
    for path in order:
        if path == "evolve":
            vec = TruncatedDensityMatrix.vacuum(t.n_max).matrix.reshape(-1)
            if last is not None:
                vec = last
            # relax for 40 slowest-decay times: e^-40 ~ 4e-18
            vec = spla.expm_multiply(L * (40.0 * _relaxation_time(p)), vec)
        else:
            M, rhs = _constrained_system(L, dim)
            if path == "direct":
                vec = spla.splu(M, permc_spec="MMD_AT_PLUS_A").solve(rhs)
            else:
                ilu = spla.spilu(M, drop_tol=1e-3, fill_factor=5)
                prec = spla.LinearOperator(M.shape, ilu.solve, dtype=float)
                vec, info = spla.gmres(M, rhs, M=prec, rtol=1e-14, atol=0.0, restart=200, maxiter=200)
                if info != 0:
                    last = vec
                    continue
        rho = _finalise(np.asarray(vec, dtype=complex), dim, t.n_max)
        res = float(np.max(np.abs(liou.apply(rho))))
        if res <= residual_tol or path == order[-1]:
            return OracleSteadyState(rho, path, res)
        last = rho.matrix.reshape(-1)
    raise SingularSystemError("oracle steady-state solve failed", params=p)  # pragma: no cover


# ---------------------------------------------------------------------------
# transient evolution


@dataclass(frozen=True)
class OracleRun:
    times: np.ndarray
    states: tuple[TruncatedDensityMatrix, ...] = field(repr=False)
    steps: int
    max_trace_drift: float
    max_hermiticity_error: float

    @property
    def final(self) -> TruncatedDensityMatrix:
        return self.states[-1]

    def moments(self) -> list[MomentState]:
        return [extract_moments(r) for r in self.states]


def oracle_evolve(rho0: TruncatedDensityMatrix, p: SystemParams, t_final: float, t: TruncationSpec,
                  *, tol: float = 1e-10, sample_times: Iterable[float] | None = None,
                  trace_bound: float = 1e-6) -> OracleRun:
    """Propagate ``d rho/dt = L[rho]`` with adaptive Dormand-Prince steps.

    Trace and Hermiticity are checked after every accepted step; a trace drift
    beyond ``trace_bound`` aborts with :class:`LeakageError`.  Returns samples
    at ``sample_times`` (plus ``t_final``), or only ``t_final`` if none given.
    """
    if rho0.n_max != t.n_max:
        raise TruncationError(f"rho0 has n_max={rho0.n_max}, truncation has n_max={t.n_max}")
    if not t_final > 0:
        raise ValueError("t_final must be > 0")
    problems = rho0.validate()
    if problems:
        raise ValueError("invalid initial density matrix: " + "; ".join(problems))
    liou = build_liouvillian(p, t)
    L = liou.matrix
    dim = t.dim
    wanted = np.unique(np.asarray(list(() if sample_times is None else sample_times), dtype=float))
    wanted = wanted[(wanted >= 0) & (wanted < t_final)]

    solver = DOP853(lambda _, y: L @ y, 0.0, rho0.matrix.reshape(-1).copy(), t_final, rtol=tol, atol=tol)
    times, states = [], []
    idx = 0
    while idx < len(wanted) and wanted[idx] == 0.0:
        times.append(0.0)
        states.append(rho0)
        idx += 1
    steps = 0
    drift = herm = 0.0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise LeakageError(f"oracle integration failed at t={solver.t:.6g}: {msg}")
        steps += 1
        m = solver.y.reshape(dim, dim)
        drift = max(drift, abs(np.trace(m) - 1))
        herm = max(herm, float(np.max(np.abs(m - m.conj().T))))
        if drift > trace_bound:
            raise LeakageError(f"trace drift {drift:.3g} exceeds {trace_bound:g} at t={solver.t:.6g}")
        if idx < len(wanted) and wanted[idx] <= solver.t:
            dense = solver.dense_output()
            while idx < len(wanted) and wanted[idx] <= solver.t:
                times.append(float(wanted[idx]))
                states.append(TruncatedDensityMatrix(dense(wanted[idx]).reshape(dim, dim), t.n_max))
                idx += 1
    times.append(solver.t)
    states.append(TruncatedDensityMatrix(solver.y.reshape(dim, dim).copy(), t.n_max))
    return OracleRun(np.asarray(times), tuple(states), steps, float(drift), herm)


# ---------------------------------------------------------------------------
# truncation convergence


@dataclass(frozen=True)
class TruncationReport:
    n_max: int
    n_max_check: int
    deltas: dict[str, float]
    tail_population: float
    flags: tuple[str, ...]

    @property
    def max_delta(self) -> float:
        return max(self.deltas.values())


def truncation_check(p: SystemParams, t: TruncationSpec, step: int = 4, **solve_kw) -> TruncationReport:
    """Compare oracle steady-state moments at ``n_max`` and ``n_max + step``."""
    hi = TruncationSpec(t.n_max + step, max(t.max_hilbert_dim, (t.n_max + step + 1) ** 2))
    lo_ss = oracle_steady_state(p, t, **solve_kw)
    hi_ss = oracle_steady_state(p, hi, **solve_kw)
    lo_m, hi_m = lo_ss.moments, hi_ss.moments
    deltas = {f: abs(getattr(lo_m, f) - getattr(hi_m, f)) for f in MOMENT_FIELDS}
    tail = lo_ss.rho.tail_population()
    flags = ("increase n_max",) if tail > TAIL_THRESHOLD else ()
    return TruncationReport(t.n_max, hi.n_max, deltas, tail, flags)
