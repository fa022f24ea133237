"""Quadrature squeezing, the Duan inseparability witness and mean photon number.

Operator conventions (commutators ``[a, a+] = [b, b+] = 1``, modes commute):

    c = (a + b)/sqrt(2),   c+ = c + c^dag,   c- = i (c^dag - c)
    d = (a - b)/sqrt(2),   d+ = d + d^dag,   d- = i (d^dag - d)
    x_j = (j + j^dag)/sqrt(2),   p_j = i (j^dag - j)/sqrt(2)

so that every vacuum quadrature variance of ``c+-`` and ``d+-`` equals one and
``x_j, p_j`` have vacuum variance 1/2.  Note ``c+ = x_a + x_b``,
``c- = p_a + p_b``, ``d+ = x_a - x_b`` and ``d- = p_a - p_b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnphysicalStateError, ValidityError, SingularSystemError
from .moments import MomentState, steady_state_closed_form, steady_state_linear_solve
from .params import SystemParams, check_stability, singular_denominators

__all__ = [
    "QuadratureVariances",
    "DuanWitness",
    "ObservablesReport",
    "REPORT_COLUMNS",
    "variances_from_moments",
    "variances_closed_form",
    "quadrature_covariance",
    "duan_sum",
    "duan_closed_form",
    "mean_photon_closed_form",
    "mean_photon_from_moments",
    "observables_closed_form",
    "observables_from_moments",
]

REPORT_COLUMNS = ("kappa", "gain_A", "eta", "epsilon", "dc_plus", "dc_minus", "dd_plus",
                  "dd_minus", "duan_sum", "duan_bound", "entangled", "mean_photon", "source")

# |Im| / |Re| allowed on quantities that must be real
_IMAG_GUARD = 1e-8


@dataclass(frozen=True)
class QuadratureVariances:
    dc_plus: float
    dc_minus: float
    dd_plus: float
    dd_minus: float

    @property
    def sum_squeezed(self) -> bool:
        """Either sum-mode quadrature below the vacuum level."""
        return min(self.dc_plus, self.dc_minus) < 1.0

    @property
    def difference_squeezed(self) -> bool:
        return min(self.dd_plus, self.dd_minus) < 1.0

    def uncertainty_products(self) -> tuple[float, float]:
        return self.dc_plus * self.dc_minus, self.dd_plus * self.dd_minus


@dataclass(frozen=True)
class DuanWitness:
    """Duan sum ``Var(u) + Var(v)`` for ``u = |z| x_a + x_b/z``, ``v = |z| p_a - p_b/z``.

    ``bound`` is the separability threshold ``z**2 + 1/z**2`` appropriate to
    quadratures with vacuum variance 1/2 (equal to 2 at ``z = -1``).
    ``unit_vacuum_bound`` is ``2 (z**2 + 1/z**2)``, the same threshold for
    quadratures normalised to vacuum variance 1; it is reported but not used.
    """

    z: float
    sum_uv: float
    bound: float
    unit_vacuum_bound: float

    @property
    def entangled(self) -> bool:
        return self.sum_uv < self.bound

    @property
    def notes(self) -> str:
        return (f"verdict uses bound z^2+1/z^2={self.bound:g}; "
                f"2(z^2+1/z^2)={self.unit_vacuum_bound:g} applies to unit-vacuum quadratures, not used")


@dataclass(frozen=True)
class ObservablesReport:
    params: SystemParams
    variances: QuadratureVariances
    duan: DuanWitness
    mean_photon: float
    source: str  # "closed_form" | "from_moments" | "fock_oracle"

    def to_row(self) -> dict[str, object]:
        v = self.variances
        return {
            **self.params.as_dict(),
            "dc_plus": v.dc_plus,
            "dc_minus": v.dc_minus,
            "dd_plus": v.dd_plus,
            "dd_minus": v.dd_minus,
            "duan_sum": self.duan.sum_uv,
            "duan_bound": self.duan.bound,
            "entangled": self.duan.entangled,
            "mean_photon": self.mean_photon,
            "source": self.source,
        }


def _real(value: complex, what: str) -> float:
    value = complex(value)
    if abs(value.imag) > _IMAG_GUARD * max(abs(value.real), 1.0):
        raise UnphysicalStateError(f"{what} has imaginary part {value.imag:.3g} (real {value.real:.6g})")
    return value.real


def _check_closed_form_domain(p: SystemParams):
    if not p.eta > 0:
        raise ValidityError(f"closed forms require eta > 0, got eta={p.eta}")
    bad = [d for d in singular_denominators(p) if d != "2*kappa-A*(1-eta)"]
    if bad:
        raise SingularSystemError(f"denominator(s) vanish: {', '.join(bad)}", params=p)
    if not check_stability(p).stable:
        raise SingularSystemError("drift not stable", params=p)


def variances_from_moments(s: MomentState) -> QuadratureVariances:
    """Quadrature variances of the sum and difference modes from the moments.

    With centred operators ``dc = c - <c>``::

        Var(c+-) = 1 + 2<dc+ dc> +- (<dc^2> + <dc+^2>)

    where the 1 is ``[c, c+]``; likewise for ``d``.  Centring first (instead of
    subtracting squared means at the end) limits cancellation in bright states.
    """
    conj = np.conjugate
    m_a, m_b = s.m_a, s.m_b
    # centred second moments: <A B> - <A><B>
    n_a = s.n_a - conj(m_a) * m_a
    n_b = s.n_b - conj(m_b) * m_b
    s_aa = s.s_aa - m_a * m_a
    s_bb = s.s_bb - m_b * m_b
    x_abdag = s.x_abdag - m_a * conj(m_b)
    x_ab = s.x_ab - m_a * m_b

    def pair(sign):
        # <c+c> and <c^2> (sign=+1) or <d+d> and <d^2> (sign=-1), centred
        occ = 0.5 * (n_a + n_b + sign * (x_abdag + conj(x_abdag)))
        sq = 0.5 * (s_aa + s_bb + sign * 2 * x_ab)
        plus = 1 + 2 * occ + (sq + conj(sq))
        minus = 1 + 2 * occ - (sq + conj(sq))
        return plus, minus

    cp, cm = pair(+1)
    dp, dm = pair(-1)
    return QuadratureVariances(_real(cp, "Var(c+)"), _real(cm, "Var(c-)"),
                               _real(dp, "Var(d+)"), _real(dm, "Var(d-)"))


def variances_closed_form(p: SystemParams) -> QuadratureVariances:
    """Steady-state quadrature variances from the closed-form expressions.

    Independent of the drive amplitude.  ``dc_minus == dd_plus`` and
    ``dc_plus == dd_minus`` hold identically.
    """
    _check_closed_form_domain(p)
    k, a, eta = p.kappa, p.gain_A, p.eta
    s = math.sqrt((1 - eta) * (1 + eta))
    den = 2 * (2 * k + a * eta) * (k + a * eta)
    base = a * a * (1 - eta * eta)
    lead = 2 * k + a + a * eta
    plus = (base + lead * (2 * k + a * eta + a * s)) / den
    minus = (base + lead * (2 * k + a * eta - a * s)) / den
    return QuadratureVariances(dc_plus=plus, dc_minus=minus, dd_plus=minus, dd_minus=plus)


def quadrature_covariance(s: MomentState) -> tuple[np.ndarray, np.ndarray]:
    """Means and symmetrised covariance matrix of ``(x_a, p_a, x_b, p_b)``.

    ``V[i, j] = <{r_i, r_j}>/2 - <r_i><r_j>``.  Single-mode entries carry the
    ordering constant 1/2 from ``[a, a+] = 1``; cross-mode operators commute.
    """
    m_a, m_b = s.m_a, s.m_b
    means = math.sqrt(2.0) * np.array([m_a.real, m_a.imag, m_b.real, m_b.imag])

    def single(n, sq, m):
        n_c = (n - np.conj(m) * m).real
        sq_c = sq - m * m
        xx = n_c + sq_c.real + 0.5
        pp = n_c - sq_c.real + 0.5
        xp = sq_c.imag
        return xx, pp, xp

    xxa, ppa, xpa = single(s.n_a, s.s_aa, m_a)
    xxb, ppb, xpb = single(s.n_b, s.s_bb, m_b)
    ab = s.x_ab - m_a * m_b
    abd = s.x_abdag - m_a * np.conj(m_b)
    xaxb = ab.real + abd.real
    papb = -ab.real + abd.real
    xapb = ab.imag - abd.imag
    paxb = ab.imag + abd.imag
    cov = np.array([
        [xxa, xpa, xaxb, xapb],
        [xpa, ppa, paxb, papb],
        [xaxb, paxb, xxb, xpb],
        [xapb, papb, xpb, ppb],
    ])
    return means, cov


def duan_sum(s: MomentState, z: float = -1.0) -> DuanWitness:
    """Duan witness at real ``z != 0``; at ``z = -1`` it equals ``2 Var(c-)``."""
    z = float(z)
    if z == 0.0 or not math.isfinite(z):
        raise ValueError(f"z must be a finite non-zero real number, got {z}")
    _, cov = quadrature_covariance(s)
    wu = np.array([abs(z), 0.0, 1.0 / z, 0.0])
    wv = np.array([0.0, abs(z), 0.0, -1.0 / z])
    total = float(wu @ cov @ wu + wv @ cov @ wv)
    return DuanWitness(z, total, z * z + 1.0 / (z * z), 2.0 * (z * z + 1.0 / (z * z)))


def duan_closed_form(p: SystemParams) -> DuanWitness:
    """Duan sum at ``z = -1`` from the closed form (twice the squeezed variance)."""
    _check_closed_form_domain(p)
    k, a, eta = p.kappa, p.gain_A, p.eta
    s = math.sqrt((1 - eta) * (1 + eta))
    total = ((a * a * (1 - eta * eta) + (2 * k + a + a * eta) * (2 * k + a * eta - a * s))
             / ((2 * k + a * eta) * (k + a * eta)))
    return DuanWitness(-1.0, total, 2.0, 4.0)


def mean_photon_closed_form(p: SystemParams) -> float:
    _check_closed_form_domain(p)
    k, a, eta, eps = p.kappa, p.gain_A, p.eta, p.epsilon
    s = math.sqrt((1 - eta) * (1 + eta))
    den = k * k + k * a * eta
    return (a * (1 - eta) * (2 * k + a + a * eta) / (4 * den)
            - a**3 * eta * (1 - eta * eta) / (4 * den * (2 * k + a * eta))
            + 4 * eps * eps * (a * a * (1 - s) + 2 * den) / den**2)


def mean_photon_from_moments(s: MomentState, tol: float = 1e-12) -> float:
    """Total photon number ``<a+a> + <b+b>``.

    Also evaluates ``<c+c> + <d+d>`` and checks it agrees to ``tol``
    (relative to the photon number, floored at one).
    """
    n_total = complex(s.n_a + s.n_b)
    cd = (0.5 * (s.n_a + s.n_b + s.x_abdag + np.conj(s.x_abdag))
          + 0.5 * (s.n_a + s.n_b - s.x_abdag - np.conj(s.x_abdag)))
    if abs(cd - n_total) > tol * max(1.0, abs(n_total)):
        raise UnphysicalStateError(f"<c+c>+<d+d>={cd} differs from <a+a>+<b+b>={n_total}")
    n = _real(n_total, "<N>")
    if n < -1e-9 * max(1.0, abs(n)):
        raise UnphysicalStateError(f"negative mean photon number {n:.6g}")
    return n


def observables_closed_form(p: SystemParams, z: float = -1.0) -> ObservablesReport:
    """All observables from the closed-form expressions (``eta > 0`` only)."""
    variances = variances_closed_form(p)
    if z == -1.0:
        duan = duan_closed_form(p)
    else:
        duan = duan_sum(steady_state_closed_form(p).state, z)
    return ObservablesReport(p, variances, duan, mean_photon_closed_form(p), "closed_form")


def observables_from_moments(p: SystemParams, s: MomentState | None = None, z: float = -1.0,
                             source: str = "from_moments") -> ObservablesReport:
    """All observables evaluated on moments ``s`` (default: linear-solve steady state)."""
    if s is None:
        s = steady_state_linear_solve(p).state
    return ObservablesReport(p, variances_from_moments(s), duan_sum(s, z),
                             mean_photon_from_moments(s), source)
