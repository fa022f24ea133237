"""Model parameters, atomic preparation and stability of the moment equations.

All rates share one arbitrary unit; the usual convention is ``kappa = 1``.
The population difference ``eta`` is the only atomic input: populations and
the (real, non-negative) coherence are always derived from it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from os import PathLike
from typing import Any, Mapping

import jsonschema
import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "SystemParams",
    "MicroscopicParams",
    "AtomicPrep",
    "DecayRates",
    "StabilityReport",
    "linear_gain",
    "derive_atomic_prep",
    "decay_rates",
    "drift_blocks",
    "check_stability",
    "singular_denominators",
    "load_params",
    "params_from_dict",
    "PARAMS_SCHEMA",
]


def _finite(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class AtomicPrep:
    """Initial atomic density-matrix elements of a pure top/bottom superposition."""

    rho_aa: float
    rho_cc: float
    rho_ac: float


@dataclass(frozen=True)
class DecayRates:
    mu_a: float
    mu_b: float
    mu: float


@dataclass(frozen=True)
class MicroscopicParams:
    """Atom-cavity coupling ``g``, injection rate ``r_a`` and decay rate ``gamma``."""

    g: float
    r_a: float
    gamma: float

    def __post_init__(self):
        for name in ("g", "r_a", "gamma"):
            value = _finite(name, getattr(self, name))
            if value <= 0:
                raise InvalidParameterError(f"{name} must be strictly positive, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class SystemParams:
    """Cavity damping, linear gain, population difference and drive amplitude.

    ``eta = 0`` is accepted (it is a legitimate limit point of every
    observable) but is reported in :attr:`flags`, because the steady-state closed
    forms only hold for ``eta > 0``.
    """

    kappa: float
    gain_A: float
    eta: float
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "gain_A", "eta", "epsilon"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.kappa <= 0:
            raise InvalidParameterError(f"kappa must be > 0, got {self.kappa}")
        if self.gain_A < 0:
            raise InvalidParameterError(f"gain_A must be >= 0, got {self.gain_A}")
        if self.epsilon < 0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError(f"eta must lie in [0, 1], got {self.eta}")

    @classmethod
    def from_microscopic(cls, kappa, micro: MicroscopicParams, eta, epsilon=0.0):
        return cls(kappa=kappa, gain_A=linear_gain(micro), eta=eta, epsilon=epsilon)

    @property
    def prep(self) -> AtomicPrep:
        return derive_atomic_prep(self.eta)

    @property
    def rates(self) -> DecayRates:
        return decay_rates(self)

    @property
    def flags(self) -> tuple[str, ...]:
        notes = []
        if self.eta == 0.0:
            notes.append("eta=0 boundary: closed forms require eta>0")
        return tuple(notes)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {"kappa": self.kappa, "gain_A": self.gain_A, "eta": self.eta, "epsilon": self.epsilon}


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real_eigenvalue: float
    eigenvalues: Mapping[str, np.ndarray] = field(repr=False)
    notes: tuple[str, ...] = ()


def linear_gain(m: MicroscopicParams) -> float:
    """Linear gain coefficient ``2 g**2 r_a / gamma**2``."""
    return 2.0 * m.g**2 * m.r_a / m.gamma**2


def derive_atomic_prep(eta) -> AtomicPrep:
    """Populations and coherence for a pure superposition with ``rho_cc - rho_aa = eta``.

    Examples
    --------
    >>> derive_atomic_prep(0.6)
    AtomicPrep(rho_aa=0.2, rho_cc=0.8, rho_ac=0.4)
    """
    eta = _finite("eta", eta)
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    rho_aa = 0.5 * (1.0 - eta)
    # rho_cc = 1 - rho_aa keeps the populations summing to one exactly
    rho_cc = 1.0 - rho_aa
    # sqrt((1-eta)(1+eta)) is better conditioned than sqrt(1-eta**2) near eta=1
    rho_ac = 0.5 * math.sqrt((1.0 - eta) * (1.0 + eta))
    return AtomicPrep(rho_aa, rho_cc, rho_ac)


def decay_rates(p: SystemParams) -> DecayRates:
    prep = p.prep
    mu_a = p.kappa - p.gain_A * prep.rho_aa
    mu_b = p.kappa + p.gain_A * prep.rho_cc
    return DecayRates(mu_a, mu_b, 0.5 * (mu_a + mu_b))


def drift_blocks(p: SystemParams) -> dict[str, np.ndarray]:
    """Drift matrices of the closed moment equations, split by coupling structure.

    Blocks and their variable ordering:

    ``first``       (<a>, <b+>)
    ``squeeze``     (<a^2>, <b+^2>, <a b+>)
    ``population``  (<a+a>, <b+b>, Re<a b>)
    ``coherence``   (Im<a b>,)

    Each block ``M`` enters as ``dx/dt = M x + f`` with ``f`` the inhomogeneity
    built from the drive and lower-order moments.
    """
    r = decay_rates(p)
    g = p.gain_A * p.prep.rho_ac
    first = np.array([[-0.5 * r.mu_a, -0.5 * g],
                      [0.5 * g, -0.5 * r.mu_b]])
    second = np.array([[-r.mu_a, 0.0, -g],
                       [0.0, -r.mu_b, g],
                       [0.5 * g, -0.5 * g, -r.mu]])
    return {
        "first": first,
        "squeeze": second,
        "population": second.copy(),
        "coherence": np.array([[-r.mu]]),
    }


def singular_denominators(p: SystemParams, atol=1e-12) -> list[str]:
    """Names of the closed-form denominators that vanish at ``p``."""
    k, a, eta = p.kappa, p.gain_A, p.eta
    scale = max(k, a, 1.0)
    found = []
    for name, value, s in (
        ("kappa^2+kappa*A*eta", k * k + k * a * eta, scale * scale),
        ("2*kappa+A*eta", 2 * k + a * eta, scale),
        ("2*kappa-A*(1-eta)", 2 * k - a * (1 - eta), scale),
    ):
        if abs(value) <= atol * s:
            found.append(name)
    return found


def check_stability(p: SystemParams) -> StabilityReport:
    blocks = drift_blocks(p)
    eigs = {name: np.linalg.eigvals(m) for name, m in blocks.items()}
    max_re = max(float(np.max(ev.real)) for ev in eigs.values())
    notes = list(p.flags)
    for name in singular_denominators(p):
        notes.append(f"closed-form denominator {name} vanishes")
    if p.gain_A > 0 and decay_rates(p).mu_a < 0:
        notes.append("mu_a<0: mode a has net single-mode gain; stability set by coupled blocks")
    stable = max_re < 0.0
    if not stable:
        notes.append(f"unstable: max Re(eigenvalue)={max_re:.6g}")
    return StabilityReport(stable, max_re, eigs, tuple(notes))


PARAMS_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "gain_A": {"type": "number", "minimum": 0},
        "g": {"type": "number", "exclusiveMinimum": 0},
        "r_a": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "eta": {"type": "number", "minimum": 0, "maximum": 1},
        "epsilon": {"type": "number", "minimum": 0},
    },
    "required": ["kappa", "eta"],
    "additionalProperties": False,
    "oneOf": [
        {"required": ["gain_A"], "not": {"anyOf": [{"required": ["g"]}, {"required": ["r_a"]}, {"required": ["gamma"]}]}},
        {"required": ["g", "r_a", "gamma"], "not": {"required": ["gain_A"]}},
    ],
}


def params_from_dict(doc: Mapping[str, Any]) -> SystemParams:
    """Validate a configuration mapping strictly and build :class:`SystemParams`.

    Either ``gain_A`` or the microscopic triple ``g, r_a, gamma`` must be given,
    never both; unknown keys are rejected.
    """
    try:
        jsonschema.validate(dict(doc), PARAMS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidParameterError(f"invalid parameter document: {exc.message}") from None
    eps = doc.get("epsilon", 0.0)
    if "gain_A" in doc:
        return SystemParams(doc["kappa"], doc["gain_A"], doc["eta"], eps)
    micro = MicroscopicParams(doc["g"], doc["r_a"], doc["gamma"])
    return SystemParams.from_microscopic(doc["kappa"], micro, doc["eta"], eps)


def load_params(path: str | PathLike) -> SystemParams:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InvalidParameterError(f"{path}: top-level JSON value must be an object")
    return params_from_dict(doc)
