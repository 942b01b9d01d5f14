"""Double-well potentials Psi = Psi0 - (theta0/2) r^2 and their derivatives.

Two kinds are provided: the singular logarithmic (Flory-Huggins) potential
and the quartic approximation 1/4 (1 - r^2)^2.  All evaluations are
vectorized; scalars in give floats out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import lambertw, xlogy

KINDS = ("logarithmic", "quartic")


class DomainError(ValueError):
    """Evaluation requested outside the domain of the singular potential."""


@dataclass
class Potential:
    kind: str = "logarithmic"
    theta: float = 0.8
    theta0: float = 1.0
    eps_barrier: float = 1e-12
    # evaluations clamped inside the barrier; should stay 0 in nominal runs
    clamp_events: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not (0.0 < self.eps_barrier <= 1e-6):
            raise ValueError("eps_barrier must lie in (0, 1e-6]")
        if self.kind == "logarithmic":
            if not self.theta > 0:
                raise ValueError("logarithmic potential needs theta > 0")
            if not self.theta < self.theta0:
                warnings.warn(
                    f"theta={self.theta} >= theta0={self.theta0}: potential has no double well",
                    stacklevel=2,
                )
        elif self.theta0 != 1.0:
            raise ValueError("quartic potential uses the fixed split with theta0 = 1")

    @classmethod
    def quartic(cls):
        return cls(kind="quartic", theta=0.0, theta0=1.0)

    @property
    def singular(self) -> bool:
        return self.kind == "logarithmic"

    @property
    def convexity(self) -> float:
        """Lower bound of Psi0'' on the domain."""
        return self.theta if self.singular else 0.0

    def _closed(self, r):
        r = np.asarray(r, dtype=float)
        if self.singular and np.any(np.abs(r) > 1.0):
            raise DomainError("potential evaluated outside [-1, 1]")
        return r

    def _open(self, r):
        r = np.asarray(r, dtype=float)
        if not self.singular:
            return r
        a = np.abs(r)
        if np.any(a >= 1.0) or np.any(np.isnan(r)):
            raise DomainError("singular derivative evaluated at |r| >= 1")
        lim = 1.0 - self.eps_barrier
        near = a >= lim
        if np.any(near):
            self.clamp_events += int(np.count_nonzero(near))
            r = np.where(near, np.sign(r) * lim, r)
        return r

    @staticmethod
    def _out(x):
        return float(x) if np.ndim(x) == 0 else x

    def psi0(self, r):
        r = self._closed(r)
        if self.singular:
            val = 0.5 * self.theta * (xlogy(1.0 - r, 1.0 - r) + xlogy(1.0 + r, 1.0 + r)) + 0.5 * self.theta0
        else:
            val = 0.25 * r**4 + 0.25
        return self._out(val)

    def psi(self, r):
        r = self._closed(r)
        if self.singular:
            val = 0.5 * self.theta * (xlogy(1.0 - r, 1.0 - r) + xlogy(1.0 + r, 1.0 + r)) + 0.5 * self.theta0 * (
                1.0 - r * r
            )
        else:
            val = 0.25 * (1.0 - r * r) ** 2
        return self._out(val)

    def psi0_prime(self, r):
        r = self._open(r)
        if self.singular:
            val = self.theta * np.arctanh(r)
        else:
            val = r**3
        return self._out(val)

    def psi0_second(self, r):
        r = self._open(r)
        if self.singular:
            val = self.theta / ((1.0 - r) * (1.0 + r))
        else:
            val = 3.0 * r * r
        return self._out(val)

    def psi_prime(self, r):
        return self._out(np.asarray(self.psi0_prime(r)) - self.theta0 * np.asarray(r, dtype=float))

    def psi_second(self, r):
        return self._out(np.asarray(self.psi0_second(r)) - self.theta0)

    def minimum(self) -> float:
        """min of Psi over the admissible range (exact for both kinds)."""
        if not self.singular:
            return 0.0
        if self.theta >= self.theta0:
            return self.psi(0.0)
        # minimizers solve theta * artanh(r) = theta0 * r; bisection on (0, 1)
        lo, hi = 1e-12, 1.0 - 1e-16
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.theta * math.atanh(mid) - self.theta0 * mid < 0.0:
                lo = mid
            else:
                hi = mid
        return self.psi(0.5 * (lo + hi))


@dataclass
class HypothesisReport:
    ok: bool
    growth_constant: float
    growth_bound: float
    min_convexity_ratio: float
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def first_violation(self):
        return self.violations[0] if self.violations else None


def validate_hypotheses(p: Potential, n_samples: int = 2001, eps0: float = 0.5) -> HypothesisReport:
    """Sample the potential and check convexity, monotonicity near +-1 and growth.

    Checks Psi0'' >= theta, that Psi0'' is monotone on [1 - eps0, 1) and on
    (-1, -1 + eps0], and finds the smallest C with
    Psi0''(r) <= C exp(C |Psi0'(r)|) over the samples.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    r = np.linspace(-1.0 + 1e-8, 1.0 - 1e-8, n_samples)
    d1 = np.abs(np.asarray(p.psi0_prime(r), dtype=float))
    d2 = np.asarray(p.psi0_second(r), dtype=float)
    theta = p.convexity
    violations = []
    notes = []

    bad = np.nonzero(d2 < theta * (1.0 - 1e-12))[0]
    for k in bad:
        violations.append((float(r[k]), "convexity", f"Psi0''={d2[k]:.6g} < theta={theta:.6g}"))

    if p.singular:
        upper = r >= 1.0 - eps0
        lower = r <= -1.0 + eps0
        inc = np.diff(d2[upper])
        for k in np.nonzero(inc < 0)[0]:
            violations.append((float(r[upper][k + 1]), "monotonicity", "Psi0'' decreasing near +1"))
        dec = np.diff(d2[lower])
        for k in np.nonzero(dec > 0)[0]:
            violations.append((float(r[lower][k]), "monotonicity", "Psi0'' increasing near -1"))
    else:
        notes.append("quartic kind: Psi0'' is bounded; singular-limit checks skipped")

    # smallest C per sample solves C exp(C a) = b, i.e. C = W(a b) / a
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(d1 > 0, np.real(lambertw(d1 * d2)) / np.where(d1 > 0, d1, 1.0), d2)
    growth = float(np.max(c))
    bound = max(2.0 / theta, theta, 1.0) if theta > 0 else math.inf
    if growth > bound:
        k = int(np.argmax(c))
        violations.append((float(r[k]), "growth", f"needs C={growth:.6g} > {bound:.6g}"))

    with np.errstate(divide="ignore"):
        ratio = float(np.min(d2) / theta) if theta > 0 else math.inf
    return HypothesisReport(not violations, growth, bound, ratio, violations, notes)
