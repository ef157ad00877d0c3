"""Convex power curves and the analytic quantities derived from them.

A server running at speed ``s`` draws ``P(s) = offset + c * s**alpha``.
The potential-function analysis works with the marginal power at a given
load level, ``delta(beta) = P'(P^{-1}(beta))``, and with its partial sums
``f_sum(i, a) = sum_{j=1..i} delta(j / a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class PowerDomainError(ValueError):
    """A speed, power or load argument outside the domain of ``P``."""


class SpeedCapError(ValueError):
    """A speed above the configured cap was evaluated."""


_BISECT_TOL = 1e-12


@dataclass(frozen=True)
class PowerFunction:
    """``P(s) = offset + coefficient * s**exponent`` on ``[0, speed_cap]``.

    ``offset`` defaults to zero, which is the canonical monomial family.  A
    nonzero offset models static power; its inverse is found by bisection.
    """

    coefficient: float = 1.0
    exponent: float = 2.0
    speed_cap: Optional[float] = None
    offset: float = 0.0

    def __post_init__(self):
        if not (self.coefficient > 0 and math.isfinite(self.coefficient)):
            raise PowerDomainError(f"coefficient must be positive, got {self.coefficient}")
        if not (self.exponent > 1 and math.isfinite(self.exponent)):
            raise PowerDomainError(f"exponent must exceed 1, got {self.exponent}")
        if self.offset < 0:
            raise PowerDomainError(f"offset must be nonnegative, got {self.offset}")
        if self.speed_cap is not None:
            if not self.speed_cap > 0:
                raise PowerDomainError(f"speed cap must be positive, got {self.speed_cap}")
            # the drift bound for downstream servers needs P(B) > 1
            if not self._raw(self.speed_cap) > 1:
                raise PowerDomainError(
                    f"speed cap {self.speed_cap} gives P(B) = {self._raw(self.speed_cap)} <= 1")

    # ------------------------------------------------------------------
    # basic curve
    # ------------------------------------------------------------------
    def _raw(self, s: float) -> float:
        return self.offset + self.coefficient * s ** self.exponent

    def __call__(self, s: float) -> float:
        return self.eval(s)

    def eval(self, s: float) -> float:
        if s < 0:
            raise PowerDomainError(f"negative speed {s}")
        if self.speed_cap is not None and s > self.speed_cap * (1 + 1e-12):
            raise SpeedCapError(f"speed {s} exceeds cap {self.speed_cap}")
        return self._raw(s)

    def derivative(self, s: float) -> float:
        if s < 0:
            raise PowerDomainError(f"negative speed {s}")
        if s == 0:
            return 0.0
        return self.coefficient * self.exponent * s ** (self.exponent - 1)

    def _unclamped_inverse(self, p: float) -> float:
        if p < 0:
            raise PowerDomainError(f"negative power {p}")
        if self.offset == 0:
            return (p / self.coefficient) ** (1.0 / self.exponent)
        if p <= self.offset:
            return 0.0
        # numeric path for the affine-offset family
        lo, hi = 0.0, 1.0
        while self._raw(hi) < p:
            hi *= 2.0
        while hi - lo > _BISECT_TOL * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self._raw(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def inverse(self, p: float) -> float:
        """Speed at which the server draws power ``p``, clamped to the cap."""
        s = self._unclamped_inverse(p)
        if self.speed_cap is not None and s > self.speed_cap:
            return self.speed_cap
        return s

    # ------------------------------------------------------------------
    # quantities used by the potential analysis
    # ------------------------------------------------------------------
    def delta(self, beta: float) -> float:
        """Marginal power ``P'(P^{-1}(beta))``.

        Uses the uncapped inverse: this is an analysis weight, not a speed.
        """
        if beta < 0:
            raise PowerDomainError(f"negative load ratio {beta}")
        if self.offset == 0:
            c, a = self.coefficient, self.exponent
            return c * a * (beta / c) ** ((a - 1) / a)
        return self.derivative(self._unclamped_inverse(beta))

    def f_sum(self, i: int, a: int) -> float:
        if i < 0 or a < 1:
            raise PowerDomainError(f"f_sum needs i >= 0 and a >= 1, got i={i}, a={a}")
        return math.fsum(self.delta(j / a) for j in range(1, i + 1))

    def critical_speed(self) -> float:
        """Minimiser ``s*`` of ``(1 + P(s)) / s``; solves ``1 + P(s) = s P'(s)``."""
        c, a = self.coefficient, self.exponent
        return ((1.0 + self.offset) / (c * (a - 1))) ** (1.0 / a)

    def per_job_opt_cost(self) -> float:
        """Least cost of pushing one unit of work through one server, ``P'(s*)``."""
        return self.derivative(self.critical_speed())

    # ------------------------------------------------------------------
    # serialisation
    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"c": self.coefficient, "alpha": self.exponent, "cap": self.speed_cap}
        if self.offset:
            d["offset"] = self.offset
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PowerFunction":
        return cls(coefficient=float(d["c"]), exponent=float(d["alpha"]),
                   speed_cap=None if d.get("cap") is None else float(d["cap"]),
                   offset=float(d.get("offset", 0.0)))

    @classmethod
    def parse(cls, text: str) -> "PowerFunction":
        """Parse the command-line form ``c,alpha[,cap]``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) not in (2, 3):
            raise ValueError(f"power spec must be 'c,alpha[,cap]', got {text!r}")
        cap = float(parts[2]) if len(parts) == 3 else None
        return cls(float(parts[0]), float(parts[1]), cap)


def tangent_gap(pf: PowerFunction, s: float, s_tilde: float, beta: float) -> float:
    """Right side minus left side of the tangent-line inequality

    ``delta(beta) * (s_tilde - s) <= (P^{-1}(beta) - s) * P'(P^{-1}(beta)) + P(s_tilde) - beta``.

    Nonnegative for every convex increasing ``P``.
    """
    x = pf._unclamped_inverse(beta)
    d = pf.derivative(x)
    lhs = d * (s_tilde - s)
    rhs = (x - s) * d + pf._raw(s_tilde) - beta
    return rhs - lhs
