"""Parametric thermal boson bath.

The sign convention throughout is ``omega = E_final - E_initial``: a positive
argument is an upward (absorptive) transition and is weighted by the Bose
occupation ``N``, a negative one by ``N + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ValidationError

FAMILIES = ("ohmic_exp_cutoff", "flat")


@dataclass(frozen=True)
class BathSpec:
    """Spectral-density family, coupling scale, cutoff and inverse temperature.

    ``coupling`` is the ohmic prefactor for ``ohmic_exp_cutoff`` and the
    constant rate for ``flat``. ``cutoff`` is ignored by ``flat``.
    ``beta = math.inf`` means zero temperature.
    """

    family: str = "flat"
    coupling: float = 1.0
    cutoff: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        problems = []
        if self.family not in FAMILIES:
            problems.append(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not (self.coupling > 0 and math.isfinite(self.coupling)):
            problems.append(f"coupling must be positive and finite, got {self.coupling}")
        if not (self.cutoff > 0 and math.isfinite(self.cutoff)):
            problems.append(f"cutoff must be positive and finite, got {self.cutoff}")
        if not self.beta > 0:
            problems.append(f"beta must be positive (inf allowed), got {self.beta}")
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def to_json(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "coupling": self.coupling,
            "cutoff": self.cutoff,
            "beta": "inf" if self.zero_temperature else self.beta,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> BathSpec:
        beta = obj.get("beta", 1.0)
        beta = math.inf if beta == "inf" else float(beta)
        return cls(
            family=obj.get("family", "flat"),
            coupling=float(obj.get("coupling", 1.0)),
            cutoff=float(obj.get("cutoff", 1.0)),
            beta=beta,
        )


def spectral_density(bath: BathSpec, omega):
    """``J(omega)``; ``eta * omega * exp(-omega/omega_c)`` or the flat constant."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValidationError("spectral density is defined for omega >= 0 only")
    if bath.family == "flat":
        out = np.full_like(w, bath.coupling)
    else:
        out = bath.coupling * w * np.exp(-w / bath.cutoff)
    return out if out.ndim else float(out)


def bose_occupation(bath: BathSpec, omega):
    """``1 / (exp(beta omega) - 1)``; zero at zero temperature."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValidationError("Bose occupation requires omega > 0")
    if bath.zero_temperature:
        out = np.zeros_like(w)
    else:
        x = bath.beta * w
        # exp(-x) / (1 - exp(-x)) avoids overflow at large x
        out = np.exp(-x) / -np.expm1(-x)
    return out if out.ndim else float(out)


def rate(bath: BathSpec, omega):
    """Bath part of the transition rate for a gap ``omega = E_final - E_initial``.

    ``J(w) N(w)`` for ``w > 0``, ``J(|w|) (N(|w|) + 1)`` for ``w < 0`` and
    zero at ``w == 0``.
    """
    w = np.asarray(omega, dtype=float)
    out = np.zeros_like(w)
    up = w > 0
    down = w < 0
    if up.any():
        out[up] = spectral_density(bath, w[up]) * bose_occupation(bath, w[up])
    if down.any():
        a = -w[down]
        out[down] = spectral_density(bath, a) * (bose_occupation(bath, a) + 1.0)
    return out if out.ndim else float(out)
