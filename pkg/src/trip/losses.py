"""Redescending loss families, IRLS weights and profile-admissibility constants."""
import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("cauchy", "welsch", "tukey", "tls")

# (m(a), K, maximizing a) per family; m is a callable of a
PROFILE_CONSTANTS = {
    "cauchy": (lambda a: 1.0 / (1.0 + a * a), 0.5, 1.0),
    "welsch": (lambda a: math.exp(-a * a), 1.0 / math.sqrt(2.0 * math.e), 1.0 / math.sqrt(2.0)),
    "tls": (lambda a: 1.0, 1.0, 1.0),
    "tukey": (lambda a: (1.0 - a * a) ** 2, 16.0 / (25.0 * math.sqrt(5.0)), 1.0 / math.sqrt(5.0)),
}


@dataclass(frozen=True)
class LossSpec:
    """Robust loss and, optionally, a geometric annealing schedule.

    ``scale`` is c (fixed mode) or sigma_0 (annealed mode; ``None`` means
    choose it from the initial residuals). ``stages == 1`` is fixed mode.
    """

    family: str = "cauchy"
    scale: float | None = 0.1
    tau: float = 0.5
    stages: int = 1
    a: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("loss scale must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.stages < 1:
            raise ValueError("stages must be >= 1")

    @property
    def annealed(self):
        return self.stages > 1

    @property
    def window(self):
        return PROFILE_CONSTANTS[self.family][2] if self.a is None else self.a

    def with_scale(self, scale):
        return LossSpec(self.family, scale, self.tau, self.stages, self.a)

    def schedule(self, sigma0=None):
        s0 = self.scale if sigma0 is None else sigma0
        return [s0 * self.tau ** k for k in range(self.stages)]


def loss_weight(residual, spec):
    """IRLS weight psi(r)/r, in (0, 1] for every family (TLS may give 0)."""
    r = np.abs(np.asarray(residual, dtype=np.float64)) / spec.scale
    if spec.family == "cauchy":
        return 1.0 / (1.0 + r * r)
    if spec.family == "welsch":
        return np.exp(-r * r)
    if spec.family == "tukey":
        return np.clip(1.0 - r * r, 0.0, None) ** 2
    return (r < 1.0).astype(np.float64)


def loss_value(residual, spec):
    """rho_sigma(r) for the family at ``spec.scale``."""
    s = spec.scale
    r = np.abs(np.asarray(residual, dtype=np.float64))
    u = r / s
    if spec.family == "cauchy":
        return 0.5 * s * s * np.log1p(u * u)
    if spec.family == "welsch":
        return 0.5 * s * s * (1.0 - np.exp(-u * u))
    if spec.family == "tukey":
        inside = np.clip(1.0 - u * u, 0.0, None)
        return s * s / 6.0 * (1.0 - inside ** 3)
    return 0.5 * np.minimum(r * r, s * s)


def profile_constants(family, a=None):
    """(a, m(a), K, h_prof(a)) with h_prof(a) = a m(a) / (2K)."""
    m_fn, K, a_best = PROFILE_CONSTANTS[family]
    a = a_best if a is None else a
    m = m_fn(a)
    return a, m, K, a * m / (2.0 * K)
