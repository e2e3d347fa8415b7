"""Parameter box of per-subdomain (E, nu), affine coefficients and samples."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


def theta(mu):
    """Affine coefficients for ``mu = (E_1, nu_1, E_2, nu_2, ...)``.

    Returns ``(shear_1, dil_1, shear_2, dil_2, ...)`` with the Lame
    parameters ``E / (2 (1 + nu))`` and ``E nu / ((1 + nu)(1 - 2 nu))``.
    """
    mu = np.asarray(mu, dtype=float)
    E, nu = mu[0::2], mu[1::2]
    if np.any(nu >= 0.5):
        raise ValueError("Poisson ratio must stay below 0.5")
    out = np.empty_like(mu)
    out[0::2] = E / (2.0 * (1.0 + nu))
    out[1::2] = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return out


def coercivity_lower_bound(mu, mu_ref):
    """``min_q theta_q(mu) / theta_q(mu_ref)``."""
    t_ref = theta(mu_ref)
    if np.any(t_ref <= 0):
        raise ValueError("reference coefficients must be positive")
    return float(np.min(theta(mu) / t_ref))


@dataclass
class ParameterDomain:
    lower: np.ndarray
    upper: np.ndarray
    reference: np.ndarray = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1 or len(self.lower) % 2:
            raise ValueError("bounds must be flat (E, nu) pairs per subdomain")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound above upper bound")
        if np.any(self.lower[0::2] <= 0):
            raise ValueError("E_min must be positive")
        if np.any(self.lower[1::2] <= 0) or np.any(self.upper[1::2] >= 0.5):
            raise ValueError("nu must lie in (0, 0.5)")
        if self.reference is None:
            self.reference = 0.5 * (self.lower + self.upper)
        self.reference = np.asarray(self.reference, dtype=float)
        if not self.contains(self.reference):
            raise ValueError("reference parameter outside the box")

    @classmethod
    def isotropic(cls, n_subdomains, E_range=(10.0, 100.0), nu_range=(0.1, 0.4), reference=None):
        lo = np.tile([E_range[0], nu_range[0]], n_subdomains)
        hi = np.tile([E_range[1], nu_range[1]], n_subdomains)
        return cls(lo, hi, reference)

    @property
    def P(self):
        return len(self.lower)

    def contains(self, mu, tol=0.0):
        mu = np.asarray(mu)
        return bool(np.all(mu >= self.lower - tol) and np.all(mu <= self.upper + tol))

    def theta(self, mu):
        return theta(mu)

    def g(self, mu):
        return coercivity_lower_bound(mu, self.reference)


@dataclass
class SampleSet:
    label: str
    points: np.ndarray
    seed: int = None
    algorithm: str = RNG_ALGORITHM
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def sample(domain: ParameterDomain, count, seed, label="train", corners=False):
    """Uniform i.i.d. sample of the box; ``corners=True`` returns the 2^P box vertices."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if corners:
        if count != 2**domain.P:
            raise ValueError(f"corner sampling needs count == 2^P = {2**domain.P}")
        pts = np.array(
            [
                np.where(np.asarray(bits, dtype=bool), domain.upper, domain.lower)
                for bits in itertools.product((0, 1), repeat=domain.P)
            ]
        )
        return SampleSet(label, pts, seed, "corners")
    rng = np.random.default_rng(seed)
    pts = domain.lower + (domain.upper - domain.lower) * rng.random((count, domain.P))
    return SampleSet(label, pts, seed)
