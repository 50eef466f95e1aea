"""Probability models shared by the generator and both estimators.

Two pieces: a 2D Markov model for the clustered visibility masks
(nearest-neighbor transitions along both sub-array axes, steady-state
visibility probability kappa) and a hierarchical
support/precision/gain model for the polar-domain channel vector
(Bernoulli support, conditional Gamma precision, complex Gaussian
gain, Gamma noise precision).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .polar_grid import VisibilityMap


@dataclass(frozen=True)
class Markov2DParams:
    """Per-axis transition probabilities and the steady-state level kappa.

    p01 is the 0->1 transition probability, p10 the 1->0 one;
    stationarity per axis requires p01 (1-kappa) = p10 kappa.
    """

    p01_x: float
    p10_x: float
    p01_z: float
    p10_z: float
    kappa: float

    def __post_init__(self):
        for name in ("p01_x", "p10_x", "p01_z", "p10_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa outside [0, 1]")

    @property
    def p11_x(self) -> float:
        return 1.0 - self.p10_x

    @property
    def p00_x(self) -> float:
        return 1.0 - self.p01_x

    @property
    def p11_z(self) -> float:
        return 1.0 - self.p10_z

    @property
    def p00_z(self) -> float:
        return 1.0 - self.p01_z


def calibrate_markov(kappa: float, p10_x: float, p10_z: float) -> Markov2DParams:
    """Solve the 0->1 rates from per-axis stationarity at level kappa."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    if not (0.0 < p10_x < 1.0 and 0.0 < p10_z < 1.0):
        raise ValueError("p10 values must lie in (0, 1)")
    ratio = kappa / (1.0 - kappa)
    p01_x = p10_x * ratio
    p01_z = p10_z * ratio
    if not (0.0 < p01_x < 1.0 and 0.0 < p01_z < 1.0):
        raise ValueError(
            f"infeasible parameters: implied p01=({p01_x:.3g}, {p01_z:.3g}) "
            "outside (0, 1)")
    return Markov2DParams(p01_x, p10_x, p01_z, p10_z, kappa)


def _log(p: float) -> float:
    return np.log(p) if p > 0 else -np.inf


def markov2d_log_prior(params: Markov2DParams, mask) -> float:
    """Log weight of a mask under the directed 2D Markov factorization.

    The corner node carries the steady-state marginal; every node in
    row >= 2 contributes an x-transition factor from the node above,
    every node in column >= 2 a z-transition factor from the node to
    its left. On chains (1xK or Kx1) this is a normalized distribution;
    on 2D lattices interior nodes carry two conditional factors and the
    weights need not sum to one over all masks.
    """
    v = mask.mask if isinstance(mask, VisibilityMap) else np.asarray(mask)
    kx, kz = v.shape
    p = params
    trans_x = np.array([[_log(p.p00_x), _log(p.p01_x)],
                        [_log(p.p10_x), _log(p.p11_x)]])
    trans_z = np.array([[_log(p.p00_z), _log(p.p01_z)],
                        [_log(p.p10_z), _log(p.p11_z)]])
    total = _log(p.kappa) if v[0, 0] else _log(1.0 - p.kappa)
    if kx > 1:
        total += trans_x[v[:-1, :], v[1:, :]].sum()
    if kz > 1:
        total += trans_z[v[:, :-1], v[:, 1:]].sum()
    return float(total)


@dataclass(frozen=True)
class HierarchicalPriorParams:
    """Support / precision / gain / noise prior constants.

    (a, b) set the active-precision Gamma (mean order one); (a_bar,
    b_bar) the inactive one (mean >> 1 so inactive gains sit at zero);
    (c, d) a diffuse Gamma on the noise precision; lam is the per-point
    support probability.
    """

    a: float = 1.0
    b: float = 1.0
    a_bar: float = 1.0
    b_bar: float = 1e-5
    c: float = 1e-6
    d: float = 1e-6
    lam: np.ndarray = field(default_factory=lambda: np.array([0.5]))

    def __post_init__(self):
        for name in ("a", "b", "a_bar", "b_bar", "c", "d"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if ((lam <= 0) | (lam >= 1)).any():
            raise ValueError("support probabilities must lie in (0, 1)")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def with_default_support(cls, q_total: int, expected_paths: int,
                             **kw) -> "HierarchicalPriorParams":
        lam = min(0.5, 2.0 * expected_paths / q_total)
        return cls(lam=np.full(q_total, lam), **kw)

    def restrict(self, idx) -> "HierarchicalPriorParams":
        return HierarchicalPriorParams(self.a, self.b, self.a_bar, self.b_bar,
                                       self.c, self.d, self.lam[idx])


def support_logpmf(lam: np.ndarray, s: np.ndarray) -> float:
    """Log pmf of a support pattern under independent Bernoulli(lam)."""
    lam = np.broadcast_to(np.asarray(lam, dtype=float), np.shape(s))
    s = np.asarray(s)
    return float(np.sum(np.where(s == 1, np.log(lam), np.log1p(-lam))))


def _gamma_logpdf(rho, shape, rate):
    rho = np.asarray(rho, dtype=float)
    if (rho <= 0).any():
        raise ValueError("precision values must be positive")
    return shape * np.log(rate) - gammaln(shape) + (shape - 1) * np.log(rho) \
        - rate * rho


def precision_logpdf(params: HierarchicalPriorParams, rho, s) -> np.ndarray:
    """Log density of precisions given support: active/inactive Gamma branches."""
    s = np.asarray(s)
    active = _gamma_logpdf(rho, params.a, params.b)
    inactive = _gamma_logpdf(rho, params.a_bar, params.b_bar)
    return np.where(s == 1, active, inactive)

def gain_logpdf(x, rho) -> np.ndarray:
    """Log density of complex Gaussian gains with precision rho."""
    rho = np.asarray(rho, dtype=float)
    if (rho <= 0).any():
        raise ValueError("precision values must be positive")
    return np.log(rho / np.pi) - rho * np.abs(np.asarray(x)) ** 2


def noise_logpdf(c: float, d: float, gamma) -> np.ndarray:
    """Log density of the Gamma noise-precision prior."""
    return _gamma_logpdf(gamma, c, d)
