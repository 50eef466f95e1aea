"""UPA geometry and near-field steering vectors.

The array is a half-wavelength uniform planar array in the x-z plane,
centered on the origin, partitioned into sub-arrays. Steering vectors
exist in two flavors: the exact spherical-wave form (per-element
distances) and the Fresnel quadratic-phase approximation, which
factors into a Kronecker product of per-axis vectors.

Element ordering contract: the flat index of antenna (m_x, m_z) is
``(m_z - 1) * m_x_total + m_x`` (x runs fastest). Every dictionary and
visibility lift in the package uses this same ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Round value; reproduces the textbook Rayleigh/Fresnel distances quoted
# for mmWave arrays (e.g. 325.37 m for a 256x8 UPA at 30 GHz).
SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry of the UPA and its sub-array partition.

    m_x, m_z   : antennas per axis (M = m_x * m_z)
    k_x, k_z   : sub-arrays per axis (K = k_x * k_z)
    carrier_hz : carrier frequency
    """

    m_x: int
    m_z: int
    k_x: int
    k_z: int
    carrier_hz: float

    def __post_init__(self):
        if self.m_x < 1 or self.m_z < 1 or self.k_x < 1 or self.k_z < 1:
            raise ValueError("antenna and sub-array counts must be >= 1")
        if self.m_x % self.k_x or self.m_z % self.k_z:
            raise ValueError(
                f"sub-array grid {self.k_x}x{self.k_z} does not divide "
                f"array {self.m_x}x{self.m_z}"
            )
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")

    @property
    def m_total(self) -> int:
        return self.m_x * self.m_z

    @property
    def k_total(self) -> int:
        return self.k_x * self.k_z

    @property
    def n_x(self) -> int:
        return self.m_x // self.k_x

    @property
    def n_z(self) -> int:
        return self.m_z // self.k_z

    @property
    def n_per_subarray(self) -> int:
        return self.n_x * self.n_z

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing_m(self) -> float:
        # half-wavelength array
        return self.wavelength_m / 2.0

    @property
    def aperture_m(self) -> float:
        return np.hypot(self.m_x - 1, self.m_z - 1) * self.spacing_m

    def delta_x(self) -> np.ndarray:
        """Relative x-subscripts delta_{m_x} = m_x - (M_x+1)/2 for m_x = 1..M_x."""
        return np.arange(1, self.m_x + 1) - (self.m_x + 1) / 2.0

    def delta_z(self) -> np.ndarray:
        return np.arange(1, self.m_z + 1) - (self.m_z + 1) / 2.0


@dataclass(frozen=True)
class ScattererParams:
    """Location of a point scatterer: angles, distance, direction cosines.

    Direction cosines are the authoritative parameterization for
    steering computations; (azimuth, elevation) are kept for
    reporting and serialization.
    """

    azimuth_rad: float
    elevation_rad: float
    distance_m: float
    dir_cos_x: float = field(default=None)  # cos(azimuth) * sin(elevation)
    dir_cos_z: float = field(default=None)  # cos(elevation)

    def __post_init__(self):
        if self.dir_cos_x is None:
            object.__setattr__(
                self, "dir_cos_x",
                float(np.cos(self.azimuth_rad) * np.sin(self.elevation_rad)),
            )
        if self.dir_cos_z is None:
            object.__setattr__(self, "dir_cos_z", float(np.cos(self.elevation_rad)))
        if self.distance_m <= 0:
            raise ValueError("scatterer distance must be positive")
        if abs(self.dir_cos_x) > 1 or abs(self.dir_cos_z) > 1:
            raise ValueError("direction cosines must lie in [-1, 1]")
        if self.dir_cos_x**2 + self.dir_cos_z**2 > 1 + 1e-12:
            raise ValueError("direction not realizable: u_x^2 + u_z^2 > 1")

    @classmethod
    def from_dir_cosines(cls, dir_cos_x: float, dir_cos_z: float,
                         distance_m: float) -> "ScattererParams":
        """Build from (u_x, u_z, r); recovers a consistent (azimuth, elevation)."""
        elevation = float(np.arccos(np.clip(dir_cos_z, -1.0, 1.0)))
        se = np.sin(elevation)
        if se < 1e-15:
            azimuth = 0.0
        else:
            azimuth = float(np.arccos(np.clip(dir_cos_x / se, -1.0, 1.0)))
        return cls(azimuth, elevation, distance_m,
                   dir_cos_x=float(dir_cos_x), dir_cos_z=float(dir_cos_z))

    def cartesian(self) -> np.ndarray:
        """Scatterer position [r cos(az) sin(el), r sin(az) sin(el), r cos(el)]."""
        r, az, el = self.distance_m, self.azimuth_rad, self.elevation_rad
        return np.array([r * np.cos(az) * np.sin(el),
                         r * np.sin(az) * np.sin(el),
                         r * np.cos(el)])


def antenna_position(cfg: ArrayConfig, m_x_idx: int, m_z_idx: int) -> np.ndarray:
    """Coordinates of the (m_x_idx, m_z_idx)-th antenna (1-based indices), meters."""
    if not (1 <= m_x_idx <= cfg.m_x and 1 <= m_z_idx <= cfg.m_z):
        raise ValueError(f"antenna index ({m_x_idx}, {m_z_idx}) out of range")
    d = cfg.spacing_m
    dx = m_x_idx - (cfg.m_x + 1) / 2.0
    dz = m_z_idx - (cfg.m_z + 1) / 2.0
    return np.array([dx * d, 0.0, dz * d])


def exact_distance(cfg: ArrayConfig, s: ScattererParams,
                   m_x_idx: int, m_z_idx: int) -> float:
    """Scatterer-to-antenna distance from the expanded quadratic form."""
    if not (1 <= m_x_idx <= cfg.m_x and 1 <= m_z_idx <= cfg.m_z):
        raise ValueError(f"antenna index ({m_x_idx}, {m_z_idx}) out of range")
    d = cfg.spacing_m
    dx = (m_x_idx - (cfg.m_x + 1) / 2.0) * d
    dz = (m_z_idx - (cfg.m_z + 1) / 2.0) * d
    r = s.distance_m
    val = (r * r + dx * dx + dz * dz
           - 2.0 * r * dx * s.dir_cos_x - 2.0 * r * dz * s.dir_cos_z)
    return float(np.sqrt(max(val, 0.0)))


def _exact_distance_grid(cfg: ArrayConfig, dir_cos_x, dir_cos_z, r):
    """Distances for all antennas at once, shape (m_z, m_x)."""
    d = cfg.spacing_m
    dx = cfg.delta_x() * d                      # (m_x,)
    dz = (cfg.delta_z() * d)[:, None]           # (m_z, 1)
    val = (r * r + dx * dx + dz * dz
           - 2.0 * r * dx * dir_cos_x - 2.0 * r * dz * dir_cos_z)
    return np.sqrt(np.maximum(val, 0.0))


def steering_exact(cfg: ArrayConfig, s: ScattererParams) -> np.ndarray:
    """Unit-norm spherical-wave steering vector, x-major element order."""
    rmm = _exact_distance_grid(cfg, s.dir_cos_x, s.dir_cos_z, s.distance_m)
    phase = -2.0 * np.pi / cfg.wavelength_m * (rmm - s.distance_m)
    a = np.exp(1j * phase) / np.sqrt(cfg.m_total)
    return a.reshape(-1)


def _fresnel_axis_phase(delta_d: np.ndarray, u: float, r: float,
                        wavelength: float) -> np.ndarray:
    """Per-axis Fresnel phase: -(2*pi/lambda) (-delta*d*u + delta^2 d^2 (1-u^2)/(2r))."""
    return -2.0 * np.pi / wavelength * (
        -delta_d * u + delta_d**2 * (1.0 - u * u) / (2.0 * r)
    )


def steering_fresnel_dir(cfg: ArrayConfig, dir_cos_x, dir_cos_z, r) -> np.ndarray:
    """Fresnel-approximate steering from (u_x, u_z, r).

    Accepts scalars or equal-length arrays of grid parameters; returns
    shape (M,) for scalars, (M, Q) for arrays. Columns are unit-norm.
    """
    ux = np.atleast_1d(np.asarray(dir_cos_x, dtype=float))
    uz = np.atleast_1d(np.asarray(dir_cos_z, dtype=float))
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    d = cfg.spacing_m
    ddx = cfg.delta_x() * d                           # (m_x,)
    ddz = cfg.delta_z() * d                           # (m_z,)
    # (m_x, Q) and (m_z, Q) axis phases
    psi_x = _fresnel_axis_phase(ddx[:, None], ux[None, :], rr[None, :], cfg.wavelength_m)
    psi_z = _fresnel_axis_phase(ddz[:, None], uz[None, :], rr[None, :], cfg.wavelength_m)
    phase = psi_z[:, None, :] + psi_x[None, :, :]     # (m_z, m_x, Q)
    a = np.exp(1j * phase).reshape(cfg.m_total, -1) / np.sqrt(cfg.m_total)
    if np.isscalar(dir_cos_x) or np.asarray(dir_cos_x).ndim == 0:
        return a[:, 0]
    return a


def steering_fresnel(cfg: ArrayConfig, s: ScattererParams) -> np.ndarray:
    return steering_fresnel_dir(cfg, s.dir_cos_x, s.dir_cos_z, s.distance_m)


def rayleigh_distance(cfg: ArrayConfig) -> float:
    """Far-field boundary 2 D^2 / lambda."""
    return 2.0 * cfg.aperture_m**2 / cfg.wavelength_m


def fresnel_distance(cfg: ArrayConfig) -> float:
    """Validity boundary of the quadratic phase approximation, 0.5 sqrt(D^3/lambda)."""
    return 0.5 * np.sqrt(cfg.aperture_m**3 / cfg.wavelength_m)
