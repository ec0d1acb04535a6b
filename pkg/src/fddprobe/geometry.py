"""Array geometry, DFT dictionaries, scattering functions and channel synthesis.

All angles are in radians. The base station array is a uniform linear array
with M elements; the angular field of view is Theta = [-theta_max, theta_max).
Channel vectors are synthesized from a piecewise-constant angular power
density (the scattering function), which is shared by the uplink and the
downlink band even though the fading realizations are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Band(Enum):
    UL = "ul"
    DL = "dl"


@dataclass
class ArrayConfig:
    """ULA geometry shared by both bands.

    ``d_over_lambda_ul`` is the antenna spacing in UL wavelengths. The default
    1/(2 sin theta_max) maps Theta exactly onto one period of the array
    manifold in the UL band. ``wavelength_ratio`` is lambda_ul / lambda_dl.
    """

    M: int
    theta_max: float = math.pi / 3
    wavelength_ratio: float = 1.1
    d_over_lambda_ul: float | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("antenna count must be positive")
        if not 0.0 < self.theta_max <= math.pi / 2:
            raise ValueError("theta_max must lie in (0, pi/2]")
        if self.wavelength_ratio <= 0:
            raise ValueError("wavelength_ratio must be positive")
        if self.d_over_lambda_ul is None:
            self.d_over_lambda_ul = 1.0 / (2.0 * math.sin(self.theta_max))

    def d_over_lambda(self, band: Band) -> float:
        if band is Band.UL:
            return self.d_over_lambda_ul
        return self.d_over_lambda_ul * self.wavelength_ratio

    def _check_theta(self, theta: float):
        if not (-self.theta_max <= theta < self.theta_max):
            raise ValueError(
                f"theta={theta} outside [-{self.theta_max}, {self.theta_max})"
            )


def array_response(cfg: ArrayConfig, theta, band: Band) -> np.ndarray:
    """Steering vector of the ULA at angle ``theta`` for the given band.

    Element i equals exp(j 2 pi (d/lambda) i sin(theta)); element 0 is 1.
    """
    cfg._check_theta(float(theta))
    phase = 2.0 * math.pi * cfg.d_over_lambda(band) * math.sin(theta)
    return np.exp(1j * phase * np.arange(cfg.M))


def ul_array_response(cfg: ArrayConfig, theta) -> np.ndarray:
    return array_response(cfg, theta, Band.UL)


def dl_array_response(cfg: ArrayConfig, theta) -> np.ndarray:
    return array_response(cfg, theta, Band.DL)


def _response_matrix(cfg: ArrayConfig, thetas: np.ndarray, band: Band) -> np.ndarray:
    # Vectorized steering vectors, M x len(thetas). No per-angle domain check:
    # callers pass grids already inside Theta.
    phase = 2.0 * math.pi * cfg.d_over_lambda(band) * np.sin(thetas)
    return np.exp(1j * np.outer(np.arange(cfg.M), phase))


def dft_basis(M: int) -> np.ndarray:
    """Unitary DFT basis, [F]_{k,l} = exp(j 2 pi k (l - M/2) / M) / sqrt(M)."""
    k = np.arange(M)[:, None]
    ell = np.arange(M)[None, :]
    return np.exp(1j * 2.0 * np.pi / M * k * (ell - M / 2)) / math.sqrt(M)


def overcomplete_dft(M: int, q: int) -> np.ndarray:
    """Overcomplete DFT dictionary M x qM with oversampling factor q.

    [F~]_{k,l} = exp(j 2 pi k (l - qM/2) / (qM)) / sqrt(M). Columns have unit
    norm; q = 1 recovers ``dft_basis``.
    """
    if q < 1:
        raise ValueError("oversampling factor must be >= 1")
    k = np.arange(M)[:, None]
    ell = np.arange(q * M)[None, :]
    return np.exp(1j * 2.0 * np.pi / (q * M) * k * (ell - q * M / 2)) / math.sqrt(M)


@dataclass
class ScatteringFunction:
    """Piecewise-constant nonnegative angular power density.

    ``intervals`` are disjoint sorted (lo, hi) pairs inside Theta; one density
    value per interval. Normalized so the density integrates to one, which
    fixes the per-antenna channel power at one.
    """

    intervals: list[tuple[float, float]]
    densities: list[float]

    def __post_init__(self):
        if len(self.intervals) != len(self.densities):
            raise ValueError("one density per interval required")
        if not self.intervals:
            raise ValueError("at least one interval required")
        prev_hi = -math.inf
        for (lo, hi), dens in zip(self.intervals, self.densities):
            if lo >= hi:
                raise ValueError(f"empty interval ({lo}, {hi})")
            if lo < prev_hi:
                raise ValueError("intervals must be sorted and disjoint")
            if dens <= 0:
                raise ValueError("densities must be positive")
            prev_hi = hi
        total = self.integral()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density must integrate to 1, got {total}")

    def integral(self) -> float:
        return sum(d * (hi - lo) for (lo, hi), d in zip(self.intervals, self.densities))

    def total_length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    @classmethod
    def uniform(cls, intervals) -> "ScatteringFunction":
        """Equal density on every interval, normalized to unit integral."""
        total = sum(hi - lo for lo, hi in intervals)
        return cls(list(intervals), [1.0 / total] * len(intervals))

    def grid(self, n_points: int) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature grid over the support.

        Returns midpoints theta_g and weights gamma(theta_g) * dtheta_g, with
        the n_points distributed over intervals proportionally to length
        (at least one point per interval).
        """
        total = self.total_length()
        thetas, weights = [], []
        for (lo, hi), dens in zip(self.intervals, self.densities):
            n = max(1, int(round(n_points * (hi - lo) / total)))
            edges = np.linspace(lo, hi, n + 1)
            mids = 0.5 * (edges[:-1] + edges[1:])
            thetas.append(mids)
            weights.append(np.full(n, dens * (hi - lo) / n))
        return np.concatenate(thetas), np.concatenate(weights)


@dataclass
class ScatterSpec:
    """Sampling recipe for random scattering functions.

    ``total_support_fraction`` is |support| / (2 theta_max). When
    ``common_interval`` is set it is used verbatim as one of the multipath
    clusters (identical across users that share the spec).
    """

    theta_max: float = math.pi / 3
    mpc_count: int = 2
    total_support_fraction: float = 1.0 / 8.0
    common_interval: tuple[float, float] | None = None


def sample_common_interval(rng, spec: ScatterSpec) -> tuple[float, float]:
    """Draw one cluster interval of the per-MPC length, uniform inside Theta."""
    length = 2.0 * spec.theta_max * spec.total_support_fraction / spec.mpc_count
    lo = rng.uniform(-spec.theta_max, spec.theta_max - length)
    return (lo, lo + length)


def sample_scattering_function(rng, spec: ScatterSpec) -> ScatteringFunction:
    """Draw a random scattering function with ``mpc_count`` disjoint clusters.

    Cluster lengths are equal; overlapping draws are rejected and resampled.
    """
    total_len = 2.0 * spec.theta_max * spec.total_support_fraction
    if total_len > 2.0 * spec.theta_max:
        raise ValueError("total support length exceeds the angular range")
    if spec.mpc_count < 1:
        raise ValueError("need at least one MPC")
    length = total_len / spec.mpc_count
    intervals: list[tuple[float, float]] = []
    if spec.common_interval is not None:
        lo, hi = spec.common_interval
        if lo < -spec.theta_max or hi > spec.theta_max or lo >= hi:
            raise ValueError("common interval outside the angular range")
        intervals.append((lo, hi))
    for _ in range(10000):
        if len(intervals) == spec.mpc_count:
            break
        lo = rng.uniform(-spec.theta_max, spec.theta_max - length)
        hi = lo + length
        if all(hi <= a or lo >= b for a, b in intervals):
            intervals.append((lo, hi))
    else:
        raise ValueError("could not place disjoint MPC intervals")
    intervals.sort()
    return ScatteringFunction.uniform(intervals)


@dataclass
class ChannelRealization:
    user_id: int
    band: Band
    H: np.ndarray  # M x L, column = channel vector on one subcarrier


def default_grid_points(M: int, q: int = 2) -> int:
    """Quadrature size keeping >= 8 points per resolvable beam on the q-grid."""
    return max(512, 8 * q * M)


def sample_channel(
    rng,
    sf: ScatteringFunction,
    cfg: ArrayConfig,
    band: Band,
    L: int,
    grid_points: int | None = None,
    user_id: int = 0,
) -> ChannelRealization:
    """Draw L i.i.d. channel vectors from the scattering geometry.

    The angular integral is discretized on the scattering support; each grid
    point carries an independent CN(0, gamma * dtheta) gain per subcarrier.
    """
    if L < 1:
        raise ValueError("need at least one subcarrier")
    if grid_points is None:
        grid_points = default_grid_points(cfg.M)
    thetas, weights = sf.grid(grid_points)
    A = _response_matrix(cfg, thetas, band)
    std = np.sqrt(weights / 2.0)[:, None]
    gains = std * (rng.standard_normal((thetas.size, L))
                   + 1j * rng.standard_normal((thetas.size, L)))
    return ChannelRealization(user_id=user_id, band=band, H=A @ gains)


def analytic_covariance(
    sf: ScatteringFunction, cfg: ArrayConfig, band: Band, grid_points: int | None = None
) -> np.ndarray:
    """Covariance E[h h^H] of the channel in the antenna domain."""
    if grid_points is None:
        grid_points = default_grid_points(cfg.M)
    thetas, weights = sf.grid(grid_points)
    A = _response_matrix(cfg, thetas, band)
    return (A * weights) @ A.conj().T


def dft_domain_variance(
    sf: ScatteringFunction, cfg: ArrayConfig, band: Band, grid_points: int | None = None
) -> np.ndarray:
    """Per-index variance of the channel expressed in the unitary DFT basis."""
    if grid_points is None:
        grid_points = default_grid_points(cfg.M)
    thetas, weights = sf.grid(grid_points)
    A = _response_matrix(cfg, thetas, band)
    checked = dft_basis(cfg.M).conj().T @ A
    return (np.abs(checked) ** 2 * weights).sum(axis=1)


def angular_interval(
    cfg: ArrayConfig, band: Band, grid_size: int, index: int
) -> list[tuple[float, float]]:
    """Angles whose beamspace response concentrates on grid index ``index``.

    Returns the set {theta in Theta : dist(psi_i(theta), Z) <= 1/M} where
    psi_i(theta) = (d/lambda) sin(theta) - i/grid_size + 1/2 and dist is the
    circular distance to the nearest integer (the array point-spread function
    is 1-periodic in psi). Up to two disjoint pieces can occur in the DL band
    near the edges of Theta, where psi wraps. May be empty.
    """
    if not 0 <= index < grid_size:
        raise ValueError(f"index {index} out of range [0, {grid_size})")
    r = cfg.d_over_lambda(band)
    half = 1.0 / cfg.M
    c = index / grid_size - 0.5
    smax = math.sin(cfg.theta_max)
    u_min, u_max = -r * smax, r * smax
    n_lo = math.floor(u_min - c - half)
    n_hi = math.ceil(u_max - c + half)
    pieces = []
    for n in range(n_lo, n_hi + 1):
        lo_u = max(c + n - half, u_min)
        hi_u = min(c + n + half, u_max)
        if lo_u < hi_u:
            pieces.append((math.asin(lo_u / r), math.asin(hi_u / r)))
    return merge_intervals(pieces)


def merge_intervals(
    intervals, slack: float = 1e-12
) -> list[tuple[float, float]]:
    """Sort and merge intervals that overlap or touch within ``slack``."""
    if not intervals:
        return []
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + slack:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out
