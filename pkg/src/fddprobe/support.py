"""Uplink sketching and the support pipeline.

Turns uplink pilot sketches into an estimated uplink beamspace support,
lifts that support to a set of angular intervals, and maps the intervals to
a downlink beamspace support on the M-grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import ArrayConfig, Band, ChannelRealization, angular_interval, merge_intervals
from .mmv import MMVSolution


class SupportGrid(Enum):
    UL_OVERCOMPLETE = "ul_overcomplete"  # qM-point grid
    DL = "dl"                            # M-point grid


@dataclass(frozen=True)
class SupportSet:
    grid_size: int
    indices: tuple[int, ...]  # sorted, strictly increasing
    grid: SupportGrid

    def __post_init__(self):
        idx = self.indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.grid_size):
            raise ValueError("index out of range")

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class AngularSupport:
    intervals: tuple[tuple[float, float], ...]  # sorted, disjoint

    def __len__(self):
        return len(self.intervals)

    def intersects(self, lo: float, hi: float) -> bool:
        return any(a < hi and lo < b for a, b in self.intervals)


@dataclass(frozen=True)
class Absolute:
    """Keep rows whose l2 norm is at least ``eps``."""
    eps: float


@dataclass(frozen=True)
class EnergyCapture:
    """Keep the smallest set of largest rows holding ``eta`` of the energy."""
    eta: float = 0.99


def antenna_selection_matrix(rng, m: int, M: int) -> np.ndarray:
    """Binary m x M matrix with a single 1 per row, columns distinct."""
    if m > M:
        raise ValueError(f"cannot select {m} antennas out of {M}")
    cols = rng.choice(M, size=m, replace=False)
    B = np.zeros((m, M))
    B[np.arange(m), cols] = 1.0
    return B


def sketch_uplink(B: np.ndarray, ul: ChannelRealization, rng, sigma: float) -> np.ndarray:
    """Noisy antenna-domain sketches Y = B H + N, one column per subcarrier."""
    m, L = B.shape[0], ul.H.shape[1]
    noise = sigma * (rng.standard_normal((m, L)) + 1j * rng.standard_normal((m, L))) / np.sqrt(2)
    return B @ ul.H + noise


def estimate_ul_support(sol: MMVSolution, rule=EnergyCapture()) -> SupportSet:
    """Threshold the row norms of an MMV solution into an active index set."""
    norms = np.asarray(sol.row_norms)
    qM = norms.size
    if isinstance(rule, Absolute):
        idx = np.flatnonzero(norms >= rule.eps)
    elif isinstance(rule, EnergyCapture):
        energy = norms**2
        total = energy.sum()
        if total == 0.0:
            idx = np.empty(0, dtype=int)
        else:
            # stable sort on -energy keeps lower indices first among ties
            order = np.argsort(-energy, kind="stable")
            cum = np.cumsum(energy[order])
            k = int(np.searchsorted(cum, rule.eta * total)) + 1
            idx = np.sort(order[:k])
    else:
        raise TypeError(f"unknown threshold rule {rule!r}")
    return SupportSet(grid_size=qM, indices=tuple(int(i) for i in idx),
                      grid=SupportGrid.UL_OVERCOMPLETE)


def angular_support_from_ul(s: SupportSet, cfg: ArrayConfig, q: int) -> AngularSupport:
    """Union of the uplink angular intervals of the active overcomplete indices."""
    if s.grid is not SupportGrid.UL_OVERCOMPLETE:
        raise ValueError("expected a support on the overcomplete UL grid")
    if s.grid_size != q * cfg.M:
        raise ValueError(f"grid size {s.grid_size} != qM = {q * cfg.M}")
    pieces = []
    for j in s.indices:
        pieces.extend(angular_interval(cfg, Band.UL, q * cfg.M, j))
    return AngularSupport(tuple(merge_intervals(pieces)))


def dl_support_from_angular(xg: AngularSupport, cfg: ArrayConfig) -> SupportSet:
    """Downlink M-grid indices whose angular interval meets the estimate."""
    idx = []
    for i in range(cfg.M):
        for lo, hi in angular_interval(cfg, Band.DL, cfg.M, i):
            if xg.intersects(lo, hi):
                idx.append(i)
                break
    return SupportSet(grid_size=cfg.M, indices=tuple(idx), grid=SupportGrid.DL)
