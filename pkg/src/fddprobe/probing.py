"""Downlink probing matrix designs and the downlink measurement equation.

The base station broadcasts T probing vectors (rows of Phi, each with squared
norm P_prob); every user feeds back its T noisy inner products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .support import SupportSet


class ProbingKind(Enum):
    GAUSSIAN = "gaussian"
    ANTENNA_SELECTION = "antenna_selection"
    HYBRID = "hybrid"


@dataclass
class ProbingMatrix:
    Phi: np.ndarray  # T x M
    power: float     # squared row norm P_prob
    kind: ProbingKind

    @property
    def T(self) -> int:
        return self.Phi.shape[0]


def choose_T(supports: list[SupportSet], override: int | None = None) -> int:
    """Number of probing slots: the largest estimated DL support size."""
    if override is not None:
        return override
    if not supports:
        raise ValueError("need at least one support set")
    T = max(len(s) for s in supports)
    if T == 0:
        warnings.warn("all estimated supports are empty; falling back to T=1")
        return 1
    return T


def _normalize_rows(Phi: np.ndarray, power: float) -> np.ndarray:
    norms = np.linalg.norm(Phi, axis=1, keepdims=True)
    return Phi * (np.sqrt(power) / norms)


def gaussian_probing(rng, T: int, M: int, P_prob: float) -> ProbingMatrix:
    Phi = (rng.standard_normal((T, M)) + 1j * rng.standard_normal((T, M))) / np.sqrt(2)
    return ProbingMatrix(_normalize_rows(Phi, P_prob), P_prob, ProbingKind.GAUSSIAN)


def antenna_selection_probing(rng, T: int, M: int, P_prob: float) -> ProbingMatrix:
    """One active antenna per slot, positions distinct across slots."""
    if T > M:
        raise ValueError(f"cannot probe {T} distinct antennas out of {M}")
    cols = rng.choice(M, size=T, replace=False)
    Phi = np.zeros((T, M), dtype=complex)
    Phi[np.arange(T), cols] = np.sqrt(P_prob)
    return ProbingMatrix(Phi, P_prob, ProbingKind.ANTENNA_SELECTION)


def common_support(supports: list[SupportSet]) -> tuple[int, ...]:
    """Sorted intersection of the users' DL support sets."""
    if not supports:
        return ()
    common = set(supports[0].indices)
    for s in supports[1:]:
        common &= set(s.indices)
    return tuple(sorted(common))


def hybrid_probing(
    rng,
    supports: list[SupportSet],
    T: int,
    M: int,
    P_prob: float,
    F: np.ndarray,
) -> ProbingMatrix:
    """DFT beams on the common support, Gaussian rows for the remainder.

    With an empty common support this reduces to pure Gaussian probing.
    """
    sc = common_support(supports)
    if T < len(sc):
        raise ValueError(f"T={T} smaller than the common support size {len(sc)}")
    n_gauss = T - len(sc)
    blocks = []
    if sc:
        blocks.append(F[:, list(sc)].conj().T)
    if n_gauss:
        blocks.append(
            (rng.standard_normal((n_gauss, M)) + 1j * rng.standard_normal((n_gauss, M)))
            / np.sqrt(2)
        )
    Phi = _normalize_rows(np.vstack(blocks), P_prob)
    return ProbingMatrix(Phi, P_prob, ProbingKind.HYBRID)


def measure_downlink(phi: ProbingMatrix, h_dl: np.ndarray, rng, add_noise: bool = True) -> np.ndarray:
    """Received feedback vector y = Phi h + n with unit-variance noise."""
    y = phi.Phi @ h_dl
    if add_noise:
        T = phi.T
        y = y + (rng.standard_normal(T) + 1j * rng.standard_normal(T)) / np.sqrt(2)
    return y
