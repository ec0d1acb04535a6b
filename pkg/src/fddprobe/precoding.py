"""Channel estimation at the base station, zero-forcing precoding and rates.

Estimators return antenna-domain channel vectors (DFT coefficients are an
internal detail). Rates are per-subcarrier spectral efficiencies in
bits/s/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .probing import ProbingMatrix
from .support import SupportSet, SupportGrid

PINV_RCOND = 1e-10  # singular values below rcond * sigma_max are dropped


class EstimationMethod(Enum):
    PROPOSED_LS = "proposed_ls"
    JOMP = "jomp"
    FULL_CSIT = "full_csit"


@dataclass
class EstimatedChannelSet:
    H_hat: np.ndarray  # M x K, antenna domain
    method: EstimationMethod

    def __post_init__(self):
        if not np.all(np.isfinite(self.H_hat)):
            raise ValueError("channel estimates contain NaN or Inf")


@dataclass
class PrecoderMatrix:
    T_mat: np.ndarray  # M x K, unit-norm columns


class SingularChannelError(ValueError):
    pass


@dataclass
class LSEstimate:
    h_hat: np.ndarray          # M, antenna domain
    empty_support: bool = False
    underdetermined: bool = False


def ls_estimate(y: np.ndarray, phi: ProbingMatrix, F: np.ndarray, s: SupportSet) -> LSEstimate:
    """Support-restricted least-squares recovery of one downlink channel.

    Solves min_x ||y - Phi F_s x|| via the pseudo-inverse and re-expands to
    the antenna domain. An empty support yields the zero channel; fewer
    measurements than support entries yields the minimum-norm solution.
    """
    if s.grid is not SupportGrid.DL:
        raise ValueError("LS estimation expects a DL-grid support")
    M = F.shape[0]
    idx = list(s.indices)
    if not idx:
        return LSEstimate(np.zeros(M, dtype=complex), empty_support=True)
    A = phi.Phi @ F[:, idx]
    x = np.linalg.pinv(A, rcond=PINV_RCOND) @ y
    coeffs = np.zeros(M, dtype=complex)
    coeffs[idx] = x
    return LSEstimate(F @ coeffs, underdetermined=phi.T < len(idx))


def jomp_estimate(
    Ys: list[np.ndarray],
    phi: ProbingMatrix,
    F: np.ndarray,
    s_total: int,
    s_common: int,
) -> EstimatedChannelSet:
    """Joint orthogonal matching pursuit baseline on the M-grid dictionary.

    Stage 1 greedily picks ``s_common`` indices maximizing the summed squared
    correlation of all users' residuals with the dictionary columns; stage 2
    continues per user up to ``s_total`` indices. Each pick is followed by an
    LS refit of that user's coefficients on its selected set.
    """
    if s_common > s_total:
        raise ValueError("s_common cannot exceed s_total")
    K = len(Ys)
    M = F.shape[0]
    A = phi.Phi @ F  # T x M dictionary
    col_norm = np.linalg.norm(A, axis=0)
    col_norm[col_norm == 0] = 1.0

    residuals = [y.copy() for y in Ys]
    selected: list[list[int]] = [[] for _ in range(K)]

    def refit(k: int):
        cols = selected[k]
        x = np.linalg.pinv(A[:, cols], rcond=PINV_RCOND) @ Ys[k]
        residuals[k] = Ys[k] - A[:, cols] @ x
        return x

    joint: list[int] = []
    for _ in range(s_common):
        score = np.zeros(M)
        for r in residuals:
            score += np.abs(A.conj().T @ r) ** 2 / col_norm**2
        score[joint] = -1.0
        pick = int(np.argmax(score))
        joint.append(pick)
        for k in range(K):
            selected[k].append(pick)
            refit(k)

    for k in range(K):
        for _ in range(s_total - s_common):
            score = np.abs(A.conj().T @ residuals[k]) ** 2 / col_norm**2
            score[selected[k]] = -1.0
            selected[k].append(int(np.argmax(score)))
            refit(k)

    H_hat = np.zeros((M, K), dtype=complex)
    for k in range(K):
        if selected[k]:
            coeffs = np.zeros(M, dtype=complex)
            coeffs[selected[k]] = refit(k)
            H_hat[:, k] = F @ coeffs
    return EstimatedChannelSet(H_hat, EstimationMethod.JOMP)


def zf_precoder(est: EstimatedChannelSet) -> PrecoderMatrix:
    """Zero-forcing precoder: pseudo-inverse of H^H with unit-norm columns."""
    H = est.H_hat
    M, K = H.shape
    if K > M:
        raise ValueError(f"cannot zero-force {K} users with {M} antennas")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularChannelError(
            f"estimated channel matrix is rank deficient (condition number {cond:.3e})"
        )
    Q = np.linalg.pinv(H.conj().T, rcond=PINV_RCOND)
    return PrecoderMatrix(Q / np.linalg.norm(Q, axis=0, keepdims=True))


def evaluate_sinr(
    H_true: np.ndarray,
    prec: PrecoderMatrix,
    P: float,
    printed_form: bool = False,
) -> np.ndarray:
    """Per-user SINR under uniform power P/K across the K beams.

    The denominator sums the interference |h_i^H T_j|^2 received at user i
    from the other users' beams. ``printed_form`` instead sums
    |h_j^H T_j|^2 over j != i (the other users' own signal powers); it is
    kept only for comparison.
    """
    cross = H_true.conj().T @ prec.T_mat  # [i, j] = h_i^H T_j
    K = cross.shape[0]
    p = P / K
    sig = p * np.abs(np.diag(cross)) ** 2
    if printed_form:
        own = np.abs(np.diag(cross)) ** 2
        interf = p * (own.sum() - own)
    else:
        mags = np.abs(cross) ** 2
        interf = p * (mags.sum(axis=1) - np.abs(np.diag(cross)) ** 2)
    return sig / (1.0 + interf)


def rates(sinr: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-user rates log2(1 + SINR) and their sum."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR values must be nonnegative")
    per_user = np.log2(1.0 + sinr)
    return per_user, float(per_user.sum())
