"""Closed-form predictions: the diffusion coefficient alpha, the critical
probability, both limiting covariance matrices, the change-of-basis matrix
M, the chi-p relation and the finite-n leading covariance term."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RegimeError(ValueError):
    """Requested a quantity outside the regime where a closed form exists."""


def alpha(k: int, p: float) -> float:
    """Discrepancy diffusion coefficient, clamped at zero."""
    _check(k, p)
    return max(2.0 / k - 2.0 * p / (k - 1), 0.0)


def critical_p(k: int) -> float:
    if k < 2:
        raise ValueError("k must be at least 2")
    return 1.0 - 1.0 / k


def chi_prediction(k: int, p: float) -> float:
    """Expected length of X(-J,-1): 2 below/at the transition, else the
    inverse of p = (k-1)/(chi+k-2).  Always in [1, 2]."""
    _check(k, p)
    if p <= critical_p(k):
        return 2.0
    return (k - 1) / p - (k - 2)


def m_matrix(k: int) -> np.ndarray:
    """Integer matrix mapping (C^1..C^k) to (D^{12},...,D^{k-1,k}, C)."""
    m = np.zeros((k, k), dtype=np.int64)
    for i in range(k - 1):
        m[i, i] = 1
        m[i, i + 1] = -1
    m[k - 1, :] = 1
    return m


@dataclass(frozen=True)
class CovarianceModel:
    k: int
    p: float
    alpha: float
    cov_A: np.ndarray  # for (D^{12},...,D^{k-1,k}, C), per unit time
    cov_Atilde: np.ndarray  # for (C^1,...,C^k), per unit time
    M: np.ndarray


def covariance_model(k: int, p: float) -> CovarianceModel:
    _check(k, p)
    a = alpha(k, p)
    cov_a = np.zeros((k, k))
    for i in range(k - 1):
        cov_a[i, i] = a
        if i + 1 < k - 1:
            cov_a[i, i + 1] = cov_a[i + 1, i] = -a / 2.0
    cov_a[k - 1, k - 1] = 1.0
    off = 1.0 / k**2 - a / (2.0 * k)
    cov_at = np.full((k, k), off)
    np.fill_diagonal(cov_at, off + a / 2.0)
    return CovarianceModel(k=k, p=p, alpha=a, cov_A=cov_a, cov_Atilde=cov_at, M=m_matrix(k))


def finite_n_covariance(
    k: int, p: float, n: int, pair_a: tuple[int, int], pair_b: tuple[int, int]
) -> float:
    """Leading term of Cov(D^{i,i+1}_n, D^{j,j+1}_n) for adjacent index pairs.

    Only defined in the chi = 2 regime (p <= 1 - 1/k); above the
    transition the theory gives only Var = o(n) with no rate.
    """
    _check(k, p)
    if p > critical_p(k):
        raise RegimeError("no leading-order term above the critical probability")
    for (i, j) in (pair_a, pair_b):
        if j != i + 1 or not (1 <= i <= k - 1):
            raise ValueError(f"pair {(i, j)} is not an adjacent pair (i, i+1)")
    a = alpha(k, p)
    i, j = pair_a[0], pair_b[0]
    if i == j:
        return a * n
    if abs(i - j) == 1:
        return -a * n / 2.0
    return 0.0


def _check(k: int, p: float) -> None:
    if k < 2:
        raise ValueError("k must be at least 2")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
