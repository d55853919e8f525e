"""Adaptive observation-subset selection by upper-confidence-region scoring.

For each candidate index subset Z the score is the worst-case-favorable
non-centrality max_f f' Omega_Z f over the boundary of the confidence
ellipsoid of the current shift estimate.  The inner maximization reduces to
a scalar secular equation after a simultaneous diagonalization (Cholesky of
the estimate covariance plus an eigendecomposition).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaincinv

from .errors import NumericalError
from .model import ModelParams, ObservationMask

__all__ = [
    "AlphaSchedule",
    "UcrInputs",
    "SamplingDecision",
    "chi2_quantile",
    "adaptive_alpha",
    "omega",
    "solve_ellipsoid_max",
    "select_exhaustive",
    "select_greedy",
    "select_random",
]

# Relative secular-equation residual accepted as "on the boundary".
BOUNDARY_RTOL = 1e-6
# Components of the rotated estimate below this (relative) are treated as
# exactly orthogonal to the eigendirection.
_X_TOL = 1e-13


def chi2_quantile(prob: float, df: int) -> float:
    """Quantile of the chi-square distribution via the inverse regularized
    incomplete gamma function."""
    if not 0.0 <= prob < 1.0:
        raise ValueError(f"prob must be in [0, 1), got {prob}")
    return 2.0 * float(gammaincinv(df / 2.0, prob))


@dataclass(frozen=True)
class AlphaSchedule:
    """Segment-wise linear exploration level driven by the scan statistic."""

    d: float
    l: float
    alpha_min: float
    alpha_max: float

    def __post_init__(self):
        if not (0.0 < self.alpha_min <= self.alpha_max < 1.0):
            raise ValueError(
                f"need 0 < alpha_min <= alpha_max < 1, got "
                f"({self.alpha_min}, {self.alpha_max})"
            )
        if self.l <= 0:
            raise ValueError("l must be positive")


def adaptive_alpha(t_stat: float, schedule: AlphaSchedule) -> float:
    raw = max((t_stat - schedule.d) / schedule.l, 0.0) + schedule.alpha_min
    return min(raw, schedule.alpha_max)


@dataclass(frozen=True)
class UcrInputs:
    """Everything the subset scorer needs at one decision point."""

    f_hat: np.ndarray  # current shift estimate, (q,)
    sigma_f: np.ndarray  # its covariance, (q, q) PD
    g_next: np.ndarray  # one-step-ahead shift propagation, (q, q)
    p_pred: np.ndarray  # one-step-ahead state covariance, (q, q)
    params: ModelParams
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be strictly inside (0, 1), got {self.alpha}")

    @property
    def radius2(self) -> float:
        return chi2_quantile(1.0 - self.alpha, self.params.q)


@dataclass(frozen=True)
class SamplingDecision:
    mask: ObservationMask
    score: float
    f_star: np.ndarray
    alpha_used: float


def omega(
    mask: ObservationMask,
    g_next: np.ndarray,
    p_pred: np.ndarray,
    params: ModelParams,
) -> np.ndarray:
    """Projected information matrix G' C_Z' V^{-1} C_Z G for one subset."""
    c_z = params.C[list(mask.indices), :]
    v = c_z @ p_pred @ c_z.T + params.sigma_r**2 * np.eye(len(mask))
    vals = np.linalg.eigvalsh(v)
    if vals[0] <= vals[-1] * 1e-12:
        raise NumericalError(f"innovation covariance singular for mask {mask.indices}")
    w = c_z.T @ np.linalg.solve(v, c_z)
    om = g_next.T @ w @ g_next
    return 0.5 * (om + om.T)


def _secular_boundary_max(
    lams: np.ndarray, xs: np.ndarray, hinv_f: np.ndarray, radius2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary maximizers in diagonalized coordinates, batched over rows.

    Solves sum_i x_i^2 / (lam_i + lambda)^2 = radius2 on the maximizer branch
    lambda < -max(lam) via the substitution t = -lambda - max(lam) >= 0,
    using a safeguarded Newton iteration on 1/sqrt of the secular sum.
    Returns (f_tilde, score) with score = sum_i lam_i (f_tilde + H^{-1}f)_i^2.
    """
    n, q = lams.shape
    lmax = lams.max(axis=1)
    d = lmax[:, None] - lams  # >= 0
    scale = np.maximum(np.abs(xs).max(axis=1), 1.0)
    active = np.abs(xs) > _X_TOL * scale[:, None]
    x2 = np.where(active, xs, 0.0) ** 2
    sqrt_c = np.sqrt(radius2)

    # Closed-form bracket: at t_lo the largest single term alone reaches
    # radius2, at t_hi the whole sum is already below it.
    with np.errstate(divide="ignore"):
        t_lo = np.max(
            np.where(active, np.abs(xs) / sqrt_c - d, -np.inf), axis=1, initial=-np.inf
        )
    any_active = np.isfinite(t_lo)
    # Hard case: the top eigendirections carry no estimate mass and the
    # remaining terms cannot reach the boundary radius.
    t_tiny = 0.0
    g0 = _secular_sum(x2, d, np.zeros(n))
    hard = (~any_active) | ((t_lo <= 0.0) & (g0 <= radius2))

    t = np.maximum(t_lo, 0.0)
    easy = ~hard
    if np.any(easy):
        t_e = t[easy]
        x2_e, d_e = x2[easy], d[easy]
        t_min = t_e.copy()
        t_max = np.sqrt(x2_e.sum(axis=1) / radius2)  # sum <= radius2 there
        target = 1.0 / sqrt_c
        for _ in range(40):
            g = _secular_sum(x2_e, d_e, t_e)
            phi = 1.0 / np.sqrt(g)
            denom3 = (d_e + t_e[:, None]) ** 3
            with np.errstate(divide="ignore", invalid="ignore"):
                gprime = np.where(x2_e > 0, x2_e / denom3, 0.0).sum(axis=1)
            dphi = np.power(g, -1.5) * gprime
            step = (target - phi) / dphi
            t_new = np.clip(t_e + step, t_min, t_max)
            if np.all(np.abs(step) <= 1e-13 * (1.0 + t_e)):
                t_e = t_new
                break
            t_e = t_new
        g = _secular_sum(x2_e, d_e, t_e)
        if np.any(np.abs(g - radius2) > BOUNDARY_RTOL * radius2):
            raise NumericalError("secular equation root-find did not converge")
        t[easy] = t_e

    denom = d + t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ft = np.where(active & (denom > 0), xs / np.where(denom > 0, denom, 1.0), 0.0)
    if np.any(hard):
        # Put the leftover radius on one top eigendirection, signed to help.
        rows = np.flatnonzero(hard)
        for i in rows:
            top = int(np.argmax(lams[i]))
            rest = float((ft[i] ** 2).sum() - ft[i, top] ** 2)
            extra = np.sqrt(max(radius2 - rest, 0.0))
            sign = 1.0 if hinv_f[i, top] >= 0 else -1.0
            ft[i, top] = sign * extra
    scores = (lams * (ft + hinv_f) ** 2).sum(axis=1)
    return ft, scores


def _secular_sum(x2: np.ndarray, d: np.ndarray, t: np.ndarray) -> np.ndarray:
    denom = d + t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x2 > 0, x2 / denom**2, 0.0)
    return terms.sum(axis=1)


def _diagonalize(sigma_f: np.ndarray, f_hat: np.ndarray):
    """Cholesky factor of sigma_f plus the whitened estimate."""
    try:
        b = np.linalg.cholesky(sigma_f)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("sigma_f is not positive definite") from exc
    bf = solve_triangular(b, f_hat, lower=True)
    return b, bf


def _clip_spectrum(lams: np.ndarray) -> np.ndarray:
    """PSD repair: small negative eigenvalues are rounding noise."""
    floor = -1e-10 * max(float(np.abs(lams).max()), 1.0)
    if np.any(lams < floor):
        raise NumericalError(f"projected information matrix indefinite: min eig {lams.min():.3g}")
    return np.clip(lams, 0.0, None)


def solve_ellipsoid_max(
    inputs: UcrInputs, omega_z: np.ndarray
) -> tuple[np.ndarray, float]:
    """Maximize f' Omega f over the boundary of the confidence ellipsoid."""
    radius2 = inputs.radius2
    f_hat = inputs.f_hat
    if radius2 < 1e-12:
        return f_hat.copy(), float(f_hat @ omega_z @ f_hat)
    b, bf = _diagonalize(inputs.sigma_f, f_hat)
    m = b.T @ omega_z @ b
    lams, vecs = np.linalg.eigh(0.5 * (m + m.T))
    lams = _clip_spectrum(lams)
    hinv_f = vecs.T @ bf
    x = lams * hinv_f
    ft, scores = _secular_boundary_max(
        lams[None, :], x[None, :], hinv_f[None, :], radius2
    )
    f_star = b @ (vecs @ ft[0]) + f_hat
    return f_star, float(scores[0])


def _score_mask_array(mask_idx: np.ndarray, inputs: UcrInputs):
    """Scores and boundary maximizers for a batch of equal-size subsets."""
    params = inputs.params
    c_zs = params.C[mask_idx]  # (n, m, q)
    v = np.einsum("nij,jk,nlk->nil", c_zs, inputs.p_pred, c_zs)
    msize = mask_idx.shape[1]
    v += params.sigma_r**2 * np.eye(msize)
    vals = np.linalg.eigvalsh(v)
    bad = vals[:, 0] <= vals[:, -1] * 1e-12
    if np.any(bad):
        offender = tuple(int(i) for i in mask_idx[int(np.flatnonzero(bad)[0])])
        raise NumericalError(f"innovation covariance singular for mask {offender}")
    vinv = np.linalg.inv(v)
    w = np.einsum("nji,njk,nkl->nil", c_zs, vinv, c_zs)
    gn = inputs.g_next
    om = gn.T @ w @ gn

    radius2 = inputs.radius2
    f_hat = inputs.f_hat
    if radius2 < 1e-12:
        scores = np.einsum("i,nij,j->n", f_hat, om, f_hat)
        return scores, np.broadcast_to(f_hat, (len(mask_idx), len(f_hat))).copy()

    b, bf = _diagonalize(inputs.sigma_f, f_hat)
    m = b.T @ om @ b
    lams, vecs = np.linalg.eigh(0.5 * (m + m.transpose(0, 2, 1)))
    lams = _clip_spectrum(lams)
    hinv_f = vecs.transpose(0, 2, 1) @ bf
    xs = lams * hinv_f
    ft, scores = _secular_boundary_max(lams, xs, hinv_f, radius2)
    f_stars = (b @ vecs @ ft[..., None])[..., 0] + f_hat
    return scores, f_stars


def select_exhaustive(inputs: UcrInputs, m: int) -> SamplingDecision:
    """Best subset over all C(p, m) masks; ties go to the lexicographically
    smallest index set."""
    p = inputs.params.p
    _check_subset_size(m, p)
    mask_idx = np.array(list(itertools.combinations(range(p), m)), dtype=np.intp)
    scores, f_stars = _score_mask_array(mask_idx, inputs)
    best = int(np.argmax(scores))  # first max = lexicographically smallest
    return SamplingDecision(
        mask=ObservationMask(indices=tuple(int(i) for i in mask_idx[best]), p=p),
        score=float(scores[best]),
        f_star=f_stars[best],
        alpha_used=inputs.alpha,
    )


def select_greedy(inputs: UcrInputs, m: int) -> SamplingDecision:
    """Grow the subset one index per round, keeping the best extension."""
    p = inputs.params.p
    _check_subset_size(m, p)
    chosen: list[int] = []
    last_score = 0.0
    last_f_star = inputs.f_hat.copy()
    for _ in range(m):
        pool = [k for k in range(p) if k not in chosen]
        mask_idx = np.array([sorted(chosen + [k]) for k in pool], dtype=np.intp)
        scores, f_stars = _score_mask_array(mask_idx, inputs)
        best = int(np.argmax(scores))  # first max = smallest candidate index
        chosen.append(pool[best])
        last_score = float(scores[best])
        last_f_star = f_stars[best]
    return SamplingDecision(
        mask=ObservationMask(indices=tuple(sorted(chosen)), p=p),
        score=last_score,
        f_star=last_f_star,
        alpha_used=inputs.alpha,
    )


def select_random(p: int, m: int, rng: np.random.Generator) -> ObservationMask:
    """Uniform draw over all C(p, m) index subsets."""
    _check_subset_size(m, p)
    idx = np.sort(rng.choice(p, size=m, replace=False))
    return ObservationMask(indices=tuple(int(i) for i in idx), p=p)


def _check_subset_size(m: int, p: int) -> None:
    if not 1 <= m <= p:
        raise ValueError(f"subset size m={m} must satisfy 1 <= m <= p={p}")
