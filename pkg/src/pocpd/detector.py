"""Windowed GLRT change detector.

For every candidate change point k in a sliding window the detector keeps
    G(n, k)   -- accumulated closed-loop propagation of a unit shift,
    s_vec(k)  -- sum of G' C_Z' V^{-1} r over steps k+1..n,
    m_mat(k)  -- sum of G' C_Z' V^{-1} C_Z G over the same steps.
The shift estimate is f_hat = m_mat^{-1} s_vec, and the scan statistic is the
quadratic form s_vec' m_mat^{-1} s_vec maximized over candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError
from .filtering import StepOutput

__all__ = [
    "WindowConfig",
    "StepTerm",
    "GAccumulator",
    "ScanResult",
    "Detector",
    "make_step_term",
]

# Candidates whose information matrix has reciprocal condition number below
# this are "insufficient information" and are skipped by the scan.
RCOND_SKIP = 1e-10


@dataclass(frozen=True)
class WindowConfig:
    """Scan window: candidates k satisfy n - m1 < k < n - m2."""

    m1: int
    m2: int
    h: float | None = None  # control limit; None until calibrated

    def __post_init__(self):
        if not (0 <= self.m2 < self.m1):
            raise ValueError(f"need 0 <= m2 < m1, got m1={self.m1}, m2={self.m2}")


@dataclass(frozen=True)
class StepTerm:
    """Per-step factors feeding the accumulators."""

    a_tilde: np.ndarray  # closed-loop transition of this step, (q, q)
    u: np.ndarray  # C_Z' V^{-1} r, shape (q,)
    w: np.ndarray  # C_Z' V^{-1} C_Z, shape (q, q)


@dataclass(frozen=True)
class GAccumulator:
    """Snapshot of one candidate's accumulators (introspection/testing)."""

    k: int
    g_mat: np.ndarray
    s_vec: np.ndarray
    m_mat: np.ndarray


@dataclass(frozen=True)
class ScanResult:
    t_stat: float
    tau_hat: int | None
    f_hat: np.ndarray | None
    sigma_f: np.ndarray | None
    alarm: bool


def make_step_term(out: StepOutput, C: np.ndarray) -> StepTerm:
    """Fold a filter step output into the detector's per-step factors."""
    c_z = C[list(out.mask.indices), :]
    chol = cho_factor(out.v_mat, lower=True)
    vinv_r = cho_solve(chol, out.residual)
    vinv_cz = cho_solve(chol, c_z)
    return StepTerm(a_tilde=out.a_tilde_used, u=c_z.T @ vinv_r, w=c_z.T @ vinv_cz)


class Detector:
    """Ring-buffered accumulators over candidate change points.

    Pure in spirit: one detector belongs to one stream, and steps are pushed
    strictly in time order.
    """

    def __init__(self, q: int, window: WindowConfig):
        self.q = q
        self.window = window
        nslots = window.m1  # at most m1 - 1 live candidates
        self._G = np.zeros((nslots, q, q))
        self._s = np.zeros((nslots, q))
        self._M = np.zeros((nslots, q, q))
        self._k = np.full(nslots, -1, dtype=np.int64)
        self._a_prev: np.ndarray | None = None
        self.n = 0  # time of the last pushed step

    def push_step(self, term: StepTerm) -> None:
        """Fold the step at time n = self.n + 1 into every live candidate."""
        n = self.n + 1
        live = (self._k >= 0) & (self._k > n - self.window.m1)
        if self._a_prev is not None and np.any(live):
            self._G[live] = self._a_prev @ self._G[live] + np.eye(self.q)
        # Open candidate k = n - 1 with G(n, n-1) = I.  Its slot held
        # k - m1, which is already out of the window.
        slot = (n - 1) % self._k.shape[0]
        self._G[slot] = np.eye(self.q)
        self._s[slot] = 0.0
        self._M[slot] = 0.0
        self._k[slot] = n - 1
        live[slot] = True
        g = self._G[live]
        gt = g.transpose(0, 2, 1)
        self._s[live] += gt @ term.u
        self._M[live] += gt @ term.w @ g
        self._k[~live] = -1
        self._a_prev = term.a_tilde
        self.n = n

    def _slot_of(self, k: int) -> int:
        slot = k % self._k.shape[0]
        if self._k[slot] != k:
            raise KeyError(f"candidate k={k} is not live at n={self.n}")
        return slot

    def accumulator(self, k: int) -> GAccumulator:
        slot = self._slot_of(k)
        return GAccumulator(
            k=k,
            g_mat=self._G[slot].copy(),
            s_vec=self._s[slot].copy(),
            m_mat=self._M[slot].copy(),
        )

    def estimate_shift(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(f_hat, sigma_f) for candidate k; raises if m_mat is rank-deficient."""
        slot = self._slot_of(k)
        m_mat = self._M[slot]
        if _rcond_est(m_mat) < RCOND_SKIP:
            raise NumericalError(
                f"candidate k={k} has insufficient information at n={self.n}"
            )
        sigma_f = np.linalg.inv(m_mat)
        sigma_f = 0.5 * (sigma_f + sigma_f.T)
        return sigma_f @ self._s[slot], sigma_f

    def glrt(self, k: int) -> float:
        f_hat, _ = self.estimate_shift(k)
        slot = self._slot_of(k)
        return float(self._s[slot] @ f_hat)

    def g_next(self, k: int) -> np.ndarray:
        """G(n+1, k) for the sampler's one-step-ahead projection."""
        if self._a_prev is None:
            raise RuntimeError("no step pushed yet")
        slot = self._slot_of(k)
        return self._a_prev @ self._G[slot] + np.eye(self.q)

    def scan(self) -> ScanResult:
        """Maximize the GLRT over the window; ties go to the most recent k."""
        n = self.n
        w = self.window
        h = w.h if w.h is not None else math.inf
        valid = (self._k > n - w.m1) & (self._k < n - w.m2) & (self._k >= 0)
        if not np.any(valid):
            return ScanResult(0.0, None, None, None, False)
        order = np.argsort(self._k[valid])
        ks = self._k[valid][order]
        Ms = self._M[valid][order]
        ss = self._s[valid][order]
        rcond = _rcond_est_batch(Ms)
        good = rcond >= RCOND_SKIP
        if not np.any(good):
            return ScanResult(0.0, None, None, None, False)
        ks, Ms, ss = ks[good], Ms[good], ss[good]
        try:
            inv = np.linalg.inv(Ms)
        except np.linalg.LinAlgError:
            inv = np.stack([np.linalg.pinv(m) for m in Ms])
        stats = np.einsum("ki,kij,kj->k", ss, inv, ss)
        best = np.flatnonzero(stats == stats.max())[-1]  # most recent k wins
        t_stat = float(stats[best])
        sigma_f = 0.5 * (inv[best] + inv[best].T)
        return ScanResult(
            t_stat=t_stat,
            tau_hat=int(ks[best]),
            f_hat=sigma_f @ ss[best],
            sigma_f=sigma_f,
            alarm=bool(t_stat > h),
        )


def _rcond_est(mat: np.ndarray) -> float:
    vals = np.abs(np.linalg.eigvalsh(mat))
    hi = float(vals.max())
    return float(vals.min()) / hi if hi > 0 else 0.0


def _rcond_est_batch(mats: np.ndarray) -> np.ndarray:
    vals = np.abs(np.linalg.eigvalsh(mats))
    hi = vals.max(axis=-1)
    lo = vals.min(axis=-1)
    return np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
