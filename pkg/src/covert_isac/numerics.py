"""Shared numerical kernels: generalized eigensolver, single-constraint QCQP,
rank-1 extraction, and monotone scalar root finding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import BracketError, Infeasible, SingularDenominator, ZeroMatrix

__all__ = [
    "scalar_root",
    "generalized_rayleigh_max",
    "rank1_extract",
    "QcqpOneProblem",
    "QcqpProjector",
    "solve_qcqp1",
]


def scalar_root(f, lo: float, hi: float, tol: float, max_iter: int = 500) -> float:
    """Bisection root of a monotone function; stops when |f(root)| <= tol."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude entry is real nonnegative."""
    k = int(np.argmax(np.abs(v)))
    pivot = v[k]
    if abs(pivot) == 0.0:
        return v
    return v * (pivot.conjugate() / abs(pivot))


def generalized_rayleigh_max(xi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """argmax of w^H Xi w / w^H Lam w, unit Euclidean norm, canonical phase.

    Solved as the top generalized eigenvector of (Xi, Lam) after whitening
    by Lam^{-1/2}; Lam must be positive definite.
    """
    lam = 0.5 * (lam + lam.conj().T)
    xi = 0.5 * (xi + xi.conj().T)
    evals_lam = np.linalg.eigvalsh(lam)
    if evals_lam[0] <= 1e-12 * max(np.trace(lam).real, 1e-300):
        raise SingularDenominator("denominator matrix is (near) singular")
    _, vecs = scipy.linalg.eigh(xi, lam)
    w = vecs[:, -1]
    w = w / np.linalg.norm(w)
    return _canonical_phase(w)


def rank1_extract(f: np.ndarray, zero_tol: float = 1e-14) -> tuple[np.ndarray, float]:
    """Principal component sqrt(l1) u1 of a PSD matrix and the ratio l2/l1."""
    f = 0.5 * (f + f.conj().T)
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    if scale <= zero_tol:
        raise ZeroMatrix("matrix is numerically zero")
    evals, evecs = np.linalg.eigh(f)
    l1 = float(evals[-1])
    if l1 <= zero_tol * scale:
        raise ZeroMatrix("no positive eigenvalue")
    v = math.sqrt(l1) * _canonical_phase(evecs[:, -1])
    ratio = max(float(evals[-2]), 0.0) / l1 if f.shape[0] > 1 else 0.0
    return v, ratio


# ---------------------------------------------------------------------------
# QCQP with a single quadratic constraint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QcqpOneProblem:
    """min ||x - target||^2  s.t.  x^H quad x <= bound (quad Hermitian)."""

    target: np.ndarray
    quad: np.ndarray
    bound: float


class QcqpProjector:
    """Projection onto {x : x^H Q x <= c} for a fixed (Q, c).

    Precomputes the eigendecomposition of Q once; each ``project`` call then
    solves the KKT secular equation x(mu) = (I + mu Q)^{-1} target in the
    eigenbasis.  Reuse the projector when many targets share one constraint.
    """

    def __init__(self, quad: np.ndarray, bound: float, hermitian_tol: float = 1e-10):
        quad = np.asarray(quad)
        scale = max(float(np.max(np.abs(quad))), 1e-300)
        if np.max(np.abs(quad - quad.conj().T)) > hermitian_tol * scale:
            raise ValueError("quad must be Hermitian")
        quad = 0.5 * (quad + quad.conj().T)
        self.bound = float(bound)
        self.evals, self.evecs = np.linalg.eigh(quad)
        self.dim = quad.shape[0]
        lam_min = float(self.evals[0])
        lam_scale = max(float(np.max(np.abs(self.evals))), 1e-300)
        # cluster tolerance for the bottom eigenspace (hard-case bookkeeping)
        self._min_cluster = self.evals <= lam_min + 1e-12 * lam_scale
        self.lam_min = lam_min
        self._lam_scale = lam_scale
        if lam_min >= -1e-14 * lam_scale and self.bound < -1e-12 * max(1.0, abs(self.bound)):
            raise Infeasible("PSD constraint matrix with negative bound")

    def _value(self, coeff: np.ndarray, mu: float) -> float:
        d = 1.0 + mu * self.evals
        return float(np.sum(coeff / (d * d)))

    def project(self, target: np.ndarray) -> np.ndarray:
        t_hat = self.evecs.conj().T @ np.asarray(target, dtype=complex)
        coeff = self.evals * np.abs(t_hat) ** 2
        coeff[np.abs(self.evals) <= 1e-14 * self._lam_scale] = 0.0  # null directions pass through
        c = self.bound
        if self._value(coeff, 0.0) <= c + 1e-12 * max(1.0, abs(c)):
            return np.asarray(target, dtype=complex).copy()

        if self.lam_min >= -1e-14 * self._lam_scale:
            # convex branch: value decreases monotonically toward 0
            if c <= 1e-14:
                x_hat = t_hat.copy()
                x_hat[self.evals > 1e-14 * self._lam_scale] = 0.0
                return self.evecs @ x_hat
            hi = 1.0
            while self._value(coeff, hi) > c:
                hi *= 4.0
                if hi > 1e30:
                    raise Infeasible("secular equation has no root")
            mu = brentq(lambda m: self._value(coeff, m) - c, 0.0, hi, xtol=1e-15, rtol=1e-15)
            return self.evecs @ (t_hat / (1.0 + mu * self.evals))

        # indefinite branch: valid interval is [0, mu_max)
        mu_max = -1.0 / self.lam_min
        keep = ~self._min_cluster
        d_keep = 1.0 + mu_max * self.evals[keep]
        s = float(np.sum(coeff[keep] / (d_keep * d_keep)))
        mass_min = float(np.sum(np.abs(t_hat[self._min_cluster]) ** 2))
        t_norm_sq = max(float(np.sum(np.abs(t_hat) ** 2)), 1e-300)

        hard = mass_min <= 1e-24 * t_norm_sq and s >= c
        if not hard:
            hi = None
            for k in range(2, 16):
                cand = mu_max * (1.0 - 10.0 ** (-k))
                if self._value(coeff, cand) < c:
                    hi = cand
                    break
            if hi is None:
                # crossing indistinguishable from mu_max at double precision
                hard = True
        if not hard:
            mu = brentq(lambda m: self._value(coeff, m) - c, 0.0, hi, xtol=1e-15, rtol=1e-15)
            return self.evecs @ (t_hat / (1.0 + mu * self.evals))

        # hard case: target has no mass in the bottom eigenspace, so mu = mu_max
        # with a boundary component added along it to activate the constraint
        x_hat = np.zeros_like(t_hat)
        x_hat[keep] = t_hat[keep] / d_keep
        alpha_sq = max((c - s) / self.lam_min, 0.0)
        first_min = int(np.argmax(self._min_cluster))
        x_hat[first_min] = math.sqrt(alpha_sq)
        return self.evecs @ x_hat


def solve_qcqp1(p: QcqpOneProblem) -> np.ndarray:
    """Closed-form KKT solution of a single-constraint QCQP (see QcqpProjector)."""
    return QcqpProjector(p.quad, p.bound).project(p.target)


def max_quadratic_on_ball(a: np.ndarray, b: np.ndarray, radius: float) -> float:
    """max of x^H a x + 2 Re{b^H x} over ||x|| <= radius (a Hermitian).

    Exact trust-region maximization: boundary multiplier from the secular
    equation in the eigenbasis of a, with the usual degenerate-eigenspace
    completion when b has no component on the top eigenspace.
    """
    a = 0.5 * (a + a.conj().T)
    evals, evecs = np.linalg.eigh(a)
    b_hat = evecs.conj().T @ np.asarray(b, dtype=complex)
    lam_max = float(evals[-1])
    scale = max(float(np.max(np.abs(evals))), 1e-300)

    def value(x_hat: np.ndarray) -> float:
        return float(np.real(np.sum(evals * np.abs(x_hat) ** 2))
                     + 2.0 * np.real(np.vdot(b_hat, x_hat)))

    # interior candidate exists only for a strictly negative definite a
    if lam_max < 0.0:
        x_int = b_hat / (-evals)
        if np.linalg.norm(x_int) <= radius:
            return value(x_int)

    def norm_sq(mu: float) -> float:
        return float(np.sum(np.abs(b_hat) ** 2 / (mu - evals) ** 2))

    top = evals >= lam_max - 1e-12 * scale
    mass_top = float(np.sum(np.abs(b_hat[top]) ** 2))
    r_sq = radius * radius

    keep = ~top
    x_keep = np.zeros_like(b_hat)
    x_keep[keep] = b_hat[keep] / (lam_max - evals[keep])
    rem = r_sq - float(np.sum(np.abs(x_keep) ** 2))
    hard = mass_top <= 1e-24 * max(float(np.sum(np.abs(b_hat) ** 2)), 1e-300) and rem >= 0.0
    if hard:
        # mu = lam_max; fill the top eigenspace up to the radius
        if rem > 0.0:
            x_keep[int(np.argmax(top))] = math.sqrt(rem)
        return value(x_keep)

    # boundary multiplier strictly above lam_max from the secular equation
    step = max(scale, 1.0) * 1e-8
    while norm_sq(lam_max + step) > r_sq:
        step *= 4.0
    hi = lam_max + step
    lo = lam_max + step / 4.0
    while norm_sq(lo) < r_sq:  # ensure bracketing from above
        step /= 4.0
        lo = lam_max + step
        if step < 1e-250:
            break
    mu = brentq(lambda m: norm_sq(m) - r_sq, lo, hi, xtol=1e-15, rtol=1e-15)
    x_hat = b_hat / (mu - evals)
    return value(x_hat)
