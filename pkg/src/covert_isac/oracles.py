"""Independent brute-force and Monte-Carlo verifiers.

Everything here exists to check the closed-form/optimized paths from the
outside; nothing in this module is called by the solvers themselves.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize

from .errors import Infeasible
from .model import ChannelSet, SystemConfig
from .numerics import QcqpOneProblem

__all__ = [
    "mc_willie_detector",
    "numeric_kl",
    "brute_qcqp",
    "ball_sample_verifier",
]


def mc_willie_detector(
    kappa0: float, kappa1: float, trials: int, seed: int
) -> tuple[float, float]:
    """Empirical total detection error of the threshold test, with std error.

    Draws received powers exponential with mean kappa0 (signal absent) and
    kappa1 (signal present), applies the optimal threshold
    tau = kappa0 kappa1 / (kappa1 - kappa0) * ln(kappa1/kappa0), and returns
    (false alarm + missed detection, standard error).
    """
    if trials < 10_000:
        raise ValueError("use at least 1e4 trials")
    if not (kappa1 >= kappa0 > 0.0):
        raise ValueError("need kappa1 >= kappa0 > 0")
    if kappa1 / kappa0 - 1.0 < 1e-12:
        # indistinguishable hypotheses; the error probability is exactly 1
        return 1.0, 0.0
    tau = kappa0 * kappa1 / (kappa1 - kappa0) * math.log(kappa1 / kappa0)
    rng = np.random.default_rng(seed)
    under_h0 = rng.exponential(scale=kappa0, size=trials)
    under_h1 = rng.exponential(scale=kappa1, size=trials)
    p_fa = float(np.mean(under_h0 > tau))
    p_md = float(np.mean(under_h1 <= tau))
    var = (p_fa * (1 - p_fa) + p_md * (1 - p_md)) / trials
    return p_fa + p_md, math.sqrt(var)


def numeric_kl(kappa0: float, kappa1: float) -> float:
    """KL divergence between the two exponential received-power densities,
    by adaptive quadrature (absolute error <= 1e-8)."""
    if kappa0 <= 0.0 or kappa1 <= 0.0:
        raise ValueError("kappas must be positive")

    log_ratio = math.log(kappa1 / kappa0)
    dif = 1.0 / kappa1 - 1.0 / kappa0

    def integrand(t: float) -> float:
        return math.exp(-t / kappa0) / kappa0 * (log_ratio + t * dif)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
    return val


# ---------------------------------------------------------------------------
# brute-force QCQP
# ---------------------------------------------------------------------------


def _strictly_feasible_anchor(quad: np.ndarray, bound: float) -> np.ndarray:
    evals, evecs = np.linalg.eigh(0.5 * (quad + quad.conj().T))
    n = quad.shape[0]
    if bound > 0.0:
        return np.zeros(n, dtype=complex)
    if evals[0] < 0.0:
        level = bound - max(1.0, abs(bound))
        beta = math.sqrt(level / evals[0])
        return beta * evecs[:, 0].astype(complex)
    if bound == 0.0:
        return np.zeros(n, dtype=complex)
    raise Infeasible("constraint set is empty")


def _retract(x: np.ndarray, anchor: np.ndarray, quad: np.ndarray, bound: float) -> np.ndarray:
    """Bisect along the chord to the strictly feasible anchor until feasible."""
    lo, hi = 0.0, 1.0  # x(s) = x + s (anchor - x)

    def constraint(s: float) -> float:
        y = x + s * (anchor - x)
        return float(np.real(y.conj() @ quad @ y)) - bound

    if constraint(0.0) <= 0.0:
        return x
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if constraint(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return x + hi * (anchor - x)


def _polish(x0: np.ndarray, target: np.ndarray, quad: np.ndarray, bound: float) -> np.ndarray:
    """Local refinement with an off-the-shelf constrained optimizer."""
    n = len(target)
    q_emb = np.block(
        [[np.real(quad), -np.imag(quad)], [np.imag(quad), np.real(quad)]]
    )
    t_vec = np.concatenate([np.real(target), np.imag(target)])

    def fun(u):
        d = u - t_vec
        return float(d @ d)

    def jac(u):
        return 2.0 * (u - t_vec)

    con = optimize.NonlinearConstraint(
        lambda u: float(u @ q_emb @ u),
        -np.inf,
        bound,
        jac=lambda u: 2.0 * (q_emb @ u),
    )
    u0 = np.concatenate([np.real(x0), np.imag(x0)])
    res = optimize.minimize(
        fun,
        u0,
        jac=jac,
        method="trust-constr",
        constraints=[con],
        options={"gtol": 1e-12, "xtol": 1e-14, "maxiter": 500, "verbose": 0},
    )
    u = res.x
    return u[:n] + 1j * u[n:]


def brute_qcqp(p: QcqpOneProblem, restarts: int, seed: int) -> float:
    """Best feasible objective of min ||x - target||^2 s.t. x^H quad x <= bound.

    Multistart projected-gradient descent with chord retraction to a strictly
    feasible anchor, followed by constrained local polish of the best
    candidates.  Deterministic under seed.
    """
    rng = np.random.default_rng(seed)
    quad = 0.5 * (p.quad + p.quad.conj().T)
    target = np.asarray(p.target, dtype=complex)
    bound = float(p.bound)
    n = len(target)
    anchor = _strictly_feasible_anchor(quad, bound)

    def feasible(x: np.ndarray) -> bool:
        return float(np.real(x.conj() @ quad @ x)) <= bound + 1e-10 * max(1.0, abs(bound))

    def objective(x: np.ndarray) -> float:
        return float(np.linalg.norm(x - target) ** 2)

    starts = [anchor.copy()]
    if feasible(target):
        starts.append(target.copy())
    scale = max(np.linalg.norm(target), 1.0)
    for _ in range(restarts):
        x = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * rng.uniform(0.1, 2.0)
        starts.append(_retract(x, anchor, quad, bound))

    candidates = []
    for x in starts:
        eta = 0.25
        for _ in range(300):
            x_new = x - eta * 2.0 * (x - target)
            x_new = _retract(x_new, anchor, quad, bound)
            if objective(x_new) > objective(x) - 1e-16:
                eta *= 0.7
                if eta < 1e-8:
                    break
            x = x_new
        candidates.append(x)
    candidates.sort(key=objective)

    best = objective(candidates[0])
    for x in candidates[: min(6, len(candidates))]:
        polished = _polish(x, target, quad, bound)
        if feasible(polished):
            best = min(best, objective(polished))
    return best


# ---------------------------------------------------------------------------
# robust covertness verification
# ---------------------------------------------------------------------------


def ball_sample_verifier(
    v_full: np.ndarray,
    ch: ChannelSet,
    cfg: SystemConfig,
    gamma_cap: float,
    samples: int,
    seed: int,
) -> float:
    """Worst relative covertness slack over channels sampled in the CSI ball.

    Each sample is willie_est + delta with delta uniform in the ball of
    radius ch.willie_radius; the slack at channel h is
    (cap - leak/denom) / cap with cap = gamma_cap - 1.  The minimum over all
    samples is returned; nonnegative means the design stays covert on every
    sampled channel.
    """
    rng = np.random.default_rng(seed)
    cap = gamma_cap - 1.0
    if cap <= 0.0:
        raise ValueError("gamma_cap must exceed 1")
    radius = ch.willie_radius
    est = ch.willie_est
    mt = len(est)
    bob = cfg.bob_index

    if radius == 0.0:
        deltas = np.zeros((1, mt), dtype=complex)
    else:
        z = rng.standard_normal((samples, mt)) + 1j * rng.standard_normal((samples, mt))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = radius * rng.uniform(size=(samples, 1)) ** (1.0 / (2 * mt))
        deltas = r * z

    h = est[None, :] + deltas                      # (S, mt)
    g = h.conj() @ v_full                          # (S, U+2)
    powers = np.abs(g) ** 2
    leak = powers[:, bob]
    denom = powers[:, :bob].sum(axis=1) + cfg.noise_willie
    slack = (cap - leak / denom) / cap
    return float(np.min(slack))
