"""Hybrid analog/digital design: rate-to-MSE reformulation plus an
augmented-Lagrangian consensus loop.

Auxiliary copies of the beamformer carry one hard constraint each (power,
per-user QoS, covertness leakage, sensing floor); every copy update is an
exact single-constraint QCQP projection, the analog factor is updated by a
majorized coordinate sweep under its unit-modulus constraint, and the
digital factor by least squares.  The robust variant enforces the leakage
constraint on a fixed sample of warden channels drawn in the CSI ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SensingInfeasible, Infeasible
from .model import (
    BeamformerSolution,
    ChannelSet,
    PerformanceReport,
    SensingScene,
    SystemConfig,
    audit_solution,
    performance_report,
    sinr_and_rates,
    solve_gamma_cap,
    steering,
)
from .fdbf import (
    _display_filter,
    _receive_quadratics,
    _restore_covertness_nominal,
    _sensing_coeff,
    restore_ball_covertness,
)
from .numerics import QcqpProjector, generalized_rayleigh_max

__all__ = [
    "HbfOptions",
    "AlState",
    "HbfTrace",
    "update_receive_filter_hbf",
    "wmmse_scalars",
    "mse_value",
    "step_y",
    "step_t",
    "step_g",
    "step_m",
    "step_vrf",
    "step_vd",
    "step_duals",
    "al_value",
    "solve_hbf",
]


@dataclass(frozen=True)
class HbfOptions:
    max_outer_iters: int = 30
    max_inner_iters: int = 300
    rate_tol: float = 1e-4          # relative covert-rate change, outer loop
    residual_tol: float = 1e-4      # max consensus residual, inner loop
    rho: tuple = (1.0, 1.0, 1.0, 1.0)
    ccd_sweeps: int = 100
    ccd_tol: float = 1e-6
    stall_window: int = 20          # iterations without progress before rho bump
    stall_factor: float = 1.5
    n_willie_samples: int = 50      # robust-mode channel sample size
    n_starts: int = 2               # analog initializations tried (best kept)
    weight_cap: float | None = None # cap on the MSE weight inside the center
                                    # update; None tracks the exact weight


    def __post_init__(self) -> None:
        if any(r <= 0 for r in self.rho):
            raise ValueError("penalty parameters must be positive")


@dataclass
class AlState:
    """All primal copies, analog/digital factors, duals, and scalars."""

    y: np.ndarray
    t_u: list                      # one copy per QoS-carrying stream
    g: list                        # one copy per leakage constraint (1 or K)
    m: np.ndarray | None           # sensing copy (None without sensing)
    v_rf: np.ndarray
    v_d: np.ndarray
    d: np.ndarray                  # dual of y = v_rf v_d
    phi_u: list
    z: list
    omega: np.ndarray | None
    rho: np.ndarray                # (rho1, rho2, rho3, rho4)
    p: complex = 0.0
    omega_w: float = 1.0


@dataclass
class HbfTrace:
    covert_rates: list = field(default_factory=list)     # per outer iteration
    inner_iters: list = field(default_factory=list)
    final_residual: list = field(default_factory=list)
    al_pre: list = field(default_factory=list)           # AL before each sweep
    al_post: list = field(default_factory=list)          # AL after each sweep
    al_transition: list = field(default_factory=list)    # True on the first sweep
                                                         # after the sensing set
                                                         # moved under its copy
    vrf_objectives: list = field(default_factory=list)   # fit values per sweep chain
    rho_history: list = field(default_factory=list)
    iterations: int = 0


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def update_receive_filter_hbf(
    v_rf: np.ndarray, v_d: np.ndarray, scene: SensingScene, cfg: SystemConfig
) -> np.ndarray:
    """Receive filter maximizing sensing SINR at the current hybrid beams."""
    xi, lam = _receive_quadratics(v_rf @ v_d, scene, cfg)
    return generalized_rayleigh_max(xi, lam)


def mse_value(v_rf: np.ndarray, v_d: np.ndarray, ch: ChannelSet, cfg: SystemConfig, p: complex) -> float:
    """Decode MSE of the covert stream under scalar receive coefficient p."""
    heff = ch.h_bob.conj() @ (v_rf @ v_d)
    total = float(np.sum(np.abs(heff) ** 2)) + cfg.noise_bob
    return abs(p) ** 2 * total - 2.0 * (p * heff[cfg.bob_index]).real + 1.0


def wmmse_scalars(
    v_rf: np.ndarray, v_d: np.ndarray, ch: ChannelSet, cfg: SystemConfig
) -> tuple[complex, float]:
    """Optimal receive coefficient and MSE weight at the current beams."""
    heff = ch.h_bob.conj() @ (v_rf @ v_d)
    total = float(np.sum(np.abs(heff) ** 2)) + cfg.noise_bob
    p = heff[cfg.bob_index].conjugate() / total
    e = abs(p) ** 2 * total - 2.0 * (p * heff[cfg.bob_index]).real + 1.0
    return p, 1.0 / e


def _qos_quad(ch: ChannelSet, cfg: SystemConfig, u: int) -> tuple[np.ndarray, float]:
    """Constraint x^H Q x <= c of the QoS copy for stream u (vec, column-major)."""
    floor = 2.0 ** (cfg.qos_carol if u < cfg.u_carols else cfg.qos_willie)
    c_vec = np.full(cfg.n_streams, floor - 1.0)
    c_vec[u] = -1.0
    h = ch.h[:, u]
    s = np.outer(h, h.conj())
    quad = np.kron(np.diag(c_vec), s)
    bound = (1.0 - floor) * cfg.noise_vector()[u]
    return quad, bound


def _leak_quad(h_w: np.ndarray, cfg: SystemConfig, gamma_cap: float) -> tuple[np.ndarray, float]:
    """Constraint of a leakage copy at warden channel h_w."""
    c_vec = np.full(cfg.n_streams, 1.0 - gamma_cap)
    c_vec[cfg.bob_index] = 1.0
    s = np.outer(h_w, h_w.conj())
    quad = np.kron(np.diag(c_vec), s)
    bound = (gamma_cap - 1.0) * cfg.noise_willie
    return quad, bound


def _sensing_quad(
    scene: SensingScene, cfg: SystemConfig, w: np.ndarray
) -> tuple[np.ndarray, float]:
    """Constraint of the sensing copy at receive filter w (indefinite)."""
    k_mat, offset = _sensing_coeff(scene, cfg, w, basis=None)
    quad = np.kron(np.eye(cfg.n_streams), k_mat)
    return quad, -offset


def _vec(a: np.ndarray) -> np.ndarray:
    return a.flatten(order="F")


def _unvec(v: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    return v.reshape((-1, cfg.n_streams), order="F")


def step_y(state: AlState, ch: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Power-ball-constrained quadratic update of the consensus center.

    The decode-error term carries its MSE weight (the rate/MSE equivalence
    needs the weighted error in every subproblem; unweighted, the penalties
    outweigh the rate term by roughly one-plus-SINR and the loop crawls).
    The Hessian is rank-one-per-column plus a scaled identity, so the linear
    solves use one rank-one correction and the power multiplier comes from a
    monotone scalar equation.
    """
    rho1, rho2, rho3, rho4 = state.rho
    h = ch.h_bob
    p = state.p
    kappa = 0.5 * (rho1 + rho2 * len(state.t_u) + rho3 * len(state.g) + (rho4 if state.m is not None else 0.0))

    rhs = 0.5 * rho1 * (state.v_rf @ state.v_d - state.d)
    for t, phi in zip(state.t_u, state.phi_u):
        rhs = rhs + 0.5 * rho2 * (t + phi)
    for g, z in zip(state.g, state.z):
        rhs = rhs + 0.5 * rho3 * (g + z)
    if state.m is not None:
        rhs = rhs + 0.5 * rho4 * (state.m + state.omega)
    rhs[:, cfg.bob_index] += state.omega_w * np.conj(p) * h

    p_sq = state.omega_w * abs(p) ** 2
    h_norm_sq = float(np.linalg.norm(h) ** 2)

    def solve_shift(beta: float) -> np.ndarray:
        hc = h.conj() @ rhs
        return (rhs - p_sq * np.outer(h, hc) / (beta + p_sq * h_norm_sq)) / beta

    y = solve_shift(kappa)
    power = float(np.linalg.norm(y) ** 2)
    budget = cfg.total_power
    if power <= budget:
        return y

    from scipy.optimize import brentq

    def excess(mu: float) -> float:
        return float(np.linalg.norm(solve_shift(kappa + mu)) ** 2) - budget

    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 4.0
    mu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return solve_shift(kappa + mu)


def step_t(
    state: AlState,
    ch: ChannelSet,
    cfg: SystemConfig,
    u: int,
    projector: QcqpProjector | None = None,
) -> np.ndarray:
    """Project the consensus center (minus dual) onto the QoS set of stream u."""
    if projector is None:
        projector = QcqpProjector(*_qos_quad(ch, cfg, u))
    target = _vec(state.y - state.phi_u[_t_slot(state, u)])
    return _unvec(projector.project(target), cfg)


def _t_slot(state: AlState, u: int) -> int:
    # QoS copies are stored in stream order starting at stream 0
    return u


def step_g(
    state: AlState,
    ch: ChannelSet,
    cfg: SystemConfig,
    gamma_cap: float,
    k: int = 0,
    projector: QcqpProjector | None = None,
    h_w: np.ndarray | None = None,
) -> np.ndarray:
    """Project onto the leakage set of warden channel k (0 in nominal mode)."""
    if projector is None:
        projector = QcqpProjector(*_leak_quad(h_w if h_w is not None else ch.h_willie, cfg, gamma_cap))
    target = _vec(state.y - state.z[k])
    return _unvec(projector.project(target), cfg)


def step_m(
    state: AlState,
    scene: SensingScene,
    cfg: SystemConfig,
    w: np.ndarray,
    projector: QcqpProjector | None = None,
) -> np.ndarray:
    """Project onto the sensing-floor set at the current receive filter."""
    if projector is None:
        try:
            projector = QcqpProjector(*_sensing_quad(scene, cfg, w))
        except Infeasible as exc:
            raise SensingInfeasible(str(exc)) from exc
    target = _vec(state.y - state.omega)
    return _unvec(projector.project(target), cfg)


def step_vrf(state: AlState, sweeps: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """Unit-modulus analog update by majorized coordinate sweeps.

    Each sweep minimizes a linear majorizer of ||Y - V_RF V_D + D||_F^2 at
    the current point (curvature handled by the top eigenvalue of
    V_D V_D^H), which makes the fit value non-increasing.  Entries with a
    vanishing majorizer coefficient keep their phase.
    """
    sweeps = sweeps if sweeps is not None else 100
    c = state.y + state.d
    v_rf = state.v_rf.copy()
    v_d = state.v_d
    gram = v_d @ v_d.conj().T
    lam = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    if lam == 0.0:
        return v_rf
    prev = float(np.linalg.norm(c - v_rf @ v_d) ** 2)
    for _ in range(sweeps):
        psi = (v_rf @ v_d - c) @ v_d.conj().T - lam * v_rf
        mag = np.abs(psi)
        new = np.where(mag > 0.0, -psi / np.where(mag > 0.0, mag, 1.0), v_rf)
        v_rf = new
        obj = float(np.linalg.norm(c - v_rf @ v_d) ** 2)
        if abs(prev - obj) <= tol * max(prev, 1e-15):
            break
        prev = obj
    return v_rf


def step_vd(state: AlState, flag_regularized: list | None = None) -> np.ndarray:
    """Digital factor by least squares against the consensus center."""
    v_rf = state.v_rf
    target = state.y + state.d
    gram = v_rf.conj().T @ v_rf
    rhs = v_rf.conj().T @ target
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        gram = gram + 1e-10 * np.eye(gram.shape[0])
        if flag_regularized is not None:
            flag_regularized.append(True)
    return np.linalg.solve(gram, rhs)


def step_duals(state: AlState) -> None:
    """Scaled-dual ascent on every consensus equality (in place)."""
    state.d = state.d + state.y - state.v_rf @ state.v_d
    for i, t in enumerate(state.t_u):
        state.phi_u[i] = state.phi_u[i] + t - state.y
    for k, g in enumerate(state.g):
        state.z[k] = state.z[k] + g - state.y
    if state.m is not None:
        state.omega = state.omega + state.m - state.y


def al_value(state: AlState, ch: ChannelSet, cfg: SystemConfig) -> float:
    """Augmented-Lagrangian value at the current primal/dual point."""
    rho1, rho2, rho3, rho4 = state.rho
    h = ch.h_bob
    heff = h.conj() @ state.y
    val = state.omega_w * abs(state.p) ** 2 * float(np.sum(np.abs(heff) ** 2))
    val -= 2.0 * state.omega_w * (state.p * heff[cfg.bob_index]).real
    val += 0.5 * rho1 * float(np.linalg.norm(state.y - state.v_rf @ state.v_d + state.d) ** 2)
    for t, phi in zip(state.t_u, state.phi_u):
        val += 0.5 * rho2 * float(np.linalg.norm(t - state.y + phi) ** 2)
    for g, z in zip(state.g, state.z):
        val += 0.5 * rho3 * float(np.linalg.norm(g - state.y + z) ** 2)
    if state.m is not None:
        val += 0.5 * rho4 * float(np.linalg.norm(state.m - state.y + state.omega) ** 2)
    return val


def _residuals(state: AlState) -> float:
    scale = max(1.0, float(np.linalg.norm(state.y)))
    res = [float(np.linalg.norm(state.y - state.v_rf @ state.v_d))]
    res.extend(float(np.linalg.norm(t - state.y)) for t in state.t_u)
    res.extend(float(np.linalg.norm(g - state.y)) for g in state.g)
    if state.m is not None:
        res.append(float(np.linalg.norm(state.m - state.y)))
    return max(res) / scale


# ---------------------------------------------------------------------------
# full algorithm
# ---------------------------------------------------------------------------


def _initial_analog(
    ch: ChannelSet,
    cfg: SystemConfig,
    rng: np.random.Generator,
    scene: SensingScene | None = None,
) -> np.ndarray:
    """Phase-only analog start: channel phases, then scene steering phases
    when a scene is given, then random phases.

    Matching the analog columns to the stream channels keeps the matched-beam
    digital fit accurate at any chain count; purely random phases make the
    fit quality (and the final design) fluctuate wildly with the seed.
    """
    cols = [np.exp(1j * np.angle(ch.h[:, j])) for j in range(min(cfg.n_rf, cfg.n_streams))]
    if scene is not None:
        angles = [scene.target_angle] + [a for a, _ in scene.clutters]
        for angle in angles:
            if len(cols) >= cfg.n_rf:
                break
            cols.append(np.exp(1j * np.angle(steering(angle, cfg.mt))))
    while len(cols) < cfg.n_rf:
        cols.append(np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=cfg.mt)))
    return np.stack(cols, axis=1)


def _sample_willie_channels(
    ch: ChannelSet, cfg: SystemConfig, count: int, rng: np.random.Generator
) -> list:
    """Fixed warden-channel sample in the CSI ball (uniform), est + delta_k."""
    mt = cfg.mt
    out = []
    for _ in range(count):
        z = rng.standard_normal(mt) + 1j * rng.standard_normal(mt)
        z /= np.linalg.norm(z)
        r = ch.willie_radius * rng.uniform() ** (1.0 / (2 * mt))
        out.append(ch.willie_est + r * z)
    return out


def solve_hbf(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    opts: HbfOptions | None = None,
    robust: bool = False,
    include_sensing: bool = True,
    warm_starts: tuple = (),
) -> tuple[BeamformerSolution, PerformanceReport, HbfTrace]:
    """Alternating receive-filter updates around the consensus loop.

    robust=True drops the warden QoS copy and enforces the leakage
    constraint on n_willie_samples channels drawn in the CSI ball (one copy
    and one dual each), then certifies the exact ball worst case.
    include_sensing=False removes the sensing copy.

    The consensus loop is a local method, so a small deterministic portfolio
    of analog starts is solved and the best feasible result kept.  Each warm
    start is an (analog, digital) pair that is both evaluated as-is and used
    as an extra initialization; passing the solution of an easier neighbor
    problem therefore makes the returned rate at least as good as that
    candidate's.
    """
    opts = opts or HbfOptions()
    rng = np.random.default_rng(cfg.rng_seed)
    inits = []
    for k in range(max(1, opts.n_starts)):
        if k == 0:
            inits.append(_initial_analog(ch, cfg, rng, scene if include_sensing else None))
        elif k == 1:
            inits.append(_initial_analog(ch, cfg, rng))
        else:
            inits.append(np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=(cfg.mt, cfg.n_rf))))

    def candidate_key(result):
        bf, report, _ = result
        audit = audit_solution(
            bf, ch, scene if include_sensing else None, cfg, include_willie_qos=not robust
        )
        feasible = audit.feasible(tol=1e-3)
        return (feasible, report.covert_rate if feasible else audit.min_slack())

    results = []
    for v_rf0, v_d0 in warm_starts:
        results.append(_fixed_pair_result(v_rf0, v_d0, ch, scene, cfg, robust, include_sensing))
        inits.append(v_rf0.copy())
    for v_rf0 in inits:
        results.append(
            _solve_hbf_once(ch, scene, cfg, opts, robust, include_sensing, v_rf0, rng)
        )
    # one deliberately conservative run: the exact-weight center update chases
    # the rate hard and occasionally fails to reach consensus feasibility,
    # while the unit-weight dynamics are slow but dependable
    if opts.weight_cap is None:
        meek = HbfOptions(**{**opts.__dict__, "weight_cap": 1.0, "n_starts": 1})
        results.append(
            _solve_hbf_once(ch, scene, cfg, meek, robust, include_sensing, inits[0], rng)
        )
    if cfg.n_rf >= cfg.mt:
        # at full chain count the unit-modulus constraint is non-binding: any
        # digital matrix factors exactly through an invertible phase-only
        # analog, so the digital optimum itself is a hybrid candidate
        results.append(_digital_factorization_result(ch, scene, cfg, robust, include_sensing))
    best = max(results, key=candidate_key)
    return best


def _digital_factorization_result(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    robust: bool,
    include_sensing: bool,
) -> tuple[BeamformerSolution, PerformanceReport, HbfTrace]:
    from .fdbf import solve_fdbf

    bf_fd, _, _ = solve_fdbf(ch, scene, cfg, robust=robust, include_sensing=include_sensing)
    k = np.arange(cfg.mt)
    dft = np.exp(2j * math.pi * np.outer(k, k) / cfg.mt)
    v_d = dft.conj().T @ bf_fd.v_full / cfg.mt
    if cfg.n_rf > cfg.mt:
        extra = cfg.n_rf - cfg.mt
        v_rf = np.concatenate([dft, np.ones((cfg.mt, extra), dtype=complex)], axis=1)
        v_d = np.concatenate([v_d, np.zeros((extra, cfg.n_streams), dtype=complex)], axis=0)
    else:
        v_rf = dft
    return _fixed_pair_result(v_rf, v_d, ch, scene, cfg, robust, include_sensing)


def _finalize_pair(
    v_rf: np.ndarray,
    v_d: np.ndarray,
    ch: ChannelSet,
    cfg: SystemConfig,
    gamma_cap: float,
    robust: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Reportable version of a factor pair: power-capped, covertness-pinned.

    Consensus closes the leakage copy only to the residual tolerance, which
    the tiny ratio cap amplifies, so the covert column is rescaled against
    the exact (ball- or point-) leakage constraint before anything is
    audited or returned.
    """
    v_d = v_d.copy()
    v_full = v_rf @ v_d
    used = float(np.linalg.norm(v_full) ** 2)
    if used > cfg.total_power:
        v_d *= math.sqrt(cfg.total_power / used)
        v_full = v_rf @ v_d
    if robust:
        restored = restore_ball_covertness(
            v_full, ch.willie_est, ch.willie_radius, cfg, gamma_cap
        )
    else:
        restored = _restore_covertness_nominal(v_full, ch.h_willie, cfg, gamma_cap)
    scale = np.linalg.norm(restored[:, cfg.bob_index]) / max(
        np.linalg.norm(v_full[:, cfg.bob_index]), 1e-300
    )
    v_d[:, cfg.bob_index] *= scale
    return v_d, v_rf @ v_d


def _fixed_pair_result(
    v_rf: np.ndarray,
    v_d: np.ndarray,
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    robust: bool,
    include_sensing: bool,
) -> tuple[BeamformerSolution, PerformanceReport, HbfTrace]:
    """Evaluate a given factor pair verbatim (no optimization)."""
    if include_sensing and scene is not None:
        w = update_receive_filter_hbf(v_rf, v_d, scene, cfg)
    else:
        w = _display_filter(scene, cfg)
    bf = BeamformerSolution(kind="hybrid", v_full=v_rf @ v_d, w=w, v_rf=v_rf, v_d=v_d)
    report = performance_report(bf, ch, scene, cfg)
    trace = HbfTrace()
    trace.covert_rates.append(report.covert_rate)
    return bf, report, trace


def _solve_hbf_once(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    opts: HbfOptions,
    robust: bool,
    include_sensing: bool,
    analog_init: np.ndarray,
    rng: np.random.Generator,
) -> tuple[BeamformerSolution, PerformanceReport, HbfTrace]:
    gamma_cap = solve_gamma_cap(cfg.covert_eps)
    trace = HbfTrace()
    sensing_scene = scene if include_sensing else None
    n = cfg.n_streams

    qos_streams = list(range(cfg.u_carols if robust else cfg.u_carols + 1))
    if robust and ch.willie_radius > 0.0:
        sample_rng = np.random.default_rng(cfg.rng_seed + 104729)
        willie_channels = _sample_willie_channels(ch, cfg, opts.n_willie_samples, sample_rng)
    else:
        willie_channels = [ch.willie_est if robust else ch.h_willie]

    # static projectors: QoS per stream and leakage per sampled channel
    t_projectors = {u: QcqpProjector(*_qos_quad(ch, cfg, u)) for u in qos_streams}
    g_projectors = [QcqpProjector(*_leak_quad(hw, cfg, gamma_cap)) for hw in willie_channels]

    # initialization: random analog phases, digital least-squares fit of the
    # matched-beam matrix, consensus copies equal, duals zero
    v_rf = analog_init
    v_mrt = ch.h * math.sqrt(cfg.total_power) / np.linalg.norm(ch.h)
    v_d = np.linalg.lstsq(v_rf, v_mrt, rcond=None)[0]
    y = v_rf @ v_d
    rho = np.asarray(opts.rho, dtype=float).copy()
    if len(willie_channels) > 1:
        # the sampled leakage copies act as one logical constraint: keep their
        # aggregate pull on the consensus center independent of the sample size
        rho[2] = rho[2] / len(willie_channels)
    state = AlState(
        y=y,
        t_u=[y.copy() for _ in qos_streams],
        g=[y.copy() for _ in willie_channels],
        m=y.copy() if sensing_scene is not None else None,
        v_rf=v_rf,
        v_d=v_d,
        d=np.zeros_like(y),
        phi_u=[np.zeros_like(y) for _ in qos_streams],
        z=[np.zeros_like(y) for _ in willie_channels],
        omega=np.zeros_like(y) if sensing_scene is not None else None,
        rho=rho,
    )

    w = _display_filter(scene, cfg)
    prev_rate = None
    small_changes = 0  # stop only on sustained rate stagnation
    best_snapshot = None  # (rate, v_rf, v_d, w): best audited iterate so far

    for outer in range(opts.max_outer_iters):
        if sensing_scene is not None:
            w = update_receive_filter_hbf(state.v_rf, state.v_d, sensing_scene, cfg)
            try:
                m_projector = QcqpProjector(*_sensing_quad(sensing_scene, cfg, w))
            except Infeasible as exc:
                raise SensingInfeasible(str(exc)) from exc
        else:
            m_projector = None

        best_res = math.inf
        since_best = 0
        fruitless_bumps = 0
        inner_done = 0
        for inner in range(opts.max_inner_iters):
            state.p, state.omega_w = wmmse_scalars(state.v_rf, state.v_d, ch, cfg)
            if opts.weight_cap is not None:
                state.omega_w = min(state.omega_w, opts.weight_cap)
            trace.al_pre.append(al_value(state, ch, cfg))
            trace.al_transition.append(inner == 0)

            state.y = step_y(state, ch, cfg)
            for slot, u in enumerate(qos_streams):
                target = _vec(state.y - state.phi_u[slot])
                state.t_u[slot] = _unvec(t_projectors[u].project(target), cfg)
            for k, proj in enumerate(g_projectors):
                target = _vec(state.y - state.z[k])
                state.g[k] = _unvec(proj.project(target), cfg)
            if m_projector is not None:
                target = _vec(state.y - state.omega)
                state.m = _unvec(m_projector.project(target), cfg)
            state.v_rf = step_vrf(state, sweeps=opts.ccd_sweeps, tol=opts.ccd_tol)
            state.v_d = step_vd(state)
            trace.al_post.append(al_value(state, ch, cfg))

            step_duals(state)
            res = _residuals(state)
            inner_done = inner + 1
            if res < opts.residual_tol:
                break
            if res < best_res * 0.99:
                best_res = res
                since_best = 0
                fruitless_bumps = 0
            else:
                since_best += 1
                if since_best >= opts.stall_window:
                    state.rho = state.rho * opts.stall_factor
                    state.d = state.d / opts.stall_factor
                    state.phi_u = [x / opts.stall_factor for x in state.phi_u]
                    state.z = [x / opts.stall_factor for x in state.z]
                    if state.omega is not None:
                        state.omega = state.omega / opts.stall_factor
                    trace.rho_history.append((outer, inner, float(state.rho[0])))
                    since_best = 0
                    fruitless_bumps += 1
                    if fruitless_bumps >= 3:
                        # the copies genuinely disagree at this receive filter;
                        # hand control back so the outer loop can refresh it
                        break

        trace.inner_iters.append(inner_done)
        trace.final_residual.append(_residuals(state))
        fin_v_d, fin_v_full = _finalize_pair(state.v_rf, state.v_d, ch, cfg, gamma_cap, robust)
        bf_it = BeamformerSolution(
            kind="hybrid", v_full=fin_v_full, w=w, v_rf=state.v_rf, v_d=fin_v_d
        )
        _, rate = sinr_and_rates(bf_it, ch, cfg)
        trace.covert_rates.append(rate)
        trace.iterations = outer + 1
        if _residuals(state) < 10 * opts.residual_tol:
            audit = audit_solution(
                bf_it, ch, sensing_scene, cfg, gamma_cap, include_willie_qos=not robust
            )
            if audit.feasible(tol=1e-3) and (best_snapshot is None or rate > best_snapshot[0]):
                best_snapshot = (rate, state.v_rf.copy(), fin_v_d.copy(), w.copy())
        if prev_rate is not None and abs(rate - prev_rate) <= opts.rate_tol * max(prev_rate, 1e-12):
            small_changes += 1
            if small_changes >= 2:
                break
        else:
            small_changes = 0
        prev_rate = rate

    fin_v_d, fin_v_full = _finalize_pair(state.v_rf, state.v_d, ch, cfg, gamma_cap, robust)
    v_rf = state.v_rf
    if best_snapshot is not None and best_snapshot[0] > trace.covert_rates[-1]:
        _, v_rf, fin_v_d, w = best_snapshot
        fin_v_full = v_rf @ fin_v_d
    bf = BeamformerSolution(kind="hybrid", v_full=fin_v_full, w=w, v_rf=v_rf, v_d=fin_v_d)
    report = performance_report(bf, ch, scene, cfg)
    return bf, report, trace
