"""Fully-digital design: alternating receive-filter update and semidefinite
relaxation of the beamformer subproblem, with a lifted-variable ratio
transformation whose optimum is provably rank-1.

The robust variant replaces the covertness row by a linear matrix inequality
obtained from the S-procedure over the warden-CSI uncertainty ball.

Every constraint coefficient is an outer product of channel or steering
vectors, so any feasible lifted block can be projected onto their common
span without changing a single trace row while only lowering transmit
power.  The solvers therefore optimize in that subspace (exact reduction);
the builders accept ``basis=None`` to operate in the full antenna space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDesign
from .model import (
    BeamformerSolution,
    ChannelSet,
    PerformanceReport,
    SensingScene,
    SystemConfig,
    performance_report,
    sinr_and_rates,
    solve_gamma_cap,
    steering,
)
from .numerics import generalized_rayleigh_max, max_quadratic_on_ball, rank1_extract
from .sdp import LinearFunctional, LmiConstraint, LmiTermBlock, SdpProblem, SdpSolution, solve_sdp

__all__ = [
    "FdbfOptions",
    "FdbfTrace",
    "design_basis",
    "update_receive_filter_fd",
    "build_sdr_problem",
    "build_robust_sdr_problem",
    "recover_beams",
    "ball_leak_margin",
    "restore_ball_covertness",
    "solve_fdbf",
]

_SDP_TOL = 1e-11


@dataclass(frozen=True)
class FdbfOptions:
    max_outer_iters: int = 50
    rate_tol: float = 1e-4        # relative covert-rate change stopping rule
    rank1_tol: float = 1e-6       # acceptable second-to-first eigenvalue ratio

    def __post_init__(self) -> None:
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.rate_tol <= 0.0 or self.rank1_tol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class FdbfTrace:
    covert_rates: list = field(default_factory=list)
    objectives: list = field(default_factory=list)     # SDP objective per outer iteration
    rank1_ratios: list = field(default_factory=list)   # worst block ratio per iteration
    iterations: int = 0


def design_basis(ch: ChannelSet, scene: SensingScene | None, cfg: SystemConfig) -> np.ndarray:
    """Orthonormal basis of the span of all constraint-generating vectors."""
    gens = [ch.h[:, i] for i in range(ch.n_streams)]
    gens.append(ch.willie_est)
    if scene is not None:
        gens.append(steering(scene.target_angle, cfg.mt))
        for angle, _ in scene.clutters:
            gens.append(steering(angle, cfg.mt))
    g = np.stack(gens, axis=1)
    u, s, _ = np.linalg.svd(g, full_matrices=False)
    keep = s > 1e-12 * s[0]
    return u[:, keep]


def _reduce_vec(v: np.ndarray, basis: np.ndarray | None) -> np.ndarray:
    return v if basis is None else basis.conj().T @ v


def _receive_quadratics(
    v_full: np.ndarray, scene: SensingScene, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Target and clutter+noise quadratic forms of the receive filter."""

    def outer_at(angle: float, amp: complex) -> np.ndarray:
        a_r = steering(angle, cfg.mr)
        tx_gain = float(np.sum(np.abs(steering(angle, cfg.mt).conj() @ v_full) ** 2))
        return abs(amp) ** 2 * tx_gain * np.outer(a_r, a_r.conj())

    xi = outer_at(scene.target_angle, scene.target_amp)
    lam = cfg.noise_radar * np.eye(cfg.mr, dtype=complex)
    for angle, amp in scene.clutters:
        lam = lam + outer_at(angle, amp)
    return xi, lam


def update_receive_filter_fd(
    v_full: np.ndarray, scene: SensingScene, cfg: SystemConfig
) -> np.ndarray:
    """Receive filter maximizing the output sensing SINR at fixed beams."""
    xi, lam = _receive_quadratics(v_full, scene, cfg)
    return generalized_rayleigh_max(xi, lam)


def _sensing_coeff(
    scene: SensingScene, cfg: SystemConfig, w: np.ndarray, basis: np.ndarray | None
) -> tuple[np.ndarray, float]:
    """Per-block coefficient of the sensing row and its filter-noise offset.

    Row reads  sum_i Tr{K F_i} + alpha * offset <= 0.
    """
    gamma = cfg.sensing_gamma

    def phi(angle: float, amp: complex) -> np.ndarray:
        a_t = _reduce_vec(steering(angle, cfg.mt), basis)
        rx = np.vdot(w, steering(angle, cfg.mr))
        return abs(amp) ** 2 * abs(rx) ** 2 * np.outer(a_t, a_t.conj())

    k = -phi(scene.target_angle, scene.target_amp)
    for angle, amp in scene.clutters:
        k = k + gamma * phi(angle, amp)
    offset = gamma * cfg.noise_radar * float(np.linalg.norm(w) ** 2)
    return k, offset


def _base_sdr(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    w: np.ndarray | None,
    qos_streams: list,
    basis: np.ndarray | None,
    n_scalars: int,
) -> SdpProblem:
    """Common rows of the lifted design problem; covertness added by callers.

    Blocks are the lifted per-stream matrices (scaled by the ratio-transform
    variable alpha, scalar index 0); rows: power, QoS for the requested
    streams, sensing (when a scene is given), and the unit normalization of
    the covert user's interference-plus-noise.
    """
    n = cfg.n_streams
    bob = cfg.bob_index
    hs = [_reduce_vec(ch.h[:, i], basis) for i in range(n)]
    dim = len(hs[0])
    s_mats = [np.outer(h, h.conj()) for h in hs]
    noise = cfg.noise_vector()
    eye = np.eye(dim, dtype=complex)

    ineq = []
    # total power: sum_i Tr{F_i} - alpha P <= 0
    ineq.append(
        (LinearFunctional(blocks={i: eye for i in range(n)}, scalars={0: -cfg.total_power}), 0.0)
    )
    # QoS rows
    for u in qos_streams:
        floor = 2.0 ** (cfg.qos_carol if u < cfg.u_carols else cfg.qos_willie)
        coeffs = {i: (floor - 1.0) * s_mats[u] for i in range(n)}
        coeffs[u] = coeffs[u] - floor * s_mats[u]
        ineq.append((LinearFunctional(blocks=coeffs, scalars={0: (floor - 1.0) * noise[u]}), 0.0))
    # sensing row
    if scene is not None:
        k_mat, offset = _sensing_coeff(scene, cfg, w, basis)
        ineq.append((LinearFunctional(blocks={i: k_mat for i in range(n)}, scalars={0: offset}), 0.0))
    # normalization of the covert-user denominator
    eq = [
        (
            LinearFunctional(
                blocks={i: s_mats[bob] for i in range(bob)}, scalars={0: cfg.noise_bob}
            ),
            1.0,
        )
    ]
    objective = LinearFunctional(blocks={bob: s_mats[bob]})
    return SdpProblem(
        block_dims=[dim] * n,
        n_scalars=n_scalars,
        objective=objective,
        maximize=True,
        eq_constraints=eq,
        ineq_constraints=ineq,
    )


def build_sdr_problem(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    w: np.ndarray | None,
    gamma_cap: float,
    include_willie_qos: bool = True,
    basis: np.ndarray | None = None,
) -> SdpProblem:
    """Lifted design problem with the nominal covertness row."""
    if gamma_cap < 1.0:
        raise ValueError("gamma_cap must be >= 1")
    qos_streams = list(range(cfg.u_carols + (1 if include_willie_qos else 0)))
    prob = _base_sdr(ch, scene, cfg, w, qos_streams, basis, n_scalars=1)
    bob, wil = cfg.bob_index, cfg.willie_index
    h_w = _reduce_vec(ch.h[:, wil], basis)
    s_w = np.outer(h_w, h_w.conj())
    coeffs = {i: (1.0 - gamma_cap) * s_w for i in range(bob)}
    coeffs[bob] = s_w
    row = (LinearFunctional(blocks=coeffs, scalars={0: (1.0 - gamma_cap) * cfg.noise_willie}), 0.0)
    return SdpProblem(
        block_dims=prob.block_dims,
        n_scalars=prob.n_scalars,
        objective=prob.objective,
        maximize=True,
        eq_constraints=prob.eq_constraints,
        ineq_constraints=prob.ineq_constraints + [row],
    )


def build_robust_sdr_problem(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    w: np.ndarray | None,
    gamma_cap: float,
    basis: np.ndarray | None = None,
) -> SdpProblem:
    """Lifted design problem robust to warden-CSI error in a norm ball.

    The covertness row must hold for every channel est + delta with
    ||delta|| <= radius; the S-procedure turns that family into one LMI with
    one extra nonnegative multiplier.  The warden's own QoS row is dropped
    (no cooperation), all other rows are unchanged.
    """
    if ch.willie_radius == 0.0:
        # zero-radius ball: the LMI degenerates to the nominal row
        return build_sdr_problem(ch, scene, cfg, w, gamma_cap, include_willie_qos=False, basis=basis)
    prob = _base_sdr(ch, scene, cfg, w, list(range(cfg.u_carols)), basis, n_scalars=2)
    bob = cfg.bob_index
    h_est = _reduce_vec(ch.willie_est, basis)
    dim = len(h_est)
    delta_sq = ch.willie_radius**2

    t_mat = np.vstack([np.eye(dim, dtype=complex), h_est.conj()[None, :]])  # (dim+1, dim)
    terms = [LmiTermBlock(block=i, congruence=t_mat, coeff=-(1.0 - gamma_cap)) for i in range(bob)]
    terms.append(LmiTermBlock(block=bob, congruence=t_mat, coeff=-1.0))
    e_last = np.zeros((dim + 1, dim + 1), dtype=complex)
    e_last[dim, dim] = 1.0
    b_alpha = -(1.0 - gamma_cap) * cfg.noise_willie * e_last
    b_eta = np.diag(np.concatenate([np.ones(dim), [-delta_sq]])).astype(complex)
    lmi = LmiConstraint(
        dim=dim + 1,
        block_terms=tuple(terms),
        scalar_terms=((0, b_alpha), (1, b_eta)),
    )
    return SdpProblem(
        block_dims=prob.block_dims,
        n_scalars=2,  # ratio-transform alpha plus the S-procedure multiplier
        objective=prob.objective,
        maximize=True,
        eq_constraints=prob.eq_constraints,
        ineq_constraints=prob.ineq_constraints,
        lmi_constraints=[lmi],
    )


def recover_beams(
    sol: SdpSolution, ch: ChannelSet, cfg: SystemConfig, basis: np.ndarray | None = None
) -> tuple[np.ndarray, float]:
    """Undo the ratio transform and extract one beam per lifted block.

    Returns the beam matrix and the worst second-to-first eigenvalue ratio.
    Each beam is rotated so its own channel sees a real nonnegative gain.
    """
    alpha = float(sol.scalars[0])
    if alpha <= 1e-12:
        raise InfeasibleDesign("ratio-transform scalar collapsed to zero")
    cols = []
    worst = 0.0
    for i, f_bar in enumerate(sol.blocks):
        v, ratio = rank1_extract(f_bar / alpha)
        worst = max(worst, ratio)
        if basis is not None:
            v = basis @ v
        gain = ch.h[:, i].conj() @ v
        if abs(gain) > 0.0:
            v = v * (gain.conjugate() / abs(gain))
        cols.append(v)
    v_full = np.stack(cols, axis=1)
    used = float(np.linalg.norm(v_full) ** 2)
    if used > cfg.total_power:
        v_full *= np.sqrt(cfg.total_power / used)
    return v_full, worst


def _restore_covertness_nominal(
    v_full: np.ndarray, h_w: np.ndarray, cfg: SystemConfig, gamma_cap: float
) -> np.ndarray:
    """Shrink the covert beam so the leakage-ratio cap holds exactly.

    Rank-1 extraction drops a trace-epsilon of overt-block mass from the
    leakage denominator; a one-parameter rescale of the covert column makes
    the design feasible again at negligible rate cost and cannot hurt any
    other constraint.
    """
    cap = gamma_cap - 1.0
    p = np.abs(h_w.conj() @ v_full) ** 2
    num = float(p[cfg.bob_index])
    den = float(np.sum(p[: cfg.bob_index])) + cfg.noise_willie
    if num <= cap * den or num == 0.0:
        return v_full
    scale = np.sqrt(cap * den / num)
    out = v_full.copy()
    out[:, cfg.bob_index] *= scale
    return out


def ball_leak_margin(
    v_full: np.ndarray,
    h_est: np.ndarray,
    radius: float,
    cfg: SystemConfig,
    gamma_cap: float,
) -> float:
    """Worst value of the leakage constraint over the warden-CSI ball.

    Exact trust-region maximization of the indefinite quadratic
    num(h) - cap * den(h) over h = est + delta, ||delta|| <= radius;
    nonpositive means the design is covert on the whole ball.
    """
    cap = gamma_cap - 1.0
    bob = cfg.bob_index
    v_b = v_full[:, bob]
    overt = v_full[:, :bob]
    l_tilde = np.outer(v_b, v_b.conj()) - cap * (overt @ overt.conj().T)
    const = float(np.real(h_est.conj() @ l_tilde @ h_est)) - cap * cfg.noise_willie
    if radius == 0.0:
        return const
    return max_quadratic_on_ball(l_tilde, l_tilde @ h_est, radius) + const


def restore_ball_covertness(
    v_full: np.ndarray,
    h_est: np.ndarray,
    radius: float,
    cfg: SystemConfig,
    gamma_cap: float,
) -> np.ndarray:
    """Shrink the covert beam until the ball-worst leakage constraint holds.

    The worst-case margin is monotone in the covert-beam power (the beam
    enters the constraint only through its own rank-one term), so bisection
    on the power scale gives the least-conservative feasible rescale.
    """

    def margin(s_sq: float) -> float:
        scaled = v_full.copy()
        scaled[:, cfg.bob_index] *= np.sqrt(s_sq)
        return ball_leak_margin(scaled, h_est, radius, cfg, gamma_cap)

    if margin(1.0) <= 0.0:
        return v_full
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if margin(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    out = v_full.copy()
    out[:, cfg.bob_index] *= np.sqrt(lo)
    return out


def solve_fdbf(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    opts: FdbfOptions | None = None,
    robust: bool = False,
    include_sensing: bool = True,
) -> tuple[BeamformerSolution, PerformanceReport, FdbfTrace]:
    """Alternating receive-filter / lifted-beamformer design.

    include_sensing=False drops the sensing row (communication-only variant);
    the receive filter is then the matched filter at the target angle and is
    reported for display only.  robust=True switches the covertness row to
    its S-procedure form and drops the warden's QoS row.
    """
    opts = opts or FdbfOptions()
    gamma_cap = solve_gamma_cap(cfg.covert_eps)
    trace = FdbfTrace()
    sensing_scene = scene if include_sensing else None
    basis = design_basis(ch, sensing_scene, cfg)

    h = ch.h
    v_full = h * np.sqrt(cfg.total_power) / np.linalg.norm(h)  # matched-beam start
    w = _display_filter(scene, cfg)
    prev_rate = None

    for it in range(opts.max_outer_iters):
        if sensing_scene is not None:
            w = update_receive_filter_fd(v_full, sensing_scene, cfg)
        if robust:
            prob = build_robust_sdr_problem(ch, sensing_scene, cfg, w, gamma_cap, basis=basis)
        else:
            prob = build_sdr_problem(ch, sensing_scene, cfg, w, gamma_cap, basis=basis)
        sol = solve_sdp(prob, tol=_SDP_TOL)
        if sol.status == "infeasible":
            raise InfeasibleDesign(f"design subproblem infeasible ({sol.detail})")
        if sol.status == "unbounded":
            raise InfeasibleDesign(f"design subproblem unbounded ({sol.detail})")
        v_full, ratio = recover_beams(sol, ch, cfg, basis=basis)
        if robust:
            v_full = restore_ball_covertness(v_full, ch.willie_est, ch.willie_radius, cfg, gamma_cap)
        else:
            v_full = _restore_covertness_nominal(v_full, ch.h_willie, cfg, gamma_cap)
        trace.objectives.append(sol.objective)
        trace.rank1_ratios.append(ratio)
        bf_it = BeamformerSolution(kind="fd", v_full=v_full, w=w)
        _, rate = sinr_and_rates(bf_it, ch, cfg)
        trace.covert_rates.append(rate)
        trace.iterations = it + 1
        if sensing_scene is None:
            break  # no coupling left: the subproblem is already exact
        if prev_rate is not None and abs(rate - prev_rate) <= opts.rate_tol * max(prev_rate, 1e-12):
            break
        prev_rate = rate

    bf = BeamformerSolution(kind="fd", v_full=v_full, w=w)
    report = performance_report(bf, ch, scene, cfg)
    return bf, report, trace


def _display_filter(scene: SensingScene | None, cfg: SystemConfig) -> np.ndarray:
    angle = scene.target_angle if scene is not None else 0.0
    return steering(angle, cfg.mr)
