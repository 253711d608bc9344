"""Comparison schemes: fixed overt precoders (zero-forcing / matched), the
two-stage hybrid fit, and communication-only variants of both designs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDesign, RankDeficient
from .fdbf import (
    FdbfOptions,
    _restore_covertness_nominal,
    _sensing_coeff,
    design_basis,
    solve_fdbf,
    update_receive_filter_fd,
)
from .hbf import solve_hbf, _initial_analog
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
)
from .numerics import rank1_extract
from .sdp import LinearFunctional, SdpProblem, solve_sdp

__all__ = [
    "PowerSplit",
    "zf_overt_beams",
    "mrt_overt_beams",
    "solve_baseline_covert",
    "solve_ts_hbf",
    "solve_comm_only",
]

_SDP_TOL = 1e-11


@dataclass(frozen=True)
class PowerSplit:
    """Fraction of the power budget reserved for the covert beam."""

    delta_share: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta_share < 1.0):
            raise ValueError("delta_share must lie in [0, 1)")


def _overt_channels(ch: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    return ch.h[:, : cfg.u_carols + 1]


def zf_overt_beams(ch: ChannelSet, cfg: SystemConfig, split: PowerSplit) -> np.ndarray:
    """Zero-forcing overt precoder scaled to the overt power share."""
    h_cw = _overt_channels(ch, cfg)
    gram = h_cw.conj().T @ h_cw
    if np.linalg.cond(gram) > 1e12:
        raise RankDeficient("overt channel matrix is rank deficient")
    v = h_cw @ np.linalg.inv(gram)
    v *= math.sqrt(cfg.total_power * (1.0 - split.delta_share)) / np.linalg.norm(v)
    return v


def mrt_overt_beams(ch: ChannelSet, cfg: SystemConfig, split: PowerSplit) -> np.ndarray:
    """Matched-filter overt precoder scaled to the overt power share."""
    h_cw = _overt_channels(ch, cfg)
    return h_cw * math.sqrt(cfg.total_power * (1.0 - split.delta_share)) / np.linalg.norm(h_cw)


def _covert_beam_sdr(
    v_cw: np.ndarray,
    ch: ChannelSet,
    scene: SensingScene,
    cfg: SystemConfig,
    w: np.ndarray,
    gamma_cap: float,
    basis: np.ndarray,
) -> np.ndarray | None:
    """Best covert beam at fixed overt beams: single-block lifted problem.

    Returns None when no covert beam (not even zero) can satisfy the rows,
    i.e. the fixed overt beams already violate QoS or sensing headroom.
    """
    n_overt = cfg.u_carols + 1
    red = basis.conj().T
    hs = [red @ ch.h[:, i] for i in range(cfg.n_streams)]
    v_cw_red = red @ v_cw
    dim = basis.shape[1]
    noise = cfg.noise_vector()

    ineq = []
    power_room = cfg.total_power - float(np.linalg.norm(v_cw) ** 2)
    if power_room < 0.0:
        return None
    ineq.append((LinearFunctional(blocks={0: np.eye(dim, dtype=complex)}), power_room))

    gains = np.abs(np.stack(hs, axis=1).conj().T @ v_cw_red) ** 2  # (n_streams, n_overt)
    for u in range(n_overt):
        floor = 2.0 ** (cfg.qos_carol if u < cfg.u_carols else cfg.qos_willie)
        own = gains[u, u]
        fixed_interf = float(np.sum(gains[u, :])) - own
        room = own / (floor - 1.0) - fixed_interf - noise[u]
        if room < 0.0:
            return None
        s_u = np.outer(hs[u], hs[u].conj())
        ineq.append((LinearFunctional(blocks={0: s_u}), room))

    wil = cfg.willie_index
    leak_den = float(np.sum(gains[wil, :])) + cfg.noise_willie
    s_w = np.outer(hs[wil], hs[wil].conj())
    ineq.append((LinearFunctional(blocks={0: s_w}), (gamma_cap - 1.0) * leak_den))

    k_mat, offset = _sensing_coeff(scene, cfg, w, basis)
    fixed_sensing = float(np.real(np.trace(v_cw_red.conj().T @ k_mat @ v_cw_red)))
    ineq.append((LinearFunctional(blocks={0: k_mat}), -offset - fixed_sensing))

    bob = cfg.bob_index
    prob = SdpProblem(
        block_dims=[dim],
        n_scalars=0,
        objective=LinearFunctional(blocks={0: np.outer(hs[bob], hs[bob].conj())}),
        maximize=True,
        ineq_constraints=ineq,
    )
    sol = solve_sdp(prob, tol=_SDP_TOL)
    if not sol.optimal:
        return None
    try:
        v_red, _ = rank1_extract(sol.blocks[0])
    except Exception:
        return None
    v_b = basis @ v_red
    gain = ch.h_bob.conj() @ v_b
    if abs(gain) > 0.0:
        v_b = v_b * (gain.conjugate() / abs(gain))
    return v_b


def _evaluate_split(
    share: float,
    scheme: str,
    ch: ChannelSet,
    scene: SensingScene,
    cfg: SystemConfig,
    gamma_cap: float,
    basis: np.ndarray,
    max_alt: int = 5,
) -> tuple[BeamformerSolution, float] | None:
    """Alternate filter and covert-beam updates at one power split."""
    split = PowerSplit(share)
    builder = zf_overt_beams if scheme == "zf" else mrt_overt_beams
    try:
        v_cw = builder(ch, cfg, split)
    except RankDeficient:
        return None
    v_full = np.concatenate([v_cw, np.zeros((cfg.mt, 1), dtype=complex)], axis=1)
    prev_rate = None
    bf = None
    for _ in range(max_alt):
        w = update_receive_filter_fd(v_full, scene, cfg)
        v_b = _covert_beam_sdr(v_cw, ch, scene, cfg, w, gamma_cap, basis)
        if v_b is None:
            return None
        v_full = np.concatenate([v_cw, v_b[:, None]], axis=1)
        v_full = _restore_covertness_nominal(v_full, ch.h_willie, cfg, gamma_cap)
        bf = BeamformerSolution(kind="fd", v_full=v_full, w=w)
        _, rate = sinr_and_rates(bf, ch, cfg)
        if prev_rate is not None and abs(rate - prev_rate) <= 1e-4 * max(prev_rate, 1e-12):
            break
        prev_rate = rate
    audit = audit_solution(bf, ch, scene, cfg, gamma_cap)
    if not audit.feasible(tol=1e-6):
        return None
    _, rate = sinr_and_rates(bf, ch, cfg)
    return bf, rate


def solve_baseline_covert(
    ch: ChannelSet,
    scene: SensingScene,
    cfg: SystemConfig,
    scheme: str,
) -> tuple[BeamformerSolution, PerformanceReport]:
    """Fixed-structure overt beams plus an optimized covert beam.

    The power split is searched by a coarse feasibility probe followed by
    bisection on the upper feasibility edge (30 steps on [0, 0.99]); the
    best feasible design over all evaluated splits is returned.
    """
    if scheme not in ("zf", "mrt"):
        raise ValueError("scheme must be 'zf' or 'mrt'")
    gamma_cap = solve_gamma_cap(cfg.covert_eps)
    basis = design_basis(ch, scene, cfg)

    best: tuple[BeamformerSolution, float] | None = None
    feasible_shares = []
    infeasible_high = 0.99
    for share in (0.02, 0.15, 0.3, 0.5, 0.7, 0.9):
        result = _evaluate_split(share, scheme, ch, scene, cfg, gamma_cap, basis)
        if result is not None:
            feasible_shares.append(share)
            if best is None or result[1] > best[1]:
                best = result
    if not feasible_shares:
        raise InfeasibleDesign(f"no feasible power split for {scheme}")

    lo = max(feasible_shares)
    hi = infeasible_high
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        result = _evaluate_split(mid, scheme, ch, scene, cfg, gamma_cap, basis)
        if result is None:
            hi = mid
        else:
            lo = mid
            if result[1] > best[1]:
                best = result
    bf, _ = best
    return bf, performance_report(bf, ch, scene, cfg)


def solve_ts_hbf(
    ch: ChannelSet,
    scene: SensingScene,
    cfg: SystemConfig,
    max_alt: int = 200,
    fit_tol: float = 1e-8,
) -> tuple[BeamformerSolution, PerformanceReport]:
    """Two-stage hybrid: factor the digital design into analog/digital parts.

    Stage one is the full digital design; stage two alternates majorized
    unit-modulus sweeps and least-squares digital fits against it.  Metrics
    are reported for the fitted pair as-is (no QoS re-enforcement), matching
    the behavior of the classical two-stage approach.
    """
    bf_fd, _, _ = solve_fdbf(ch, scene, cfg)
    v_fd = bf_fd.v_full
    rng = np.random.default_rng(cfg.rng_seed)
    v_rf = _initial_analog(ch, cfg, rng)
    v_d = np.linalg.lstsq(v_rf, v_fd, rcond=None)[0]

    prev = float(np.linalg.norm(v_fd - v_rf @ v_d) ** 2)
    for _ in range(max_alt):
        gram = v_d @ v_d.conj().T
        lam = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
        if lam > 0.0:
            psi = (v_rf @ v_d - v_fd) @ v_d.conj().T - lam * v_rf
            mag = np.abs(psi)
            v_rf = np.where(mag > 0.0, -psi / np.where(mag > 0.0, mag, 1.0), v_rf)
        v_d = np.linalg.lstsq(v_rf, v_fd, rcond=None)[0]
        res = float(np.linalg.norm(v_fd - v_rf @ v_d) ** 2)
        if abs(prev - res) <= fit_tol * max(prev, 1e-15):
            break
        prev = res

    v_full = v_rf @ v_d
    used = float(np.linalg.norm(v_full) ** 2)
    if used > cfg.total_power:
        v_d *= math.sqrt(cfg.total_power / used)
        v_full = v_rf @ v_d
    bf = BeamformerSolution(kind="hybrid", v_full=v_full, w=bf_fd.w, v_rf=v_rf, v_d=v_d)
    return bf, performance_report(bf, ch, scene, cfg)


def solve_comm_only(
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    structure: str,
) -> tuple[BeamformerSolution, PerformanceReport]:
    """Designs without the sensing floor (downlink-communication-only)."""
    if structure == "fd":
        bf, report, _ = solve_fdbf(ch, scene, cfg, include_sensing=False)
    elif structure == "hybrid":
        bf, report, _ = solve_hbf(ch, scene, cfg, include_sensing=False)
    else:
        raise ValueError("structure must be 'fd' or 'hybrid'")
    return bf, report
