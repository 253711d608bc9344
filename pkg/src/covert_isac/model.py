"""System model: scenario types, channels, and closed-form performance metrics.

Conventions used throughout the package:

* channel/beam matrices have one column per data stream, ordered as the
  ``U`` regular users first, then the overt adversary-side user (index ``U``,
  0-based), then the covert user (index ``U + 1``);
* angles are radians internally, powers are linear Watt; dB conversion
  happens only at configuration boundaries and in reports;
* everything is a pure function of its inputs; values are immutable after
  construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidFilter, InvalidGeometry, InvalidStats
from .marcum import marcum_q1

__all__ = [
    "SystemConfig",
    "SensingScene",
    "ChannelSet",
    "BeamformerSolution",
    "HypothesisStats",
    "PerformanceReport",
    "ConstraintAudit",
    "db_to_lin",
    "lin_to_db",
    "steering",
    "generate_channels",
    "random_geometry",
    "random_channel_set",
    "default_config",
    "default_scene",
    "sinr_and_rates",
    "hypothesis_stats",
    "detection_error_exact",
    "kl_divergence",
    "pinsker_bound",
    "solve_gamma_cap",
    "sensing_sinr",
    "detection_probability",
    "beampattern",
    "audit_solution",
    "performance_report",
]


def db_to_lin(x_db: float) -> float:
    """dB (power) to linear: 10^(x/10)."""
    return float(10.0 ** (x_db / 10.0))


def lin_to_db(x: float) -> float:
    """Linear power to dB; -inf for nonpositive input."""
    if x <= 0.0:
        return -math.inf
    return float(10.0 * math.log10(x))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars: array sizes, power budget, noise floors, thresholds."""

    mt: int = 32                   # transmit antennas
    mr: int = 32                   # receive antennas
    u_carols: int = 4              # number of regular users U
    n_rf: int = 6                  # RF chains for the hybrid architecture
    total_power: float = 1.0       # Watt
    noise_carol: float = db_to_lin(-5.0)   # Watt, per regular user
    noise_willie: float = db_to_lin(-5.0)  # Watt
    noise_bob: float = db_to_lin(-5.0)     # Watt
    noise_radar: float = db_to_lin(-10.0)  # Watt
    qos_carol: float = 1.0         # bits/s/Hz floor per regular user
    qos_willie: float = 1.0        # bits/s/Hz floor for the warden's overt link
    covert_eps: float = 0.001      # detectability budget, in (0, 1)
    sensing_gamma_db: float = 10.0 # sensing SINR floor, dB
    angular_samples: int = 181     # beampattern grid size over [-90, 90] deg
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.mt < 1 or self.mr < 1:
            raise ValueError("antenna counts must be >= 1")
        if not (1 <= self.n_rf <= self.mt):
            raise ValueError("need 1 <= n_rf <= mt")
        for name in ("total_power", "noise_carol", "noise_willie", "noise_bob", "noise_radar"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if not (0.0 < self.covert_eps < 1.0):
            raise ValueError("covert_eps must lie in (0, 1)")
        if self.angular_samples < 2:
            raise ValueError("angular_samples must be >= 2")

    @property
    def n_streams(self) -> int:
        """Total beam count U + 2 (regular users, warden link, covert user)."""
        return self.u_carols + 2

    @property
    def willie_index(self) -> int:
        return self.u_carols

    @property
    def bob_index(self) -> int:
        return self.u_carols + 1

    @property
    def sensing_gamma(self) -> float:
        """Sensing SINR floor in linear units."""
        return db_to_lin(self.sensing_gamma_db)

    def noise_vector(self) -> np.ndarray:
        """Per-stream receiver noise powers, ordered like the beam columns."""
        return np.array(
            [self.noise_carol] * self.u_carols + [self.noise_willie, self.noise_bob]
        )

    def with_(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class SensingScene:
    """Point target plus stationary clutter sources, all with complex amplitudes."""

    target_angle: float                      # radians
    target_amp: complex                      # sqrt-Watt
    clutters: tuple = ()                     # tuple of (angle_rad, complex amp)

    def __post_init__(self) -> None:
        angles = [self.target_angle] + [a for a, _ in self.clutters]
        for a in angles:
            if not (-math.pi / 2 - 1e-12 <= a <= math.pi / 2 + 1e-12):
                raise ValueError("scene angles must lie in [-pi/2, pi/2]")

    @property
    def n_clutters(self) -> int:
        return len(self.clutters)


@dataclass(frozen=True)
class ChannelSet:
    """Downlink channels (one column per stream) plus the warden-CSI estimate."""

    h: np.ndarray                  # mt x (U+2), columns: carols, willie, bob
    willie_est: np.ndarray         # mt, estimated warden channel
    willie_radius: float = 0.0     # delta; delta^2 bounds the estimation error

    def __post_init__(self) -> None:
        if self.willie_radius < 0.0:
            raise ValueError("willie_radius must be >= 0")
        u_plus_2 = self.h.shape[1]
        if self.willie_est.shape != (self.h.shape[0],):
            raise ValueError("willie_est must be an mt-vector")
        if self.willie_radius == 0.0:
            if not np.allclose(self.willie_est, self.h[:, u_plus_2 - 2], atol=1e-12):
                raise ValueError("zero radius requires willie_est == true warden column")

    @property
    def n_streams(self) -> int:
        return self.h.shape[1]

    @property
    def h_willie(self) -> np.ndarray:
        return self.h[:, self.n_streams - 2]

    @property
    def h_bob(self) -> np.ndarray:
        return self.h[:, self.n_streams - 1]


@dataclass(frozen=True)
class BeamformerSolution:
    """Transmit beams (digital or analog/digital pair) plus the receive filter."""

    kind: str                      # "fd" or "hybrid"
    v_full: np.ndarray             # mt x (U+2); for hybrid equals v_rf @ v_d
    w: np.ndarray                  # mr receive filter
    v_rf: np.ndarray | None = None # mt x n_rf, unit-modulus entries
    v_d: np.ndarray | None = None  # n_rf x (U+2)

    def __post_init__(self) -> None:
        if self.kind not in ("fd", "hybrid"):
            raise ValueError("kind must be 'fd' or 'hybrid'")
        if self.kind == "hybrid":
            if self.v_rf is None or self.v_d is None:
                raise ValueError("hybrid solutions need v_rf and v_d")

    def validate(self, cfg: SystemConfig, atol: float = 1e-9) -> None:
        """Raise if the structural invariants do not hold."""
        power = float(np.linalg.norm(self.v_full) ** 2)
        if power > cfg.total_power * (1.0 + 1e-6):
            raise ValueError(f"power {power} exceeds budget {cfg.total_power}")
        if self.kind == "hybrid":
            mods = np.abs(self.v_rf)
            if np.max(np.abs(mods - 1.0)) > atol:
                raise ValueError("analog beamformer entries must be unit modulus")
            if np.max(np.abs(self.v_full - self.v_rf @ self.v_d)) > atol:
                raise ValueError("v_full must equal v_rf @ v_d")


@dataclass(frozen=True)
class HypothesisStats:
    """Received-power parameters of the warden's binary test."""

    kappa0: float                  # Watt, signal-absent mean power
    kappa1: float                  # Watt, signal-present mean power
    gamma_cap: float | None = None # ratio cap in force, if any

    def __post_init__(self) -> None:
        if not (self.kappa1 >= self.kappa0 > 0.0):
            raise InvalidStats("need kappa1 >= kappa0 > 0")

    @property
    def z(self) -> float:
        return self.kappa1 / self.kappa0


@dataclass(frozen=True)
class PerformanceReport:
    """All scalar metrics of one design, plus the sampled beampattern."""

    covert_rate: float             # bits/s/Hz
    overt_rates: np.ndarray        # bits/s/Hz, length U+1
    p_e: float                     # total detection error probability
    p_e_bound: float               # Pinsker lower bound (may be negative)
    kl_div: float                  # nats
    sensing_sinr: float            # linear
    detection_prob: float          # at the reporting false-alarm rate
    beampattern: np.ndarray        # (S, 2): angle_deg, dB rel. max
    p_fa: float = 1e-4             # false-alarm rate used for detection_prob


# ---------------------------------------------------------------------------
# steering vectors and channels
# ---------------------------------------------------------------------------


def steering(angle: float, n: int) -> np.ndarray:
    """Unit-norm ULA steering vector at half-wavelength spacing.

    Entry k is exp(j*pi*k*sin(angle)) / sqrt(n).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(angle)) / math.sqrt(n)


def generate_channels(
    cfg: SystemConfig,
    geometry: list,
    willie_radius: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ChannelSet:
    """Build a ChannelSet from per-stream multipath geometry.

    ``geometry`` has one entry per stream (U+2 total); each entry is a
    nonempty list of (angle_rad, complex_gain) paths.  Column i is
    sum over paths of gain * sqrt(mt) * steering(angle, mt).

    When ``willie_radius`` > 0 an estimation error uniform in the
    radius-ball is drawn from ``rng`` and subtracted to form the estimate,
    so the true warden channel always lies inside the uncertainty ball.
    """
    if len(geometry) != cfg.n_streams:
        raise InvalidGeometry(f"need {cfg.n_streams} path lists, got {len(geometry)}")
    cols = []
    for paths in geometry:
        if len(paths) == 0:
            raise InvalidGeometry("every stream needs at least one path")
        col = np.zeros(cfg.mt, dtype=complex)
        for angle, gain in paths:
            col += gain * math.sqrt(cfg.mt) * steering(angle, cfg.mt)
        cols.append(col)
    h = np.stack(cols, axis=1)
    h_w = h[:, cfg.willie_index]
    if willie_radius > 0.0:
        if rng is None:
            raise InvalidGeometry("willie_radius > 0 requires an rng")
        err = _uniform_ball(cfg.mt, willie_radius, rng)
        willie_est = h_w - err
    else:
        willie_est = h_w.copy()
    return ChannelSet(h=h, willie_est=willie_est, willie_radius=willie_radius)


def _uniform_ball(dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the complex dim-ball of the given radius."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    z /= np.linalg.norm(z)
    r = radius * rng.uniform() ** (1.0 / (2 * dim))
    return r * z


def random_geometry(cfg: SystemConfig, rng: np.random.Generator, n_paths: int = 3) -> list:
    """Limited-scattering geometry: per stream, n_paths angles uniform over
    [-90, 90] deg with complex Gaussian gains of per-path variance two.

    E||h||^2 = 2 * n_paths * mt under this law; the extra 3 dB over a
    unit-variance draw keeps the default QoS sweep range feasible at the
    reduced antenna counts used for desk-scale experiments.
    """
    geometry = []
    for _ in range(cfg.n_streams):
        angles = rng.uniform(-math.pi / 2, math.pi / 2, size=n_paths)
        gains = rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)
        geometry.append(list(zip(angles, gains)))
    return geometry


def random_channel_set(
    cfg: SystemConfig,
    rng: np.random.Generator,
    n_paths: int = 3,
    willie_radius: float = 0.0,
) -> ChannelSet:
    """Draw a full ChannelSet under the default multipath model."""
    return generate_channels(cfg, random_geometry(cfg, rng, n_paths), willie_radius, rng)


def default_config(**overrides) -> SystemConfig:
    """Library default scenario (the simulation baseline)."""
    return SystemConfig(**overrides)


def default_scene(rng: np.random.Generator | None = None) -> SensingScene:
    """Target at +10 deg, clutters at -30 and +60 deg.

    Amplitude magnitudes are 5 dBW (target) and 20 dBW (clutter); phases are
    uniform random when an rng is supplied, zero otherwise.
    """
    mag_t = math.sqrt(db_to_lin(5.0))
    mag_c = math.sqrt(db_to_lin(20.0))
    if rng is None:
        phases = np.zeros(3)
    else:
        phases = rng.uniform(0.0, 2 * math.pi, size=3)
    return SensingScene(
        target_angle=math.radians(10.0),
        target_amp=mag_t * np.exp(1j * phases[0]),
        clutters=(
            (math.radians(-30.0), mag_c * np.exp(1j * phases[1])),
            (math.radians(60.0), mag_c * np.exp(1j * phases[2])),
        ),
    )


# ---------------------------------------------------------------------------
# communication metrics
# ---------------------------------------------------------------------------


def _cross_powers(v_full: np.ndarray, h: np.ndarray) -> np.ndarray:
    """|h_i^H v_j|^2 as an (n_streams, n_streams) array (row: channel)."""
    g = h.conj().T @ v_full
    return np.abs(g) ** 2


def sinr_per_stream(bf: BeamformerSolution, ch: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """SINR of every stream; all other beam columns act as interference."""
    p = _cross_powers(bf.v_full, ch.h)
    sig = np.diag(p).copy()
    interf = p.sum(axis=1) - sig
    return sig / (interf + cfg.noise_vector())


def sinr_and_rates(
    bf: BeamformerSolution, ch: ChannelSet, cfg: SystemConfig
) -> tuple[np.ndarray, float]:
    """Achievable rates log2(1+SINR): (overt rates length U+1, covert rate)."""
    rates = np.log2(1.0 + sinr_per_stream(bf, ch, cfg))
    return rates[: cfg.n_streams - 1], float(rates[cfg.n_streams - 1])


def hypothesis_stats(bf: BeamformerSolution, ch: ChannelSet, cfg: SystemConfig) -> HypothesisStats:
    """Received-power parameters of the warden's test at the true channel."""
    h_w = ch.h_willie
    p = np.abs(h_w.conj() @ bf.v_full) ** 2
    kappa0 = float(np.sum(p[: cfg.bob_index])) + cfg.noise_willie
    kappa1 = kappa0 + float(p[cfg.bob_index])
    return HypothesisStats(kappa0=kappa0, kappa1=kappa1)


def detection_error_exact(stats: HypothesisStats) -> float:
    """Total detection error of the optimal likelihood-ratio test.

    1 + z^(-z/(z-1)) - z^(-1/(z-1)) with z = kappa1/kappa0; the z -> 1
    limit is 1 (indistinguishable hypotheses).
    """
    z = stats.z
    if abs(z - 1.0) < 1e-12:
        return 1.0
    lz = math.log(z)
    return 1.0 + math.exp(-z / (z - 1.0) * lz) - math.exp(-1.0 / (z - 1.0) * lz)


def kl_divergence(stats: HypothesisStats) -> float:
    """KL divergence (nats) between the warden's two received distributions."""
    z = stats.z
    return math.log(z) + 1.0 / z - 1.0


def pinsker_bound(stats: HypothesisStats) -> float:
    """Lower bound 1 - sqrt(D/2) on the detection error (can be negative)."""
    return 1.0 - math.sqrt(kl_divergence(stats) / 2.0)


def solve_gamma_cap(eps: float) -> float:
    """Ratio cap: the root >= 1 of ln(G) + 1/G - 1 = 2 eps^2.

    Bisection until the residual is <= 1e-12; the function is strictly
    increasing on [1, inf) so the root is unique.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    from .numerics import scalar_root

    rhs = 2.0 * eps * eps

    def f(g: float) -> float:
        return math.log(g) + 1.0 / g - 1.0 - rhs

    hi = 2.0
    while f(hi) < 0.0:
        hi *= 2.0
    return scalar_root(f, 1.0, hi, tol=1e-12)


# ---------------------------------------------------------------------------
# sensing metrics
# ---------------------------------------------------------------------------


def _scene_gains(
    bf_v: np.ndarray, w: np.ndarray, angle: float, amp: complex, cfg: SystemConfig
) -> float:
    """sum_i |amp * w^H a_r(angle) a_t(angle)^H v_i|^2."""
    rx = np.vdot(w, steering(angle, cfg.mr))          # w^H a_r
    tx = steering(angle, cfg.mt).conj() @ bf_v        # a_t^H v_i per column
    return float(abs(amp) ** 2 * abs(rx) ** 2 * np.sum(np.abs(tx) ** 2))


def sensing_sinr(bf: BeamformerSolution, scene: SensingScene, cfg: SystemConfig) -> float:
    """Output SINR of the receive filter against target echo vs clutter+noise."""
    w = bf.w
    wn = float(np.linalg.norm(w) ** 2)
    if wn == 0.0:
        raise InvalidFilter("receive filter is zero")
    num = _scene_gains(bf.v_full, w, scene.target_angle, scene.target_amp, cfg)
    den = sum(
        _scene_gains(bf.v_full, w, a, amp, cfg) for a, amp in scene.clutters
    ) + cfg.noise_radar * wn
    return num / den


def detection_probability(sinr: float, pfa: float) -> float:
    """Detection probability of the square-law detector at the given SINR.

    Order-1 Marcum Q of (sqrt(2*sinr), sqrt(-2 ln pfa)).
    """
    if sinr < 0.0:
        raise ValueError("sinr must be >= 0")
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must lie in (0, 1)")
    return marcum_q1(math.sqrt(2.0 * sinr), math.sqrt(-2.0 * math.log(pfa)))


def beampattern(
    bf: BeamformerSolution, cfg: SystemConfig, angles_deg: np.ndarray | None = None
) -> np.ndarray:
    """Receive-combined angular response, dB normalized to a 0 dB peak.

    Returns an (S, 2) array of (angle_deg, dB) rows where the response is
    sum_i |w^H a_r(theta) a_t(theta)^H v_i|^2.
    """
    if angles_deg is None:
        angles_deg = np.linspace(-90.0, 90.0, cfg.angular_samples)
    if len(angles_deg) < 2:
        raise ValueError("need at least two grid angles")
    vals = np.empty(len(angles_deg))
    for k, deg in enumerate(angles_deg):
        vals[k] = _scene_gains(bf.v_full, bf.w, math.radians(deg), 1.0, cfg)
    peak = vals.max()
    db = 10.0 * np.log10(np.maximum(vals, peak * 1e-30) / peak)
    return np.column_stack([angles_deg, db])


# ---------------------------------------------------------------------------
# constraint audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintAudit:
    """Relative slack of every design constraint; >= 0 means satisfied."""

    power: float
    qos: np.ndarray               # per overt stream that carries a QoS floor
    covertness: float
    sensing: float | None         # None when sensing was not imposed

    def min_slack(self) -> float:
        slacks = [self.power, self.covertness, *np.atleast_1d(self.qos)]
        if self.sensing is not None:
            slacks.append(self.sensing)
        return float(min(slacks))

    def feasible(self, tol: float = 1e-6) -> bool:
        return self.min_slack() >= -tol


def audit_solution(
    bf: BeamformerSolution,
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    gamma_cap: float | None = None,
    include_willie_qos: bool = True,
) -> ConstraintAudit:
    """Relative constraint slacks of a candidate design.

    Power: (P - used) / P.  QoS stream u: (SINR_u - floor_u) / floor_u.
    Covertness: (cap - ratio) / cap with the leakage ratio measured at the
    true warden channel, cap = gamma_cap - 1.  Sensing: (SINR_r - g) / g.
    """
    if gamma_cap is None:
        gamma_cap = solve_gamma_cap(cfg.covert_eps)
    used = float(np.linalg.norm(bf.v_full) ** 2)
    power_slack = (cfg.total_power - used) / cfg.total_power

    sinr = sinr_per_stream(bf, ch, cfg)
    n_qos = cfg.u_carols + (1 if include_willie_qos else 0)
    floors = np.array(
        [2.0 ** cfg.qos_carol - 1.0] * cfg.u_carols
        + ([2.0 ** cfg.qos_willie - 1.0] if include_willie_qos else [])
    )
    qos_slack = (sinr[:n_qos] - floors) / floors

    h_w = ch.h_willie
    p = np.abs(h_w.conj() @ bf.v_full) ** 2
    leak_num = float(p[cfg.bob_index])
    leak_den = float(np.sum(p[: cfg.bob_index])) + cfg.noise_willie
    cap = gamma_cap - 1.0
    if cap <= 0.0:
        covert_slack = -leak_num / cfg.noise_willie if leak_num > 0 else 0.0
    else:
        covert_slack = (cap - leak_num / leak_den) / cap

    sensing_slack = None
    if scene is not None:
        g = cfg.sensing_gamma
        sensing_slack = (sensing_sinr(bf, scene, cfg) - g) / g

    return ConstraintAudit(
        power=float(power_slack),
        qos=qos_slack,
        covertness=float(covert_slack),
        sensing=sensing_slack,
    )


def performance_report(
    bf: BeamformerSolution,
    ch: ChannelSet,
    scene: SensingScene | None,
    cfg: SystemConfig,
    p_fa: float = 1e-4,
) -> PerformanceReport:
    """Evaluate all metrics of a design on one scenario instance."""
    overt, covert = sinr_and_rates(bf, ch, cfg)
    stats = hypothesis_stats(bf, ch, cfg)
    if scene is not None:
        s_sinr = sensing_sinr(bf, scene, cfg)
    else:
        s_sinr = 0.0
    return PerformanceReport(
        covert_rate=covert,
        overt_rates=overt,
        p_e=detection_error_exact(stats),
        p_e_bound=pinsker_bound(stats),
        kl_div=kl_divergence(stats),
        sensing_sinr=s_sinr,
        detection_prob=detection_probability(s_sinr, p_fa),
        beampattern=beampattern(bf, cfg),
        p_fa=p_fa,
    )
