"""mmWave link-budget primitives: pathloss, shadowing, Bernoulli blockage,
SNR, and two-hop decode-and-forward spectral efficiency.

All stochastic functions take an explicit ``numpy.random.Generator`` and are
pure given that stream, so they are safe to use from parallel workers as long
as each worker owns its own generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid or malformed scenario configurations."""


@dataclass(frozen=True)
class RelayRegion:
    """Disk in which candidate relays are uniformly distributed."""

    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of geometry, radio, timing, and blockage.

    Distances are in meters, powers in dBm, gains in dB, bandwidth in Hz,
    noise PSD in dBm/Hz, times in seconds, spectral efficiency in bit/s/Hz.
    ``pathloss_a``/``pathloss_b`` parameterize a + b*log10(d_km).
    """

    source_pos: tuple[float, float]
    dest_pos: tuple[float, float]
    relay_region: RelayRegion
    tx_power_bs: float
    tx_power_dev: float
    bf_gain_bs: float
    bf_gain_dev: float
    bandwidth_W: float
    noise_psd: float
    noise_figure: float
    pathloss_a: float
    pathloss_b: float
    shadow_sigma: float
    p_avail: float
    tau: float
    T_data: float
    se_cap: float = 8.0
    # "onoff" replaces the geometric rate model with a two-point law:
    # each hop is available w.p. p_avail and an available two-hop link runs
    # at exactly se_cap. Used for closed-form validation.
    channel_mode: str = "geometric"
    # None = unbounded i.i.d. relay pool (the theory's assumption). A finite
    # pool is exploratory only.
    relay_pool_size: int | None = None

    def __post_init__(self):
        if not (0.0 < self.p_avail <= 1.0):
            raise ConfigError(f"p_avail must be in (0, 1], got {self.p_avail}")
        if self.tau <= 0 or self.T_data <= 0:
            raise ConfigError("tau and T_data must be positive")
        if self.bandwidth_W <= 0:
            raise ConfigError("bandwidth_W must be positive")
        if self.se_cap <= 0:
            raise ConfigError("se_cap must be positive")
        if self.shadow_sigma < 0:
            raise ConfigError("shadow_sigma must be nonnegative")
        if tuple(self.source_pos) == tuple(self.dest_pos):
            raise ConfigError("source_pos and dest_pos must differ")
        if self.relay_region.radius <= 0:
            raise ConfigError("relay_region radius must be positive")
        if self.channel_mode not in ("geometric", "onoff"):
            raise ConfigError(f"unknown channel_mode {self.channel_mode!r}")
        if self.relay_pool_size is not None and self.relay_pool_size < 1:
            raise ConfigError("relay_pool_size must be >= 1 when set")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["source_pos"] = list(self.source_pos)
        d["dest_pos"] = list(self.dest_pos)
        d["relay_region"] = {
            "center": list(self.relay_region.center),
            "radius": self.relay_region.radius,
        }
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        region = d.get("relay_region")
        if not isinstance(region, dict) or set(region) != {"center", "radius"}:
            raise ConfigError("relay_region must be {'center': [x, y], 'radius': r}")
        d["relay_region"] = RelayRegion(tuple(region["center"]), float(region["radius"]))
        for key in ("source_pos", "dest_pos"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class LinkSample:
    """One probed hop: blockage indicator, shadowing draw, and resulting SNR."""

    blocked_indicator: int  # 1 = link available, 0 = blocked
    shadowing_db: float
    distance: float
    snr_linear: float


def default_scenario(p_avail: float = 0.5, tau: float = 0.01, **overrides) -> ScenarioConfig:
    """Pico-BS source at (-250, 0) m, device destination at (250, 0) m,
    relays uniform in the 250 m disk at the origin, 500 MHz at 28 GHz.
    """
    base = dict(
        source_pos=(-250.0, 0.0),
        dest_pos=(250.0, 0.0),
        relay_region=RelayRegion((0.0, 0.0), 250.0),
        tx_power_bs=30.0,
        tx_power_dev=23.0,
        bf_gain_bs=20.0,
        bf_gain_dev=10.0,
        bandwidth_W=500e6,
        noise_psd=-174.0,
        noise_figure=7.0,
        pathloss_a=141.3,
        pathloss_b=20.0,
        shadow_sigma=7.0,
        p_avail=p_avail,
        tau=tau,
        T_data=1.0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x_lin):
    return 10.0 * np.log10(np.asarray(x_lin, dtype=float))


def pathloss_db(distance, cfg: ScenarioConfig):
    """Distance-dependent pathloss a + b*log10(d/1km) in dB. Accepts arrays."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = cfg.pathloss_a + cfg.pathloss_b * np.log10(d / 1000.0)
    return float(out) if np.isscalar(distance) else out


def noise_power_dbm(cfg: ScenarioConfig) -> float:
    """Thermal noise power over the channel bandwidth plus noise figure."""
    return cfg.noise_psd + 10.0 * math.log10(cfg.bandwidth_W) + cfg.noise_figure


def snr_linear(tx_dbm, g_tx, g_rx, distance, shadow_db, blocked, cfg: ScenarioConfig):
    """Linear SNR of one hop; exactly 0 when the hop is blocked.

    Received power (dBm) = tx + g_tx + g_rx - pathloss + shadowing; the
    blockage indicator multiplies the received power, so a blocked hop has
    zero SNR regardless of geometry.
    """
    pl = pathloss_db(distance, cfg)
    rx_dbm = np.asarray(tx_dbm, dtype=float) + g_tx + g_rx - pl + np.asarray(shadow_db, dtype=float)
    snr = db_to_linear(rx_dbm - noise_power_dbm(cfg)) * np.asarray(blocked, dtype=float)
    return float(snr) if np.ndim(snr) == 0 else snr


def two_hop_se(snr1, snr2, cfg: ScenarioConfig):
    """Half-duplex DF spectral efficiency of a two-hop link, capped at se_cap.

    min over the two hops of 0.5*log2(1 + 2*SNR): the factor 2 accounts for
    each hop using only half the time, and the 1/2 for the rate halving.
    """
    s1 = np.asarray(snr1, dtype=float)
    s2 = np.asarray(snr2, dtype=float)
    if np.any(s1 < 0) or np.any(s2 < 0):
        raise ValueError("SNR must be nonnegative")
    se = 0.5 * np.log2(1.0 + 2.0 * np.minimum(s1, s2))
    se = np.minimum(se, cfg.se_cap)
    return float(se) if np.ndim(se) == 0 else se


def sample_relay_positions(rng: np.random.Generator, cfg: ScenarioConfig, n: int) -> np.ndarray:
    """Uniform positions on the relay disk via inverse-CDF radius sampling."""
    region = cfg.relay_region
    r = region.radius * np.sqrt(rng.random(n))
    theta = rng.random(n) * (2.0 * np.pi)
    return np.column_stack([
        region.center[0] + r * np.cos(theta),
        region.center[1] + r * np.sin(theta),
    ])


def sample_relay_link_pair(rng: np.random.Generator, cfg: ScenarioConfig):
    """Draw one fresh relay: position, per-hop blockage/shadowing, and SNRs.

    Returns (source->relay LinkSample, relay->dest LinkSample, position).
    The first hop uses BS power and BS transmit gain; the second hop is
    device-to-device.
    """
    pos = sample_relay_positions(rng, cfg, 1)[0]
    chi1 = int(rng.random() < cfg.p_avail)
    shadow1 = float(rng.normal(0.0, cfg.shadow_sigma))
    chi2 = int(rng.random() < cfg.p_avail)
    shadow2 = float(rng.normal(0.0, cfg.shadow_sigma))

    d1 = float(np.hypot(*(pos - np.asarray(cfg.source_pos))))
    d2 = float(np.hypot(*(np.asarray(cfg.dest_pos) - pos)))
    s1 = snr_linear(cfg.tx_power_bs, cfg.bf_gain_bs, cfg.bf_gain_dev,
                    d1, shadow1, chi1, cfg)
    s2 = snr_linear(cfg.tx_power_dev, cfg.bf_gain_dev, cfg.bf_gain_dev,
                    d2, shadow2, chi2, cfg)
    first = LinkSample(chi1, shadow1, d1, s1)
    second = LinkSample(chi2, shadow2, d2, s2)
    return first, second, (float(pos[0]), float(pos[1]))


def sample_two_hop_se_batch(rng: np.random.Generator, cfg: ScenarioConfig, n: int):
    """Vectorized draw of n i.i.d. probes.

    Returns (chi1, chi2, se) where chi1/chi2 are 0/1 availability indicators
    for the two hops and se is the two-hop spectral efficiency (0 whenever
    either hop is blocked). The draw order is fixed so that a given generator
    state always yields the same probes.
    """
    if cfg.channel_mode == "onoff":
        chi1 = (rng.random(n) < cfg.p_avail).astype(np.int8)
        chi2 = (rng.random(n) < cfg.p_avail).astype(np.int8)
        se = np.where((chi1 & chi2).astype(bool), cfg.se_cap, 0.0)
        return chi1, chi2, se

    pos = sample_relay_positions(rng, cfg, n)
    chi1 = (rng.random(n) < cfg.p_avail).astype(np.int8)
    shadow1 = rng.normal(0.0, cfg.shadow_sigma, n)
    chi2 = (rng.random(n) < cfg.p_avail).astype(np.int8)
    shadow2 = rng.normal(0.0, cfg.shadow_sigma, n)

    d1 = np.hypot(pos[:, 0] - cfg.source_pos[0], pos[:, 1] - cfg.source_pos[1])
    d2 = np.hypot(cfg.dest_pos[0] - pos[:, 0], cfg.dest_pos[1] - pos[:, 1])
    s1 = snr_linear(cfg.tx_power_bs, cfg.bf_gain_bs, cfg.bf_gain_dev,
                    d1, shadow1, chi1, cfg)
    s2 = snr_linear(cfg.tx_power_dev, cfg.bf_gain_dev, cfg.bf_gain_dev,
                    d2, shadow2, chi2, cfg)
    se = two_hop_se(s1, s2, cfg)
    return chi1, chi2, se
