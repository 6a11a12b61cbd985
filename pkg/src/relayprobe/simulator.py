"""Monte Carlo simulation of the periodic probe-then-transmit protocol.

Each period repeatedly probes fresh i.i.d. relays: the source-relay hop
costs tau, and only if it is available is the relay-destination hop probed
(another tau). The policy decides when to stop; transmission then lasts
T_data. Throughput is the renewal-reward ratio sum(bits)/sum(time).

Replication is deterministic for any worker count: periods are processed in
fixed-size chunks, each chunk drawing from its own substream seeded by
(seed, chunk_index), and workers always own whole chunks.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel as _channel
from . import sedist as _sedist
from . import solver as _solver
from .channel import ScenarioConfig

CHUNK_PERIODS = 4096
# one substream id reserved for building the empirical rate law when an
# OptimalThreshold policy must be resolved for a geometric-mode scenario
_DIST_STREAM_ID = 2 ** 31


class RunawayPeriodError(RuntimeError):
    """A period failed to stop within max_probes relay probes."""


# -- policies --------------------------------------------------------------

@dataclass(frozen=True)
class OptimalThreshold:
    """Stop at the first relay whose rate reaches the solver's mu*/W."""
    n_dist_samples: int = 10 ** 6


@dataclass(frozen=True)
class ExplicitThreshold:
    rho: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


@dataclass(frozen=True)
class Myopic:
    """Stop at the first relay with both hops available, regardless of rate."""


@dataclass(frozen=True)
class FixedBeta:
    """Probe exactly beta relays and transmit with the best one."""
    beta: int

    def __post_init__(self):
        if self.beta < 1:
            raise ValueError("beta must be >= 1")


@dataclass(frozen=True)
class GenieOnOff:
    """Free perfect relay knowledge: throughput W*r_bar with no probing."""


StoppingPolicy = OptimalThreshold | ExplicitThreshold | Myopic | FixedBeta | GenieOnOff


def myopic_stop_test(first_hop: int, second_hop: int) -> bool:
    """True iff both hops are available (link can be established)."""
    return bool(first_hop) and bool(second_hop)


def resolve_policy(policy: StoppingPolicy, cfg: ScenarioConfig,
                   seed: int = 0) -> StoppingPolicy:
    """Replace OptimalThreshold with an explicit threshold for `cfg`.

    On/off scenarios use the closed form; geometric scenarios build an
    empirical rate law (deterministically from `seed`) and solve the fixed
    point on it.
    """
    if not isinstance(policy, OptimalThreshold):
        return policy
    if cfg.channel_mode == "onoff":
        sol = _solver.closed_form_onoff(cfg.p_avail, cfg.se_cap,
                                        cfg.bandwidth_W, cfg.T_data, cfg.tau)
    else:
        rng = np.random.default_rng([seed, _DIST_STREAM_ID])
        dist = _sedist.build_empirical(cfg, policy.n_dist_samples, rng)
        sol = _solver.solve_mu_star(dist, cfg.bandwidth_W, cfg.T_data,
                                    cfg.tau, cfg.p_avail)
    return ExplicitThreshold(sol.threshold_se)


# -- single-period simulation ---------------------------------------------

@dataclass(frozen=True)
class PeriodRecord:
    n_probed: int
    period_time: float
    bits: float
    selected_se: float
    running_max: float


@dataclass(frozen=True)
class Probe:
    """One probed relay as seen by a stopping rule."""
    first_hop: int
    second_hop: int
    rate: float


def _probe_stream(rng: np.random.Generator, cfg: ScenarioConfig):
    if cfg.relay_pool_size is not None and cfg.channel_mode == "geometric":
        # exploratory finite pool: fixed positions for the whole period,
        # cycled through; blockage and shadowing are redrawn per probe
        pool = _channel.sample_relay_positions(rng, cfg, cfg.relay_pool_size)
        i = 0
        while True:
            pos = pool[i % cfg.relay_pool_size]
            i += 1
            yield _probe_at_position(rng, cfg, pos)
    while True:
        chi1, chi2, se = _channel.sample_two_hop_se_batch(rng, cfg, 1)
        yield Probe(int(chi1[0]), int(chi2[0]), float(se[0]))


def _probe_at_position(rng, cfg, pos):
    chi1 = int(rng.random() < cfg.p_avail)
    shadow1 = float(rng.normal(0.0, cfg.shadow_sigma))
    chi2 = int(rng.random() < cfg.p_avail)
    shadow2 = float(rng.normal(0.0, cfg.shadow_sigma))
    d1 = float(np.hypot(pos[0] - cfg.source_pos[0], pos[1] - cfg.source_pos[1]))
    d2 = float(np.hypot(cfg.dest_pos[0] - pos[0], cfg.dest_pos[1] - pos[1]))
    s1 = _channel.snr_linear(cfg.tx_power_bs, cfg.bf_gain_bs, cfg.bf_gain_dev,
                             d1, shadow1, chi1, cfg)
    s2 = _channel.snr_linear(cfg.tx_power_dev, cfg.bf_gain_dev, cfg.bf_gain_dev,
                             d2, shadow2, chi2, cfg)
    return Probe(chi1, chi2, float(_channel.two_hop_se(s1, s2, cfg)))


def run_period_from_probes(policy: StoppingPolicy, cfg: ScenarioConfig,
                           probes, max_probes: int = 10 ** 6) -> PeriodRecord:
    """Run one period against an explicit probe sequence.

    A relay whose first hop is blocked costs tau and has rate 0; otherwise it
    costs 2*tau. Threshold and myopic rules transmit with the relay probed at
    the stopping stage; FixedBeta transmits with the best of its beta relays.
    """
    W, T, tau = cfg.bandwidth_W, cfg.T_data, cfg.tau
    if isinstance(policy, GenieOnOff):
        r = cfg.se_cap
        return PeriodRecord(0, T, W * T * r, r, r)

    probe_time = 0.0
    running_max = 0.0
    n = 0
    for probe in probes:
        n += 1
        if n > max_probes:
            raise RunawayPeriodError(
                f"no stop within {max_probes} probes; threshold above support?")
        probe_time += tau * (1 + probe.first_hop)
        rate = probe.rate if probe.first_hop else 0.0
        running_max = max(running_max, rate)
        if isinstance(policy, ExplicitThreshold):
            if rate >= policy.rho:
                return PeriodRecord(n, probe_time + T, W * T * rate, rate, running_max)
        elif isinstance(policy, Myopic):
            if myopic_stop_test(probe.first_hop, probe.second_hop):
                return PeriodRecord(n, probe_time + T, W * T * rate, rate, running_max)
        elif isinstance(policy, FixedBeta):
            if n == policy.beta:
                return PeriodRecord(n, probe_time + T, W * T * running_max,
                                    running_max, running_max)
        else:
            raise TypeError(f"unsupported policy {policy!r}")
    raise RunawayPeriodError("probe sequence exhausted before stopping")


def run_period(policy: StoppingPolicy, cfg: ScenarioConfig,
               rng: np.random.Generator, max_probes: int = 10 ** 6) -> PeriodRecord:
    """Simulate one probe-then-transmit period with fresh random relays."""
    policy = resolve_policy(policy, cfg)
    return run_period_from_probes(policy, cfg, _probe_stream(rng, cfg), max_probes)


# -- vectorized replication ------------------------------------------------

@dataclass(frozen=True)
class PeriodArrays:
    """Per-period outcomes for a batch of independent periods."""
    n_probed: np.ndarray
    period_time: np.ndarray
    bits: np.ndarray
    selected_se: np.ndarray


def _simulate_chunk(policy, cfg, seed, chunk_index, n_periods, max_probes):
    """Simulate n_periods periods from substream (seed, chunk_index)."""
    rng = np.random.default_rng([seed, chunk_index])
    W, T, tau = cfg.bandwidth_W, cfg.T_data, cfg.tau

    if isinstance(policy, GenieOnOff):
        r = cfg.se_cap
        return PeriodArrays(
            np.zeros(n_periods, dtype=np.int64),
            np.full(n_periods, T),
            np.full(n_periods, W * T * r),
            np.full(n_periods, r),
        )

    if isinstance(policy, FixedBeta):
        beta = policy.beta
        chi1, _, se = _channel.sample_two_hop_se_batch(rng, cfg, n_periods * beta)
        chi1 = chi1.reshape(n_periods, beta)
        best = se.reshape(n_periods, beta).max(axis=1)
        time = tau * (beta + chi1.sum(axis=1)) + T
        return PeriodArrays(
            np.full(n_periods, beta, dtype=np.int64),
            time, W * T * best, best,
        )

    if isinstance(policy, ExplicitThreshold):
        def accepts(chi1, chi2, se):
            return se >= policy.rho
    elif isinstance(policy, Myopic):
        def accepts(chi1, chi2, se):
            return (chi1 & chi2).astype(bool)
    else:
        raise TypeError(f"unsupported policy {policy!r}")

    # Probes are i.i.d. and every stop test is per-probe, so a flat probe
    # stream serves all periods back to back: period i ends at the i-th
    # accepted probe. Draw blocks until n_periods probes have been accepted.
    chi1_parts, time_parts, rate_parts, accept_parts = [], [], [], []
    n_accepted = 0
    drawn_since_accept = 0
    block = 1 << 14
    while n_accepted < n_periods:
        chi1, chi2, se = _channel.sample_two_hop_se_batch(rng, cfg, block)
        acc = accepts(chi1, chi2, se)
        k = int(acc.sum())
        if k == 0:
            drawn_since_accept += block
        else:
            drawn_since_accept = block - 1 - int(np.flatnonzero(acc)[-1])
        if drawn_since_accept > max_probes:
            raise RunawayPeriodError(
                f"no stop within {max_probes} probes; threshold above support?")
        chi1_parts.append(chi1)
        time_parts.append(tau * (1 + chi1))
        rate_parts.append(se)
        accept_parts.append(acc)
        n_accepted += k

    accept = np.concatenate(accept_parts)
    stop_idx = np.flatnonzero(accept)[:n_periods]
    n_probed = np.diff(stop_idx, prepend=-1)
    if n_probed.max() > max_probes:
        raise RunawayPeriodError(
            f"no stop within {max_probes} probes; threshold above support?")
    cum_time = np.cumsum(np.concatenate(time_parts))
    probing_time = np.diff(cum_time[stop_idx], prepend=0.0)
    rate = np.concatenate(rate_parts)[stop_idx]
    return PeriodArrays(n_probed, probing_time + T, W * T * rate, rate)


def simulate_periods(policy: StoppingPolicy, cfg: ScenarioConfig, n_periods: int,
                     seed: int, workers: int = 1,
                     max_probes: int = 10 ** 6) -> PeriodArrays:
    """Simulate n_periods independent periods, bit-identical for any workers."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    policy = resolve_policy(policy, cfg, seed)
    n_chunks = (n_periods + CHUNK_PERIODS - 1) // CHUNK_PERIODS
    sizes = [min(CHUNK_PERIODS, n_periods - i * CHUNK_PERIODS) for i in range(n_chunks)]
    args = [(policy, cfg, seed, i, sizes[i], max_probes) for i in range(n_chunks)]
    if workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_chunk_star, args))
    else:
        chunks = [_simulate_chunk(*a) for a in args]
    return PeriodArrays(
        np.concatenate([c.n_probed for c in chunks]),
        np.concatenate([c.period_time for c in chunks]),
        np.concatenate([c.bits for c in chunks]),
        np.concatenate([c.selected_se for c in chunks]),
    )


def _simulate_chunk_star(args):
    return _simulate_chunk(*args)


# -- throughput estimation -------------------------------------------------

@dataclass(frozen=True)
class ThroughputEstimate:
    throughput_bps: float
    stderr_bps: float
    n_periods: int
    total_bits: float
    total_time: float


def batch_means_stderr(bits: np.ndarray, time: np.ndarray, n_batches: int = 30) -> float:
    """Standard error of the ratio estimator from batch-means ratios."""
    if bits.size < n_batches:
        raise ValueError(f"need at least {n_batches} periods")
    ratios = np.array([b.sum() / t.sum() for b, t in
                       zip(np.array_split(bits, n_batches),
                           np.array_split(time, n_batches))])
    return float(ratios.std(ddof=1) / np.sqrt(n_batches))


def estimate_throughput(policy: StoppingPolicy, cfg: ScenarioConfig,
                        n_periods: int, seed: int, workers: int = 1,
                        max_probes: int = 10 ** 6,
                        trace_path=None) -> ThroughputEstimate:
    """Renewal-reward throughput estimate over n_periods periods."""
    if n_periods < 30:
        raise ValueError("n_periods must be >= 30")
    arrays = simulate_periods(policy, cfg, n_periods, seed, workers, max_probes)
    if trace_path is not None:
        write_trace_csv(trace_path, arrays)
    total_bits = float(arrays.bits.sum())
    total_time = float(arrays.period_time.sum())
    return ThroughputEstimate(
        throughput_bps=total_bits / total_time,
        stderr_bps=batch_means_stderr(arrays.bits, arrays.period_time),
        n_periods=n_periods,
        total_bits=total_bits,
        total_time=total_time,
    )


def write_trace_csv(path, arrays: PeriodArrays) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["period_index", "n_probed", "period_time_s", "bits", "selected_se"])
        for i in range(arrays.bits.size):
            w.writerow([i, int(arrays.n_probed[i]), repr(float(arrays.period_time[i])),
                        repr(float(arrays.bits[i])), repr(float(arrays.selected_se[i]))])
