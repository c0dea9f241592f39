"""Slot-by-slot Monte-Carlo driver for the relay-selection protocols.

One run is strictly sequential (slot i depends on slot i-1); independent
runs with different seeds or configs are safe to execute concurrently.
Per-slot histories are never stored: all averages are streaming, and
trajectories are bounded snapshots taken every ``metric_stride`` slots.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import FadingModel, SlotRealization, SlotSampler, capacity_array
from .protocols import (
    MU_CLAMP,
    Decision,
    Mode,
    NetworkState,
    SelectionWeights,
    apply_decision,
    default_mu_step,
    make_lambda_step,
    select_delay_limited,
    update_lambda,
    update_mu_estimate,
    update_rate_estimates,
)

__all__ = [
    "Conventional",
    "BufferAidedGenie",
    "BufferAidedAdaptive",
    "MaxLink",
    "DelayLimited",
    "SimulationConfig",
    "Snapshot",
    "RateReport",
    "run_simulation",
    "average_delay",
    "signaling_overhead",
]


@dataclass(frozen=True)
class Conventional:
    """Best-bottleneck selection, no buffering; half-slot relaying."""

    name = "conventional"


@dataclass(frozen=True)
class BufferAidedGenie:
    """Weighted max-link selection with fixed, known weights."""

    mu: np.ndarray
    name = "genie"

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


@dataclass(frozen=True)
class BufferAidedAdaptive:
    """Weighted max-link selection with online weight estimation."""

    mu0: float = 0.5
    name = "adaptive"


@dataclass(frozen=True)
class MaxLink:
    """Strongest of the 2M instantaneous links; coincides with the
    genie protocol at uniform weights 1/2."""

    name = "max-link"


@dataclass(frozen=True)
class DelayLimited:
    """Timer-based selection tracking an average delay target (slots)."""

    delay_target: float
    lambda0: float = 0.9
    name = "delay-limited"

    def __post_init__(self):
        if not self.delay_target > 0:
            raise ValueError("delay_target must be positive")


@dataclass
class SimulationConfig:
    model: FadingModel
    protocol: object
    num_slots: int
    seed: int = 1
    mu_step_fn: object = None
    lambda_step_fn: object = None
    metric_stride: int = 0  # 0: auto (~200 snapshots)
    burn_in: int = 0  # slots excluded from reported averages
    record_decisions: bool = False

    def __post_init__(self):
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if self.metric_stride == 0:
            self.metric_stride = max(1, self.num_slots // 200)
        if self.burn_in < 0 or self.burn_in >= self.num_slots:
            raise ValueError("burn_in must lie in [0, num_slots)")
        if isinstance(self.protocol, BufferAidedGenie):
            if self.protocol.mu.shape != (self.model.num_relays,):
                raise ValueError("genie mu vector must have one weight per relay")
            SelectionWeights(self.protocol.mu)  # validates the open interval


@dataclass
class Snapshot:
    slot: int
    running_rate: float
    running_delay: float
    mu_est: np.ndarray = None
    lambda_est: np.ndarray = None


@dataclass
class RateReport:
    avg_rate_sd: float
    per_relay_arrival: np.ndarray
    per_relay_departure: np.ndarray
    flow_residuals: np.ndarray
    avg_queue: np.ndarray
    avg_delay: float
    trajectory: list
    protocol: str
    num_slots: int
    seed: int
    estimator_warning: bool = False
    decisions: np.ndarray = None  # winner index in [0, 2M); receive side first
    final_mu_est: np.ndarray = None
    final_lambda_est: np.ndarray = None
    # conservation audit inputs, accumulated from slot 1 (ignoring burn-in)
    bits_received_total: float = 0.0
    bits_delivered_total: float = 0.0
    final_queue_total: float = 0.0


def average_delay(sum_avg_queues: float, sum_arrival_rates: float) -> float:
    """Little's-law delay: total average queue content over total
    average arrival rate, in slots."""
    if not sum_arrival_rates > 0:
        raise ValueError("average delay undefined: zero total arrival rate")
    return sum_avg_queues / sum_arrival_rates


def signaling_overhead(num_relays: int, implementation: str, relay_feeds_back: bool = None):
    """Per-slot pilot/feedback/control transmission counts.

    Centralized: 2M+4, or 2M+5 when the selected relay must additionally
    feed back its link (returned as a pair unless the flag is given).
    Distributed: 4, independent of M. Identical for the conventional and
    buffer-aided protocols.
    """
    if num_relays < 1:
        raise ValueError("num_relays must be >= 1")
    if implementation == "distributed":
        return 4
    if implementation == "centralized":
        low, high = 2 * num_relays + 4, 2 * num_relays + 5
        if relay_feeds_back is None:
            return (low, high)
        return high if relay_feeds_back else low
    raise ValueError(f"unknown implementation: {implementation!r}")


def run_simulation(config: SimulationConfig) -> RateReport:
    """Run the configured protocol for N slots and report averages.

    Deterministic for a fixed (config, seed). Conventional and
    fixed-weight protocols use a vectorized selection pass; the adaptive
    protocols run the full per-slot estimator loop.
    """
    protocol = config.protocol
    if isinstance(protocol, Conventional):
        return _run_conventional(config)
    if isinstance(protocol, (BufferAidedGenie, MaxLink)):
        return _run_fixed_weights(config)
    if isinstance(protocol, BufferAidedAdaptive):
        return _run_adaptive(config)
    if isinstance(protocol, DelayLimited):
        return _run_delay_limited(config)
    raise TypeError(f"unknown protocol: {protocol!r}")


def _run_conventional(config: SimulationConfig) -> RateReport:
    m = config.model.num_relays
    sampler = SlotSampler(config.model, config.seed)
    n = config.num_slots
    b = config.burn_in
    gsr, grd = sampler.sample_block(n)
    bottleneck = np.minimum(capacity_array(gsr), capacity_array(grd))
    winner = np.argmax(bottleneck, axis=1)
    rates = 0.5 * bottleneck[np.arange(n), winner]

    eff = rates[b:]
    eff_winner = winner[b:]
    per_relay = np.array([eff[eff_winner == k].sum() for k in range(m)]) / (n - b)
    stride = config.metric_stride
    cum = np.cumsum(rates)
    slots = np.arange(stride, n + 1, stride)
    trajectory = [
        Snapshot(slot=int(s), running_rate=float(cum[s - 1] / s), running_delay=1.0)
        for s in slots
    ]
    return RateReport(
        avg_rate_sd=float(eff.mean()),
        per_relay_arrival=per_relay,
        per_relay_departure=per_relay,
        flow_residuals=np.zeros(m),
        avg_queue=np.zeros(m),
        avg_delay=1.0,  # decode-and-forward within the same slot
        trajectory=trajectory,
        protocol="conventional",
        num_slots=n,
        seed=config.seed,
        decisions=winner if config.record_decisions else None,
    )


def _run_fixed_weights(config: SimulationConfig) -> RateReport:
    """Genie / max-link path: selection is state-free, so the winning
    link per slot is computed vectorized and only the queue bookkeeping
    runs sequentially."""
    model = config.model
    m = model.num_relays
    n = config.num_slots
    b = config.burn_in
    sampler = SlotSampler(model, config.seed)
    gsr, grd = sampler.sample_block(n)
    c_sr = capacity_array(gsr)
    c_rd = capacity_array(grd)
    if isinstance(config.protocol, MaxLink):
        scores = np.hstack([c_sr, c_rd])
    else:
        mu = config.protocol.mu
        scores = np.hstack([mu * c_sr, (1.0 - mu) * c_rd])
    winner = np.argmax(scores, axis=1)
    win_receive = winner < m
    win_cap = np.where(win_receive, np.take_along_axis(c_sr, (winner % m)[:, None], 1)[:, 0],
                       np.take_along_axis(c_rd, (winner % m)[:, None], 1)[:, 0])

    acc = _QueueAccumulator(m, burn_in=b)
    stride = config.metric_stride
    trajectory = []
    winner_list = winner.tolist()
    cap_list = win_cap.tolist()
    for i in range(n):
        w = winner_list[i]
        if w < m:
            acc.receive(i, w, cap_list[i])
        else:
            acc.transmit(i, w - m, cap_list[i])
        if (i + 1) % stride == 0:
            trajectory.append(acc.snapshot(i + 1))
    return acc.report(config, trajectory, winner if config.record_decisions else None,
                      protocol_name=config.protocol.name)


class _QueueAccumulator:
    """Streaming queue statistics shared by all buffered protocols.

    Tracks exact bit conservation, per-relay time-average queue lengths
    (lazily, since a queue changes only when its relay is active), and
    running totals for the Little's-law delay.
    """

    def __init__(self, num_relays, burn_in=0):
        m = num_relays
        self.m = m
        self.burn_in = burn_in
        self.queues = np.zeros(m)
        self.received = np.zeros(m)  # cumulative bits into each queue (post burn-in)
        self.delivered = np.zeros(m)  # cumulative bits out of each queue (post burn-in)
        self.queue_slot_sum = np.zeros(m)  # sum over slots of Q_k(i), post burn-in
        self._last_update = np.full(m, burn_in)  # slot count at last queue change
        self.total_received = 0.0  # from slot 1, for the audit
        self.total_delivered = 0.0
        self.cum_delivered_all = 0.0
        self.cum_queue_all = 0.0  # sum over all slots of sum_k Q_k(i)
        self._total_queue = 0.0
        self.slots_done = 0

    def _settle(self, k, i):
        # account for the slots since relay k's queue last changed
        if i > self._last_update[k]:
            span = i - max(self._last_update[k], self.burn_in)
            if span > 0:
                self.queue_slot_sum[k] += self.queues[k] * span
            self._last_update[k] = i

    def receive(self, i, k, cap):
        self._settle(k, i)
        self.queues[k] += cap
        self._total_queue += cap
        self.total_received += cap
        if i >= self.burn_in:
            self.received[k] += cap
        self._end_slot(i)

    def transmit(self, i, k, cap):
        self._settle(k, i)
        out = min(self.queues[k], cap)
        self.queues[k] -= out
        self._total_queue -= out
        self.total_delivered += out
        if i >= self.burn_in:
            self.delivered[k] += out
            self.cum_delivered_all += out
        self._end_slot(i)

    def _end_slot(self, i):
        self.slots_done = i + 1
        if i >= self.burn_in:
            self.cum_queue_all += self._total_queue

    def snapshot(self, slot):
        eff = slot - self.burn_in
        rate = self.cum_delivered_all / eff if eff > 0 else 0.0
        arrivals = self.received.sum()
        delay = self.cum_queue_all / arrivals if arrivals > 0 else float("nan")
        return Snapshot(slot=slot, running_rate=rate, running_delay=delay)

    def report(self, config, trajectory, decisions, protocol_name,
               estimator_warning=False, final_mu=None, final_lambda=None):
        n_eff = config.num_slots - self.burn_in
        # flush lazily-accumulated queue sums to the final slot
        for k in range(self.m):
            self._settle(k, config.num_slots)
        arrival = self.received / n_eff
        departure = self.delivered / n_eff
        avg_queue = self.queue_slot_sum / n_eff
        total_arrival = float(arrival.sum())
        delay = average_delay(float(avg_queue.sum()), total_arrival) if total_arrival > 0 else float("nan")
        return RateReport(
            avg_rate_sd=float(departure.sum()),
            per_relay_arrival=arrival,
            per_relay_departure=departure,
            flow_residuals=arrival - departure,
            avg_queue=avg_queue,
            avg_delay=delay,
            trajectory=trajectory,
            protocol=protocol_name,
            num_slots=config.num_slots,
            seed=config.seed,
            estimator_warning=estimator_warning,
            decisions=decisions,
            final_mu_est=final_mu,
            final_lambda_est=final_lambda,
            bits_received_total=self.total_received,
            bits_delivered_total=self.total_delivered,
            final_queue_total=float(self.queues.sum()),
        )


def _run_adaptive(config: SimulationConfig) -> RateReport:
    model = config.model
    m = model.num_relays
    n = config.num_slots
    sampler = SlotSampler(model, config.seed)
    gsr, grd = sampler.sample_block(n)
    state = NetworkState.initial(m, mu0=config.protocol.mu0)
    step_fn = config.mu_step_fn or default_mu_step
    acc = _QueueAccumulator(m, burn_in=config.burn_in)
    stride = config.metric_stride
    trajectory = []
    decisions = np.empty(n, dtype=np.int64) if config.record_decisions else None
    pinned_slots = 0
    weights = SelectionWeights.uniform(m)  # container reused via mu view

    for i in range(n):
        update_mu_estimate(state, step_fn)
        if np.any((state.mu_est <= MU_CLAMP[0]) | (state.mu_est >= MU_CLAMP[1])):
            pinned_slots += 1
        slot = SlotRealization(gamma_sr=gsr[i], gamma_rd=grd[i], slot_index=i)
        decision = _select_weighted(slot, state.mu_est)
        if decisions is not None:
            decisions[i] = decision.relay + (0 if decision.mode is Mode.RECEIVE else m)
        _apply_to_accumulator(acc, state, decision, slot, i)
        state.slot_count = i + 1
        update_rate_estimates(state, decision, slot)
        if (i + 1) % stride == 0:
            snap = acc.snapshot(i + 1)
            snap.mu_est = state.mu_est.copy()
            trajectory.append(snap)
    return acc.report(
        config, trajectory, decisions, protocol_name="adaptive",
        estimator_warning=pinned_slots > n // 2, final_mu=state.mu_est.copy(),
    )


def _run_delay_limited(config: SimulationConfig) -> RateReport:
    model = config.model
    m = model.num_relays
    n = config.num_slots
    sampler = SlotSampler(model, config.seed)
    gsr, grd = sampler.sample_block(n)
    state = NetworkState.initial(m, lambda0=config.protocol.lambda0)
    step_fn = config.lambda_step_fn or make_lambda_step(model.snr_ref)
    target = config.protocol.delay_target
    acc = _QueueAccumulator(m, burn_in=config.burn_in)
    stride = config.metric_stride
    trajectory = []
    decisions = np.empty(n, dtype=np.int64) if config.record_decisions else None

    for i in range(n):
        update_lambda(state, target, step_fn)
        slot = SlotRealization(gamma_sr=gsr[i], gamma_rd=grd[i], slot_index=i)
        decision = select_delay_limited(slot, state)
        if decisions is not None:
            decisions[i] = decision.relay + (0 if decision.mode is Mode.RECEIVE else m)
        _apply_to_accumulator(acc, state, decision, slot, i)
        state.slot_count = i + 1
        update_rate_estimates(state, decision, slot)
        if (i + 1) % stride == 0:
            snap = acc.snapshot(i + 1)
            snap.lambda_est = state.lambda_est.copy()
            trajectory.append(snap)
    return acc.report(
        config, trajectory, decisions, protocol_name="delay-limited",
        final_lambda=state.lambda_est.copy(),
    )


def _select_weighted(slot, mu) -> Decision:
    c_sr = capacity_array(slot.gamma_sr)
    c_rd = capacity_array(slot.gamma_rd)
    scores = np.concatenate([mu * c_sr, (1.0 - mu) * c_rd])
    w = int(np.argmax(scores))
    m = slot.num_relays
    if w < m:
        return Decision(relay=w, mode=Mode.RECEIVE)
    return Decision(relay=w - m, mode=Mode.TRANSMIT)


def _apply_to_accumulator(acc, state, decision, slot, i):
    """Run apply_decision against the protocol state and mirror the
    transfer into the streaming accumulator."""
    received, delivered = apply_decision(state, decision, slot)
    if decision.mode is Mode.RECEIVE:
        acc.receive(i, decision.relay, received)
    else:
        c_rd = float(np.log2(1.0 + slot.gamma_rd[decision.relay]))
        acc.transmit(i, decision.relay, c_rd)
    # the accumulator and the protocol state evolve the same queues
    acc.queues[decision.relay] = state.queues[decision.relay]
