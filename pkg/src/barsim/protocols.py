"""Per-slot relay-selection rules, queue dynamics, and online estimators.

Relay indices are 0-based throughout. Exactly one relay is active per
slot, either receiving from the source or transmitting to the
destination; all queue contents and rates are in normalized bits/symbol.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import SlotRealization, capacity_array

__all__ = [
    "Mode",
    "Decision",
    "SelectionWeights",
    "NetworkState",
    "MU_CLAMP",
    "LAMBDA_MIN",
    "select_conventional",
    "select_buffer_aided",
    "select_delay_limited",
    "apply_decision",
    "update_rate_estimates",
    "update_mu_estimate",
    "update_lambda",
    "default_mu_step",
    "make_lambda_step",
]

# estimator guards; keep every weighted link strictly positive so a
# transient never disables a link permanently
MU_CLAMP = (1e-3, 1.0 - 1e-3)
LAMBDA_MIN = 1e-3


class Mode(enum.Enum):
    RECEIVE = "receive"
    TRANSMIT = "transmit"


@dataclass
class Decision:
    """Which relay is active this slot and in which mode.

    ``rate`` is the slot's transfer rate (source-to-relay capacity on
    reception, min{queue, capacity} on transmission); it is filled in by
    apply_decision.
    """

    relay: int
    mode: Mode
    rate: float = 0.0


@dataclass(frozen=True)
class SelectionWeights:
    """Per-relay reception weights mu_k, all strictly inside (0, 1)."""

    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if self.mu.ndim != 1 or not np.all((self.mu > 0) & (self.mu < 1)):
            raise ValueError("weights must be a 1-d array with entries in (0, 1)")

    @classmethod
    def uniform(cls, num_relays: int, value: float = 0.5) -> "SelectionWeights":
        return cls(mu=np.full(num_relays, value))


@dataclass
class NetworkState:
    """Mutable per-run state: queues and online estimators."""

    queues: np.ndarray
    mu_est: np.ndarray
    lambda_est: np.ndarray
    arrival_rate_est: np.ndarray
    departure_rate_est: np.ndarray
    slot_count: int = 0

    @classmethod
    def initial(cls, num_relays: int, mu0: float = 0.5, lambda0: float = 0.9) -> "NetworkState":
        return cls(
            queues=np.zeros(num_relays),
            mu_est=np.full(num_relays, mu0),
            lambda_est=np.full(num_relays, lambda0),
            arrival_rate_est=np.zeros(num_relays),
            departure_rate_est=np.zeros(num_relays),
        )

    @property
    def num_relays(self) -> int:
        return self.queues.shape[0]


def select_conventional(slot: SlotRealization):
    """Best-bottleneck selection without buffering.

    Returns (relay, slot_rate) where slot_rate is half the selected
    relay's min of its two link capacities (half the slot receives, half
    transmits).
    """
    c_sr = capacity_array(slot.gamma_sr)
    c_rd = capacity_array(slot.gamma_rd)
    bottleneck = np.minimum(c_sr, c_rd)
    k = int(np.argmax(bottleneck))
    return k, 0.5 * float(bottleneck[k])


def select_buffer_aided(slot: SlotRealization, weights: SelectionWeights) -> Decision:
    """Weighted max-link selection.

    Picks the largest entry of {mu_k * C_Sk} union {(1-mu_k) * C_kD}.
    Reception entries come first, so argmax's first-occurrence rule
    breaks ties toward the lowest relay index with Receive before
    Transmit.
    """
    c_sr = capacity_array(slot.gamma_sr)
    c_rd = capacity_array(slot.gamma_rd)
    scores = np.concatenate([weights.mu * c_sr, (1.0 - weights.mu) * c_rd])
    w = int(np.argmax(scores))
    m = slot.num_relays
    if w < m:
        return Decision(relay=w, mode=Mode.RECEIVE)
    return Decision(relay=w - m, mode=Mode.TRANSMIT)


def select_delay_limited(slot: SlotRealization, state: NetworkState) -> Decision:
    """Timer-based selection for delay-limited operation.

    Each relay scores max{lambda_k * C_Sk, min{Q_k, C_kD} / lambda_k};
    the relay whose timer (1/score) expires first wins.
    """
    c_sr = capacity_array(slot.gamma_sr)
    c_rd = capacity_array(slot.gamma_rd)
    recv_score = state.lambda_est * c_sr
    trans_score = np.minimum(state.queues, c_rd) / state.lambda_est
    scores = np.concatenate([recv_score, trans_score])
    w = int(np.argmax(scores))
    m = slot.num_relays
    if w < m:
        return Decision(relay=w, mode=Mode.RECEIVE)
    return Decision(relay=w - m, mode=Mode.TRANSMIT)


def apply_decision(state: NetworkState, decision: Decision, slot: SlotRealization):
    """Execute the slot's transfer, updating queues in place.

    On reception the full source-to-relay capacity enters the queue; on
    transmission the relay delivers min{Q_k, C_kD}, never more than it
    holds. Fills decision.rate and returns (bits_received, bits_delivered).
    """
    k = decision.relay
    if not (0 <= k < state.num_relays):
        raise IndexError(f"relay index {k} outside [0, {state.num_relays})")
    if decision.mode is Mode.RECEIVE:
        rate = float(np.log2(1.0 + slot.gamma_sr[k]))
        state.queues[k] += rate
        decision.rate = rate
        return rate, 0.0
    c_rd = float(np.log2(1.0 + slot.gamma_rd[k]))
    rate = min(float(state.queues[k]), c_rd)
    state.queues[k] -= rate
    decision.rate = rate
    return 0.0, rate


def update_rate_estimates(state: NetworkState, decision: Decision, slot: SlotRealization) -> None:
    """Streaming means of per-relay arrival and departure rates.

    Call once per slot after apply_decision; state.slot_count must
    already equal the 1-based index of the current slot. Inactive relays
    contribute zero to their running means. The departure estimate uses
    the full link capacity, not the buffer-clamped delivered amount: at
    flow balance the two coincide, and the unclamped value is what the
    weight recursion needs during the transient.
    """
    i = state.slot_count
    if i < 1:
        raise ValueError("slot_count must be >= 1 before updating rate estimates")
    state.arrival_rate_est *= (i - 1) / i
    state.departure_rate_est *= (i - 1) / i
    if decision.mode is Mode.RECEIVE:
        state.arrival_rate_est[decision.relay] += np.log2(1.0 + slot.gamma_sr[decision.relay]) / i
    else:
        state.departure_rate_est[decision.relay] += np.log2(1.0 + slot.gamma_rd[decision.relay]) / i


def default_mu_step(i: int) -> float:
    return 0.1 / np.sqrt(i)


def update_mu_estimate(state: NetworkState, step_fn=default_mu_step) -> None:
    """Stochastic-approximation update of the reception weights.

    Moves mu_k toward balance of the departure and arrival rate
    estimates; a surplus on the departure side raises mu_k, favoring the
    relay for reception. Clamped to keep both weighted links alive.
    """
    i = state.slot_count + 1
    delta = step_fn(i)
    state.mu_est += delta * (state.departure_rate_est - state.arrival_rate_est)
    np.clip(state.mu_est, MU_CLAMP[0], MU_CLAMP[1], out=state.mu_est)


def make_lambda_step(snr_ref: float):
    """Default timer step size 0.005 / sqrt(i) / log2(1 + P/sigma^2)."""
    scale = 0.005 / np.log2(1.0 + snr_ref)
    return lambda i: scale / np.sqrt(i)


def update_lambda(state: NetworkState, delay_target: float, step_fn) -> None:
    """Drive each relay's queue-to-arrival ratio toward the delay target.

    A ratio above the target lowers lambda_k, raising the relay's
    transmit priority. Relays that have never received (zero arrival
    estimate) treat the ratio as 0 so they are favored for reception.
    """
    i = state.slot_count + 1
    zeta = step_fn(i)
    ratio = np.zeros(state.num_relays)
    np.divide(state.queues, state.arrival_rate_est, out=ratio, where=state.arrival_rate_est > 0)
    state.lambda_est += zeta * (delay_target - ratio)
    np.maximum(state.lambda_est, LAMBDA_MIN, out=state.lambda_est)
