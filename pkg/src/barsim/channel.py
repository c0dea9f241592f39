"""Rayleigh fading link model and per-slot SNR sampling.

Each of the 2M links (M source-to-relay, M relay-to-destination) fades
independently from slot to slot.  Squared channel gains are exponential,
so per-link SNRs are drawn directly as exponential variates with mean
``snr_ref * mean_gain`` -- the complex gain itself is never materialized.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FadingModel", "SlotRealization", "SlotSampler", "capacity", "capacity_array"]


@dataclass(frozen=True)
class FadingModel:
    """Average-SNR specification of all links in the network.

    ``snr_ref`` is the transmit-power-to-noise ratio P/sigma^2 (linear).
    ``mean_gain_sr[k]`` and ``mean_gain_rd[k]`` are the mean squared
    channel gains of the k-th source-to-relay and relay-to-destination
    links, so the per-link average SNRs are snr_ref * gain.
    """

    num_relays: int
    snr_ref: float
    mean_gain_sr: np.ndarray
    mean_gain_rd: np.ndarray
    family: str = "rayleigh"

    def __post_init__(self):
        object.__setattr__(self, "mean_gain_sr", np.asarray(self.mean_gain_sr, dtype=float))
        object.__setattr__(self, "mean_gain_rd", np.asarray(self.mean_gain_rd, dtype=float))
        if self.num_relays < 1:
            raise ValueError("num_relays must be >= 1")
        if not (np.isfinite(self.snr_ref) and self.snr_ref > 0):
            raise ValueError("snr_ref must be positive and finite")
        for name, g in (("mean_gain_sr", self.mean_gain_sr), ("mean_gain_rd", self.mean_gain_rd)):
            if g.shape != (self.num_relays,):
                raise ValueError(f"{name} must have length num_relays={self.num_relays}")
            if not np.all(np.isfinite(g) & (g > 0)):
                raise ValueError(f"{name} entries must be strictly positive")
        if self.family != "rayleigh":
            raise ValueError(f"unsupported fading family: {self.family!r}")

    @property
    def avg_snr_sr(self) -> np.ndarray:
        """Per-link average SNR of the source-to-relay channels."""
        return self.snr_ref * self.mean_gain_sr

    @property
    def avg_snr_rd(self) -> np.ndarray:
        """Per-link average SNR of the relay-to-destination channels."""
        return self.snr_ref * self.mean_gain_rd

    @property
    def is_iid(self) -> bool:
        gains = np.concatenate([self.mean_gain_sr, self.mean_gain_rd])
        return bool(np.all(gains == gains[0]))

    @classmethod
    def iid(cls, num_relays: int, avg_snr: float) -> "FadingModel":
        """All 2M links share the same average SNR (unit mean gains)."""
        ones = np.ones(num_relays)
        return cls(num_relays=num_relays, snr_ref=avg_snr, mean_gain_sr=ones, mean_gain_rd=ones)


@dataclass(frozen=True)
class SlotRealization:
    """Instantaneous SNRs of all 2M links in one time slot."""

    gamma_sr: np.ndarray
    gamma_rd: np.ndarray
    slot_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma_sr", np.asarray(self.gamma_sr, dtype=float))
        object.__setattr__(self, "gamma_rd", np.asarray(self.gamma_rd, dtype=float))
        if self.gamma_sr.shape != self.gamma_rd.shape or self.gamma_sr.ndim != 1:
            raise ValueError("gamma_sr and gamma_rd must be 1-d arrays of equal length")
        for g in (self.gamma_sr, self.gamma_rd):
            if not np.all(np.isfinite(g) & (g >= 0)):
                raise ValueError("instantaneous SNRs must be finite and nonnegative")
        if self.slot_index < 0:
            raise ValueError("slot_index must be nonnegative")

    @property
    def num_relays(self) -> int:
        return self.gamma_sr.shape[0]


class SlotSampler:
    """Reproducible per-slot SNR generator for a fading model.

    Each link owns an independent PCG64 sub-stream keyed on
    (master seed, side, relay index), so extending the network with more
    relays does not perturb the sequences of existing links.
    """

    def __init__(self, model: FadingModel, seed: int):
        self.model = model
        self.seed = int(seed)
        self._rng_sr = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.seed, 0, k))))
            for k in range(model.num_relays)
        ]
        self._rng_rd = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.seed, 1, k))))
            for k in range(model.num_relays)
        ]
        self._next_slot = 0

    def _draw(self, rngs, means, n):
        # inverse-CDF on uniforms: -mean * log(1 - U), U in [0, 1)
        cols = [-m * np.log1p(-rng.random(n)) for rng, m in zip(rngs, means)]
        return np.column_stack(cols)

    def sample(self) -> SlotRealization:
        """Draw the next slot's realization."""
        gsr = self._draw(self._rng_sr, self.model.avg_snr_sr, 1)[0]
        grd = self._draw(self._rng_rd, self.model.avg_snr_rd, 1)[0]
        slot = SlotRealization(gamma_sr=gsr, gamma_rd=grd, slot_index=self._next_slot)
        self._next_slot += 1
        return slot

    def sample_block(self, num_slots: int):
        """Draw ``num_slots`` realizations at once.

        Returns (gamma_sr, gamma_rd) arrays of shape (num_slots, M); the
        sequence is identical to ``num_slots`` successive sample() calls.
        """
        gsr = self._draw(self._rng_sr, self.model.avg_snr_sr, num_slots)
        grd = self._draw(self._rng_rd, self.model.avg_snr_rd, num_slots)
        self._next_slot += num_slots
        return gsr, grd


def capacity(snr: float) -> float:
    """Channel capacity log2(1 + snr) in bits/symbol."""
    if not np.isfinite(snr) or snr < 0:
        raise ValueError(f"snr must be finite and nonnegative, got {snr}")
    return float(np.log2(1.0 + snr))


def capacity_array(snr: np.ndarray) -> np.ndarray:
    """Vectorized log2(1 + snr); inputs assumed valid."""
    return np.log1p(snr) / np.log(2.0)
