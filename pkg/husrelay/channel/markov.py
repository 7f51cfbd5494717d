"""
Finite-State Markov Channel

Equal-probability quantization of exponential power gains into m states per
link. Under block fading the next state does not depend on the current one,
so every transition has probability m^-2K.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np
from scipy import stats

from husrelay.core.errors import ConfigurationError
from husrelay.model.system import SlotChannel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarkovQuantizer:
    """Partition of one link class's power-gain axis"""
    boundaries: np.ndarray
    representatives: np.ndarray
    mean_power: float

    @property
    def m(self) -> int:
        return len(self.representatives)

    @property
    def state_prob(self) -> np.ndarray:
        return np.full(self.m, 1.0 / self.m)


def build_quantizer(mean_power: float, m: int) -> MarkovQuantizer:
    """Equal-probability boundaries with conditional-mean representatives"""
    if m < 1:
        raise ConfigurationError("system.m", "must be >= 1")
    if mean_power <= 0:
        raise ConfigurationError("mean_power", "must be > 0")

    dist = stats.expon(scale=mean_power)
    boundaries = dist.ppf(np.arange(m + 1) / m)
    boundaries[0] = 0.0
    boundaries[-1] = np.inf

    lo, hi = boundaries[:-1], boundaries[1:]
    sf_lo, sf_hi = dist.sf(lo), dist.sf(hi)
    with np.errstate(invalid='ignore'):
        tail_hi = np.where(np.isinf(hi), 0.0, hi * sf_hi)
    # Truncated exponential mean; the last interval is memoryless
    representatives = mean_power + (lo * sf_lo - tail_hi) / (sf_lo - sf_hi)

    return MarkovQuantizer(boundaries=boundaries, representatives=representatives,
                           mean_power=mean_power)


def quantize(gain_power: float, quantizer: MarkovQuantizer) -> int:
    """State whose interval holds the gain; a boundary belongs to the upper interval"""
    index = int(np.searchsorted(quantizer.boundaries, gain_power, side='right')) - 1
    return min(max(index, 0), quantizer.m - 1)


@dataclass(frozen=True)
class ChannelStateIndex:
    """Per-link states: K source-relay links followed by K relay-destination links"""
    links: Tuple[int, ...]
    m: int

    @property
    def flat(self) -> int:
        if not self.links:
            return 0
        return int(np.ravel_multi_index(self.links, (self.m,) * len(self.links)))

    @staticmethod
    def from_flat(flat: int, K: int, m: int) -> "ChannelStateIndex":
        links = np.unravel_index(flat, (m,) * (2 * K))
        return ChannelStateIndex(tuple(int(i) for i in links), m)


def transition_prob(src: ChannelStateIndex, dst: ChannelStateIndex) -> float:
    """Probability of moving between joint channel states in one slot"""
    if src.m != dst.m or len(src.links) != len(dst.links):
        raise ConfigurationError("channel_state", "state indices come from different quantizers")
    for i in src.links + dst.links:
        if not 0 <= i < src.m:
            raise ConfigurationError("channel_state", f"link state {i} outside 0..{src.m - 1}")
    return (1.0 / src.m) ** len(dst.links)


class ChannelQuantizer:
    """Joint quantizer over the 2K links of a K-relay network"""

    def __init__(self, source: MarkovQuantizer, relay: MarkovQuantizer, K: int):
        if source.m != relay.m:
            raise ConfigurationError("system.m", "both hops need the same state count")
        self.source = source
        self.relay = relay
        self.K = K

    @staticmethod
    def from_fading(fading, m: int, K: int) -> "ChannelQuantizer":
        return ChannelQuantizer(build_quantizer(fading.mean_sr, m),
                                build_quantizer(fading.mean_rd, m), K)

    @property
    def m(self) -> int:
        return self.source.m

    @property
    def n_states(self) -> int:
        return self.m ** (2 * self.K)

    def channel_state(self, ch: SlotChannel) -> ChannelStateIndex:
        h_states = [quantize(p, self.source) for p in ch.h_power]
        g_states = [quantize(p, self.relay) for p in ch.g_power]
        return ChannelStateIndex(tuple(h_states + g_states), self.m)

    def representative_channel(self, index: ChannelStateIndex) -> SlotChannel:
        """Real nonnegative gains whose powers are the state representatives"""
        h_idx = list(index.links[:self.K])
        g_idx = list(index.links[self.K:])
        h = np.sqrt(self.source.representatives[h_idx]).astype(complex)
        g = np.sqrt(self.relay.representatives[g_idx]).astype(complex)
        return SlotChannel(h=h, g=g)

    def all_states(self) -> Iterator[ChannelStateIndex]:
        for flat in range(self.n_states):
            yield ChannelStateIndex.from_flat(flat, self.K, self.m)
