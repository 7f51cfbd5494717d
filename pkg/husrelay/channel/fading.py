"""
Block Fading Channel Traces

Rayleigh block fading on both hops: gains are constant within a slot and
independent across slots. Power gains are exponential with mean d^-n, phases
uniform on [0, 2*pi).
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from husrelay.core.errors import ConfigurationError
from husrelay.model.system import SystemParams, SlotChannel

logger = logging.getLogger(__name__)

# Counter-based generator; changing it changes every trace
RNG_ALGORITHM = "numpy.random.Philox"

TRACE_COLUMNS = ["t", "k", "re_h", "im_h", "re_g", "im_g"]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any sequence of printable parts"""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class FadingParams:
    """Large-scale geometry of the two hops"""
    d_sr: float = 1.0
    d_rd: float = 5.0
    path_loss_exp: float = 2.0

    def __post_init__(self):
        if self.d_sr <= 0:
            raise ConfigurationError("fading.d_sr", "must be > 0")
        if self.d_rd <= 0:
            raise ConfigurationError("fading.d_rd", "must be > 0")
        if self.path_loss_exp < 0:
            raise ConfigurationError("fading.path_loss_exp", "must be >= 0")

    @property
    def mean_sr(self) -> float:
        return self.d_sr ** (-self.path_loss_exp)

    @property
    def mean_rd(self) -> float:
        return self.d_rd ** (-self.path_loss_exp)

    @staticmethod
    def from_section(section) -> "FadingParams":
        return FadingParams(d_sr=section.d_sr, d_rd=section.d_rd,
                            path_loss_exp=section.path_loss_exp)


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    """T x K complex gains of both hops"""
    h: np.ndarray
    g: np.ndarray
    seed: Optional[int] = None

    @property
    def T(self) -> int:
        return self.h.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[1]

    def slot(self, t: int) -> SlotChannel:
        """Gains of slot t (0-based)"""
        return SlotChannel(h=self.h[t], g=self.g[t])

    def select_relays(self, relay_per_slot) -> "ChannelTrace":
        """Single-relay trace keeping relay_per_slot[t] in slot t"""
        rows = np.arange(self.T)
        idx = np.asarray(relay_per_slot)
        return ChannelTrace(h=self.h[rows, idx][:, None], g=self.g[rows, idx][:, None], seed=self.seed)

    @staticmethod
    def constant(h_gain, g_gain, T: int) -> "ChannelTrace":
        """The same gains in every slot"""
        h = np.tile(np.atleast_1d(np.asarray(h_gain, dtype=complex)), (T, 1))
        g = np.tile(np.atleast_1d(np.asarray(g_gain, dtype=complex)), (T, 1))
        return ChannelTrace(h=h, g=g)

    def to_frame(self) -> pd.DataFrame:
        t_idx, k_idx = np.meshgrid(np.arange(self.T), np.arange(self.K), indexing='ij')
        return pd.DataFrame({
            "t": t_idx.ravel(),
            "k": k_idx.ravel(),
            "re_h": self.h.real.ravel(),
            "im_h": self.h.imag.ravel(),
            "re_g": self.g.real.ravel(),
            "im_g": self.g.imag.ravel(),
        }, columns=TRACE_COLUMNS)

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.debug(f"Trace {self.T}x{self.K} written to {path}")

    @staticmethod
    def from_csv(path: str) -> "ChannelTrace":
        df = pd.read_csv(path, float_precision="round_trip").sort_values(["t", "k"])
        missing = set(TRACE_COLUMNS) - set(df.columns)
        if missing:
            raise ConfigurationError("trace", f"missing columns {sorted(missing)}")
        T = int(df["t"].max()) + 1
        K = int(df["k"].max()) + 1
        h = (df["re_h"].to_numpy() + 1j * df["im_h"].to_numpy()).reshape(T, K)
        g = (df["re_g"].to_numpy() + 1j * df["im_g"].to_numpy()).reshape(T, K)
        return ChannelTrace(h=h, g=g)


def _rayleigh(rng: np.random.Generator, mean_power: float, shape) -> np.ndarray:
    magnitude = np.sqrt(rng.exponential(mean_power, size=shape))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return magnitude * np.exp(1j * phase)


def sample_trace(params: SystemParams, fading: FadingParams, seed: int) -> ChannelTrace:
    """Draw a T-slot trace for K relays; deterministic given the seed"""
    rng = make_rng(seed)
    shape = (params.T, params.K)
    h = _rayleigh(rng, fading.mean_sr, shape)
    g = _rayleigh(rng, fading.mean_rd, shape)
    return ChannelTrace(h=h, g=g, seed=seed)
