"""End-to-end runs: windows -> dialogue -> library -> backtest.

This is the orchestration layer shared by the command line and the pair
sweep.  It owns no algorithmic logic of its own; it wires the window
preparation, the speak/listen training, the pattern extraction and the
backtest together with consistent seeding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autoencoder import AeConfig, ConvAutoencoder
from .dataio import SeriesPair, WindowSet, make_windows
from .dialogue import DialogueConfig, DialogueData, DialogueResult, train_dialogue
from .errors import ConfigError
from .regimes import PatternLibrary, build_library
from .rng import Rng
from .strategy import BacktestResult, backtest


@dataclass(frozen=True)
class RunSettings:
    """Everything needed to evaluate one context pair end to end."""

    window: int = 32
    stride: int = 1
    split: float = 0.8
    ae1: AeConfig = field(default_factory=lambda: AeConfig(code_dim=8, conv_channels=32))
    ae2: AeConfig = field(default_factory=lambda: AeConfig(code_dim=6, conv_channels=16))
    dialogue: DialogueConfig = field(default_factory=DialogueConfig)
    clusters: int = 4
    profile_len: int = 24
    rebalance: int | None = None     # None: use the data horizon
    cost: float = 0.0

    def validate(self) -> None:
        if self.ae1.code_dim <= self.ae2.code_dim:
            raise ConfigError(
                f"ae1.code_dim must exceed ae2.code_dim (the wider model "
                f"speaks a richer code), got {self.ae1.code_dim} <= {self.ae2.code_dim}")
        for name, cfg in (("ae1", self.ae1), ("ae2", self.ae2)):
            cfg.validate(name)
            if cfg.window != self.window:
                raise ConfigError(f"{name}.window must equal window={self.window}")
        self.dialogue.validate()
        if self.clusters < 1:
            raise ConfigError(f"clusters must be >= 1, got {self.clusters}")
        if not 1 <= self.profile_len <= self.window:
            raise ConfigError(
                f"profile_len must lie in [1, window={self.window}], got {self.profile_len}")
        if self.rebalance is not None and self.rebalance < 1:
            raise ConfigError(f"rebalance must be >= 1, got {self.rebalance}")
        if self.cost < 0:
            raise ConfigError(f"cost must be >= 0, got {self.cost}")


def build_autoencoders(settings: RunSettings, seed: int):
    root = Rng(seed)
    ae1 = ConvAutoencoder(settings.ae1, root.split("init", 1))
    ae2 = ConvAutoencoder(settings.ae2, root.split("init", 2))
    return ae1, ae2


def denoise(ae: ConvAutoencoder, windows: np.ndarray) -> np.ndarray:
    """Mean-code reconstruction of every window (no sampling noise)."""
    if len(windows) == 0:
        return windows
    return ae.reconstruct(windows)


def library_from_windows(ae: ConvAutoencoder, ws: WindowSet, clusters: int,
                         profile_len: int, seed: int,
                         context_name: str = "x") -> PatternLibrary:
    recon = denoise(ae, ws.train)
    return build_library(recon, clusters, profile_len,
                         Rng(seed).split("library", context_name),
                         y_mean=ws.y_mean, y_std=ws.y_std,
                         x_mean=ws.x_mean, x_std=ws.x_std,
                         context_name=context_name, horizon=ws.horizon)


def heldout_segment(pair: SeriesPair, ws: WindowSet) -> SeriesPair:
    """The evaluation slice, starting one horizon past the split."""
    return pair.slice(ws.split_index + ws.horizon, len(pair))


@dataclass
class PairOutcome:
    result: DialogueResult
    windows_a: WindowSet
    windows_b: WindowSet
    library_a: PatternLibrary
    library_b: PatternLibrary
    backtest_a: BacktestResult
    backtest_b: BacktestResult


def run_pair(pair_a: SeriesPair, pair_b: SeriesPair, settings: RunSettings,
             seed: int = 0) -> PairOutcome:
    """Full treatment of one context pair sharing a target series."""
    settings.validate()
    if len(pair_a) != len(pair_b):
        raise ConfigError("paired contexts must cover the same samples")

    ws_a = make_windows(pair_a, settings.window, settings.stride, settings.split)
    ws_b = make_windows(pair_b, settings.window, settings.stride, settings.split)
    ae1, ae2 = build_autoencoders(settings, seed)
    dcfg = replace(settings.dialogue, seed=seed)
    result = train_dialogue(ae1, ae2, DialogueData(ws_a.train, ws_b.train), dcfg)

    lib_a = library_from_windows(ae1, ws_a, settings.clusters,
                                 settings.profile_len, seed, pair_a.context_name)
    lib_b = library_from_windows(ae2, ws_b, settings.clusters,
                                 settings.profile_len, seed, pair_b.context_name)
    bt_a = backtest(heldout_segment(pair_a, ws_a), lib_a,
                    step=settings.rebalance, cost=settings.cost)
    bt_b = backtest(heldout_segment(pair_b, ws_b), lib_b,
                    step=settings.rebalance, cost=settings.cost)
    return PairOutcome(result=result, windows_a=ws_a, windows_b=ws_b,
                       library_a=lib_a, library_b=lib_b,
                       backtest_a=bt_a, backtest_b=bt_b)
