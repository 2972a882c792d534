"""Mutually regularized autoencoder pairs for noisy time series.

Two heterogeneous convolutional autoencoders take turns speaking and
listening, align their latent codes through per-sample translator
networks, and in doing so regularize each other.  The denoised output
feeds a clustered pattern library and a relative-distance trading rule.
"""

from .autoencoder import AeConfig, CodeSample, ConvAutoencoder, perturb_io
from .dialogue import (
    AgreementReport,
    DialogueConfig,
    DialogueData,
    TurnRecord,
    agreement_level,
    gaussian_kl,
    listener_loss,
    run_turn,
    train_dialogue,
    train_separate,
)
from .dataio import (
    SeriesPair,
    SyntheticSpec,
    WindowSet,
    generate_synthetic,
    load_csv,
    make_windows,
    save_csv,
)
from .regimes import PatternLibrary, Profile, build_library, profile_distance
from .rng import Rng, gaussian_sample
from .strategy import BacktestResult, backtest, pair_sweep, position
from .translator import CodePairSet, Translator, collect_pairs, fit_translator, translate

__version__ = "0.1.0"

__all__ = [
    "AeConfig",
    "AgreementReport",
    "BacktestResult",
    "CodePairSet",
    "CodeSample",
    "ConvAutoencoder",
    "DialogueConfig",
    "DialogueData",
    "PatternLibrary",
    "Profile",
    "Rng",
    "SeriesPair",
    "SyntheticSpec",
    "Translator",
    "TurnRecord",
    "WindowSet",
    "agreement_level",
    "backtest",
    "build_library",
    "collect_pairs",
    "fit_translator",
    "gaussian_kl",
    "gaussian_sample",
    "generate_synthetic",
    "listener_loss",
    "load_csv",
    "make_windows",
    "pair_sweep",
    "perturb_io",
    "position",
    "profile_distance",
    "run_turn",
    "save_csv",
    "train_dialogue",
    "train_separate",
    "translate",
]
