"""Alternating speak/listen training of two heterogeneous autoencoders.

Protocol per run: both networks first pretrain independently for a few
epochs, then the code dictionaries are fitted and the models take turns.
In each dialogue epoch one side speaks (frozen) and the other listens:
the listener minimizes its reconstruction error plus a penalty pulling
its code mean toward the translated utterance.  Dictionaries are refitted
from scratch-collected mean codes after every epoch, so a listener is
never pulled toward a stale map of its own drifting latent space.

Randomness is budgeted per (network, pass) so that a dialogue run with
the coupling weight at zero consumes exactly the same draws as separate
training and produces bit-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import ConvAutoencoder
from .errors import ConfigError, DataError, ProtocolError, ShapeError
from .rng import Rng
from .translator import CodePairSet, Translator, collect_pairs, fit_translator, translate


@dataclass(frozen=True)
class DialogueConfig:
    epochs: int = 150            # total epochs, pretraining included
    pretrain_epochs: int = 5
    batches: int = 10            # fixed contiguous mini-batches per epoch
    lam: float = 1.0             # weight of the code-alignment term
    turn_length: int = 1         # epochs per speaking turn before roles swap
    refresh_dicts: bool = True   # refit both dictionaries after every epoch
    align_on_mean: bool = False  # translate mu instead of sampled z
    agreement_threshold: float = 0.5
    dict_epochs: int = 10
    dict_lr: float = 0.1
    checkpoint_every: int = 0    # epochs between snapshots (0: none); CLI-level
    seed: int = 0

    @property
    def dialogue_epochs(self) -> int:
        return self.epochs - self.pretrain_epochs

    def validate(self, path: str = "dialogue") -> None:
        if self.pretrain_epochs < 0:
            raise ConfigError(f"{path}.pretrain_epochs must be >= 0, got {self.pretrain_epochs}")
        if self.epochs < self.pretrain_epochs:
            raise ConfigError(
                f"{path}.epochs counts all epochs and must be >= pretrain_epochs, "
                f"got {self.epochs} < {self.pretrain_epochs}")
        if self.batches < 1:
            raise ConfigError(f"{path}.batches must be >= 1, got {self.batches}")
        if self.lam < 0:
            raise ConfigError(f"{path}.lam must be >= 0, got {self.lam}")
        if self.turn_length < 1:
            raise ConfigError(f"{path}.turn_length must be >= 1, got {self.turn_length}")
        if not 0.0 < self.agreement_threshold < 1.0:
            raise ConfigError(
                f"{path}.agreement_threshold must lie in (0, 1), got {self.agreement_threshold}"
            )


@dataclass
class DialogueData:
    """Training windows for each side, aligned by sample index."""

    windows1: np.ndarray
    windows2: np.ndarray

    def __post_init__(self):
        self.windows1 = np.asarray(self.windows1, dtype=np.float64)
        self.windows2 = np.asarray(self.windows2, dtype=np.float64)
        if self.windows1.ndim != 3 or self.windows2.ndim != 3:
            raise ShapeError("dialogue data must be (samples, window, channels)")
        if len(self.windows1) != len(self.windows2):
            raise DataError("the two views must hold the same number of samples")
        if len(self.windows1) == 0:
            raise DataError("dialogue data is empty")

    @classmethod
    def shared(cls, windows: np.ndarray) -> "DialogueData":
        """Both networks read the same window set."""
        return cls(windows1=windows, windows2=windows)

    def view(self, ae_id: int) -> np.ndarray:
        return self.windows1 if ae_id == 1 else self.windows2

    def __len__(self) -> int:
        return len(self.windows1)


@dataclass
class TurnRecord:
    """One mini-batch of training.  speaker=0 marks a solo (no-speaker) pass."""

    phase: str      # "pretrain", "dialogue" or "separate"
    epoch: int
    batch: int
    speaker: int
    listener: int
    recon_loss: float
    align_loss: float
    lam: float

    @property
    def total_loss(self) -> float:
        return self.recon_loss + self.lam * self.align_loss


@dataclass
class AgreementReport:
    """Fraction of samples whose quantized code pairing is consistent.

    Codes are binarized at a threshold; a sample agrees when its
    (pattern1, pattern2) pairing occurs at least twice, pattern1 maps to a
    unique majority pattern2 across the dataset, and this sample's pattern2
    is that majority.
    """

    level: float
    threshold: float
    n_samples: int
    table: dict = field(default_factory=dict, repr=False)  # (bits1, bits2) -> count


def gaussian_kl(mu_q, cov_q, mu_p, cov_p) -> float:
    """KL(q || p) between two multivariate normals.

    Covariances may be 1-d (diagonal) or 2-d (full); mixing the two forms
    is allowed.  Non positive-definite covariances are rejected.
    """
    mu_q = np.asarray(mu_q, dtype=np.float64).ravel()
    mu_p = np.asarray(mu_p, dtype=np.float64).ravel()
    if mu_q.size != mu_p.size:
        raise ShapeError(f"mean dimensions differ: {mu_q.size} vs {mu_p.size}")
    d = mu_q.size
    cov_q = np.asarray(cov_q, dtype=np.float64)
    cov_p = np.asarray(cov_p, dtype=np.float64)
    delta = mu_p - mu_q

    if cov_q.ndim <= 1 and cov_p.ndim <= 1:
        vq = np.broadcast_to(np.atleast_1d(cov_q), (d,))
        vp = np.broadcast_to(np.atleast_1d(cov_p), (d,))
        if np.any(vq <= 0) or np.any(vp <= 0):
            raise ValueError("diagonal covariance entries must be positive")
        logdet = float(np.sum(np.log(vp)) - np.sum(np.log(vq)))
        quad = float(np.sum(delta * delta / vp))
        trace = float(np.sum(vq / vp))
        return 0.5 * (logdet - d + quad + trace)

    def as_full(cov):
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim <= 1:
            return np.diag(np.broadcast_to(np.atleast_1d(cov), (d,)).copy())
        if cov.shape != (d, d):
            raise ShapeError(f"covariance shape {cov.shape} does not match dim {d}")
        return cov

    sq = as_full(cov_q)
    sp = as_full(cov_p)
    try:
        lq = np.linalg.cholesky(sq)
        lp = np.linalg.cholesky(sp)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(lp))) - np.sum(np.log(np.diag(lq))))
    sol = np.linalg.solve(lp, delta)
    quad = float(sol @ sol)
    trace = float(np.trace(np.linalg.solve(sp, sq)))
    return 0.5 * (logdet - d + quad + trace)


def listener_loss(x: np.ndarray, x_rec: np.ndarray, mu_q: np.ndarray,
                  mu_p: np.ndarray, lam: float) -> float:
    """Reconstruction error plus weighted squared code misalignment.

    Per sample: sum of squared errors over the window plus
    lam * squared distance between the listener's code mean and the
    translated utterance; averaged over the batch.
    """
    x = np.asarray(x, dtype=np.float64)
    x_rec = np.asarray(x_rec, dtype=np.float64)
    mu_q = np.asarray(mu_q, dtype=np.float64)
    mu_p = np.asarray(mu_p, dtype=np.float64)
    if x.shape != x_rec.shape:
        raise ShapeError(f"input/reconstruction shapes differ: {x.shape} vs {x_rec.shape}")
    if mu_q.shape != mu_p.shape:
        raise ShapeError(f"code shapes differ: {mu_q.shape} vs {mu_p.shape}")
    batched = x.ndim == 3
    n = len(x) if batched else 1
    diff = x - x_rec
    dmu = mu_q - mu_p
    return float((np.sum(diff * diff) + lam * np.sum(dmu * dmu)) / n)


def run_turn(speaker: ConvAutoencoder, listener: ConvAutoencoder,
             dictionary: Translator, batch_speaker: np.ndarray,
             batch_listener: np.ndarray, *, epoch: int, batch_index: int,
             speaker_id: int, listener_id: int, rng_speak: Rng, rng_listen: Rng,
             lam: float, require_fresh: bool = True,
             align_on_mean: bool = False) -> TurnRecord:
    """One mini-batch exchange: speaker utters, listener updates.

    Only the listener's parameters change; the speaker and the dictionary
    are read-only here.  By default the dictionary must carry the previous
    epoch's stamp, catching protocols that forgot to refresh it.
    """
    if speaker_id == listener_id:
        raise ProtocolError("speaker and listener must be different networks")
    if require_fresh and dictionary.stamp != epoch - 1:
        raise ProtocolError(
            f"dictionary {dictionary.direction} was fitted at epoch "
            f"{dictionary.stamp}, expected {epoch - 1}; refit before speaking"
        )
    mu_s = speaker.encode(batch_speaker)
    if align_on_mean:
        utterance = mu_s
    else:
        utterance = speaker.sample_code(mu_s, rng_speak).z
    mu_prior = translate(dictionary, utterance)
    recon, align = listener.train_step(
        batch_listener, rng_listen, lam=lam, mu_prior=mu_prior,
        context=f"epoch {epoch} batch {batch_index} listener {listener_id}",
    )
    return TurnRecord(phase="dialogue", epoch=epoch, batch=batch_index,
                      speaker=speaker_id, listener=listener_id,
                      recon_loss=recon, align_loss=align, lam=lam)


def agreement_level(pairs: CodePairSet, threshold: float = 0.5) -> AgreementReport:
    """Quantize both code sets and measure pairing consistency."""
    if len(pairs) == 0:
        raise DataError("cannot measure agreement on an empty pair set")
    bits1 = ["".join("1" if v > threshold else "0" for v in row) for row in pairs.z1]
    bits2 = ["".join("1" if v > threshold else "0" for v in row) for row in pairs.z2]

    pair_counts: dict = {}
    partner_counts: dict = {}
    for b1, b2 in zip(bits1, bits2):
        pair_counts[(b1, b2)] = pair_counts.get((b1, b2), 0) + 1
        partner_counts.setdefault(b1, {})
        partner_counts[b1][b2] = partner_counts[b1].get(b2, 0) + 1

    majority: dict = {}
    for b1, counts in partner_counts.items():
        best = max(counts.values())
        winners = [b2 for b2, c in counts.items() if c == best]
        majority[b1] = winners[0] if len(winners) == 1 else None

    agreed = 0
    for b1, b2 in zip(bits1, bits2):
        if pair_counts[(b1, b2)] >= 2 and majority[b1] == b2:
            agreed += 1
    return AgreementReport(level=agreed / len(pairs), threshold=threshold,
                           n_samples=len(pairs), table=dict(pair_counts))


@dataclass
class DialogueResult:
    ae1: ConvAutoencoder
    ae2: ConvAutoencoder
    dict_1to2: Translator
    dict_2to1: Translator
    pretrain: list
    turns: list
    agreement: list       # AgreementReport per epoch, pretraining included
    config: DialogueConfig

    @property
    def records(self) -> list:
        return self.pretrain + self.turns


def _contiguous_batches(n: int, batches: int) -> list:
    """Fixed contiguous partition; no shuffling, so runs are replayable."""
    batches = min(batches, n)
    sizes = np.full(batches, n // batches)
    sizes[: n % batches] += 1
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _solo_epoch(ae: ConvAutoencoder, ae_id: int, windows: np.ndarray,
                slices: list, rng_pass: Rng, epoch: int, phase: str) -> list:
    records = []
    for b, sl in enumerate(slices):
        recon, _ = ae.train_step(windows[sl], rng_pass,
                                 context=f"{phase} epoch {epoch} batch {b} ae {ae_id}")
        records.append(TurnRecord(phase=phase, epoch=epoch, batch=b, speaker=0,
                                  listener=ae_id, recon_loss=recon,
                                  align_loss=0.0, lam=0.0))
    return records


def train_separate(ae: ConvAutoencoder, ae_id: int, windows: np.ndarray,
                   epochs: int, batches: int, root: Rng,
                   start_pass: int = 0) -> list:
    """Plain reconstruction training, one network alone.

    Consumes the same per-pass random streams as the dialogue schedule, so
    a dialogue run with lam=0 reproduces this bit for bit.
    """
    windows = np.asarray(windows, dtype=np.float64)
    slices = _contiguous_batches(len(windows), batches)
    records = []
    for e in range(epochs):
        rng_pass = root.split("ae", ae_id, "train", start_pass + e)
        records.extend(_solo_epoch(ae, ae_id, windows, slices, rng_pass, e, "separate"))
    return records


def train_dialogue(ae1: ConvAutoencoder, ae2: ConvAutoencoder,
                   data: DialogueData, config: DialogueConfig,
                   on_epoch=None) -> DialogueResult:
    """Run the full protocol: pretrain, fit dictionaries, alternate turns.

    Network 1 speaks first.  Roles swap every ``turn_length`` epochs and
    both dictionaries are refitted after every epoch from the complete,
    current set of mean-code pairs.  ``on_epoch(epoch, result)`` is called
    after each epoch with a snapshot of the running state (used for
    periodic checkpointing).
    """
    config.validate()
    if ae1.config.window != data.windows1.shape[1]:
        raise ShapeError("network 1 window length does not match its data")
    if ae2.config.window != data.windows2.shape[1]:
        raise ShapeError("network 2 window length does not match its data")

    root = Rng(config.seed)
    slices = _contiguous_batches(len(data), config.batches)
    pass_count = {1: 0, 2: 0}
    pretrain_records: list = []
    turns: list = []
    agreement: list = []
    dicts: dict = {"1to2": None, "2to1": None}

    def next_pass_rng(ae_id: int) -> Rng:
        rng = root.split("ae", ae_id, "train", pass_count[ae_id])
        pass_count[ae_id] += 1
        return rng

    def refit(epoch: int) -> None:
        pairs = collect_pairs(ae1, ae2, data.windows1, data.windows2)
        for direction in ("1to2", "2to1"):
            prev = dicts[direction]
            rng = None if prev is not None else root.split("dict", direction)
            dicts[direction] = fit_translator(
                pairs, direction, rng=rng, prev=prev, stamp=epoch,
                lr=config.dict_lr, epochs=config.dict_epochs,
                batches=config.batches)
        agreement.append(agreement_level(pairs, config.agreement_threshold))

    for e in range(config.pretrain_epochs):
        for ae_id, ae in ((1, ae1), (2, ae2)):
            rng_pass = next_pass_rng(ae_id)
            pretrain_records.extend(_solo_epoch(
                ae, ae_id, data.view(ae_id), slices, rng_pass, e, "pretrain"))

    refit(config.pretrain_epochs - 1)

    result = DialogueResult(ae1=ae1, ae2=ae2, dict_1to2=dicts["1to2"],
                            dict_2to1=dicts["2to1"], pretrain=pretrain_records,
                            turns=turns, agreement=agreement, config=config)

    for k in range(config.dialogue_epochs):
        epoch = config.pretrain_epochs + k
        turn = k // config.turn_length
        speaker_id = 1 if turn % 2 == 0 else 2
        listener_id = 2 if speaker_id == 1 else 1
        speaker = ae1 if speaker_id == 1 else ae2
        listener = ae2 if speaker_id == 1 else ae1
        dictionary = dicts["1to2"] if speaker_id == 1 else dicts["2to1"]
        rng_speak = root.split("ae", speaker_id, "speak", epoch)
        rng_listen = next_pass_rng(listener_id)
        for b, sl in enumerate(slices):
            turns.append(run_turn(
                speaker, listener, dictionary,
                data.view(speaker_id)[sl], data.view(listener_id)[sl],
                epoch=epoch, batch_index=b, speaker_id=speaker_id,
                listener_id=listener_id, rng_speak=rng_speak,
                rng_listen=rng_listen, lam=config.lam,
                require_fresh=config.refresh_dicts,
                align_on_mean=config.align_on_mean))
        if config.refresh_dicts or k == config.dialogue_epochs - 1:
            refit(epoch)
            result.dict_1to2 = dicts["1to2"]
            result.dict_2to1 = dicts["2to1"]
        if on_epoch is not None:
            on_epoch(epoch, result)

    return result
