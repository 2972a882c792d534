"""Series loading, synthetic regime data and window preparation.

Everything downstream works on aligned (target, context) series: y[t] is
the forward return realized over the next h steps, x[t] is a context
variable observed at t.  Windows stack the last W observations of both
channels, z-scored with statistics estimated on the training segment
only.  Held-out windows start at least h steps after the split so no
training target leaks into evaluation.
"""

from __future__ import annotations

import csv as _csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, DataError, ShapeError
from .rng import Rng


@dataclass
class SeriesPair:
    """Aligned target/context series on a common date axis."""

    dates: np.ndarray         # datetime64[D]
    y: np.ndarray             # forward h-step target return at t
    x: np.ndarray             # context observation at t
    context_name: str = "x"
    horizon: int = 0

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.y = np.asarray(self.y, dtype=np.float64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if not (len(self.dates) == len(self.y) == len(self.x)):
            raise ShapeError("dates, target and context must have equal length")
        if len(self.y) == 0:
            raise DataError("series is empty")
        for name, arr in (("target", self.y), ("context", self.x)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} series contains non-finite values")

    def __len__(self) -> int:
        return len(self.y)

    def slice(self, a: int, b: int) -> "SeriesPair":
        return SeriesPair(dates=self.dates[a:b], y=self.y[a:b], x=self.x[a:b],
                          context_name=self.context_name, horizon=self.horizon)

    def with_context(self, x: np.ndarray, name: str) -> "SeriesPair":
        """Same target and dates, different context column."""
        return SeriesPair(dates=self.dates, y=self.y, x=x,
                          context_name=name, horizon=self.horizon)


def _default_templates(regimes: int, length: int) -> np.ndarray:
    """Smooth, mutually distinct base shapes: sines of distinct frequency."""
    t = np.arange(length) / length
    rows = [np.sin(2.0 * np.pi * (r + 1) * t + 0.5 * np.pi * r) for r in range(regimes)]
    return np.asarray(rows, dtype=np.float64)


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-regime generator settings.

    The context cycles through per-regime templates plus observation noise
    scaled relative to the template RMS.  The target is Gaussian around a
    per-regime drift whose scale is solved so that the sign of y matches
    the regime's drift sign with probability (1 + rho) / 2, i.e. the
    sign/regime correlation equals rho exactly.
    """

    length: int = 2000
    regimes: int = 2
    template_len: int = 24
    templates: tuple = None        # optional (regimes, template_len) values
    drift_signs: tuple = None      # +1 / -1 per regime; default alternates
    dwell_min: int = 24
    dwell_max: int = 48
    noise_rel: float = 0.5
    rho: float = 0.6
    horizon: int = 4
    y_drift: float = 0.01
    start_date: str = "1990-01-05"
    seed: int = 0

    def validate(self, path: str = "synthetic") -> None:
        if self.regimes < 2:
            raise ConfigError(f"{path}.regimes must be >= 2, got {self.regimes}")
        if self.template_len < 2:
            raise ConfigError(f"{path}.template_len must be >= 2, got {self.template_len}")
        if self.length <= self.template_len + self.horizon:
            raise ConfigError(f"{path}.length is too short for the template and horizon")
        if not 0 < self.dwell_min <= self.dwell_max:
            raise ConfigError(f"{path}: need 0 < dwell_min <= dwell_max")
        if self.noise_rel < 0:
            raise ConfigError(f"{path}.noise_rel must be >= 0, got {self.noise_rel}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"{path}.rho must lie in [0, 1], got {self.rho}")
        if self.horizon < 0:
            raise ConfigError(f"{path}.horizon must be >= 0, got {self.horizon}")
        if self.y_drift <= 0:
            raise ConfigError(f"{path}.y_drift must be > 0, got {self.y_drift}")
        if self.templates is not None:
            arr = np.asarray(self.templates, dtype=np.float64)
            if arr.shape != (self.regimes, self.template_len):
                raise ConfigError(
                    f"{path}.templates must have shape ({self.regimes}, {self.template_len})")
            for i in range(self.regimes):
                for j in range(i + 1, self.regimes):
                    gap = math.sqrt(float(np.mean((arr[i] - arr[j]) ** 2)))
                    if gap < 0.1:
                        raise ConfigError(
                            f"{path}.templates {i} and {j} are nearly identical "
                            f"(rms gap {gap:.4g} < 0.1)")
        if self.drift_signs is not None:
            if len(self.drift_signs) != self.regimes:
                raise ConfigError(f"{path}.drift_signs must list one sign per regime")
            if any(s not in (-1, 1) for s in self.drift_signs):
                raise ConfigError(f"{path}.drift_signs entries must be +1 or -1")


@dataclass
class SyntheticData:
    """Generator output: observed series plus the planted ground truth."""

    pair: SeriesPair               # first noisy view
    views: list                    # independently noised context views
    noise: list                    # pure-noise decoy contexts (no regime info)
    regime: np.ndarray             # regime label at t (aligned with pair)
    drift: np.ndarray              # drift sign at t
    clean_x: np.ndarray            # noiseless context at t
    dates_full: np.ndarray         # raw axis, length = spec.length
    returns_full: np.ndarray       # unshifted per-step returns on the raw axis
    x_full: dict                   # column name -> raw-axis context values
    spec: SyntheticSpec


def generate_synthetic(spec: SyntheticSpec, n_views: int = 1,
                       noise_contexts: int = 0) -> SyntheticData:
    """Sample one realization of the planted-regime world."""
    spec.validate()
    rng = Rng(spec.seed).split("synthetic")
    L, h = spec.length, spec.horizon
    P = spec.template_len

    templates = (np.asarray(spec.templates, dtype=np.float64)
                 if spec.templates is not None
                 else _default_templates(spec.regimes, P))
    signs = (np.asarray(spec.drift_signs, dtype=np.float64)
             if spec.drift_signs is not None
             else np.asarray([1.0 if r % 2 == 0 else -1.0 for r in range(spec.regimes)]))
    template_rms = math.sqrt(float(np.mean(templates * templates)))

    # Regime path: uniform dwell lengths, never the same regime twice in a row.
    labels = np.empty(L, dtype=np.int64)
    phase = np.empty(L, dtype=np.int64)
    rng_path = rng.split("path")
    t = 0
    current = int(rng_path.integers(0, spec.regimes))
    while t < L:
        dwell = int(rng_path.integers(spec.dwell_min, spec.dwell_max + 1))
        end = min(t + dwell, L)
        labels[t:end] = current
        phase[t:end] = np.arange(end - t)
        t = end
        step = int(rng_path.integers(1, spec.regimes))
        current = (current + step) % spec.regimes

    clean_x = templates[labels, phase % P]
    drift = signs[labels]

    # Target: r[t] = drift[t - h] * y_drift + sigma_y * eps, so the forward
    # return y[t] = r[t + h] is driven by the regime active at t.
    if spec.rho >= 1.0:
        sigma_y = 0.0
    elif spec.rho <= 0.0:
        sigma_y = spec.y_drift   # no planted drift below; pure noise
    else:
        sigma_y = spec.y_drift / float(norm.ppf(0.5 * (1.0 + spec.rho)))
    returns = sigma_y * rng.split("target").normal(L)
    if spec.rho > 0.0:
        returns[h:] += drift[: L - h] * spec.y_drift

    dates = np.datetime64(spec.start_date, "D") + 7 * np.arange(L)
    n = L - h
    sigma_x = spec.noise_rel * template_rms

    views = []
    x_full: dict = {}
    for v in range(n_views):
        xv = clean_x + sigma_x * rng.split("view", v).normal(L)
        name = "x" if n_views == 1 else f"x{v + 1}"
        x_full[name] = xv
        views.append(SeriesPair(dates=dates[:n], y=returns[h:], x=xv[:n],
                                context_name=name, horizon=h))
    noise = []
    for j in range(noise_contexts):
        xn = template_rms * rng.split("decoy", j).normal(L)
        name = f"noise{j + 1}"
        x_full[name] = xn
        noise.append(SeriesPair(dates=dates[:n], y=returns[h:], x=xn[:n],
                                context_name=name, horizon=h))

    return SyntheticData(pair=views[0], views=views, noise=noise,
                         regime=labels[:n], drift=drift[:n], clean_x=clean_x[:n],
                         dates_full=dates, returns_full=returns, x_full=x_full,
                         spec=spec)


def save_csv(path, dates: np.ndarray, columns: dict) -> None:
    """Write a date-indexed CSV with repr-exact float columns."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=np.float64) for k in names]
    for name, arr in zip(names, arrays):
        if len(arr) != len(dates):
            raise ShapeError(f"column {name!r} length {len(arr)} != {len(dates)} dates")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["date"] + names) + "\n")
        for i in range(len(dates)):
            row = [str(dates[i])] + [repr(float(a[i])) for a in arrays]
            fh.write(",".join(row) + "\n")


def load_csv(path, target: str, context: str, horizon: int,
             target_kind: str = "return", min_rows: int | None = None) -> SeriesPair:
    """Read a date-indexed CSV and align a forward target with a context.

    target_kind "price": y[t] = p[t+h] / p[t] - 1, the h-step return
    (h must be >= 1).  target_kind "return": the target column already
    holds per-step returns and y[t] = r[t+h]; h = 0 is the unshifted
    passthrough.  Either way the result has N - h rows.
    """
    if target_kind not in ("price", "return"):
        raise ConfigError(f"target_kind must be 'price' or 'return', got {target_kind!r}")
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    if target_kind == "price" and horizon < 1:
        raise ConfigError("price targets need horizon >= 1 to form a forward return")

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [hcol.strip() for hcol in header]
        for col in ("date", target, context):
            if col not in header:
                raise DataError(f"{path}: missing required column {col!r}")
        idx_d, idx_t, idx_c = header.index("date"), header.index(target), header.index(context)

        rows = []   # (lineno, date or None, target or None, context or None)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")

            def cell(idx, what):
                text = row[idx].strip()
                if not text:
                    return None
                try:
                    if what == "date":
                        return np.datetime64(text, "D")
                    return float(text)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: unparseable {what} {text!r}") from None

            rows.append((lineno, cell(idx_d, "date"),
                         cell(idx_t, "number"), cell(idx_c, "number")))

    # Leading/trailing rows with gaps are dropped; interior gaps are errors.
    complete = [all(v is not None for v in r[1:]) for r in rows]
    lo, hi = 0, len(rows)
    while lo < hi and not complete[lo]:
        lo += 1
    while hi > lo and not complete[hi - 1]:
        hi -= 1
    rows = rows[lo:hi]
    for r, ok in zip(rows, complete[lo:hi]):
        if not ok:
            raise DataError(f"{path}:{r[0]}: missing value inside the series")

    dates = [r[1] for r in rows]
    tvals = [r[2] for r in rows]
    cvals = [r[3] for r in rows]
    n_raw = len(dates)
    need = max(min_rows or 0, horizon + 1)
    if n_raw < need:
        raise DataError(f"{path}: only {n_raw} usable rows, need at least {need}")

    dates = np.asarray(dates, dtype="datetime64[D]")
    tv = np.asarray(tvals, dtype=np.float64)
    cv = np.asarray(cvals, dtype=np.float64)
    if target_kind == "price":
        if np.any(tv <= 0):
            raise DataError(f"{path}: price column {target!r} must be strictly positive")
        y = tv[horizon:] / tv[:n_raw - horizon] - 1.0
    else:
        y = tv[horizon:] if horizon > 0 else tv
    n = n_raw - horizon
    return SeriesPair(dates=dates[:n], y=y, x=cv[:n],
                      context_name=context, horizon=horizon)


@dataclass
class WindowSet:
    """Normalized training and held-out windows from one series pair.

    Channel 0 is the target, channel 1 the context, both z-scored with
    training-segment statistics.  ``ends`` hold the index of each
    window's last observation in the source series.
    """

    train: np.ndarray
    held: np.ndarray
    train_ends: np.ndarray
    held_ends: np.ndarray
    window: int
    stride: int
    split_index: int          # first index of the held-out segment
    horizon: int
    y_mean: float
    y_std: float
    x_mean: float
    x_std: float

    def stats(self) -> dict:
        return {"y_mean": self.y_mean, "y_std": self.y_std,
                "x_mean": self.x_mean, "x_std": self.x_std}

    def denormalize_y(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.y_std + self.y_mean


def make_windows(pair: SeriesPair, window: int, stride: int = 1,
                 split: float = 0.8) -> WindowSet:
    """Cut z-scored rolling windows, leaving a leakage gap at the split.

    Training windows end strictly before the split; held-out windows start
    at or after split_index + horizon, so a training target (which peeks
    h steps ahead) never overlaps held-out inputs and vice versa.
    """
    if window < 2:
        raise ConfigError(f"window must be >= 2, got {window}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if not 0.0 < split < 1.0:
        raise ConfigError(f"split must lie in (0, 1), got {split}")
    n = len(pair)
    if n < window:
        raise DataError(f"series has {n} samples, shorter than one window ({window})")
    n_train = int(math.floor(split * n))
    if n_train < window:
        raise DataError(f"training segment ({n_train}) is shorter than one window")

    y_mean = float(np.mean(pair.y[:n_train]))
    y_std = float(np.std(pair.y[:n_train]))
    x_mean = float(np.mean(pair.x[:n_train]))
    x_std = float(np.std(pair.x[:n_train]))
    if y_std == 0.0 or x_std == 0.0:
        which = "target" if y_std == 0.0 else "context"
        raise DataError(f"{which} column is constant on the training segment; "
                        "cannot z-score")

    yz = (pair.y - y_mean) / y_std
    xz = (pair.x - x_mean) / x_std
    stack = np.stack([yz, xz], axis=1)          # (n, 2)

    starts = np.arange(0, n - window + 1, stride)
    ends = starts + window - 1
    train_mask = ends < n_train
    held_mask = starts >= n_train + pair.horizon
    train_starts = starts[train_mask]
    held_starts = starts[held_mask]

    def cut(ss):
        if len(ss) == 0:
            return np.zeros((0, window, 2), dtype=np.float64)
        return np.stack([stack[s:s + window] for s in ss])

    return WindowSet(train=cut(train_starts), held=cut(held_starts),
                     train_ends=ends[train_mask], held_ends=ends[held_mask],
                     window=window, stride=stride, split_index=n_train,
                     horizon=pair.horizon, y_mean=y_mean, y_std=y_std,
                     x_mean=x_mean, x_std=x_std)
