"""Pattern libraries: clustered context profiles conditioned on target sign.

After dialogue training the networks act as denoisers.  Each training
window is pushed through one autoencoder; the sign of the reconstructed
target at the window's last step (in raw units) decides whether the
trailing context profile joins the "up" or the "down" pool, and each pool
is summarized by a small set of k-means centroids.  Distances to these
centroids later drive position sizing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, DataError, ShapeError
from .rng import Rng

SCHEMA_VERSION = 1


def kmeans(points: np.ndarray, k: int, rng: Rng, max_iter: int = 100,
           tol: float = 1e-8):
    """Deterministic Lloyd's algorithm with distance-weighted seeding.

    Returns (centroids, labels, inertia_path).  An emptied cluster is
    re-seeded on the point currently farthest from its own centroid, which
    never increases the total within-cluster sum of squares.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError("kmeans expects a 2-d (samples, features) array")
    n = len(points)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if n < k:
        raise DataError(f"cannot form {k} clusters from {n} samples")

    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[int(rng.integers(0, n))]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(np.sum(closest))
        if total <= 0.0:
            # all remaining points coincide with a chosen centroid
            centroids[j] = points[int(rng.integers(0, n))]
            continue
        pick = int(rng.choice(n, 1, p=closest / total)[0])
        centroids[j] = points[pick]
        closest = np.minimum(closest, np.sum((points - centroids[j]) ** 2, axis=1))

    inertia_path = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        for j in range(k):
            members = points[labels == j]
            if len(members) > 0:
                centroids[j] = members.mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(n), labels]))
                centroids[j] = points[far]
                labels[far] = j
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        inertia = float(np.sum(d2[np.arange(n), labels]))
        if inertia_path and inertia_path[-1] - inertia < tol:
            inertia_path.append(inertia)
            break
        inertia_path.append(inertia)
    return centroids, labels, inertia_path


@dataclass
class Profile:
    """One centroid: a normalized context shape of length P."""

    values: np.ndarray
    label: str               # "up" or "down"
    cluster_id: int
    members: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError("profile values must be 1-d")
        if self.label not in ("up", "down"):
            raise ValueError(f"profile label must be 'up' or 'down', got {self.label!r}")


@dataclass
class PatternLibrary:
    """Sign-conditioned centroid sets plus the stats needed to apply them."""

    up: list
    down: list
    profile_len: int
    y_mean: float
    y_std: float
    x_mean: float
    x_std: float
    context_name: str = "x"
    horizon: int = 0
    n_up: int = 0
    n_down: int = 0

    def normalize_context(self, x_raw: np.ndarray) -> np.ndarray:
        return (np.asarray(x_raw, dtype=np.float64) - self.x_mean) / self.x_std

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "profile_len": self.profile_len,
            "y_mean": self.y_mean, "y_std": self.y_std,
            "x_mean": self.x_mean, "x_std": self.x_std,
            "context_name": self.context_name,
            "horizon": self.horizon,
            "n_up": self.n_up, "n_down": self.n_down,
            "up": [{"values": list(p.values), "cluster_id": p.cluster_id,
                    "members": p.members} for p in self.up],
            "down": [{"values": list(p.values), "cluster_id": p.cluster_id,
                      "members": p.members} for p in self.down],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text: str) -> "PatternLibrary":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"pattern library is not valid JSON: {exc}") from None
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise CheckpointError(
                f"unsupported pattern library schema {version!r}, expected {SCHEMA_VERSION}")
        try:
            def profiles(label):
                return [Profile(values=np.asarray(d["values"], dtype=np.float64),
                                label=label, cluster_id=int(d["cluster_id"]),
                                members=int(d["members"]))
                        for d in payload[label]]
            lib = cls(up=profiles("up"), down=profiles("down"),
                      profile_len=int(payload["profile_len"]),
                      y_mean=float(payload["y_mean"]), y_std=float(payload["y_std"]),
                      x_mean=float(payload["x_mean"]), x_std=float(payload["x_std"]),
                      context_name=str(payload["context_name"]),
                      horizon=int(payload["horizon"]),
                      n_up=int(payload["n_up"]), n_down=int(payload["n_down"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"pattern library is missing fields: {exc}") from None
        for p in lib.up + lib.down:
            if len(p.values) != lib.profile_len:
                raise CheckpointError("profile length does not match profile_len")
        return lib

    @classmethod
    def load(cls, path) -> "PatternLibrary":
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_library(recon_windows: np.ndarray, k: int, profile_len: int,
                  rng: Rng, y_mean: float, y_std: float, x_mean: float,
                  x_std: float, context_name: str = "x",
                  horizon: int = 0) -> PatternLibrary:
    """Cluster denoised context tails, split by reconstructed target sign.

    ``recon_windows`` are normalized reconstructions shaped (N, W, 2) with
    the target in channel 0 and the context in channel 1.  The sign is
    taken after denormalizing the last target step back to raw units;
    exact zeros belong to neither class.
    """
    recon_windows = np.asarray(recon_windows, dtype=np.float64)
    if recon_windows.ndim != 3 or recon_windows.shape[2] != 2:
        raise ShapeError("reconstructed windows must be (samples, window, 2)")
    W = recon_windows.shape[1]
    if not 1 <= profile_len <= W:
        raise ConfigError(f"profile_len must lie in [1, {W}], got {profile_len}")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")

    y_last = recon_windows[:, -1, 0] * y_std + y_mean
    tails = recon_windows[:, W - profile_len:, 1]
    up_mask = y_last > 0.0
    down_mask = y_last < 0.0
    n_up, n_down = int(np.sum(up_mask)), int(np.sum(down_mask))
    for label, count in (("up", n_up), ("down", n_down)):
        if count < k:
            raise DataError(
                f"only {count} windows reconstruct as {label}; cannot form {k} "
                f"clusters (reduce k or train longer)")

    def cluster(mask, label, sub_rng):
        centroids, labels, _ = kmeans(tails[mask], k, sub_rng)
        counts = np.bincount(labels, minlength=k)
        return [Profile(values=centroids[j], label=label, cluster_id=j,
                        members=int(counts[j])) for j in range(k)]

    return PatternLibrary(
        up=cluster(up_mask, "up", rng.split("up")),
        down=cluster(down_mask, "down", rng.split("down")),
        profile_len=profile_len, y_mean=y_mean, y_std=y_std,
        x_mean=x_mean, x_std=x_std, context_name=context_name,
        horizon=horizon, n_up=n_up, n_down=n_down)


def profile_distance(x_window: np.ndarray, profile: Profile) -> float:
    """Mean squared pointwise gap between a normalized window and a centroid."""
    x_window = np.asarray(x_window, dtype=np.float64)
    if x_window.shape != profile.values.shape:
        raise ShapeError(
            f"window length {x_window.shape} does not match profile "
            f"length {profile.values.shape}")
    diff = x_window - profile.values
    return float(np.mean(diff * diff))
