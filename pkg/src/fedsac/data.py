"""Datasets, heterogeneity partitioners and file loaders.

All randomness goes through ``numpy.random.Generator`` over PCG64, seeded
explicitly, so that a given ``(dataset, N, seed)`` produces the same shards
on every platform.
"""

from __future__ import annotations

import csv
import gzip
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInput

TEST_FRACTION = 0.2

# Geometry of the synthetic generator is fixed; the caller's seed only drives sampling.
_GEOMETRY_SEED = 20240214

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def make_rng(*seed) -> np.random.Generator:
    """PCG64 generator seeded from one or more non-negative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(s) for s in seed])))


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise InvalidInput(f"features must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise InvalidInput("labels must be 1-D with one entry per feature row")
        if y.size and (not np.issubdtype(y.dtype, np.integer)):
            if not np.all(y == np.round(y)):
                raise InvalidInput("labels must be integer class ids")
        y = y.astype(np.int64)
        if self.num_classes < 1:
            raise InvalidInput("num_classes must be >= 1")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise InvalidInput(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    train: LabeledDataset
    test: LabeledDataset
    relative_size: float
    # Row indices into the source dataset, kept so partitions can be audited.
    train_index: np.ndarray
    test_index: np.ndarray


@dataclass(frozen=True)
class ShiftSpec:
    """Covariate level rotates/translates class means; concept level permutes labels."""

    covariate_level: float = 0.0
    concept_level: float = 0.0

    def __post_init__(self):
        for name in ("covariate_level", "concept_level"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInput(f"{name} must be in [0, 1], got {v}")


# --------------------------------------------------------------------------
# synthetic generator


def reference_means(num_classes: int, feature_dim: int, class_sep: float) -> np.ndarray:
    """Unshifted class means: seed-independent directions scaled to radius ``class_sep``."""
    rng = make_rng(_GEOMETRY_SEED, num_classes, feature_dim)
    directions = rng.normal(size=(num_classes, feature_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return class_sep * directions


def shift_direction(feature_dim: int) -> np.ndarray:
    rng = make_rng(_GEOMETRY_SEED + 1, feature_dim)
    u = rng.normal(size=feature_dim)
    return u / np.linalg.norm(u)


def rotation(feature_dim: int, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in the plane of the first two coordinates."""
    r = np.eye(feature_dim)
    c, s = math.cos(angle), math.sin(angle)
    r[:2, :2] = [[c, -s], [s, c]]
    return r


def class_means(
    num_classes: int,
    feature_dim: int,
    shift: ShiftSpec,
    class_sep: float = 3.0,
    shift_scale: float = 3.0,
) -> np.ndarray:
    """Class means after covariate shift, one row per (true) class."""
    mu = reference_means(num_classes, feature_dim, class_sep)
    s = shift.covariate_level
    rot = rotation(feature_dim, s * math.pi / 2)
    return mu @ rot.T + s * shift_scale * shift_direction(feature_dim)


def concept_permutation(num_classes: int, concept_level: float) -> np.ndarray:
    """Label map applying a cyclic derangement to the first ``ceil(t*C)`` classes."""
    perm = np.arange(num_classes)
    m = math.ceil(concept_level * num_classes - 1e-12)
    if m == 1:
        # A single class has no derangement; pair it with the next one.
        m = 2
    if m >= 2:
        perm[:m] = np.roll(np.arange(m), -1)
    return perm


def generate_synthetic(
    seed: int,
    num_classes: int,
    feature_dim: int,
    samples_per_class: int,
    shift: ShiftSpec | None = None,
    class_sep: float = 3.0,
    shift_scale: float = 3.0,
    noise: float = 1.0,
) -> LabeledDataset:
    """Isotropic Gaussian clusters, one per class, with optional shift.

    ``covariate_level`` moves p(x) by rotating every class mean by
    ``level * pi/2`` in a fixed 2-plane and translating by
    ``level * shift_scale`` along a fixed unit direction. ``concept_level``
    keeps p(x) and relabels ``ceil(level*C)`` classes by a fixed derangement.
    Rows are ordered by true class.
    """
    if num_classes < 2 or feature_dim < 2:
        raise InvalidInput("need num_classes >= 2 and feature_dim >= 2")
    if samples_per_class < 1:
        raise InvalidInput("samples_per_class must be >= 1")
    if class_sep < 0 or shift_scale < 0 or noise <= 0:
        raise InvalidInput("class_sep and shift_scale must be >= 0, noise > 0")
    shift = shift or ShiftSpec()
    means = class_means(num_classes, feature_dim, shift, class_sep, shift_scale)
    rng = make_rng(seed)
    true = np.repeat(np.arange(num_classes), samples_per_class)
    x = means[true] + noise * rng.normal(size=(true.size, feature_dim))
    y = concept_permutation(num_classes, shift.concept_level)[true]
    return LabeledDataset(x, y, num_classes)


# --------------------------------------------------------------------------
# partitioners


def _split_train_test(labels: np.ndarray, idx: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified 80/20 split of ``idx``; singleton classes go to train."""
    train, test = [], []
    for c in np.unique(labels[idx]):
        members = idx[labels[idx] == c]
        members = members[rng.permutation(members.size)]
        n_test = int(round(TEST_FRACTION * members.size)) if members.size > 1 else 0
        test.append(members[:n_test])
        train.append(members[n_test:])
    train = np.concatenate(train) if train else np.empty(0, dtype=np.int64)
    test = np.concatenate(test) if test else np.empty(0, dtype=np.int64)
    if test.size == 0 and train.size >= 2:
        test, train = train[-1:], train[:-1]
    return np.sort(train), np.sort(test)


def _build_shards(ds: LabeledDataset, assignment: list[np.ndarray], rng) -> list[ClientShard]:
    splits = [_split_train_test(ds.labels, np.asarray(a, dtype=np.int64), rng) for a in assignment]
    total = sum(tr.size for tr, _ in splits)
    if total == 0:
        raise InvalidInput("partition produced no training samples")
    return [
        ClientShard(
            client_id=i,
            train=ds.subset(tr),
            test=ds.subset(te),
            relative_size=tr.size / total,
            train_index=tr,
            test_index=te,
        )
        for i, (tr, te) in enumerate(splits)
    ]


def partition_homogeneous(ds: LabeledDataset, num_clients: int, seed: int) -> list[ClientShard]:
    """Assign every sample to a client drawn uniformly at random."""
    if num_clients < 1:
        raise InvalidInput("num_clients must be >= 1")
    if len(ds) < num_clients:
        raise InvalidInput(f"{len(ds)} samples cannot cover {num_clients} clients")
    rng = make_rng(seed)
    owner = rng.integers(0, num_clients, size=len(ds))
    assignment = [np.nonzero(owner == i)[0] for i in range(num_clients)]
    return _build_shards(ds, assignment, rng)


def _largest_remainder(total: int, proportions: np.ndarray) -> np.ndarray:
    raw = total * proportions
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        # Stable sort: equal remainders go to the lower client index.
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def partition_dirichlet(
    ds: LabeledDataset,
    num_clients: int,
    alpha: float,
    seed: int,
    min_size: int = 10,
    max_attempts: int = 10_000,
) -> list[ClientShard]:
    """Per-class Dirichlet(alpha) label skew.

    For each class a proportion vector over clients is drawn and the class's
    samples are dealt out by largest-remainder rounding. The whole draw is
    repeated until every client holds at least ``min_size`` samples.
    """
    if alpha <= 0:
        raise InvalidInput("alpha must be > 0")
    if num_clients < 1:
        raise InvalidInput("num_clients must be >= 1")
    if len(ds) < num_clients * min_size:
        raise InvalidInput(f"{len(ds)} samples cannot give {num_clients} clients {min_size} each")
    rng = make_rng(seed)
    by_class = []
    for c in range(ds.num_classes):
        members = np.nonzero(ds.labels == c)[0]
        if members.size == 0:
            warnings.warn(f"class {c} has no samples; skipped in Dirichlet partition", stacklevel=2)
            continue
        by_class.append(members)

    for _ in range(max_attempts):
        assignment = [[] for _ in range(num_clients)]
        for members in by_class:
            members = members[rng.permutation(members.size)]
            counts = _largest_remainder(members.size, rng.dirichlet(np.full(num_clients, alpha)))
            start = 0
            for i, n in enumerate(counts):
                assignment[i].append(members[start : start + n])
                start += n
        assignment = [np.sort(np.concatenate(a)) for a in assignment]
        if min(a.size for a in assignment) >= min_size:
            return _build_shards(ds, assignment, rng)
    raise InvalidInput(f"no Dirichlet draw gave every client {min_size} samples in {max_attempts} attempts")


def partition_pathological(
    ds: LabeledDataset, num_clients: int, classes_per_client: int, seed: int
) -> list[ClientShard]:
    """Each client holds exactly ``classes_per_client`` classes.

    Class slots are dealt round-robin over a seeded class permutation, and
    each class's samples are split evenly across its holders.
    """
    C = ds.num_classes
    if classes_per_client < 1 or classes_per_client > C:
        raise InvalidInput(f"classes_per_client must be in [1, {C}]")
    if classes_per_client * num_clients < C:
        raise InvalidInput(
            f"{num_clients} clients x {classes_per_client} classes cannot cover {C} classes"
        )
    rng = make_rng(seed)
    perm = rng.permutation(C)
    slots = perm[np.arange(num_clients * classes_per_client) % C]
    held = slots.reshape(num_clients, classes_per_client)

    assignment = [[] for _ in range(num_clients)]
    for c in range(C):
        holders = np.nonzero((held == c).any(axis=1))[0]
        members = np.nonzero(ds.labels == c)[0]
        if members.size < holders.size:
            raise InvalidInput(f"class {c} has {members.size} samples for {holders.size} holders")
        members = members[rng.permutation(members.size)]
        for client, part in zip(holders, np.array_split(members, holders.size)):
            assignment[client].append(part)
    assignment = [np.sort(np.concatenate(a)) for a in assignment]
    return _build_shards(ds, assignment, rng)


# --------------------------------------------------------------------------
# loaders


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(buf: bytes, magic: int, path) -> np.ndarray:
    if len(buf) < 4:
        raise FormatError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", buf[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, buf[4:header])
    count = int(np.prod(dims))
    if len(buf) != header + count:
        raise FormatError(f"{path}: expected {count} data bytes, found {len(buf) - header}")
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(images_path, labels_path, num_classes: int | None = None) -> LabeledDataset:
    """Read an IDX image/label file pair (optionally gzipped); pixels scaled to [0, 1]."""
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    n_cls = num_classes if num_classes is not None else int(y.max()) + 1 if y.size else 1
    return LabeledDataset(x, y, n_cls)


def load_csv(path, num_classes: int | None = None) -> LabeledDataset:
    """Tabular CSV with a header row; the last column is the integer label."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise FormatError(f"{path}: needs a header row and at least one data row")
    width = len(rows[0])
    if width < 2:
        raise FormatError(f"{path}: need at least one feature column and a label column")
    body = [r for r in rows[1:] if r]
    if any(len(r) != width for r in body):
        raise FormatError(f"{path}: ragged rows")
    try:
        table = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: non-numeric value ({e})") from None
    y = table[:, -1]
    if not np.all(y == np.round(y)) or y.min() < 0:
        raise FormatError(f"{path}: labels must be non-negative integers")
    y = y.astype(np.int64)
    n_cls = num_classes if num_classes is not None else int(y.max()) + 1
    return LabeledDataset(table[:, :-1], y, n_cls)


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic 32-bit child seed for a named sub-stream of ``seed``."""
    return int(np.random.SeedSequence([int(seed), *[int(t) for t in tags]]).generate_state(1)[0])
