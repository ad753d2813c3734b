"""Dataset ingestion and model persistence.

Datasets are read from LIBSVM-style text (``label idx:val idx:val ...`` per
line, 1-based feature indices, labels remapped to contiguous 1..m with the
original values remembered).  Models are stored in a little-endian binary
format with a magic string, version, metadata header, the row-major float64
score matrix, and a trailing 64-bit payload checksum, so round trips are bit
exact and corruption is detected on load.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .solver import Model

MODEL_MAGIC = b"TOPKSVM"
MODEL_VERSION = 1
_VARIANT_CODES = {"alpha": 0, "beta": 1}
_VARIANT_NAMES = {v: k for k, v in _VARIANT_CODES.items()}


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; message carries the 1-based line number."""


class ModelFormatError(ValueError):
    """Corrupt or incompatible model file."""


@dataclass
class Dataset:
    """Feature matrix X (one column per example) and labels in 1..m.

    ``labels[j - 1]`` is the original label value of internal class j; for
    synthetic data it defaults to the identity mapping.
    """

    X: np.ndarray
    y: np.ndarray
    m: int
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asfortranarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains NaN or Inf")
        y = np.asarray(self.y, dtype=np.int64)
        if y.ndim != 1 or y.size != X.shape[1]:
            raise ValueError(
                f"y must have one entry per column of X, got {y.shape} "
                f"for X with {X.shape[1]} columns"
            )
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if y.size and (y.min() < 1 or y.max() > self.m):
            raise ValueError(f"labels must lie in [1, {self.m}]")
        labels = self.labels
        if labels is None:
            labels = np.arange(1, self.m + 1, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size != self.m:
            raise ValueError(f"labels must have length m={self.m}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def feature_dim(self):
        return self.X.shape[0]


def read_libsvm(path):
    """Parse a LIBSVM-style text file into a dense :class:`Dataset`.

    Feature indices are 1-based and densified up to the largest index seen.
    Duplicate indices within a line are an error (silently summing them hides
    data bugs).  Labels are remapped to contiguous 1..m in ascending order of
    their original values.
    """
    raw_labels = []
    rows = []          # per example: list of (index, value)
    max_index = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = int(tokens[0])
            except ValueError:
                try:
                    flabel = float(tokens[0])
                except ValueError:
                    raise LibsvmParseError(
                        f"line {lineno}: bad label {tokens[0]!r}"
                    ) from None
                if not flabel.is_integer():
                    raise LibsvmParseError(
                        f"line {lineno}: non-integer label {tokens[0]!r}"
                    ) from None
                label = int(flabel)
            pairs = []
            seen = set()
            for tok in tokens[1:]:
                idx_str, sep, val_str = tok.partition(":")
                if not sep or not idx_str or not val_str:
                    raise LibsvmParseError(
                        f"line {lineno}: bad feature token {tok!r}"
                    )
                try:
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise LibsvmParseError(
                        f"line {lineno}: bad feature token {tok!r}"
                    ) from None
                if idx < 1:
                    raise LibsvmParseError(
                        f"line {lineno}: feature index must be >= 1, got {idx}"
                    )
                if not np.isfinite(val):
                    raise LibsvmParseError(
                        f"line {lineno}: non-finite feature value {val_str!r}"
                    )
                if idx in seen:
                    raise LibsvmParseError(
                        f"line {lineno}: duplicate feature index {idx}"
                    )
                seen.add(idx)
                pairs.append((idx, val))
                max_index = max(max_index, idx)
            raw_labels.append(label)
            rows.append(pairs)
    if not rows:
        raise ValueError(f"{path}: empty dataset")

    uniq = sorted(set(raw_labels))
    remap = {orig: j + 1 for j, orig in enumerate(uniq)}
    y = np.array([remap[v] for v in raw_labels], dtype=np.int64)
    X = np.zeros((max_index, len(rows)), order="F")
    for i, pairs in enumerate(rows):
        for idx, val in pairs:
            X[idx - 1, i] = val
    return Dataset(X=X, y=y, m=len(uniq), labels=np.array(uniq, dtype=np.int64))


def write_libsvm(dataset, path):
    """Write a dataset densely (every feature index) in LIBSVM text form.

    Writing all indices keeps ``read_libsvm`` an exact inverse on the dense
    representation even when trailing features are zero.
    """
    with open(path, "w") as fh:
        for i in range(dataset.n):
            label = dataset.labels[dataset.y[i] - 1]
            feats = " ".join(
                f"{j + 1}:{dataset.X[j, i]!r}" for j in range(dataset.feature_dim)
            )
            fh.write(f"{label} {feats}\n" if feats else f"{label}\n")


def _checksum(payload):
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def write_model(model, path):
    """Serialise a trained model; the round trip is bit exact."""
    if model.variant not in _VARIANT_CODES:
        raise ValueError(f"unknown loss variant {model.variant!r}")
    m = model.num_classes
    d = model.feature_dim
    labels = np.asarray(model.labels, dtype=np.int64)
    if labels.size != m:
        raise ValueError(f"labels must have length m={m}")
    payload = np.ascontiguousarray(model.W, dtype="<f8").tobytes()
    header = MODEL_MAGIC + struct.pack(
        "<IIIIdB", MODEL_VERSION, m, d, model.k, model.lam,
        _VARIANT_CODES[model.variant],
    )
    header += struct.pack(f"<{m}q", *labels.tolist())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", _checksum(payload)))


def read_model(path):
    """Load a model written by :func:`write_model`, verifying the checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fixed = len(MODEL_MAGIC) + struct.calcsize("<IIIIdB")
    if len(blob) < fixed:
        raise ModelFormatError(f"{path}: truncated model file")
    if blob[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not a model file")
    version, m, d, k, lam, variant_code = struct.unpack(
        "<IIIIdB", blob[len(MODEL_MAGIC):fixed]
    )
    if version != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported version {version} (expected {MODEL_VERSION})"
        )
    if variant_code not in _VARIANT_NAMES:
        raise ModelFormatError(f"{path}: unknown loss variant tag {variant_code}")
    label_bytes = 8 * m
    payload_len = 8 * m * d
    expected = fixed + label_bytes + payload_len + 8
    if len(blob) != expected:
        raise ModelFormatError(
            f"{path}: wrong file size {len(blob)} (expected {expected})"
        )
    labels = np.array(
        struct.unpack(f"<{m}q", blob[fixed:fixed + label_bytes]), dtype=np.int64
    )
    payload = blob[fixed + label_bytes:fixed + label_bytes + payload_len]
    (stored_sum,) = struct.unpack("<Q", blob[-8:])
    if _checksum(payload) != stored_sum:
        raise ModelFormatError(f"{path}: payload checksum mismatch")
    W = np.frombuffer(payload, dtype="<f8").reshape(d, m).copy()
    return Model(W=W, k=k, lam=lam, variant=_VARIANT_NAMES[variant_code],
                 labels=labels)
