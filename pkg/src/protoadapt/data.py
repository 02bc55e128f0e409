"""Persistence and data generation.

The BADF container stores one dataset (features, labels, prototypes) plus
optional trailing sections such as trained checkpoints. Layout, all
little-endian:

    bytes 0-3   magic "BADF"
    u32         version (1)
    u32 N, u32 D, u32 C
    u8          flags (bit 0: rows already l2-normalized)
    3 bytes     padding (zero)
    f32[N*D]    features, row-major
    u32[N]      labels
    f32[C*D]    prototypes, row-major
    sections    each: 5-byte ASCII tag, u64 payload length, payload

Known section tags: "POST1" (posterior checkpoint: f32[C*D] mean then
f32[C] log_std) and "WGHT1" (point-estimate checkpoint: f32[C*D] weights).
Unknown tags are preserved verbatim.

Files hold float32; everything is widened to float64 on load. Random
sampling uses the Philox streams from `rng`, which are part of the
reproducibility contract: the same seed yields the same bytes everywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bayes_adapter import VariationalPosterior
from .errors import DataError, FormatError, ParamError
from .model import FeatureSet, Prototypes, l2_normalize_rows
from .rng import STREAM_SPLIT, STREAM_SYNTH, make_rng

MAGIC = b"BADF"
VERSION = 1
FLAG_NORMALIZED = 0x01

SECTION_POSTERIOR = "POST1"
SECTION_WEIGHTS = "WGHT1"

_HEADER = struct.Struct("<4sIIIIB3x")


@dataclass
class BadfFile:
    """Decoded container contents, before any normalization on load."""

    features: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64
    prototypes: np.ndarray  # (C, D) float64
    normalized: bool
    sections: dict[str, bytes]


def _encode_sections(sections: dict[str, bytes]) -> bytes:
    out = bytearray()
    for tag, payload in sections.items():
        raw = tag.encode("ascii")
        if len(raw) != 5:
            raise ParamError(f"section tag must be 5 ASCII bytes, got {tag!r}")
        out += raw
        out += struct.pack("<Q", len(payload))
        out += payload
    return bytes(out)


def save_badf(
    path,
    features: FeatureSet,
    prototypes: Prototypes,
    normalized: bool | None = None,
    sections: dict[str, bytes] | None = None,
) -> None:
    """Write a BADF file. `normalized=None` auto-detects from the rows."""
    features.validate_labels(prototypes.n_classes)
    if features.dim != prototypes.dim:
        raise DataError(
            f"feature dim {features.dim} != prototype dim {prototypes.dim}"
        )
    if normalized is None:
        normalized = features.rows_unit_norm() and prototypes.rows_unit_norm()
    flags = FLAG_NORMALIZED if normalized else 0
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, VERSION, features.n, features.dim, prototypes.n_classes, flags
            )
        )
        fh.write(features.features.astype("<f4").tobytes())
        fh.write(features.labels.astype("<u4").tobytes())
        fh.write(prototypes.matrix.astype("<f4").tobytes())
        if sections:
            fh.write(_encode_sections(sections))


def read_badf(path) -> BadfFile:
    """Decode a BADF file without applying any normalization."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, n, d, c, flags = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")

    offset = _HEADER.size
    want = n * d * 4 + n * 4 + c * d * 4
    if len(blob) < offset + want:
        raise FormatError("truncated payload")
    feats = np.frombuffer(blob, dtype="<f4", count=n * d, offset=offset)
    offset += n * d * 4
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=offset)
    offset += n * 4
    protos = np.frombuffer(blob, dtype="<f4", count=c * d, offset=offset)
    offset += c * d * 4

    sections: dict[str, bytes] = {}
    while offset < len(blob):
        if len(blob) < offset + 13:
            raise FormatError("truncated section header")
        tag = blob[offset : offset + 5]
        try:
            tag_s = tag.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError(f"non-ASCII section tag {tag!r}") from exc
        (length,) = struct.unpack_from("<Q", blob, offset + 5)
        offset += 13
        if len(blob) < offset + length:
            raise FormatError(f"truncated section {tag_s!r}")
        sections[tag_s] = blob[offset : offset + length]
        offset += length

    if n > 0 and labels.max() >= c:
        raise DataError(f"label {int(labels.max())} >= class count {c}")
    return BadfFile(
        features=feats.astype(np.float64).reshape(n, d),
        labels=labels.astype(np.int64),
        prototypes=protos.astype(np.float64).reshape(c, d),
        normalized=bool(flags & FLAG_NORMALIZED),
        sections=sections,
    )


def load_badf(path, normalize: bool | None = None) -> tuple[FeatureSet, Prototypes]:
    """Load features and prototypes.

    normalize=None applies l2 normalization exactly when the file's
    normalized flag is unset; True forces it; False skips it.
    """
    raw = read_badf(path)
    feats = raw.features
    protos = raw.prototypes
    if normalize is True or (normalize is None and not raw.normalized):
        feats = l2_normalize_rows(feats)
        protos = l2_normalize_rows(protos)
    return FeatureSet(feats, raw.labels), Prototypes(protos)


def encode_posterior(q: VariationalPosterior) -> bytes:
    return (
        q.mean.astype("<f4").tobytes() + q.log_std.astype("<f4").tobytes()
    )


def decode_posterior(payload: bytes, c: int, d: int) -> VariationalPosterior:
    if len(payload) != (c * d + c) * 4:
        raise FormatError("posterior section has wrong length")
    mean = np.frombuffer(payload, dtype="<f4", count=c * d).astype(np.float64)
    log_std = np.frombuffer(payload, dtype="<f4", count=c, offset=c * d * 4)
    return VariationalPosterior(mean.reshape(c, d), log_std.astype(np.float64))


def encode_weights(w: np.ndarray) -> bytes:
    return np.ascontiguousarray(w, dtype="<f4").tobytes()


def decode_weights(payload: bytes, c: int, d: int) -> np.ndarray:
    if len(payload) != c * d * 4:
        raise FormatError("weight section has wrong length")
    return np.frombuffer(payload, dtype="<f4", count=c * d).astype(np.float64).reshape(c, d)


@dataclass
class FewShotSplit:
    """Class-balanced support indices and the untouched remainder.

    There is deliberately no validation partition; adaptation must work
    from the support set alone.
    """

    support_indices: np.ndarray
    query_indices: np.ndarray
    k: int
    seed: int


def few_shot_sample(labels: np.ndarray, k: int, seed: int) -> FewShotSplit:
    """Draw k support samples per class, uniformly without replacement."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 1:
        raise ParamError("k must be >= 1")
    rng = make_rng(seed, STREAM_SPLIT)
    support = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise DataError(f"class {int(c)} has {idx.size} samples, need {k}")
        support.append(rng.choice(idx, size=k, replace=False))
    support = np.concatenate(support)
    mask = np.ones(labels.shape[0], dtype=bool)
    mask[support] = False
    return FewShotSplit(support, np.flatnonzero(mask), k, seed)


def synth_generate(
    c: int,
    d: int,
    n_per_class: int,
    cluster_spread: float,
    proto_noise: float,
    seed: int,
) -> tuple[FeatureSet, Prototypes]:
    """Unit-norm Gaussian clusters around random directions.

    Features are normalize(mean_c + spread * noise) and prototypes
    normalize(mean_c + proto_noise * noise), so spread = proto_noise = 0
    makes every feature coincide with its class prototype.
    """
    if c < 2:
        raise ParamError("need at least 2 classes")
    if d < 1 or n_per_class < 1:
        raise ParamError("d and n_per_class must be >= 1")
    if cluster_spread < 0 or proto_noise < 0:
        raise ParamError("spread and noise must be >= 0")
    rng = make_rng(seed, STREAM_SYNTH)
    means = l2_normalize_rows(rng.standard_normal((c, d)))
    feats = np.repeat(means, n_per_class, axis=0)
    feats = feats + cluster_spread * rng.standard_normal(feats.shape)
    labels = np.repeat(np.arange(c, dtype=np.int64), n_per_class)
    protos = means + proto_noise * rng.standard_normal((c, d))
    return (
        FeatureSet(l2_normalize_rows(feats), labels),
        Prototypes(l2_normalize_rows(protos)),
    )
