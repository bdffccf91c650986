"""Ingestion and persistence.

File formats owned by this package (all little-endian):

* ``OEF1`` feature files: magic ``OEF1``, u32 count, u32 feat_dim, then
  ``count`` id entries (u16 byte length + UTF-8 bytes), then count*feat_dim
  float32 values row-major.
* Caption files: JSON lines with ``caption_id``, ``image_id``, ``caption``.
* Entailment files: TSV ``label<TAB>premise<TAB>hypothesis`` with labels
  entailment / neutral / contradiction / ``-`` (unlabeled, skipped).
* ``OEC1`` checkpoints: magic ``OEC1``, u32 header length, UTF-8 header
  (metadata lines plus a tensor directory), float64 tensor payloads, and an
  8-byte truncated SHA-256 of everything preceding it.

Tokenization is part of the format contract: lowercase, punctuation split
into separate single-character tokens, then whitespace split. Changing it
would be a format-version bump.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import struct
from dataclasses import dataclass

import numpy as np

from .encoders import Vocabulary
from .errors import (
    CheckpointError,
    CheckpointVersionError,
    ContractError,
    DataFormatError,
)
from .training import Checkpoint

logger = logging.getLogger("orderemb")

__all__ = [
    "FeatureMatrix",
    "CaptionRecord",
    "EntailPair",
    "RetrievalCorpus",
    "tokenize",
    "build_vocab",
    "load_features",
    "save_features",
    "load_captions",
    "load_entail",
    "save_checkpoint",
    "load_checkpoint",
]

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

FEATURE_MAGIC = b"OEF1"
CHECKPOINT_MAGIC = b"OEC1"


def tokenize(text: str) -> list[str]:
    """Lowercase and split, with punctuation as separate tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class FeatureMatrix:
    """Precomputed per-item feature vectors keyed by string id."""

    ids: list[str]
    data: np.ndarray  # (len(ids), feat_dim) float64

    def __post_init__(self):
        if len(self.ids) != self.data.shape[0]:
            raise ContractError("feature id count does not match row count")
        self.index = {x: i for i, x in enumerate(self.ids)}
        if len(self.index) != len(self.ids):
            raise ContractError("feature ids must be unique")

    @property
    def feat_dim(self) -> int:
        return self.data.shape[1]


@dataclass
class CaptionRecord:
    caption_id: str
    image_id: str
    tokens: list[int]  # vocabulary ids, nonempty


@dataclass
class EntailPair:
    premise: list[int]
    hypothesis: list[int]
    label: bool  # True = entailment


@dataclass
class RetrievalCorpus:
    """Aligned captions and image features with a caption -> image row map."""

    captions: list[CaptionRecord]
    features: FeatureMatrix
    caption_image: np.ndarray  # (len(captions),) int row indices

    @classmethod
    def assemble(cls, captions: list[CaptionRecord], features: FeatureMatrix
                 ) -> "RetrievalCorpus":
        rows = np.empty(len(captions), dtype=np.intp)
        for i, rec in enumerate(captions):
            row = features.index.get(rec.image_id)
            if row is None:
                raise DataFormatError(
                    f"caption {rec.caption_id!r} references image "
                    f"{rec.image_id!r} missing from the feature file"
                )
            rows[i] = row
        return cls(captions=captions, features=features, caption_image=rows)


def build_vocab(token_lists, min_count: int = 1) -> Vocabulary:
    """Frequency vocabulary over an iterable of token-string lists."""
    counts: dict[str, int] = {}
    for tokens in token_lists:
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
    return Vocabulary.from_counts(counts, min_count=min_count)


def save_features(path, fm: FeatureMatrix) -> None:
    data32 = np.ascontiguousarray(fm.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", len(fm.ids), fm.data.shape[1]))
        for item in fm.ids:
            raw = item.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ContractError(f"feature id too long: {item[:40]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(data32.tobytes())


def load_features(path) -> FeatureMatrix:
    """Parse an OEF1 file; values are widened to float64 internally."""
    with open(path, "rb") as fh:
        blob = fh.read()

    def need(offset, count, what):
        if offset + count > len(blob):
            raise DataFormatError(
                f"{path}: truncated while reading {what} at byte {offset}"
            )

    need(0, 4, "magic")
    if blob[:4] != FEATURE_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {blob[:4]!r} at byte 0 (expected {FEATURE_MAGIC!r})"
        )
    need(4, 8, "header")
    count, feat_dim = struct.unpack_from("<II", blob, 4)
    off = 12
    ids = []
    seen = set()
    for i in range(count):
        need(off, 2, f"id {i} length")
        (ln,) = struct.unpack_from("<H", blob, off)
        off += 2
        need(off, ln, f"id {i}")
        item = blob[off:off + ln].decode("utf-8")
        off += ln
        if item in seen:
            raise DataFormatError(f"{path}: duplicate id {item!r} at byte {off - ln}")
        seen.add(item)
        ids.append(item)
    need(off, 4 * count * feat_dim, "feature payload")
    data = np.frombuffer(blob, dtype="<f4", count=count * feat_dim, offset=off)
    if off + 4 * count * feat_dim != len(blob):
        raise DataFormatError(
            f"{path}: {len(blob) - off - 4 * count * feat_dim} trailing bytes "
            f"after the feature payload"
        )
    return FeatureMatrix(ids=ids, data=data.astype(np.float64).reshape(count, feat_dim))


def load_captions(path, vocab: Vocabulary) -> list[CaptionRecord]:
    """JSONL caption records; unknown tokens map to the UNK id."""
    out = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                caption_id = obj["caption_id"]
                image_id = obj["image_id"]
                text = obj["caption"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}:{ln}: malformed caption record: {exc}") from exc
            tokens = tokenize(text)
            if not tokens:
                skipped += 1
                logger.warning("%s:%d: caption %r empty after tokenization; skipped",
                               path, ln, caption_id)
                continue
            out.append(CaptionRecord(caption_id=str(caption_id), image_id=str(image_id),
                                     tokens=vocab.encode(tokens)))
    if skipped:
        logger.info("%s: skipped %d empty caption(s)", path, skipped)
    return out


_ENTAIL_LABELS = {
    "entailment": True,
    "neutral": False,
    "contradiction": False,
}


def load_entail(path, vocab: Vocabulary) -> list[EntailPair]:
    """TSV entailment pairs with 3-way labels collapsed to 2 classes.

    ``neutral`` and ``contradiction`` become non-entailment; unlabeled
    records (gold label ``-``) are skipped and counted.
    """
    out = []
    unlabeled = 0
    empty = 0
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(
                    f"{path}:{ln}: expected `label<TAB>premise<TAB>hypothesis`"
                )
            label, premise, hypothesis = parts
            if label == "-":
                unlabeled += 1
                continue
            if label not in _ENTAIL_LABELS:
                raise DataFormatError(f"{path}:{ln}: unknown label {label!r}")
            p_tok = tokenize(premise)
            h_tok = tokenize(hypothesis)
            if not p_tok or not h_tok:
                empty += 1
                logger.warning("%s:%d: empty sentence after tokenization; skipped", path, ln)
                continue
            out.append(EntailPair(premise=vocab.encode(p_tok),
                                  hypothesis=vocab.encode(h_tok),
                                  label=_ENTAIL_LABELS[label]))
    if unlabeled:
        logger.info("%s: skipped %d unlabeled record(s)", path, unlabeled)
    if empty:
        logger.info("%s: skipped %d empty record(s)", path, empty)
    return out


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write an OEC1 checkpoint: write-to-temp then atomic rename."""
    names = sorted(ckpt.tensors)
    header_lines = [
        f"task={ckpt.task}",
        f"epoch={ckpt.epoch}",
        f"dev_metric={ckpt.dev_metric!r}",
    ]
    for key in sorted(ckpt.config):
        header_lines.append(f"config.{key}={ckpt.config[key]}")
    offset = 0
    payloads = []
    for name in names:
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype="<f8")
        shape = " ".join(str(s) for s in arr.shape)
        header_lines.append(f"tensor={name} {arr.ndim} {shape} {offset}")
        payloads.append(arr.tobytes())
        offset += len(payloads[-1])
    header = ("\n".join(header_lines) + "\n").encode("utf-8")
    body = CHECKPOINT_MAGIC + struct.pack("<I", len(header)) + header + b"".join(payloads)
    digest = hashlib.sha256(body).digest()[:8]
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(digest)
    os.replace(tmp, path)


def load_checkpoint(path, expected_task: str | None = None) -> Checkpoint:
    """Read and verify an OEC1 checkpoint.

    Raises CheckpointError on checksum failure and CheckpointVersionError
    when ``expected_task`` does not match the stored task tag.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not an OEC1 checkpoint")
    body, digest = blob[:-8], blob[-8:]
    if hashlib.sha256(body).digest()[:8] != digest:
        raise CheckpointError(f"{path}: checksum mismatch; file is corrupt")
    (header_len,) = struct.unpack_from("<I", blob, 4)
    header_end = 8 + header_len
    if header_end > len(body):
        raise DataFormatError(f"{path}: truncated header")
    header = body[8:header_end].decode("utf-8")
    payload = body[header_end:]

    task = None
    epoch = 0
    dev_metric = 0.0
    config: dict[str, str] = {}
    directory: list[tuple[str, tuple[int, ...], int]] = []
    for line in header.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        if key == "task":
            task = value
        elif key == "epoch":
            epoch = int(value)
        elif key == "dev_metric":
            dev_metric = float(value)
        elif key.startswith("config."):
            config[key[len("config."):]] = value
        elif key == "tensor":
            parts = value.split(" ")
            name = parts[0]
            ndim = int(parts[1])
            shape = tuple(int(s) for s in parts[2:2 + ndim])
            offset = int(parts[2 + ndim])
            directory.append((name, shape, offset))
        else:
            raise DataFormatError(f"{path}: unknown header line {line!r}")
    if task is None:
        raise DataFormatError(f"{path}: checkpoint header is missing the task tag")
    if expected_task is not None and task != expected_task:
        raise CheckpointVersionError(
            f"{path}: checkpoint was trained for task {task!r}, "
            f"expected {expected_task!r}"
        )
    tensors = {}
    for name, shape, offset in directory:
        size = int(np.prod(shape)) if shape else 1
        end = offset + 8 * size
        if end > len(payload):
            raise DataFormatError(f"{path}: tensor {name!r} payload is truncated")
        arr = np.frombuffer(payload, dtype="<f8", count=size, offset=offset)
        tensors[name] = arr.astype(np.float64).reshape(shape)
    return Checkpoint(task=task, config=config, epoch=epoch,
                      dev_metric=dev_metric, tensors=tensors)
