"""Desk-scale surrogate datasets.

Three generators cover the shapes of the real corpora: random layered DAG
taxonomies, a two-level caption/image order in which short captions are
token prefixes of long ones, and entailment-by-deletion sentence pairs.
Everything is a pure function of its arguments (seed included), and each
generator has a writer producing exactly the file formats the loaders read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataio import FeatureMatrix, save_features
from .encoders import UNK_TOKEN
from .errors import ContractError
from .numerics import Rng
from .taxonomy import Taxonomy, build

__all__ = [
    "gen_dag",
    "TwoLevelCorpus",
    "gen_two_level",
    "write_two_level",
    "gen_entailment",
    "write_entailment",
]


def gen_dag(n_nodes: int, edge_prob: float, seed: int, n_levels: int = 3) -> Taxonomy:
    """Random layered DAG: edges run only from a level to the next one up.

    Every non-top node receives at least one parent so the hierarchy stays
    connected; nodes that end up with no incident edges (possible on the top
    level at small edge_prob) are not part of the returned taxonomy.
    """
    if n_nodes < 2:
        raise ContractError(f"need at least 2 nodes, got {n_nodes}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ContractError(f"edge_prob must be in [0, 1], got {edge_prob}")
    if not 2 <= n_levels <= n_nodes:
        raise ContractError(f"n_levels must be in [2, n_nodes], got {n_levels}")
    rng = Rng(seed)
    names = [f"n{i:04d}" for i in range(n_nodes)]
    level = np.empty(n_nodes, dtype=np.intp)
    level[:n_levels] = np.arange(n_levels)  # keep every level populated
    if n_nodes > n_levels:
        level[n_levels:] = rng.choice_many(n_levels, n_nodes - n_levels)
    by_level = [np.where(level == l)[0] for l in range(n_levels)]
    edges: list[tuple[str, str]] = []
    for l in range(n_levels - 1):
        uppers = by_level[l + 1]
        for u in by_level[l]:
            chosen = [int(v) for v in uppers if rng.uniform(0.0, 1.0) < edge_prob]
            if not chosen:
                chosen = [int(uppers[rng.choice(len(uppers))])]
            for v in chosen:
                edges.append((names[u], names[v]))
    return build(edges)


@dataclass
class SyntheticCaption:
    caption_id: str
    image_id: str
    tokens: list[str]


@dataclass
class TwoLevelCorpus:
    """Aligned synthetic captions and image features.

    Captions of one image share a single underlying token description; less
    detailed captions are strict prefixes of it. Image features carry the
    full description's token signatures plus isotropic noise, so the
    alignment is learnable and its strength is a knob.
    """

    vocab_tokens: list[str]  # includes the UNK token at index 0
    image_ids: list[str]
    features: np.ndarray
    captions: list[SyntheticCaption]

    @property
    def caption_image(self) -> np.ndarray:
        index = {img: i for i, img in enumerate(self.image_ids)}
        return np.array([index[c.image_id] for c in self.captions], dtype=np.intp)


def gen_two_level(n_images: int, captions_per_image: int = 2,
                  abstraction_levels: int = 2, seed: int = 0, *,
                  desc_len: int = 8, n_abstract: int = 2,
                  abstract_vocab: int = 24, specific_vocab: int = 2000,
                  feat_dim: int = 64, noise: float = 0.1,
                  signature_seed: int | None = None) -> TwoLevelCorpus:
    """Two-level caption/image partial order with known alignment.

    Each image gets ``captions_per_image`` captions cycling through
    ``abstraction_levels`` detail levels; level 0 is the full description and
    higher levels are successively shorter prefixes. The first ``n_abstract``
    description positions draw from a small shared pool (abstract words), the
    rest from a large pool (specific words). ``signature_seed`` fixes the
    token signatures independently of the sampling seed so separate train /
    dev / test corpora live in the same feature space.
    """
    if captions_per_image < 2:
        raise ContractError("captions_per_image must be >= 2")
    if abstraction_levels < 2 or abstraction_levels > desc_len:
        raise ContractError("abstraction_levels must be in [2, desc_len]")
    if not 0.0 <= noise < 1.0:
        raise ContractError(f"noise must be in [0, 1), got {noise}")
    if n_abstract > desc_len:
        raise ContractError("n_abstract cannot exceed desc_len")
    rng = Rng(seed)
    sig_rng = Rng(signature_seed if signature_seed is not None else seed).spawn(77)

    abstract = [f"a{i:03d}" for i in range(abstract_vocab)]
    specific = [f"s{i:04d}" for i in range(specific_vocab)]
    vocab_tokens = [UNK_TOKEN] + abstract + specific
    signatures = sig_rng.uniform(-1.0, 1.0, (len(vocab_tokens), feat_dim))

    token_index = {t: i for i, t in enumerate(vocab_tokens)}
    lengths = [
        max(1, round(desc_len * (abstraction_levels - lvl) / abstraction_levels))
        for lvl in range(abstraction_levels)
    ]

    image_ids = [f"img{i:05d}" for i in range(n_images)]
    features = np.empty((n_images, feat_dim), dtype=np.float64)
    captions: list[SyntheticCaption] = []
    cap_no = 0
    for i in range(n_images):
        desc = [abstract[rng.choice(abstract_vocab)] for _ in range(n_abstract)]
        desc += [specific[rng.choice(specific_vocab)] for _ in range(desc_len - n_abstract)]
        content = np.mean([signatures[token_index[t]] for t in desc], axis=0)
        content /= max(np.linalg.norm(content), 1e-12)
        g = rng.uniform(-1.0, 1.0, feat_dim)
        g /= max(np.linalg.norm(g), 1e-12)
        feat = (1.0 - noise) * content + noise * g
        features[i] = feat / max(np.linalg.norm(feat), 1e-12)
        for j in range(captions_per_image):
            lvl = j % abstraction_levels
            captions.append(SyntheticCaption(
                caption_id=f"cap{cap_no:06d}",
                image_id=image_ids[i],
                tokens=desc[:lengths[lvl]],
            ))
            cap_no += 1
    return TwoLevelCorpus(vocab_tokens=vocab_tokens, image_ids=image_ids,
                          features=features, captions=captions)


def write_two_level(corpus: TwoLevelCorpus, captions_path, features_path,
                    vocab_path=None) -> None:
    """Emit the corpus in the formats the loaders read: JSONL captions,
    OEF1 features, and optionally a vocabulary file."""
    with open(captions_path, "w", encoding="utf-8") as fh:
        for cap in corpus.captions:
            fh.write(json.dumps({
                "caption_id": cap.caption_id,
                "image_id": cap.image_id,
                "caption": " ".join(cap.tokens),
            }) + "\n")
    save_features(features_path, FeatureMatrix(ids=list(corpus.image_ids),
                                               data=corpus.features))
    if vocab_path is not None:
        with open(vocab_path, "w", encoding="utf-8") as fh:
            for t in corpus.vocab_tokens:
                fh.write(t + "\n")


def gen_entailment(n_pairs: int, max_len: int, seed: int, *,
                   vocab_size: int = 200
                   ) -> tuple[list[tuple[list[str], list[str], bool]], list[str]]:
    """Entailment-by-deletion pairs over a synthetic vocabulary.

    Even-indexed pairs are positive: the hypothesis is a random ordered
    subsequence of the premise. Odd-indexed pairs are negative: one
    hypothesis token is replaced by a word absent from the premise. Returns
    (pairs, vocab_tokens) with the UNK token prepended to the vocabulary.
    """
    if n_pairs < 1:
        raise ContractError("n_pairs must be >= 1")
    if max_len < 2:
        raise ContractError(f"max_len must be >= 2, got {max_len}")
    if vocab_size <= max_len:
        raise ContractError("vocab_size must exceed max_len to build negatives")
    rng = Rng(seed)
    words = [f"w{i:04d}" for i in range(vocab_size)]
    pairs = []
    for k in range(n_pairs):
        plen = 2 + rng.choice(max_len - 1)
        premise = [words[rng.choice(vocab_size)] for _ in range(plen)]
        hlen = 1 + rng.choice(plen)
        keep = np.sort(rng.choice_many(plen, hlen, replace=False))
        hypothesis = [premise[i] for i in keep]
        if k % 2 == 0:
            pairs.append((premise, hypothesis, True))
        else:
            present = set(premise)
            while True:
                intruder = words[rng.choice(vocab_size)]
                if intruder not in present:
                    break
            hypothesis[rng.choice(len(hypothesis))] = intruder
            pairs.append((premise, hypothesis, False))
    return pairs, [UNK_TOKEN] + words


def write_entailment(pairs, path) -> None:
    """TSV `label<TAB>premise<TAB>hypothesis`, the loader's format."""
    with open(path, "w", encoding="utf-8") as fh:
        for premise, hypothesis, label in pairs:
            tag = "entailment" if label else "neutral"
            fh.write(f"{tag}\t{' '.join(premise)}\t{' '.join(hypothesis)}\n")
