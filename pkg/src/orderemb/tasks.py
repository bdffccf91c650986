"""Task assemblies: parameters, batch sampling, backprop wiring, and
evaluation entry points for the three partial-order completion tasks.

Each task exposes the small protocol ``run_epochs`` drives (epoch_batches /
train_batch / dev_metric / make_checkpoint) plus task-specific evaluation.
Training is single-threaded and fully determined by the config seed.
"""

from __future__ import annotations

import numpy as np

from .dataio import EntailPair, RetrievalCorpus
from .encoders import GRU_TENSOR_NAMES, EmbeddingTable, GruEncoder, LinearProjection
from .errors import CheckpointVersionError, ContractError
from .evaluation import (
    RECALL_KS,
    RankResult,
    ScoredPair,
    binary_accuracy,
    rank_targets,
    tune_threshold,
)
from .numerics import AdamState, Rng, adam_step
from .order import Scorer
from .taxonomy import LabeledPair, sample_negative
from .training import Checkpoint, TrainConfig, entailment_loss, hypernym_loss, ranking_loss

__all__ = ["HypernymTask", "RetrievalTask", "EntailmentTask", "caption_image_scores"]


class _Params:
    """Named parameter tensors with one Adam state per tensor."""

    def __init__(self, tensors: dict[str, np.ndarray], lr: float):
        self.tensors = tensors
        self.states = {
            name: AdamState.for_param(arr, lr=lr, name=name)
            for name, arr in tensors.items()
        }

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.tensors.items()}

    def step(self, grads: dict[str, np.ndarray], clip_norm: float = 0.0) -> None:
        if clip_norm > 0.0:
            total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
            if total > clip_norm:
                scale = clip_norm / total
                for g in grads.values():
                    g *= scale
        for name in sorted(self.tensors):
            adam_step(self.tensors[name], grads[name], self.states[name])

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.tensors.items()}


def _require_tensors(ckpt: Checkpoint, expected: set[str]) -> None:
    got = set(ckpt.tensors)
    if got != expected:
        missing = expected - got
        unknown = got - expected
        raise CheckpointVersionError(
            f"checkpoint tensor mismatch: missing {sorted(missing)}, "
            f"unknown {sorted(unknown)}"
        )


class HypernymTask:
    """Concept lookup table trained on closure edges with corrupted negatives."""

    TENSORS = {"concept_table"}

    def __init__(self, config: TrainConfig, n_concepts: int,
                 train_pairs: list[tuple[int, int]],
                 dev_pos: list[tuple[int, int]] | None = None,
                 dev_neg: list[LabeledPair] | None = None,
                 tensors: dict[str, np.ndarray] | None = None):
        if config.task != "hypernym":
            raise ContractError(f"config is for task {config.task!r}")
        self.config = config
        self.n_concepts = n_concepts
        self.train_pairs = np.asarray(sorted(train_pairs), dtype=np.intp).reshape(-1, 2) \
            if train_pairs else np.empty((0, 2), dtype=np.intp)
        self.dev_pos = list(dev_pos or [])
        self.dev_neg = list(dev_neg or [])
        self.rng = Rng(config.seed)
        if tensors is None:
            table = EmbeddingTable.create(self.rng.spawn(1), n_concepts, config.dim)
        else:
            _require_tensors_dict(tensors, self.TENSORS)
            table = EmbeddingTable(tensors["concept_table"].copy())
            if table.vocab_size != n_concepts:
                raise CheckpointVersionError(
                    f"checkpoint has {table.vocab_size} concepts, data has {n_concepts}"
                )
        self.table = table
        self.params = _Params({"concept_table": table.weights}, lr=config.lr)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, n_concepts: int,
                        dev_pos=None, dev_neg=None) -> "HypernymTask":
        _require_tensors(ckpt, cls.TENSORS)
        from .training import config_from_strings

        config = config_from_strings(ckpt.config)
        return cls(config, n_concepts, [], dev_pos=dev_pos, dev_neg=dev_neg,
                   tensors=ckpt.tensors)

    # -- training protocol -------------------------------------------------

    def epoch_batches(self, epoch: int):
        n = len(self.train_pairs)
        if n == 0:
            return
        per_epoch = max(1, -(-n // self.config.batch))
        for _ in range(per_epoch):
            pos_idx = self.rng.choice_many(n, self.config.batch)
            pos = self.train_pairs[pos_idx]
            neg = np.asarray(
                [_pair(sample_negative((int(u), int(v)), self.n_concepts, self.rng))
                 for u, v in pos],
                dtype=np.intp,
            )
            yield pos, neg

    def train_batch(self, batch) -> float:
        pos, neg = batch
        pu = self.table.lookup_many(pos[:, 0])
        pv = self.table.lookup_many(pos[:, 1])
        nu = self.table.lookup_many(neg[:, 0])
        nv = self.table.lookup_many(neg[:, 1])
        loss, dpu, dpv, dnu, dnv = hypernym_loss(
            pu, pv, nu, nv, self.config.margin, self.config.scorer
        )
        grads = self.params.zero_grads()
        g = grads["concept_table"]
        self.table.accumulate_grad(g, pos[:, 0], dpu)
        self.table.accumulate_grad(g, pos[:, 1], dpv)
        self.table.accumulate_grad(g, neg[:, 0], dnu)
        self.table.accumulate_grad(g, neg[:, 1], dnv)
        self.params.step(grads, self.config.clip_norm)
        return loss

    def dev_metric(self) -> float:
        if not self.dev_pos or not self.dev_neg:
            return 0.0
        scored = self.scored_pairs(self.dev_pos, True) + \
            self.scored_pairs([(p.child, p.parent) for p in self.dev_neg], False)
        threshold = tune_threshold(scored)
        return binary_accuracy(scored, threshold)

    def make_checkpoint(self, epoch: int, metric: float) -> Checkpoint:
        return Checkpoint(task="hypernym", config=self.config.to_dict(),
                          epoch=epoch, dev_metric=metric,
                          tensors=self.params.snapshot())

    # -- evaluation ---------------------------------------------------------

    def pair_distances(self, pairs: list[tuple[int, int]]) -> np.ndarray:
        ids = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
        lo = self.table.lookup_many(ids[:, 0])
        up = self.table.lookup_many(ids[:, 1])
        if self.config.scorer is Scorer.ORDER:
            from .order import penalty_rows

            return penalty_rows(lo, up)
        from .order import cosine_rows

        return 1.0 - cosine_rows(lo, up)

    def scored_pairs(self, pairs: list[tuple[int, int]], label: bool) -> list[ScoredPair]:
        return [ScoredPair(float(d), label) for d in self.pair_distances(pairs)]


def _pair(lp: LabeledPair) -> tuple[int, int]:
    return (lp.child, lp.parent)


def _require_tensors_dict(tensors: dict[str, np.ndarray], expected: set[str]) -> None:
    if set(tensors) != expected:
        raise CheckpointVersionError(
            f"tensor names {sorted(tensors)} do not match expected {sorted(expected)}"
        )


def caption_image_scores(cap_embs: np.ndarray, img_embs: np.ndarray,
                         scorer: Scorer, reverse_order: bool,
                         threads: int = 1) -> np.ndarray:
    """Caption x image score matrix (higher = more compatible).

    The forward convention places captions above images, so the score of
    caption c against image i is -penalty(image, caption); ``reverse_order``
    swaps the roles. Cosine scores ignore direction.
    """
    from .order import score_matrix

    if scorer is Scorer.COSINE:
        return score_matrix(Scorer.COSINE, cap_embs, img_embs, threads=threads)
    if reverse_order:
        return score_matrix(Scorer.ORDER, cap_embs, img_embs, threads=threads)
    return score_matrix(Scorer.ORDER, img_embs, cap_embs, threads=threads).T


class RetrievalTask:
    """GRU caption encoder plus linear image projection, trained with the
    in-batch contrastive ranking loss."""

    def __init__(self, config: TrainConfig, vocab_size: int, feat_dim: int,
                 train: RetrievalCorpus | None = None,
                 dev: RetrievalCorpus | None = None,
                 tensors: dict[str, np.ndarray] | None = None):
        if config.task != "retrieval":
            raise ContractError(f"config is for task {config.task!r}")
        self.config = config
        self.train = train
        self.dev = dev
        self.rng = Rng(config.seed)
        init_rng = self.rng.spawn(1)
        if tensors is None:
            self.encoder = GruEncoder.create(init_rng, vocab_size, config.word_dim,
                                             config.dim, config.normalize)
            self.image_proj = LinearProjection.create(init_rng, config.dim, feat_dim,
                                                      config.normalize)
        else:
            _require_tensors_dict(tensors, self.TENSORS)
            word = EmbeddingTable(tensors["word_table"].copy())
            if word.vocab_size != vocab_size:
                raise CheckpointVersionError(
                    f"checkpoint vocabulary size {word.vocab_size} does not "
                    f"match the supplied vocabulary ({vocab_size})"
                )
            weights = {n: tensors[n].copy() for n in GRU_TENSOR_NAMES}
            self.encoder = GruEncoder(word_table=word, weights=weights,
                                      normalize=config.normalize)
            self.image_proj = LinearProjection(tensors["Wimg"].copy(), config.normalize)
        named = {"word_table": self.encoder.word_table.weights, "Wimg": self.image_proj.W}
        named.update(self.encoder.weights)
        self.params = _Params(named, lr=config.lr)

    TENSORS = {"word_table", "Wimg", *GRU_TENSOR_NAMES}

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, vocab_size: int, feat_dim: int,
                        train=None, dev=None) -> "RetrievalTask":
        _require_tensors(ckpt, cls.TENSORS)
        from .training import config_from_strings

        config = config_from_strings(ckpt.config)
        return cls(config, vocab_size, feat_dim, train=train, dev=dev,
                   tensors=ckpt.tensors)

    # -- training protocol -------------------------------------------------

    def epoch_batches(self, epoch: int):
        if self.train is None:
            return
        n = len(self.train.captions)
        perm = self.rng.permutation(n)
        for i0 in range(0, n, self.config.batch):
            idx = perm[i0:i0 + self.config.batch]
            if idx.size >= 2:
                yield idx

    def train_batch(self, idx) -> float:
        cap_embs, caches = self._encode_captions(
            [self.train.captions[i].tokens for i in idx]
        )
        feats = self.train.features.data[self.train.caption_image[idx]]
        img_embs, proj_cache = self.image_proj.project_batch(feats)
        if self.config.reverse_order and self.config.scorer is Scorer.ORDER:
            loss, d_img, d_cap = ranking_loss(img_embs, cap_embs,
                                              self.config.margin, self.config.scorer)
        else:
            loss, d_cap, d_img = ranking_loss(cap_embs, img_embs,
                                              self.config.margin, self.config.scorer)
        grads = self.params.zero_grads()
        for row, cache in enumerate(caches):
            self.encoder.backward(d_cap[row], cache, grads, grads["word_table"])
        grads["Wimg"] += self.image_proj.backward_batch(d_img, proj_cache)
        self.params.step(grads, self.config.clip_norm)
        return loss

    def dev_metric(self) -> float:
        if self.dev is None:
            return 0.0
        res = self.evaluate(self.dev)
        return sum(res["caption_retrieval"].recall[k] for k in RECALL_KS) + \
            sum(res["image_retrieval"].recall[k] for k in RECALL_KS)

    def make_checkpoint(self, epoch: int, metric: float) -> Checkpoint:
        return Checkpoint(task="retrieval", config=self.config.to_dict(),
                          epoch=epoch, dev_metric=metric,
                          tensors=self.params.snapshot())

    # -- evaluation ---------------------------------------------------------

    def _encode_captions(self, token_lists):
        embs = np.empty((len(token_lists), self.config.dim), dtype=np.float64)
        caches = []
        for row, tokens in enumerate(token_lists):
            out, cache = self.encoder.encode_with_cache(tokens)
            embs[row] = out
            caches.append(cache)
        return embs, caches

    def embed_corpus(self, corpus: RetrievalCorpus):
        cap_embs, _ = self._encode_captions([c.tokens for c in corpus.captions])
        img_embs, _ = self.image_proj.project_batch(corpus.features.data)
        return cap_embs, img_embs

    def score_corpus(self, corpus: RetrievalCorpus, threads: int = 1) -> np.ndarray:
        cap_embs, img_embs = self.embed_corpus(corpus)
        return caption_image_scores(cap_embs, img_embs, self.config.scorer,
                                    self.config.reverse_order, threads=threads)

    def evaluate(self, corpus: RetrievalCorpus, threads: int = 1
                 ) -> dict[str, RankResult]:
        scores = self.score_corpus(corpus, threads=threads)
        cap_img = corpus.caption_image
        image_retrieval = rank_targets(scores, [{int(i)} for i in cap_img])
        by_img: list[set[int]] = [set() for _ in range(corpus.features.data.shape[0])]
        for c, i in enumerate(cap_img):
            by_img[int(i)].add(c)
        caption_queries = [g for g in by_img if g]
        keep = [i for i, g in enumerate(by_img) if g]
        caption_retrieval = rank_targets(scores.T[keep], caption_queries)
        return {"caption_retrieval": caption_retrieval, "image_retrieval": image_retrieval}

    def caption_caption_scores(self, cap_embs: np.ndarray) -> np.ndarray:
        """Scores for retrieving captions (candidates, lower) by caption
        queries (upper); used by the length-contrast analysis."""
        from .order import score_matrix

        if self.config.scorer is Scorer.COSINE:
            return score_matrix(Scorer.COSINE, cap_embs, cap_embs)
        if self.config.reverse_order:
            return score_matrix(Scorer.ORDER, cap_embs, cap_embs)
        return score_matrix(Scorer.ORDER, cap_embs, cap_embs).T


class EntailmentTask:
    """Shared GRU encoder over premise and hypothesis with labeled negatives."""

    TENSORS = {"word_table", *GRU_TENSOR_NAMES}

    def __init__(self, config: TrainConfig, vocab_size: int,
                 train: list[EntailPair] | None = None,
                 dev: list[EntailPair] | None = None,
                 tensors: dict[str, np.ndarray] | None = None):
        if config.task != "entailment":
            raise ContractError(f"config is for task {config.task!r}")
        self.config = config
        self.train = list(train or [])
        self.dev = list(dev or [])
        self.rng = Rng(config.seed)
        init_rng = self.rng.spawn(1)
        if tensors is None:
            self.encoder = GruEncoder.create(init_rng, vocab_size, config.word_dim,
                                             config.dim, config.normalize)
        else:
            _require_tensors_dict(tensors, self.TENSORS)
            word = EmbeddingTable(tensors["word_table"].copy())
            if word.vocab_size != vocab_size:
                raise CheckpointVersionError(
                    f"checkpoint vocabulary size {word.vocab_size} does not "
                    f"match the supplied vocabulary ({vocab_size})"
                )
            weights = {n: tensors[n].copy() for n in GRU_TENSOR_NAMES}
            self.encoder = GruEncoder(word_table=word, weights=weights,
                                      normalize=config.normalize)
        named = {"word_table": self.encoder.word_table.weights}
        named.update(self.encoder.weights)
        self.params = _Params(named, lr=config.lr)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, vocab_size: int,
                        train=None, dev=None) -> "EntailmentTask":
        _require_tensors(ckpt, cls.TENSORS)
        from .training import config_from_strings

        config = config_from_strings(ckpt.config)
        return cls(config, vocab_size, train=train, dev=dev, tensors=ckpt.tensors)

    # -- training protocol -------------------------------------------------

    def epoch_batches(self, epoch: int):
        """Stratified shuffle: positives and negatives are interleaved
        proportionally so every batch sees both classes (the loss requires
        it)."""
        pos = [p for p in self.train if p.label]
        neg = [p for p in self.train if not p.label]
        if not pos or not neg:
            raise ContractError("entailment training needs both labels present")
        pos = [pos[i] for i in self.rng.permutation(len(pos))]
        neg = [neg[i] for i in self.rng.permutation(len(neg))]
        merged: list[EntailPair] = []
        ip = ineg = 0
        total = len(pos) + len(neg)
        for k in range(total):
            # largest-remainder interleave keeps the class ratio within every prefix
            take_pos = ip * total <= k * len(pos) and ip < len(pos)
            if take_pos:
                merged.append(pos[ip])
                ip += 1
            elif ineg < len(neg):
                merged.append(neg[ineg])
                ineg += 1
            else:
                merged.append(pos[ip])
                ip += 1
        for i0 in range(0, total, self.config.batch):
            chunk = merged[i0:i0 + self.config.batch]
            if any(p.label for p in chunk) and any(not p.label for p in chunk):
                yield chunk

    def train_batch(self, chunk: list[EntailPair]) -> float:
        prem_embs, prem_caches = _encode_all(self.encoder, [p.premise for p in chunk])
        hyp_embs, hyp_caches = _encode_all(self.encoder, [p.hypothesis for p in chunk])
        labels = np.array([p.label for p in chunk], dtype=bool)
        pos_idx = np.where(labels)[0]
        neg_idx = np.where(~labels)[0]
        loss, dpp, dph, dnp, dnh = entailment_loss(
            prem_embs[pos_idx], hyp_embs[pos_idx],
            prem_embs[neg_idx], hyp_embs[neg_idx],
            self.config.margin, self.config.scorer,
        )
        d_prem = np.zeros_like(prem_embs)
        d_hyp = np.zeros_like(hyp_embs)
        d_prem[pos_idx] = dpp
        d_hyp[pos_idx] = dph
        d_prem[neg_idx] = dnp
        d_hyp[neg_idx] = dnh
        grads = self.params.zero_grads()
        for row in range(len(chunk)):
            self.encoder.backward(d_prem[row], prem_caches[row], grads, grads["word_table"])
            self.encoder.backward(d_hyp[row], hyp_caches[row], grads, grads["word_table"])
        self.params.step(grads, self.config.clip_norm)
        return loss

    def dev_metric(self) -> float:
        if not self.dev:
            return 0.0
        scored = self.scored_pairs(self.dev)
        threshold = tune_threshold(scored)
        return binary_accuracy(scored, threshold)

    def make_checkpoint(self, epoch: int, metric: float) -> Checkpoint:
        return Checkpoint(task="entailment", config=self.config.to_dict(),
                          epoch=epoch, dev_metric=metric,
                          tensors=self.params.snapshot())

    # -- evaluation ---------------------------------------------------------

    def pair_distances(self, pairs: list[EntailPair]) -> np.ndarray:
        prem, _ = _encode_all(self.encoder, [p.premise for p in pairs])
        hyp, _ = _encode_all(self.encoder, [p.hypothesis for p in pairs])
        if self.config.scorer is Scorer.ORDER:
            from .order import penalty_rows

            return penalty_rows(prem, hyp)
        from .order import cosine_rows

        return 1.0 - cosine_rows(prem, hyp)

    def scored_pairs(self, pairs: list[EntailPair]) -> list[ScoredPair]:
        dists = self.pair_distances(pairs)
        return [ScoredPair(float(d), p.label) for d, p in zip(dists, pairs)]


def _encode_all(encoder: GruEncoder, token_lists):
    embs = np.empty((len(token_lists), encoder.hidden), dtype=np.float64)
    caches = []
    for row, tokens in enumerate(token_lists):
        out, cache = encoder.encode_with_cache(tokens)
        embs[row] = out
        caches.append(cache)
    return embs, caches
