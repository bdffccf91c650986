"""Command-line interface: the full pipeline as noun-verb subcommands.

All paths are explicit flags; logs go to standard error and data/metrics to
files or standard output, so every run is scriptable. Exit codes: 0 success,
1 usage/contract error, 2 data or format error, 3 numeric failure.
"""

from __future__ import annotations

import logging
import os
import sys

import click
import numpy as np

from . import dataio, evaluation, synthetic, taxonomy
from .encoders import UNK_TOKEN, Vocabulary
from .errors import ContractError, DataFormatError, NumericError, OrderembError
from .evaluation import ScoredPair, binary_accuracy, tune_threshold, write_report
from .numerics import Rng
from .order import Scorer
from .tasks import EntailmentTask, HypernymTask, RetrievalTask
from .training import TrainConfig, run_epochs

logger = logging.getLogger("orderemb")

_NEG_SEED_SALT = 9


def _seed_fallback(seed):
    """Flag value wins; OE_SEED is the environment fallback."""
    if seed is not None:
        return seed
    env = os.environ.get("OE_SEED")
    return int(env) if env else None


def _load_config(path, task, **overrides):
    overrides["seed"] = _seed_fallback(overrides.get("seed"))
    if path:
        cfg = TrainConfig.from_file(path, **overrides)
    else:
        cfg = TrainConfig(task=task).updated(**overrides)
    if cfg.task != task:
        logger.warning("config declares task %r; forcing %r for this subcommand",
                       cfg.task, task)
        cfg = cfg.updated(task=task)
    return cfg


def _epoch_logger(epoch, train_loss, dev_metric):
    print(f"{epoch}\t{train_loss!r}\t{dev_metric!r}", file=sys.stderr)


_train_opts = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--dim", type=int, default=None),
    click.option("--word-dim", type=int, default=None),
    click.option("--margin", type=float, default=None),
    click.option("--lr", type=float, default=None),
    click.option("--batch", type=int, default=None),
    click.option("--epochs", "max_epochs", type=int, default=None),
    click.option("--patience", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--normalize/--no-normalize", default=None),
    click.option("--scorer", type=click.Choice(["order", "cosine"]), default=None),
    click.option("--reverse-order", is_flag=True, default=None),
    click.option("--clip-norm", type=float, default=None),
]


def _with_train_opts(fn):
    for opt in reversed(_train_opts):
        fn = opt(fn)
    return fn


def _config_overrides(kw):
    keys = ("dim", "word_dim", "margin", "lr", "batch", "max_epochs", "patience",
            "seed", "normalize", "scorer", "reverse_order", "clip_norm")
    out = {k: kw[k] for k in keys if kw.get(k) is not None}
    if "scorer" in out:
        out["scorer"] = Scorer(out["scorer"])
    return out


@click.group()
def cli():
    """Order-embedding toolkit: taxonomies, retrieval, and entailment."""


# ---------------------------------------------------------------- taxonomy

@cli.group("taxonomy")
def taxonomy_grp():
    """Build closures, splits, and evaluation negatives."""


@taxonomy_grp.command("closure")
@click.option("--edges", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def taxonomy_closure(edges, out):
    """Materialize the transitive closure of an edge list."""
    tax = taxonomy.build(taxonomy.read_edge_file(edges))
    pairs = sorted(tax.closure())
    names = tax.concepts
    taxonomy.write_edge_file(out, [(names[c], names[p]) for c, p in pairs])
    print(f"{len(pairs)} closure pairs over {tax.n_concepts} concepts",
          file=sys.stderr)


@taxonomy_grp.command("split")
@click.option("--closure", "closure_path", required=True, type=click.Path(exists=True))
@click.option("--dev", "n_dev", required=True, type=int)
@click.option("--test", "n_test", required=True, type=int)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def taxonomy_split(closure_path, n_dev, n_test, seed, out):
    """Randomly partition closure pairs into train/dev/test sections."""
    seed = _seed_fallback(seed) or 0
    pairs = taxonomy.read_edge_file(closure_path)
    names = sorted({n for pr in pairs for n in pr})
    index = {n: i for i, n in enumerate(names)}
    closure = {(index[c], index[p]) for c, p in pairs}
    es = taxonomy.split(closure, n_dev, n_test, seed)
    taxonomy.write_split_file(out, names, es)


@taxonomy_grp.command("negatives")
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--section", type=click.Choice(["dev", "test"]), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def taxonomy_negatives(split_path, section, seed, out):
    """One closure-filtered corruption per positive in a split section."""
    seed = _seed_fallback(seed) or 0
    names, sections, closure = _read_split(split_path)
    positives = sections[section]
    salt = _NEG_SEED_SALT + (0 if section == "dev" else 1)
    negs = taxonomy.eval_negatives(positives, len(names), Rng(seed).spawn(salt), closure)
    taxonomy.write_labeled_file(out, names, negs)


def _read_split(split_path):
    """Split file -> (names, index-pair sections, full closure set)."""
    raw = taxonomy.read_split_file(split_path)
    names = sorted({n for sec in raw.values() for pr in sec for n in pr})
    index = {n: i for i, n in enumerate(names)}
    sections = {
        key: [(index[c], index[p]) for c, p in raw[key]] for key in ("train", "dev", "test")
    }
    closure = {p for sec in sections.values() for p in sec}
    return names, sections, closure


def _section_negatives(path, names, sections, closure, section, seed):
    if path:
        index = {n: i for i, n in enumerate(names)}
        return [taxonomy.LabeledPair(index[c], index[p], lab)
                for c, p, lab in taxonomy.read_labeled_file(path) if not lab]
    rng = Rng(seed).spawn(_NEG_SEED_SALT + (0 if section == "dev" else 1))
    return taxonomy.eval_negatives(sections[section], len(names), rng, closure)


# ---------------------------------------------------------------- hypernym

@cli.group("hypernym")
def hypernym_grp():
    """Train and evaluate concept-table order embeddings."""


@hypernym_grp.command("train")
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--dev-negatives", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@_with_train_opts
def hypernym_train(split_path, dev_negatives, out, config_path, **kw):
    """Fit concept embeddings on the train section of a closure split."""
    cfg = _load_config(config_path, "hypernym", **_config_overrides(kw))
    names, sections, closure = _read_split(split_path)
    dev_neg = _section_negatives(dev_negatives, names, sections, closure, "dev", cfg.seed)
    task = HypernymTask(cfg, len(names), sections["train"],
                        dev_pos=sections["dev"], dev_neg=dev_neg)
    best = run_epochs(cfg, task, log=_epoch_logger)
    dataio.save_checkpoint(best, out)
    print(f"best epoch {best.epoch} dev metric {best.dev_metric!r}", file=sys.stderr)


@hypernym_grp.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--dev-negatives", type=click.Path(exists=True), default=None)
@click.option("--test-negatives", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--baseline/--no-baseline", default=True,
              help="also report the transitive-closure baseline")
@click.option("--report", required=True, type=click.Path())
def hypernym_eval(checkpoint, split_path, dev_negatives, test_negatives, seed,
                  baseline, report):
    """Tune the threshold on dev, then score the test section."""
    seed = _seed_fallback(seed) or 0
    names, sections, closure = _read_split(split_path)
    ckpt = dataio.load_checkpoint(checkpoint, expected_task="hypernym")
    task = HypernymTask.from_checkpoint(ckpt, len(names))
    dev_neg = _section_negatives(dev_negatives, names, sections, closure, "dev", seed)
    test_neg = _section_negatives(test_negatives, names, sections, closure, "test", seed)

    dev_scored = task.scored_pairs(sections["dev"], True) + \
        task.scored_pairs([(p.child, p.parent) for p in dev_neg], False)
    threshold = tune_threshold(dev_scored)
    test_scored = task.scored_pairs(sections["test"], True) + \
        task.scored_pairs([(p.child, p.parent) for p in test_neg], False)
    metrics = {
        "threshold": threshold,
        "dev_accuracy": binary_accuracy(dev_scored, threshold),
        "test_accuracy": binary_accuracy(test_scored, threshold),
    }
    if baseline:
        known = taxonomy.close_pairs(set(sections["train"]) | set(sections["dev"]))
        correct = sum(1 for q in sections["test"]
                      if taxonomy.closure_baseline_classify(known, q))
        correct += sum(1 for p in test_neg
                       if not taxonomy.closure_baseline_classify(known, (p.child, p.parent)))
        metrics["baseline_accuracy"] = 100.0 * correct / (len(sections["test"]) + len(test_neg))
    write_report(report, metrics)
    print("\n".join(f"{k}\t{v!r}" for k, v in metrics.items()))


# ---------------------------------------------------------------- retrieval

@cli.group("retrieval")
def retrieval_grp():
    """Train and evaluate caption-image retrieval."""


def _load_corpus(captions, features, vocab: Vocabulary) -> dataio.RetrievalCorpus:
    return dataio.RetrievalCorpus.assemble(
        dataio.load_captions(captions, vocab), dataio.load_features(features)
    )


@retrieval_grp.command("train")
@click.option("--captions", required=True, type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--dev-captions", required=True, type=click.Path(exists=True))
@click.option("--dev-features", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_with_train_opts
def retrieval_train(captions, features, dev_captions, dev_features, vocab_path,
                    out, config_path, **kw):
    """Fit the caption encoder and image projection with the ranking loss."""
    cfg = _load_config(config_path, "retrieval", **_config_overrides(kw))
    vocab = Vocabulary.load(vocab_path)
    train = _load_corpus(captions, features, vocab)
    dev = _load_corpus(dev_captions, dev_features, vocab)
    task = RetrievalTask(cfg, len(vocab), train.features.feat_dim, train=train, dev=dev)
    best = run_epochs(cfg, task, log=_epoch_logger)
    dataio.save_checkpoint(best, out)
    print(f"best epoch {best.epoch} dev metric {best.dev_metric!r}", file=sys.stderr)


@retrieval_grp.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--captions", required=True, type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--scorer", type=click.Choice(["order", "cosine"]), default=None)
@click.option("--reverse-order/--forward-order", default=None)
@click.option("--folds", type=int, default=None,
              help="average metrics over contiguous image folds")
@click.option("--fold-size", type=int, default=1000)
@click.option("--length-contrast", "length_n", type=int, default=None)
@click.option("--threads", type=int, default=1)
@click.option("--report", required=True, type=click.Path())
def retrieval_eval(checkpoint, captions, features, vocab_path, scorer,
                   reverse_order, folds, fold_size, length_n, threads, report):
    """Recall@K, median/mean rank; optional fold-averaged protocol and the
    caption-length contrast analysis."""
    vocab = Vocabulary.load(vocab_path)
    corpus = _load_corpus(captions, features, vocab)
    ckpt = dataio.load_checkpoint(checkpoint, expected_task="retrieval")
    task = RetrievalTask.from_checkpoint(ckpt, len(vocab), corpus.features.feat_dim)
    overrides = {}
    if scorer is not None:
        overrides["scorer"] = Scorer(scorer)
    if reverse_order is not None:
        overrides["reverse_order"] = reverse_order
    if overrides:
        task.config = task.config.updated(**overrides)

    metrics: dict[str, float] = {}
    res = task.evaluate(corpus, threads=threads)
    _merge_rank_metrics(metrics, "caption_retrieval", res["caption_retrieval"])
    _merge_rank_metrics(metrics, "image_retrieval", res["image_retrieval"])
    if folds:
        scores = task.score_corpus(corpus, threads=threads)
        fold_res = evaluation.five_fold_1k(scores, corpus.caption_image,
                                           fold_size=fold_size)
        _merge_rank_metrics(metrics, "fold_caption_retrieval",
                            fold_res["caption_retrieval"])
        _merge_rank_metrics(metrics, "fold_image_retrieval",
                            fold_res["image_retrieval"])
    if length_n:
        cap_embs, img_embs = task.embed_corpus(corpus)
        from .tasks import caption_image_scores

        cap_scores = caption_image_scores(cap_embs, img_embs, task.config.scorer,
                                          task.config.reverse_order, threads=threads)
        cc_scores = task.caption_caption_scores(cap_embs)
        lengths = [len(c.tokens) for c in corpus.captions]
        lc = evaluation.length_contrast(cap_scores, cc_scores, lengths,
                                        corpus.caption_image, top_n=length_n)
        metrics["length_contrast_pairs"] = float(lc.n_pairs)
        metrics["length_contrast_short_query_mean_rank"] = lc.short_query_mean_rank
        metrics["length_contrast_long_query_mean_rank"] = lc.long_query_mean_rank
        metrics["length_contrast_caption_mean_rank"] = lc.caption_mean_rank
    write_report(report, metrics)
    print("\n".join(f"{k}\t{v!r}" for k, v in metrics.items()))


def _merge_rank_metrics(metrics, prefix, rr):
    for k, v in rr.recall.items():
        metrics[f"{prefix}_r@{k}"] = v
    metrics[f"{prefix}_median_rank"] = rr.median_rank
    metrics[f"{prefix}_mean_rank"] = rr.mean_rank


# ---------------------------------------------------------------- entailment

@cli.group("entail")
def entail_grp():
    """Train and evaluate two-class textual entailment."""


@entail_grp.command("train")
@click.option("--pairs", required=True, type=click.Path(exists=True))
@click.option("--dev-pairs", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_with_train_opts
def entail_train(pairs, dev_pairs, vocab_path, out, config_path, **kw):
    """Fit the shared sentence encoder on labeled premise/hypothesis pairs."""
    cfg = _load_config(config_path, "entailment", **_config_overrides(kw))
    vocab = Vocabulary.load(vocab_path)
    train = dataio.load_entail(pairs, vocab)
    dev = dataio.load_entail(dev_pairs, vocab)
    task = EntailmentTask(cfg, len(vocab), train=train, dev=dev)
    best = run_epochs(cfg, task, log=_epoch_logger)
    dataio.save_checkpoint(best, out)
    print(f"best epoch {best.epoch} dev metric {best.dev_metric!r}", file=sys.stderr)


@entail_grp.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--dev-pairs", required=True, type=click.Path(exists=True))
@click.option("--pairs", "test_pairs", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--report", required=True, type=click.Path())
def entail_eval(checkpoint, dev_pairs, test_pairs, vocab_path, report):
    """Tune the threshold on dev pairs, then report test accuracy."""
    vocab = Vocabulary.load(vocab_path)
    ckpt = dataio.load_checkpoint(checkpoint, expected_task="entailment")
    task = EntailmentTask.from_checkpoint(ckpt, len(vocab))
    dev = dataio.load_entail(dev_pairs, vocab)
    test = dataio.load_entail(test_pairs, vocab)
    threshold = tune_threshold(task.scored_pairs(dev))
    metrics = {
        "threshold": threshold,
        "dev_accuracy": binary_accuracy(task.scored_pairs(dev), threshold),
        "test_accuracy": binary_accuracy(task.scored_pairs(test), threshold),
    }
    write_report(report, metrics)
    print("\n".join(f"{k}\t{v!r}" for k, v in metrics.items()))


# ---------------------------------------------------------------- vocab

@cli.group("vocab")
def vocab_grp():
    """Vocabulary files (one token per line, <unk> first)."""


@vocab_grp.command("build")
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["captions", "entailment"]), required=True)
@click.option("--min-count", type=int, default=1)
@click.option("--out", required=True, type=click.Path())
def vocab_build(inputs, kind, min_count, out):
    """Count tokens in data files and write a frequency-sorted vocabulary."""
    import json as _json

    def token_lists():
        for path in inputs:
            with open(path, encoding="utf-8") as fh:
                for ln, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    if kind == "captions":
                        try:
                            yield dataio.tokenize(_json.loads(line)["caption"])
                        except (KeyError, ValueError) as exc:
                            raise DataFormatError(f"{path}:{ln}: {exc}") from exc
                    else:
                        parts = line.split("\t")
                        if len(parts) != 3:
                            raise DataFormatError(
                                f"{path}:{ln}: expected `label<TAB>premise<TAB>hypothesis`"
                            )
                        yield dataio.tokenize(parts[1])
                        yield dataio.tokenize(parts[2])

    vocab = dataio.build_vocab(token_lists(), min_count=min_count)
    vocab.save(out)
    print(f"{len(vocab)} tokens", file=sys.stderr)


# ---------------------------------------------------------------- algebra

@cli.group("algebra")
def algebra_grp():
    """Lattice operations on learned embeddings."""


def _algebra_common(op, model, vocab_path, edges, inputs, k):
    ckpt = dataio.load_checkpoint(model)
    if "concept_table" in ckpt.tensors:
        table = np.abs(ckpt.tensors["concept_table"])
        if not edges:
            raise ContractError("a hypernym checkpoint needs --edges to name concepts")
        tax = taxonomy.build(taxonomy.read_edge_file(edges))
        names = tax.concepts
        ids = []
        for tok in inputs:
            try:
                ids.append(tax.index(tok))
            except KeyError:
                raise ContractError(f"unknown concept {tok!r}") from None
    elif "word_table" in ckpt.tensors:
        table = np.abs(ckpt.tensors["word_table"])
        if not vocab_path:
            raise ContractError("this checkpoint needs --vocab to name tokens")
        vocab = Vocabulary.load(vocab_path)
        ids = []
        for tok in inputs:
            if tok not in vocab:
                logger.warning("unknown token %r mapped to %s", tok, UNK_TOKEN)
            ids.append(vocab.id(tok))
        names = vocab.tokens
    else:
        raise DataFormatError("checkpoint holds no embedding table")
    if table.shape[0] != len(names):
        raise ContractError(
            f"checkpoint table has {table.shape[0]} rows but {len(names)} names given"
        )
    vecs = table[ids]
    result = vecs.min(axis=0) if op == "join" else vecs.max(axis=0)
    print(f"result\tdim={result.size}\tnorm={float(np.linalg.norm(result))!r}")
    from .kernels import penalty_matrix

    above = penalty_matrix(result[None, :], table)[0]   # penalty(result, cand)
    below = penalty_matrix(table, result[None, :])[:, 0]  # penalty(cand, result)
    for tag, pens in (("above", above), ("below", below)):
        order = np.argsort(pens, kind="stable")[:k]
        for idx in order:
            print(f"{tag}\t{names[int(idx)]}\t{float(pens[int(idx)])!r}")


@algebra_grp.command("join")
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--edges", type=click.Path(exists=True), default=None)
@click.option("--k", type=int, default=5)
@click.argument("inputs", nargs=-1, required=True)
def algebra_join(model, vocab_path, edges, k, inputs):
    """Least upper bound (elementwise min) of the inputs, with neighbors."""
    _algebra_common("join", model, vocab_path, edges, inputs, k)


@algebra_grp.command("meet")
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--edges", type=click.Path(exists=True), default=None)
@click.option("--k", type=int, default=5)
@click.argument("inputs", nargs=-1, required=True)
def algebra_meet(model, vocab_path, edges, k, inputs):
    """Greatest lower bound (elementwise max) of the inputs, with neighbors."""
    _algebra_common("meet", model, vocab_path, edges, inputs, k)


# ---------------------------------------------------------------- synth

@cli.group("synth")
def synth_grp():
    """Generate desk-scale surrogate datasets in the loaders' formats."""


@synth_grp.command("dag")
@click.option("--nodes", required=True, type=int)
@click.option("--edge-prob", type=float, default=0.3)
@click.option("--levels", type=int, default=3)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def synth_dag(nodes, edge_prob, levels, seed, out):
    """Random layered DAG written as a `child<TAB>parent` edge list."""
    seed = _seed_fallback(seed) or 0
    tax = synthetic.gen_dag(nodes, edge_prob, seed, n_levels=levels)
    names = tax.concepts
    taxonomy.write_edge_file(out, [(names[c], names[p])
                                   for c, p in sorted(tax.direct_edges)])
    print(f"{len(tax.direct_edges)} edges over {tax.n_concepts} concepts",
          file=sys.stderr)


@synth_grp.command("two-level")
@click.option("--images", required=True, type=int)
@click.option("--dev-images", type=int, default=0)
@click.option("--test-images", type=int, default=0)
@click.option("--captions-per-image", type=int, default=2)
@click.option("--levels", type=int, default=2)
@click.option("--desc-len", type=int, default=8)
@click.option("--n-abstract", type=int, default=2)
@click.option("--abstract-vocab", type=int, default=24)
@click.option("--specific-vocab", type=int, default=2000)
@click.option("--feat-dim", type=int, default=64)
@click.option("--noise", type=float, default=0.1)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def synth_two_level(images, dev_images, test_images, captions_per_image, levels,
                    desc_len, n_abstract, abstract_vocab, specific_vocab,
                    feat_dim, noise, seed, out_dir):
    """Caption/image corpus splits sharing one token signature space."""
    seed = _seed_fallback(seed) or 0
    os.makedirs(out_dir, exist_ok=True)
    kwargs = dict(
        captions_per_image=captions_per_image, abstraction_levels=levels,
        desc_len=desc_len, n_abstract=n_abstract, abstract_vocab=abstract_vocab,
        specific_vocab=specific_vocab, feat_dim=feat_dim, noise=noise,
        signature_seed=seed,
    )
    splits = [("train", images, seed)]
    if dev_images:
        splits.append(("dev", dev_images, seed + 1))
    if test_images:
        splits.append(("test", test_images, seed + 2))
    for name, count, split_seed in splits:
        corpus = synthetic.gen_two_level(count, seed=split_seed, **kwargs)
        synthetic.write_two_level(
            corpus,
            os.path.join(out_dir, f"{name}_captions.jsonl"),
            os.path.join(out_dir, f"{name}_features.oef"),
            vocab_path=os.path.join(out_dir, "vocab.txt") if name == "train" else None,
        )
    print(f"wrote {', '.join(s[0] for s in splits)} under {out_dir}", file=sys.stderr)


@synth_grp.command("entailment")
@click.option("--pairs", required=True, type=int)
@click.option("--max-len", type=int, default=12)
@click.option("--vocab-size", type=int, default=200)
@click.option("--dev-frac", type=float, default=0.1)
@click.option("--test-frac", type=float, default=0.1)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def synth_entailment(pairs, max_len, vocab_size, dev_frac, test_frac, seed, out_dir):
    """Deletion-entailment pair splits plus their vocabulary."""
    seed = _seed_fallback(seed) or 0
    if dev_frac + test_frac >= 1.0:
        raise ContractError("dev and test fractions must leave room for train")
    os.makedirs(out_dir, exist_ok=True)
    generated, vocab_tokens = synthetic.gen_entailment(pairs, max_len, seed,
                                                       vocab_size=vocab_size)
    n_dev = int(pairs * dev_frac)
    n_test = int(pairs * test_frac)
    n_train = pairs - n_dev - n_test
    chunks = {
        "train": generated[:n_train],
        "dev": generated[n_train:n_train + n_dev],
        "test": generated[n_train + n_dev:],
    }
    for name, chunk in chunks.items():
        if chunk:
            synthetic.write_entailment(chunk, os.path.join(out_dir, f"{name}.tsv"))
    with open(os.path.join(out_dir, "vocab.txt"), "w", encoding="utf-8") as fh:
        for t in vocab_tokens:
            fh.write(t + "\n")
    print(f"wrote {len(generated)} pairs under {out_dir}", file=sys.stderr)


# ---------------------------------------------------------------- entry point

def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        print("aborted", file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OrderembError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
