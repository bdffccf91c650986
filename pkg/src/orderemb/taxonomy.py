"""Hypernym taxonomy: DAG construction, transitive closure, edge splits,
corruption-based negative sampling, and the no-learning closure baseline.

Concepts are indexed by sorted name, so identical edge lists always produce
identical indices. Pairs are ordered (child_index, parent_index): the child
is the more specific concept and sits below the parent in the hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError, CycleError, DataFormatError, SamplingError
from .numerics import Rng

__all__ = [
    "Taxonomy",
    "EdgeSplit",
    "LabeledPair",
    "build",
    "close_pairs",
    "split",
    "sample_negative",
    "eval_negatives",
    "closure_baseline_classify",
    "read_edge_file",
    "write_edge_file",
    "read_split_file",
    "write_split_file",
    "read_labeled_file",
    "write_labeled_file",
]

_MAX_RESAMPLE = 100


@dataclass
class LabeledPair:
    child: int
    parent: int
    label: bool


@dataclass
class EdgeSplit:
    """Disjoint train/dev/test partition of a closure's ordered pairs."""

    train: set[tuple[int, int]]
    dev: set[tuple[int, int]]
    test: set[tuple[int, int]]
    seed: int


@dataclass
class Taxonomy:
    """Immutable-after-build DAG over named concepts."""

    concepts: list[str]
    direct_edges: set[tuple[int, int]]
    parents: list[list[int]] = field(repr=False)
    topo_order: list[int] = field(repr=False)  # every parent before its children
    _closure: set[tuple[int, int]] | None = field(default=None, repr=False)

    @property
    def n_concepts(self) -> int:
        return len(self.concepts)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except AttributeError:
            self._index = {c: i for i, c in enumerate(self.concepts)}
            return self._index[name]

    def closure(self) -> set[tuple[int, int]]:
        """Transitive closure of the direct edges, materialized lazily."""
        if self._closure is None:
            self._closure = _close(self.n_concepts, self.parents, self.topo_order)
        return self._closure


def build(edges: list[tuple[str, str]]) -> Taxonomy:
    """Index the named edge list and verify acyclicity.

    Duplicate edges are silently merged; a directed cycle raises CycleError
    naming one offending cycle.
    """
    if not edges:
        raise ContractError("edge list is empty")
    names = sorted({n for e in edges for n in e})
    index = {n: i for i, n in enumerate(names)}
    direct = {(index[c], index[p]) for c, p in edges}
    parents: list[list[int]] = [[] for _ in names]
    for c, p in sorted(direct):
        parents[c].append(p)
    topo = _toposort(len(names), parents, names)
    return Taxonomy(concepts=names, direct_edges=direct, parents=parents, topo_order=topo)


def _toposort(n: int, parents: list[list[int]], names: list[str] | None = None) -> list[int]:
    """Order nodes so every parent precedes all of its descendants.

    Iterative three-color DFS along parent links; a gray revisit is a cycle.
    """
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * n
    order: list[int] = []
    for root in range(n):
        if color[root] != WHITE:
            continue
        stack = [(root, 0)]
        path = [root]
        color[root] = GRAY
        while stack:
            node, i = stack[-1]
            if i < len(parents[node]):
                stack[-1] = (node, i + 1)
                nxt = parents[node][i]
                if color[nxt] == GRAY:
                    cycle = path[path.index(nxt):] + [nxt]
                    if names is not None:
                        cycle = [names[c] for c in cycle]
                    raise CycleError(cycle)
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
                    path.append(nxt)
            else:
                stack.pop()
                path.pop()
                color[node] = BLACK
                order.append(node)
    return order


def _close(n: int, parents: list[list[int]], topo: list[int]) -> set[tuple[int, int]]:
    """Memoized reachable-set closure: one ancestor set per node, built in
    topological order so each parent's set is final before it is merged."""
    reach: list[set[int] | None] = [None] * n
    pairs: set[tuple[int, int]] = set()
    for u in topo:
        s: set[int] = set()
        for p in parents[u]:
            s.add(p)
            s |= reach[p]  # type: ignore[arg-type]
        reach[u] = s
        for v in s:
            pairs.add((u, v))
    return pairs


def close_pairs(pairs: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Transitive closure of an arbitrary acyclic ordered-pair set."""
    if not pairs:
        return set()
    nodes = sorted({x for pr in pairs for x in pr})
    remap = {x: i for i, x in enumerate(nodes)}
    parents: list[list[int]] = [[] for _ in nodes]
    for c, p in sorted(pairs):
        parents[remap[c]].append(remap[p])
    topo = _toposort(len(nodes), parents, [str(x) for x in nodes])
    closed = _close(len(nodes), parents, topo)
    return {(nodes[c], nodes[p]) for c, p in closed}


def split(closure: set[tuple[int, int]], n_dev: int, n_test: int, seed: int) -> EdgeSplit:
    """Uniformly sample disjoint dev/test pair sets; the rest is train."""
    if n_dev < 0 or n_test < 0:
        raise ContractError("split sizes must be nonnegative")
    if n_dev + n_test >= len(closure):
        raise ContractError(
            f"requested dev+test = {n_dev + n_test} pairs but the closure "
            f"has only {len(closure)}"
        )
    ordered = sorted(closure)
    rng = Rng(seed)
    picked = rng.choice_many(len(ordered), n_dev + n_test, replace=False)
    dev = {ordered[i] for i in picked[:n_dev]}
    test = {ordered[i] for i in picked[n_dev:]}
    train = set(closure) - dev - test
    return EdgeSplit(train=train, dev=dev, test=test, seed=seed)


def sample_negative(pair: tuple[int, int], n_concepts: int, rng: Rng,
                    forbidden: set[tuple[int, int]] | None = None) -> LabeledPair:
    """Corrupt one side of a positive pair with a random concept.

    The corrupted side is chosen uniformly per attempt; self-pairs, the
    original pair, and anything in ``forbidden`` are rejected and resampled,
    up to a fixed cap.
    """
    if n_concepts < 2:
        raise ContractError(f"need at least 2 concepts, got {n_concepts}")
    u, v = pair
    for _ in range(_MAX_RESAMPLE):
        side = rng.choice(2)
        repl = rng.choice(n_concepts)
        cand = (repl, v) if side == 0 else (u, repl)
        if cand == pair or cand[0] == cand[1]:
            continue
        if forbidden is not None and cand in forbidden:
            continue
        return LabeledPair(child=cand[0], parent=cand[1], label=False)
    raise SamplingError(
        f"no valid corruption of {pair} found in {_MAX_RESAMPLE} tries "
        f"(degenerate taxonomy of {n_concepts} concepts)"
    )


def eval_negatives(positives: list[tuple[int, int]], n_concepts: int, rng: Rng,
                   closure: set[tuple[int, int]]) -> list[LabeledPair]:
    """One filtered corruption per evaluation positive.

    Unlike training negatives, these are rejected against the full closure so
    no stored "negative" is secretly a positive pair.
    """
    return [sample_negative(p, n_concepts, rng, forbidden=closure) for p in positives]


def closure_baseline_classify(known: set[tuple[int, int]], query: tuple[int, int]) -> bool:
    """True iff the query pair is in the transitive closure of ``known``.

    ``known`` is expected to already be transitively closed (use
    ``close_pairs`` on train+dev edges first); classification is then a set
    lookup.
    """
    return query in known


# File formats. Edge lists are UTF-8 TSV, one `child<TAB>parent` per line;
# split files hold three such sections headed #train/#dev/#test; labeled
# pair files carry a third 0|1 column.

def read_edge_file(path) -> list[tuple[str, str]]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataFormatError(f"{path}:{ln}: expected `child<TAB>parent`, got {line!r}")
            edges.append((parts[0], parts[1]))
    if not edges:
        raise DataFormatError(f"{path}: no edges found")
    return edges


def write_edge_file(path, edges: list[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c, p in edges:
            fh.write(f"{c}\t{p}\n")


def write_split_file(path, names: list[str], es: EdgeSplit) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for header, pairs in (("#train", es.train), ("#dev", es.dev), ("#test", es.test)):
            fh.write(header + "\n")
            for c, p in sorted(pairs):
                fh.write(f"{names[c]}\t{names[p]}\n")


def read_split_file(path) -> dict[str, list[tuple[str, str]]]:
    sections: dict[str, list[tuple[str, str]]] = {"train": [], "dev": [], "test": []}
    current: str | None = None
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                name = line[1:].strip()
                if name not in sections:
                    raise DataFormatError(f"{path}:{ln}: unknown section {line!r}")
                current = name
                continue
            if current is None:
                raise DataFormatError(f"{path}:{ln}: pair before any section header")
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{ln}: expected `child<TAB>parent`, got {line!r}")
            sections[current].append((parts[0], parts[1]))
    return sections


def write_labeled_file(path, names: list[str], pairs: list[LabeledPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lp in pairs:
            fh.write(f"{names[lp.child]}\t{names[lp.parent]}\t{1 if lp.label else 0}\n")


def read_labeled_file(path) -> list[tuple[str, str, bool]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise DataFormatError(
                    f"{path}:{ln}: expected `child<TAB>parent<TAB>0|1`, got {line!r}"
                )
            out.append((parts[0], parts[1], parts[2] == "1"))
    return out
