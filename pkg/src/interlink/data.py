"""Vocabularies, triplet storage, and paired sub-graph construction.

A domain pair consists of two entity vocabularies with an explicit list of
common entities, a shared predicate vocabulary, and disjoint train /
intra-test / inter-valid / inter-test triplet splits.  All sampling is
deterministic under the given seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Tuple

import numpy as np

from .errors import DataError

SCHEMA_VERSION = "1"


class Triplet(NamedTuple):
    head: int
    predicate: int
    tail: int


class TaggedTriplet(NamedTuple):
    """Triplet plus a domain tag.

    For intra-domain facts the tag is the domain of both endpoints; for
    inter-domain facts it is the domain of the head (the tail lies in the
    other domain).
    """

    triplet: Triplet
    domain: int


class Vocab:
    """Ordered name list with a dense 0-based integer index."""

    def __init__(self, names: Iterable[str]):
        self.names: List[str] = list(names)
        self.index: Dict[str, int] = {name: i for i, name in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise DataError("duplicate names in vocabulary")

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.names == other.names

    def __repr__(self) -> str:
        return f"Vocab({len(self.names)} names)"


class TripletStore:
    """Duplicate-free ordered collection of triplets with O(1) membership."""

    def __init__(self, triplets: Iterable[Triplet] = ()):
        seen = set()
        self.triplets: List[Triplet] = []
        for t in triplets:
            t = Triplet(*t)
            if t not in seen:
                seen.add(t)
                self.triplets.append(t)
        self.membership = frozenset(seen)

    def __len__(self) -> int:
        return len(self.triplets)

    def __contains__(self, t) -> bool:
        return tuple(t) in self.membership

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self.triplets)

    def __eq__(self, other) -> bool:
        return isinstance(other, TripletStore) and self.triplets == other.triplets

    def __repr__(self) -> str:
        return f"TripletStore({len(self)} triplets)"


class TaggedTripletStore:
    """Triplet store whose items carry a domain tag.

    ``kind`` is ``"intra"`` (both endpoints share the tagged domain) or
    ``"inter"`` (the tag is the head's domain, the tail is in the other).
    """

    def __init__(self, items: Iterable[TaggedTriplet] = (), kind: str = "intra"):
        if kind not in ("intra", "inter"):
            raise DataError(f"unknown tagged-store kind: {kind!r}")
        self.kind = kind
        seen = set()
        self.items: List[TaggedTriplet] = []
        for item in items:
            item = TaggedTriplet(Triplet(*item[0]), int(item[1]))
            if item not in seen:
                seen.add(item)
                self.items.append(item)
        self.membership = frozenset(seen)

    def directed(self) -> Iterator[Tuple[int, int, int, int, int]]:
        """Yield (head_domain, head, predicate, tail_domain, tail) rows."""
        for (h, p, t), d in self.items:
            if self.kind == "intra":
                yield (d, h, p, d, t)
            else:
                yield (d, h, p, 3 - d, t)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item) -> bool:
        return (tuple(item[0]), item[1]) in self.membership

    def __iter__(self) -> Iterator[TaggedTriplet]:
        return iter(self.items)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TaggedTripletStore)
            and self.kind == other.kind
            and self.items == other.items
        )

    def __repr__(self) -> str:
        return f"TaggedTripletStore({len(self)} {self.kind} triplets)"


@dataclass
class OverlapSpec:
    """Controls paired sub-graph sampling."""

    level: float
    target_size: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.level < 1.0:
            raise DataError(f"overlap level must be in [0, 1), got {self.level}")
        if self.target_size < 2:
            raise DataError(f"target_size must be >= 2, got {self.target_size}")


@dataclass
class DomainPair:
    """Two induced sub-graphs with shared predicates and explicit overlap."""

    vocab1: Vocab
    vocab2: Vocab
    predicates: Vocab
    common: List[Tuple[int, int]]
    train1: TripletStore
    train2: TripletStore
    intra_test: TaggedTripletStore
    inter_valid: TaggedTripletStore
    inter_test: TaggedTripletStore
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def n1(self) -> int:
        return len(self.vocab1)

    @property
    def n2(self) -> int:
        return len(self.vocab2)

    @property
    def num_predicates(self) -> int:
        return len(self.predicates)

    def train_store(self, domain: int) -> TripletStore:
        return self.train1 if domain == 1 else self.train2


def load_triplets(path: str) -> Tuple[Vocab, Vocab, TripletStore]:
    """Read a TSV fact file, building vocabularies in first-appearance order.

    Each non-empty line must be ``head<TAB>predicate<TAB>tail``.  Duplicate
    facts are collapsed.
    """
    ent_names: List[str] = []
    ent_index: Dict[str, int] = {}
    pred_names: List[str] = []
    pred_index: Dict[str, int] = {}
    triplets: List[Triplet] = []

    def ent_id(name: str) -> int:
        i = ent_index.get(name)
        if i is None:
            i = len(ent_names)
            ent_index[name] = i
            ent_names.append(name)
        return i

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected head<TAB>predicate<TAB>tail, "
                    f"got {len(parts)} fields"
                )
            h, p, t = parts
            pi = pred_index.get(p)
            if pi is None:
                pi = len(pred_names)
                pred_index[p] = pi
                pred_names.append(p)
            triplets.append(Triplet(ent_id(h), pi, ent_id(t)))

    if not triplets:
        raise DataError(f"{path}: no facts found")
    return Vocab(ent_names), Vocab(pred_names), TripletStore(triplets)


def sample_domain_pair(
    entities: Vocab,
    predicates: Vocab,
    store: TripletStore,
    spec: OverlapSpec,
) -> DomainPair:
    """Sample two induced sub-graphs with a controlled entity overlap.

    Common entities are drawn first, each domain is then grown disjointly to
    ``target_size`` entities, and the source triplets induced on the two
    entity sets are partitioned into intra/inter pools.  Predicates absent
    from either domain's intra pool are removed so both domains share one
    predicate set.  The inter pool is split 20% validation / 80% test and 5%
    of each intra pool is held out for intra-domain testing.
    """
    rng = np.random.default_rng(spec.seed)
    n_source = len(entities)
    if n_source < 2 * spec.target_size:
        raise DataError(
            f"source graph has {n_source} entities, need at least "
            f"{2 * spec.target_size} for two sub-graphs of {spec.target_size}"
        )

    n_common = int(round(spec.level * spec.target_size))
    n_excl = spec.target_size - n_common
    perm = rng.permutation(n_source)
    common_src = perm[:n_common]
    only1_src = perm[n_common : n_common + n_excl]
    only2_src = perm[n_common + n_excl : n_common + 2 * n_excl]

    in1 = np.zeros(n_source, dtype=bool)
    in2 = np.zeros(n_source, dtype=bool)
    in1[common_src] = in1[only1_src] = True
    in2[common_src] = in2[only2_src] = True

    # Induced triplets: both endpoints in one domain -> that domain's intra
    # pool; endpoints split across domains -> inter pool.  Triplets between
    # two common entities are visible in both domains; they are assigned to
    # one domain at random to keep the splits disjoint as fact sets.
    intra_pool = {1: [], 2: []}
    inter_pool: List[Tuple[Triplet, int]] = []  # (triplet, head domain)
    for trip in store:
        h, p, t = trip
        share1 = in1[h] and in1[t]
        share2 = in2[h] and in2[t]
        if share1 and share2:
            intra_pool[1 if rng.random() < 0.5 else 2].append(trip)
        elif share1:
            intra_pool[1].append(trip)
        elif share2:
            intra_pool[2].append(trip)
        elif in1[h] and in2[t]:
            inter_pool.append((trip, 1))
        elif in2[h] and in1[t]:
            inter_pool.append((trip, 2))

    preds1 = {p for _, p, _ in intra_pool[1]}
    preds2 = {p for _, p, _ in intra_pool[2]}
    shared_preds = sorted(preds1 & preds2)
    pred_local = {p: i for i, p in enumerate(shared_preds)}
    intra_pool = {
        d: [t for t in pool if t.predicate in pred_local]
        for d, pool in intra_pool.items()
    }
    inter_pool = [(t, d) for t, d in inter_pool if t.predicate in pred_local]

    order = {
        1: list(common_src) + list(only1_src),
        2: list(common_src) + list(only2_src),
    }
    local = {d: {src: j for j, src in enumerate(order[d])} for d in (1, 2)}
    vocab1 = Vocab(entities.names[i] for i in order[1])
    vocab2 = Vocab(entities.names[i] for i in order[2])
    pred_vocab = Vocab(predicates.names[p] for p in shared_preds)
    common = [(i, i) for i in range(n_common)]

    def relabel(trip: Triplet, head_domain: int, tail_domain: int) -> Triplet:
        return Triplet(
            local[head_domain][trip.head],
            pred_local[trip.predicate],
            local[tail_domain][trip.tail],
        )

    intra_local = {
        d: [relabel(t, d, d) for t in intra_pool[d]] for d in (1, 2)
    }
    inter_local = [
        TaggedTriplet(relabel(t, d, 3 - d), d) for t, d in inter_pool
    ]

    def hold_out(items: list, fraction: float) -> Tuple[list, list]:
        k = int(round(fraction * len(items)))
        chosen = rng.permutation(len(items))[:k]
        held_mask = np.zeros(len(items), dtype=bool)
        held_mask[chosen] = True
        held = [x for x, m in zip(items, held_mask) if m]
        kept = [x for x, m in zip(items, held_mask) if not m]
        return held, kept

    intra_test_items: List[TaggedTriplet] = []
    trains = {}
    for d in (1, 2):
        held, kept = hold_out(intra_local[d], 0.05)
        intra_test_items.extend(TaggedTriplet(t, d) for t in held)
        trains[d] = TripletStore(kept)

    valid_items, test_items = hold_out(inter_local, 0.20)

    meta = {
        "schema": SCHEMA_VERSION,
        "level": format(spec.level, "g"),
        "target_size": str(spec.target_size),
        "seed": str(spec.seed),
        "n1": str(len(vocab1)),
        "n2": str(len(vocab2)),
        "n_predicates": str(len(pred_vocab)),
        "n_common": str(n_common),
    }
    return DomainPair(
        vocab1=vocab1,
        vocab2=vocab2,
        predicates=pred_vocab,
        common=common,
        train1=trains[1],
        train2=trains[2],
        intra_test=TaggedTripletStore(intra_test_items, kind="intra"),
        inter_valid=TaggedTripletStore(valid_items, kind="inter"),
        inter_test=TaggedTripletStore(test_items, kind="inter"),
        meta=meta,
    )


_PAIR_FILES = (
    "entities1.txt",
    "entities2.txt",
    "predicates.txt",
    "common.tsv",
    "train1.tsv",
    "train2.tsv",
    "intra_test.tsv",
    "inter_valid.tsv",
    "inter_test.tsv",
    "meta.txt",
)


def save_domain_pair(pair: DomainPair, directory: str) -> None:
    """Write a domain pair as a directory of text files.

    The layout is one name per line for vocabularies (line number = id),
    tab-separated id triplets for the splits, and ``key=value`` metadata.
    Output is deterministic: saving the same pair twice is byte-identical.
    """
    os.makedirs(directory, exist_ok=True)

    def write_lines(name: str, lines: Iterable[str]) -> None:
        with open(os.path.join(directory, name), "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")

    write_lines("entities1.txt", pair.vocab1.names)
    write_lines("entities2.txt", pair.vocab2.names)
    write_lines("predicates.txt", pair.predicates.names)
    write_lines("common.tsv", (f"{i}\t{j}" for i, j in pair.common))
    for fname, st in (("train1.tsv", pair.train1), ("train2.tsv", pair.train2)):
        write_lines(fname, (f"{h}\t{p}\t{t}" for h, p, t in st))
    write_lines(
        "intra_test.tsv",
        (f"{h}\t{p}\t{t}\t{d}" for (h, p, t), d in pair.intra_test),
    )
    for fname, st in (
        ("inter_valid.tsv", pair.inter_valid),
        ("inter_test.tsv", pair.inter_test),
    ):
        write_lines(fname, (f"{h}\t{p}\t{t}\t{d}" for (h, p, t), d in st))
    write_lines("meta.txt", (f"{k}={v}" for k, v in sorted(pair.meta.items())))


def load_domain_pair(directory: str) -> DomainPair:
    """Load a domain pair saved by :func:`save_domain_pair`."""
    for fname in _PAIR_FILES:
        if not os.path.isfile(os.path.join(directory, fname)):
            raise DataError(f"missing file in domain-pair directory: {fname}")

    def read_lines(name: str) -> List[str]:
        with open(os.path.join(directory, name), "r", encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line != "\n"]

    meta: Dict[str, str] = {}
    for line in read_lines("meta.txt"):
        key, _, value = line.partition("=")
        meta[key] = value
    if meta.get("schema") != SCHEMA_VERSION:
        raise DataError(
            f"unsupported domain-pair schema {meta.get('schema')!r}, "
            f"expected {SCHEMA_VERSION!r}"
        )

    def read_triplets(name: str) -> TripletStore:
        return TripletStore(
            Triplet(*map(int, line.split("\t"))) for line in read_lines(name)
        )

    def read_tagged(name: str, kind: str) -> TaggedTripletStore:
        items = []
        for line in read_lines(name):
            h, p, t, d = map(int, line.split("\t"))
            items.append(TaggedTriplet(Triplet(h, p, t), d))
        return TaggedTripletStore(items, kind=kind)

    common = [
        (int(a), int(b))
        for a, b in (line.split("\t") for line in read_lines("common.tsv"))
    ]
    return DomainPair(
        vocab1=Vocab(read_lines("entities1.txt")),
        vocab2=Vocab(read_lines("entities2.txt")),
        predicates=Vocab(read_lines("predicates.txt")),
        common=common,
        train1=read_triplets("train1.tsv"),
        train2=read_triplets("train2.tsv"),
        intra_test=read_tagged("intra_test.tsv", "intra"),
        inter_valid=read_tagged("inter_valid.tsv", "inter"),
        inter_test=read_tagged("inter_test.tsv", "inter"),
        meta=meta,
    )
