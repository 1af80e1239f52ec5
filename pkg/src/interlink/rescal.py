"""Bilinear embedding model with common-entity tying.

Entities of both domains map into a shared table of parameter rows (slots);
a common entity pair points at one slot, so tying is structural rather than
enforced by synchronization.  Scores are bilinear products a_h' R_k a_t and
training uses the hinge ranking loss max(1 + f_neg - f_pos, 0) with analytic
subgradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from .data import DomainPair, Triplet
from .errors import DataError

EntityRef = Tuple[int, int]  # (domain, entity id)


@dataclass
class EmbeddingModel:
    slots: np.ndarray  # (n_slots, d) entity parameter rows
    map1: np.ndarray  # (n1,) entity id -> slot, domain 1
    map2: np.ndarray  # (n2,) entity id -> slot, domain 2
    relations: np.ndarray  # (m, d, d)

    @property
    def d(self) -> int:
        return self.slots.shape[1]

    @property
    def n_slots(self) -> int:
        return self.slots.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relations.shape[0]

    def domain_size(self, domain: int) -> int:
        return len(self.slot_map(domain))

    def slot_map(self, domain: int) -> np.ndarray:
        if domain == 1:
            return self.map1
        if domain == 2:
            return self.map2
        raise DataError(f"domain must be 1 or 2, got {domain}")

    def slot_of(self, domain: int, entity: int) -> int:
        m = self.slot_map(domain)
        if not 0 <= entity < len(m):
            raise DataError(f"entity id {entity} out of range for domain {domain}")
        return int(m[entity])

    def vector(self, domain: int, entity: int) -> np.ndarray:
        return self.slots[self.slot_of(domain, entity)]

    def embeddings(self, domain: int) -> np.ndarray:
        """Dense (n_t, d) embedding matrix of one domain (a copy)."""
        return self.slots[self.slot_map(domain)]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            slots=self.slots.copy(),
            map1=self.map1.copy(),
            map2=self.map2.copy(),
            relations=self.relations.copy(),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingModel)
            and np.array_equal(self.slots, other.slots)
            and np.array_equal(self.map1, other.map1)
            and np.array_equal(self.map2, other.map2)
            and np.array_equal(self.relations, other.relations)
        )


def init_model(pair: DomainPair, d: int, seed: int) -> EmbeddingModel:
    """Initialize entity rows and relation matrices i.i.d. N(0, 1/d).

    The 1/sqrt(d) scale keeps initial bilinear scores O(1).  Common entity
    pairs share one slot; the slot table lists common slots first, then
    domain-1-only, then domain-2-only entities.
    """
    if d < 1:
        raise DataError(f"embedding dimension must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    n1, n2 = pair.n1, pair.n2
    common1 = {i for i, _ in pair.common}
    common2 = {j for _, j in pair.common}

    map1 = np.full(n1, -1, dtype=np.int64)
    map2 = np.full(n2, -1, dtype=np.int64)
    next_slot = 0
    for i, j in pair.common:
        map1[i] = map2[j] = next_slot
        next_slot += 1
    for i in range(n1):
        if i not in common1:
            map1[i] = next_slot
            next_slot += 1
    for j in range(n2):
        if j not in common2:
            map2[j] = next_slot
            next_slot += 1

    scale = 1.0 / np.sqrt(d)
    slots = rng.normal(0.0, scale, size=(next_slot, d))
    relations = rng.normal(0.0, scale, size=(pair.num_predicates, d, d))
    return EmbeddingModel(slots=slots, map1=map1, map2=map2, relations=relations)


def score(model: EmbeddingModel, head: EntityRef, predicate: int, tail: EntityRef) -> float:
    """Bilinear score a_head' R_k a_tail."""
    if not 0 <= predicate < model.num_relations:
        raise DataError(f"predicate id {predicate} out of range")
    a_h = model.vector(*head)
    a_t = model.vector(*tail)
    return float(a_h @ model.relations[predicate] @ a_t)


def margin_loss(f_pos: float, f_neg: float) -> float:
    """Hinge ranking loss max(1 + f_neg - f_pos, 0)."""
    return max(1.0 + f_neg - f_pos, 0.0)


class NegativeSampler:
    """Uniform intra-domain corruption of positive triplets.

    The replacement entity is drawn from the same domain as the replaced
    one and resampled until it differs, so corruptions never cross domains
    and never reproduce the positive.
    """

    def __init__(self, n1: int, n2: int, seed: int):
        self.sizes = {1: n1, 2: n2}
        self.rng = np.random.default_rng(seed)

    def sample(self, positive: Triplet, domain: int, which: str) -> Triplet:
        n = self.sizes[domain]
        if n < 2:
            raise DataError(f"domain {domain} has {n} entities, cannot corrupt")
        original = positive.head if which == "head" else positive.tail
        replacement = original
        while replacement == original:
            replacement = int(self.rng.integers(n))
        if which == "head":
            return Triplet(replacement, positive.predicate, positive.tail)
        if which == "tail":
            return Triplet(positive.head, positive.predicate, replacement)
        raise DataError(f"which must be 'head' or 'tail', got {which!r}")

    def corrupt(self, positive: Triplet, domain: int) -> Triplet:
        """Corrupt head or tail with probability 1/2 each."""
        which = "head" if self.rng.random() < 0.5 else "tail"
        return self.sample(positive, domain, which)


class SparseGradient:
    """Gradient accumulator keyed by slot id and relation id."""

    def __init__(self):
        self.rows: Dict[int, np.ndarray] = {}
        self.relations: Dict[int, np.ndarray] = {}

    def add_row(self, slot: int, value: np.ndarray) -> None:
        row = self.rows.get(slot)
        if row is None:
            self.rows[slot] = value.copy()
        else:
            row += value

    def add_relation(self, k: int, value: np.ndarray) -> None:
        mat = self.relations.get(k)
        if mat is None:
            self.relations[k] = value.copy()
        else:
            mat += value

    def is_zero(self) -> bool:
        return not self.rows and not self.relations


def ranking_gradients(
    model: EmbeddingModel,
    pos: Triplet,
    neg: Triplet,
    domain: int,
    out: SparseGradient = None,
) -> Tuple[float, SparseGradient]:
    """Subgradient of the hinge ranking loss for one positive/negative pair.

    Both triplets must share the predicate and live in one domain (negatives
    are intra-domain corruptions).  Contributions to a shared slot accumulate,
    so common-entity tying is respected.  At the hinge kink the subgradient
    is taken as zero.
    """
    if pos.predicate != neg.predicate:
        raise DataError("positive and negative triplets must share the predicate")
    grad = SparseGradient() if out is None else out
    k = pos.predicate
    r = model.relations[k]
    sm = model.slot_map(domain)
    hp, tp = int(sm[pos.head]), int(sm[pos.tail])
    hn, tn = int(sm[neg.head]), int(sm[neg.tail])
    a_hp, a_tp = model.slots[hp], model.slots[tp]
    a_hn, a_tn = model.slots[hn], model.slots[tn]

    f_pos = float(a_hp @ r @ a_tp)
    f_neg = float(a_hn @ r @ a_tn)
    loss = margin_loss(f_pos, f_neg)
    if loss <= 0.0:
        return loss, grad

    grad.add_row(hp, -(r @ a_tp))
    grad.add_row(tp, -(r.T @ a_hp))
    grad.add_row(hn, r @ a_tn)
    grad.add_row(tn, r.T @ a_hn)
    grad.add_relation(k, np.outer(a_hn, a_tn) - np.outer(a_hp, a_tp))
    return loss, grad


def frobenius_reg_gradient(
    model: EmbeddingModel,
    mu: float,
    slots: Iterable[int] = (),
    relations: Iterable[int] = (),
    out: SparseGradient = None,
) -> SparseGradient:
    """Gradient of (mu/2)(||A||_F^2 + sum_k ||R_k||_F^2) for touched params."""
    if mu < 0:
        raise DataError(f"mu must be >= 0, got {mu}")
    grad = SparseGradient() if out is None else out
    if mu == 0:
        return grad
    for s in slots:
        grad.add_row(s, mu * model.slots[s])
    for k in relations:
        grad.add_relation(k, mu * model.relations[k])
    return grad


def save_checkpoint(model: EmbeddingModel, path: str) -> None:
    """Write a model as decimal text, exactly round-trippable.

    Layout: header ``d m n_slots``, then one line of d floats per slot row,
    then m blocks of d lines of d floats, then ``domain id slot`` map lines.
    17 significant digits make the float round trip exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.d} {model.num_relations} {model.n_slots}\n")
        for row in model.slots:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        for mat in model.relations:
            for row in mat:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        for domain, mapping in ((1, model.map1), (2, model.map2)):
            for eid, slot in enumerate(mapping):
                fh.write(f"{domain} {eid} {slot}\n")


def load_checkpoint(path: str) -> EmbeddingModel:
    """Load a model written by :func:`save_checkpoint`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    try:
        d, m, n_slots = map(int, lines[0].split())
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed checkpoint header") from exc

    expected_matrix_lines = n_slots + m * d
    matrix_lines = lines[1 : 1 + expected_matrix_lines]
    if len(matrix_lines) != expected_matrix_lines:
        raise DataError(f"{path}: truncated checkpoint")
    values = np.array(
        [[float(x) for x in line.split()] for line in matrix_lines]
    )
    if values.shape != (expected_matrix_lines, d):
        raise DataError(f"{path}: wrong row width in checkpoint")
    slots = values[:n_slots]
    relations = values[n_slots:].reshape(m, d, d)

    maps: Dict[int, Dict[int, int]] = {1: {}, 2: {}}
    for line in lines[1 + expected_matrix_lines :]:
        if not line:
            continue
        domain, eid, slot = map(int, line.split())
        maps[domain][eid] = slot
    map1 = np.array([maps[1][i] for i in range(len(maps[1]))], dtype=np.int64)
    map2 = np.array([maps[2][i] for i in range(len(maps[2]))], dtype=np.int64)
    return EmbeddingModel(slots=slots, map1=map1, map2=map2, relations=relations)
