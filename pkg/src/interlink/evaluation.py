"""Hit@10 ranking and ROC-AUC evaluation for intra- and inter-domain tests.

Ranking is raw (known true triplets are not filtered from the candidates)
with optimistic tie handling: rank = 1 + number of candidates scoring
strictly higher.  An optional filtered mode that removes other known true
candidates is available but is not the reported default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy.stats import rankdata

from .data import TaggedTripletStore
from .errors import DataError
from .rescal import EmbeddingModel


@dataclass
class RankingResult:
    ranks: List[int]  # 1-based rank of the true entity per query

    @property
    def query_count(self) -> int:
        return len(self.ranks)

    def hit_at(self, k: int = 10) -> float:
        if not self.ranks:
            raise DataError("no ranking queries were issued")
        return sum(r <= k for r in self.ranks) / len(self.ranks)


@dataclass
class AucResult:
    positive_scores: np.ndarray
    negative_scores: np.ndarray
    auc: float


def _score_candidates(
    model: EmbeddingModel, domain: int, predicate: int, fixed: np.ndarray, side: str
) -> np.ndarray:
    """Scores of all entities of one domain against a fixed endpoint."""
    cands = model.embeddings(domain)
    r = model.relations[predicate]
    if side == "head":
        return cands @ (r @ fixed)
    return cands @ (r.T @ fixed)


def hit_at_10(
    model: EmbeddingModel,
    test: TaggedTripletStore,
    known: Optional[Iterable[tuple]] = None,
) -> RankingResult:
    """Rank the true entity against all same-domain candidates.

    Each test triplet yields two queries (hidden head, hidden tail); both
    directions aggregate into one result.  ``known`` optionally holds
    directed (head_domain, head, predicate, tail_domain, tail) facts to
    filter from the candidates; the default is raw ranking.
    """
    if len(test) == 0:
        raise DataError("test store is empty")
    known_set = set(known) if known is not None else None
    ranks: List[int] = []
    for hd, h, p, td, t in test.directed():
        a_h = model.vector(hd, h)
        a_t = model.vector(td, t)

        head_scores = _score_candidates(model, hd, p, a_t, side="head")
        true_score = head_scores[h]
        if known_set is None:
            higher = int(np.sum(head_scores > true_score))
        else:
            mask = np.ones(len(head_scores), dtype=bool)
            for cand in np.nonzero(head_scores > true_score)[0]:
                if cand != h and (hd, int(cand), p, td, t) in known_set:
                    mask[cand] = False
            higher = int(np.sum((head_scores > true_score) & mask))
        ranks.append(1 + higher)

        tail_scores = _score_candidates(model, td, p, a_h, side="tail")
        true_score = tail_scores[t]
        if known_set is None:
            higher = int(np.sum(tail_scores > true_score))
        else:
            mask = np.ones(len(tail_scores), dtype=bool)
            for cand in np.nonzero(tail_scores > true_score)[0]:
                if cand != t and (hd, h, p, td, int(cand)) in known_set:
                    mask[cand] = False
            higher = int(np.sum((tail_scores > true_score) & mask))
        ranks.append(1 + higher)
    return RankingResult(ranks=ranks)


def _rank_sum_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    """Mann-Whitney AUC with ties counted one half."""
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("AUC needs both positive and negative scores")
    ranks = rankdata(np.concatenate([pos, neg]))
    pos_rank_sum = ranks[: len(pos)].sum()
    return float(
        (pos_rank_sum - len(pos) * (len(pos) + 1) / 2.0) / (len(pos) * len(neg))
    )


def roc_auc(
    model: EmbeddingModel,
    positives: TaggedTripletStore,
    seed: int,
) -> AucResult:
    """ROC-AUC of test triplets against uniformly sampled negatives.

    One negative per positive: entities are drawn uniformly from the
    relevant domains (matching each positive's intra/inter domain layout)
    and the predicate uniformly from the shared set.  Collisions with true
    facts are accepted; the graphs are sparse enough for sampled triplets
    to be negative with high probability.
    """
    if len(positives) == 0:
        raise DataError("positive store is empty")
    rng = np.random.default_rng(seed)
    m = model.num_relations

    pos_scores = []
    neg_scores = []
    for hd, h, p, td, t in positives.directed():
        pos_scores.append(
            float(model.vector(hd, h) @ model.relations[p] @ model.vector(td, t))
        )
        nh = int(rng.integers(model.domain_size(hd)))
        nt = int(rng.integers(model.domain_size(td)))
        np_ = int(rng.integers(m))
        neg_scores.append(
            float(
                model.vector(hd, nh) @ model.relations[np_] @ model.vector(td, nt)
            )
        )
    pos_arr = np.array(pos_scores)
    neg_arr = np.array(neg_scores)
    return AucResult(
        positive_scores=pos_arr,
        negative_scores=neg_arr,
        auc=_rank_sum_auc(pos_arr, neg_arr),
    )
