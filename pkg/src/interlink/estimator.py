"""Scikit-learn style front end for the joint embedding trainer."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .data import DomainPair
from .errors import DataError
from .evaluation import hit_at_10, roc_auc
from .mmd import DEFAULT_MULTIPLIERS
from .training import TrainConfig, fit


def check_triplet_array(X, model) -> np.ndarray:
    """Validate an (n, 5) array of directed domain triplets.

    Rows are (head_domain, head, predicate, tail_domain, tail) with domains
    in {1, 2} and ids inside the model's vocabularies.
    """
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != 5:
        raise DataError(
            f"expected an (n, 5) array of "
            f"(head_domain, head, predicate, tail_domain, tail), got {X.shape}"
        )
    for col in (0, 3):
        bad = ~np.isin(X[:, col], (1, 2))
        if bad.any():
            raise DataError(f"domain column {col} contains values outside {{1, 2}}")
    if ((X[:, 2] < 0) | (X[:, 2] >= model.num_relations)).any():
        raise DataError("predicate id out of range")
    for dom_col, ent_col in ((0, 1), (3, 4)):
        for dom in (1, 2):
            rows = X[:, dom_col] == dom
            n = model.domain_size(dom)
            if ((X[rows, ent_col] < 0) | (X[rows, ent_col] >= n)).any():
                raise DataError(f"entity id out of range for domain {dom}")
    return X


class InterDomainLinkPredictor(BaseEstimator):
    """Bilinear link predictor for a pair of multi-relational graphs.

    Fits entity and predicate embeddings on both domains' training triplets
    with a pairwise ranking loss, optionally aligning the two entity clouds
    with an entropic transport (``regularizer="wd"``) or MMD
    (``regularizer="mmd"``) penalty of weight ``alpha``.  ``predict``
    returns raw bilinear scores; higher means more plausible.
    """

    def __init__(
        self,
        d: int = 100,
        alpha: float = 0.0,
        regularizer: str = "none",
        lam: float = 100.0,
        mu: float = 0.01,
        lr: float = 0.005,
        batch_size: int = 300,
        epochs: int = 300,
        patience: int = 50,
        warmstart_epochs: int = 100,
        seed: int = 0,
        eval_metric: str = "inter_auc",
        mmd_multipliers: Tuple[float, ...] = DEFAULT_MULTIPLIERS,
    ):
        self.d = d
        self.alpha = alpha
        self.regularizer = regularizer
        self.lam = lam
        self.mu = mu
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.warmstart_epochs = warmstart_epochs
        self.seed = seed
        self.eval_metric = eval_metric
        self.mmd_multipliers = mmd_multipliers

    def _config(self) -> TrainConfig:
        return TrainConfig(
            d=self.d,
            alpha=self.alpha,
            regularizer=self.regularizer,
            lam=self.lam,
            mu=self.mu,
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            patience=self.patience,
            warmstart_epochs=self.warmstart_epochs,
            seed=self.seed,
            eval_metric=self.eval_metric,
            mmd_multipliers=tuple(self.mmd_multipliers),
        )

    def fit(self, pair: DomainPair, y=None, log_stream=None):
        if not isinstance(pair, DomainPair):
            raise DataError(f"fit expects a DomainPair, got {type(pair).__name__}")
        self.model_, self.report_ = fit(pair, self._config(), log_stream=log_stream)
        self.pair_ = pair
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("estimator is not fitted; call fit first")

    def predict(self, X) -> np.ndarray:
        """Bilinear scores for (head_domain, head, predicate, tail_domain, tail) rows."""
        self._check_fitted()
        X = check_triplet_array(X, self.model_)
        scores = np.empty(len(X))
        for i, (hd, h, p, td, t) in enumerate(X):
            scores[i] = (
                self.model_.vector(int(hd), int(h))
                @ self.model_.relations[int(p)]
                @ self.model_.vector(int(td), int(t))
            )
        return scores

    def score(self, X=None, y=None, seed: Optional[int] = None) -> float:
        """Inter-domain ROC-AUC on the fitted pair's test split."""
        self._check_fitted()
        eval_seed = [self.seed, 4] if seed is None else seed
        return roc_auc(self.model_, self.pair_.inter_test, seed=eval_seed).auc

    def hit_at_10(self, split: str = "inter_test") -> float:
        self._check_fitted()
        store = getattr(self.pair_, split, None)
        if store is None:
            raise DataError(f"unknown split {split!r}")
        return hit_at_10(self.model_, store).hit_at(10)
