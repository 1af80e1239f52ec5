"""Joint training of the two-domain ranking loss plus an alignment term.

The objective is the sum of both domains' hinge ranking losses and, with
weight alpha, either the entropic transport cost (plan fixed within an
epoch, refreshed by Sinkhorn at epoch end) or the minibatch MMD.  Training
starts from a warmstart phase with alpha forced to zero so that baseline
and regularized runs share the same initial embeddings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import IO, List, Optional, Tuple

import numpy as np

from . import mmd as mmd_mod
from . import transport
from .data import DomainPair
from .errors import ConfigError, DataError, NumericalError
from .evaluation import hit_at_10, roc_auc
from .mmd import KernelMixture
from .rescal import (
    EmbeddingModel,
    NegativeSampler,
    SparseGradient,
    frobenius_reg_gradient,
    init_model,
    ranking_gradients,
    save_checkpoint,
)

REGULARIZERS = ("none", "wd", "mmd")
EVAL_METRICS = ("inter_auc", "inter_hit10")


@dataclass
class TrainConfig:
    d: int = 100
    alpha: float = 0.0
    regularizer: str = "none"
    lam: float = 100.0
    mu: float = 0.01
    lr: float = 0.005
    batch_size: int = 300
    epochs: int = 300
    patience: int = 50
    warmstart_epochs: int = 100
    seed: int = 0
    eval_metric: str = "inter_auc"
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iters: int = 1000
    mmd_multipliers: Tuple[float, ...] = mmd_mod.DEFAULT_MULTIPLIERS

    def validate(self) -> None:
        problems = []
        if self.d < 1:
            problems.append(f"d must be >= 1, got {self.d}")
        if self.alpha < 0:
            problems.append(f"alpha must be >= 0, got {self.alpha}")
        if self.regularizer not in REGULARIZERS:
            problems.append(
                f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}"
            )
        if self.lam <= 0:
            problems.append(f"lambda must be > 0, got {self.lam}")
        if self.mu < 0:
            problems.append(f"mu must be >= 0, got {self.mu}")
        if self.lr < 0:
            problems.append(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            problems.append(f"epochs must be >= 0, got {self.epochs}")
        if self.patience < 0:
            problems.append(f"patience must be >= 0, got {self.patience}")
        if self.warmstart_epochs < 0:
            problems.append(
                f"warmstart_epochs must be >= 0, got {self.warmstart_epochs}"
            )
        if self.eval_metric not in EVAL_METRICS:
            problems.append(
                f"eval_metric must be one of {EVAL_METRICS}, got {self.eval_metric!r}"
            )
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def alignment_active(self) -> bool:
        return self.regularizer != "none" and self.alpha > 0


@dataclass
class EpochRecord:
    phase: str  # "warmstart" | "train"
    epoch: int  # monotone across phases
    loss1: float
    loss2: float
    reg_value: float
    val_metric: float
    sinkhorn_iters: int
    seconds: float


@dataclass
class TrainReport:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_metric: float = float("nan")
    best_checkpoint_path: Optional[str] = None

    @property
    def train_records(self) -> List[EpochRecord]:
        return [r for r in self.records if r.phase == "train"]


@dataclass
class EpochStats:
    loss1: float
    loss2: float


def _log_line(stream: Optional[IO[str]], record: EpochRecord) -> None:
    if stream is None:
        return
    stream.write(
        f"{record.epoch} {record.loss1:.6f} {record.loss2:.6f} "
        f"{record.reg_value:.6f} {record.val_metric:.6f} "
        f"{record.sinkhorn_iters} {record.seconds:.3f}\n"
    )
    stream.flush()


def train_epoch(
    model: EmbeddingModel,
    pair: DomainPair,
    config: TrainConfig,
    batch_rng: np.random.Generator,
    neg_sampler: NegativeSampler,
    plan: Optional[np.ndarray] = None,
    kernel: Optional[KernelMixture] = None,
) -> EpochStats:
    """One pass of SGD over the pooled training triplets of both domains.

    Minibatches are drawn from both domains jointly.  Each batch applies
    ranking subgradients, the Frobenius term for touched parameters, and
    (when alignment is active) alpha times the alignment gradient restricted
    to the batch's entities, all in one plain SGD step.
    """
    if config.alignment_active and config.regularizer == "wd" and plan is None:
        raise ConfigError("wd regularizer needs a transport plan for the epoch")
    if config.alignment_active and config.regularizer == "mmd" and kernel is None:
        raise ConfigError("mmd regularizer needs a kernel mixture for the epoch")

    pooled = [(1, t) for t in pair.train1] + [(2, t) for t in pair.train2]
    if not pooled:
        raise DataError("no training triplets")
    order = batch_rng.permutation(len(pooled))

    losses = {1: 0.0, 2: 0.0}
    for start in range(0, len(order), config.batch_size):
        chunk = order[start : start + config.batch_size]
        grad = SparseGradient()
        touched_slots = set()
        touched_rels = set()
        batch_entities = {1: set(), 2: set()}
        batch_loss = 0.0
        for idx in chunk:
            domain, pos = pooled[idx]
            neg = neg_sampler.corrupt(pos, domain)
            loss, _ = ranking_gradients(model, pos, neg, domain, out=grad)
            losses[domain] += loss
            batch_loss += loss
            sm = model.slot_map(domain)
            touched_slots.update(
                (int(sm[pos.head]), int(sm[pos.tail]),
                 int(sm[neg.head]), int(sm[neg.tail]))
            )
            touched_rels.add(pos.predicate)
            batch_entities[domain].update((pos.head, pos.tail))
        if not np.isfinite(batch_loss):
            raise NumericalError(
                f"non-finite ranking loss in batch starting at position {start}"
            )

        frobenius_reg_gradient(model, config.mu, touched_slots, touched_rels, out=grad)

        if config.alignment_active:
            rows1 = sorted(batch_entities[1])
            rows2 = sorted(batch_entities[2])
            if config.regularizer == "wd":
                a1 = model.embeddings(1)
                a2 = model.embeddings(2)
                g1, g2 = transport.ot_embedding_gradient(plan, a1, a2, rows1, rows2)
                for ent, g in zip(rows1, g1):
                    grad.add_row(int(model.map1[ent]), config.alpha * g)
                for ent, g in zip(rows2, g2):
                    grad.add_row(int(model.map2[ent]), config.alpha * g)
            elif len(rows1) >= 2 and len(rows2) >= 2:
                a1b = model.slots[model.map1[rows1]]
                a2b = model.slots[model.map2[rows2]]
                g1, g2 = mmd_mod.mmd_gradient(a1b, a2b, kernel)
                for ent, g in zip(rows1, g1):
                    grad.add_row(int(model.map1[ent]), config.alpha * g)
                for ent, g in zip(rows2, g2):
                    grad.add_row(int(model.map2[ent]), config.alpha * g)

        for slot, g in grad.rows.items():
            model.slots[slot] -= config.lr * g
        for k, g in grad.relations.items():
            model.relations[k] -= config.lr * g

    if not np.all(np.isfinite(model.slots)) or not np.all(
        np.isfinite(model.relations)
    ):
        raise NumericalError("model parameters became non-finite during the epoch")
    return EpochStats(loss1=losses[1], loss2=losses[2])


def refresh_plan(
    model: EmbeddingModel,
    pair: DomainPair,
    config: TrainConfig,
    previous: Optional[transport.TransportState] = None,
) -> transport.TransportState:
    """Recompute the cost from current embeddings and rerun Sinkhorn.

    Marginals are uniform over each domain's entities; the scaling vectors
    warm-start from the previous epoch's state.
    """
    a1 = model.embeddings(1)
    a2 = model.embeddings(2)
    cost = transport.cost_matrix(a1, a2)
    warm = (previous.log_u, previous.log_v) if previous is not None else None
    return transport.sinkhorn(
        np.full(pair.n1, 1.0 / pair.n1),
        np.full(pair.n2, 1.0 / pair.n2),
        cost,
        lam=config.lam,
        max_iters=config.sinkhorn_max_iters,
        tol=config.sinkhorn_tol,
        warm_start=warm,
    )


def _validation_metric(
    model: EmbeddingModel, pair: DomainPair, config: TrainConfig, eval_seed
) -> float:
    if config.eval_metric == "inter_auc":
        return roc_auc(model, pair.inter_valid, seed=eval_seed).auc
    return hit_at_10(model, pair.inter_valid).hit_at(10)


def _alignment_value(
    model: EmbeddingModel,
    config: TrainConfig,
    plan_state: Optional[transport.TransportState],
    kernel: Optional[KernelMixture],
) -> float:
    """Full-embedding value of the alignment term for reporting."""
    if config.regularizer == "wd" and plan_state is not None:
        cost = transport.cost_matrix(model.embeddings(1), model.embeddings(2))
        return float(np.sum(plan_state.plan * cost))
    if config.regularizer == "mmd" and kernel is not None:
        return mmd_mod.mmd_unbiased(model.embeddings(1), model.embeddings(2), kernel)
    return 0.0


def _assert_tying(model: EmbeddingModel, pair: DomainPair) -> None:
    for i, j in pair.common:
        if model.map1[i] != model.map2[j]:
            raise NumericalError(
                f"tying broken for common pair ({i}, {j}): "
                f"slots {model.map1[i]} vs {model.map2[j]}"
            )


def warmstart(
    model: EmbeddingModel,
    pair: DomainPair,
    config: TrainConfig,
    batch_rng: Optional[np.random.Generator] = None,
    neg_sampler: Optional[NegativeSampler] = None,
    report: Optional[TrainReport] = None,
    log_stream: Optional[IO[str]] = None,
) -> EmbeddingModel:
    """Train ``warmstart_epochs`` epochs with alpha forced to zero, in place."""
    if batch_rng is None:
        batch_rng = np.random.default_rng([config.seed, 1])
    if neg_sampler is None:
        neg_sampler = NegativeSampler(pair.n1, pair.n2, seed=[config.seed, 2])
    plain = replace(config, alpha=0.0, regularizer="none")
    for epoch in range(1, config.warmstart_epochs + 1):
        started = time.perf_counter()
        stats = train_epoch(model, pair, plain, batch_rng, neg_sampler)
        record = EpochRecord(
            phase="warmstart",
            epoch=epoch,
            loss1=stats.loss1,
            loss2=stats.loss2,
            reg_value=0.0,
            val_metric=float("nan"),
            sinkhorn_iters=0,
            seconds=time.perf_counter() - started,
        )
        if report is not None:
            report.records.append(record)
        _log_line(log_stream, record)
    return model


def fit(
    pair: DomainPair,
    config: TrainConfig,
    log_stream: Optional[IO[str]] = None,
    checkpoint_path: Optional[str] = None,
) -> Tuple[EmbeddingModel, TrainReport]:
    """Warmstart, then train with early stopping on the inter validation set.

    Keeps the model of the best validation epoch (the warmstarted model when
    no training epoch improves on it) and optionally saves it as a
    checkpoint.  Fully deterministic given (pair, config).
    """
    config.validate()
    if config.epochs > 0 and len(pair.inter_valid) == 0:
        raise DataError("inter-domain validation set is empty")

    model = init_model(pair, config.d, config.seed)
    batch_rng = np.random.default_rng([config.seed, 1])
    neg_sampler = NegativeSampler(pair.n1, pair.n2, seed=[config.seed, 2])
    eval_seed = [config.seed, 3]

    report = TrainReport()
    warmstart(
        model, pair, config,
        batch_rng=batch_rng,
        neg_sampler=neg_sampler,
        report=report,
        log_stream=log_stream,
    )

    best_model = model.copy()
    best_val = -np.inf
    best_epoch = 0
    epochs_since_best = 0

    wd_active = config.alignment_active and config.regularizer == "wd"
    mmd_active = config.alignment_active and config.regularizer == "mmd"
    plan_state: Optional[transport.TransportState] = None
    if wd_active:
        plan_state = refresh_plan(model, pair, config)

    epoch_base = config.warmstart_epochs
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        kernel = None
        if mmd_active:
            # The kernel scale is recomputed from full embeddings once per
            # epoch and frozen within it.
            kernel = KernelMixture.from_samples(
                model.embeddings(1), model.embeddings(2), config.mmd_multipliers
            )
        stats = train_epoch(
            model,
            pair,
            config,
            batch_rng,
            neg_sampler,
            plan=plan_state.plan if plan_state is not None else None,
            kernel=kernel,
        )
        sinkhorn_iters = 0
        if wd_active:
            plan_state = refresh_plan(model, pair, config, plan_state)
            sinkhorn_iters = plan_state.iterations
        reg_value = _alignment_value(model, config, plan_state, kernel)
        val = _validation_metric(model, pair, config, eval_seed)
        _assert_tying(model, pair)

        record = EpochRecord(
            phase="train",
            epoch=epoch_base + epoch,
            loss1=stats.loss1,
            loss2=stats.loss2,
            reg_value=reg_value,
            val_metric=val,
            sinkhorn_iters=sinkhorn_iters,
            seconds=time.perf_counter() - started,
        )
        report.records.append(record)
        _log_line(log_stream, record)

        if val > best_val:
            best_val = val
            best_model = model.copy()
            best_epoch = epoch_base + epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > config.patience:
                break

    report.best_epoch = best_epoch
    report.best_val_metric = best_val if np.isfinite(best_val) else float("nan")
    if checkpoint_path is not None:
        save_checkpoint(best_model, checkpoint_path)
        report.best_checkpoint_path = checkpoint_path
    return best_model, report
