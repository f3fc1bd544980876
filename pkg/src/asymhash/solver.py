"""Alternating optimization: encoder epochs interleaved with exact
bit-by-bit updates of the database codes.

The database codes are free +/-1 variables. Each code column (one bit
position across the whole database) has a closed-form exact minimizer
given the other columns and the current relaxed query codes; sweeping the
columns is coordinate descent and never increases the objective. The
encoder is trained by minibatch gradient steps against the fixed codes.

A symmetric single-network trainer is included only as the scaling and
accuracy contrast; it pays a full pass over all database pairs per epoch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import dataio
from .encoder import (
    EncoderModel,
    NonFiniteError,
    OptimizerState,
    _apply_gradients,
    forward,
    init_encoder,
    loss_and_param_grads,
    minibatch_step,
)
from .hashcore import CodeMatrix
from .simgraph import (
    LabelMatrix,
    SimilarityBlock,
    build_sampled_similarity,
    build_similarity,
    sample_query_indices,
)

MODES = ("asymmetric_sampled", "asymmetric_separate_queries", "symmetric_baseline")

HISTORY_CSV_HEADER = "outer,inner,phase,objective,seconds"


@dataclass
class TrainConfig:
    """Hyperparameters and schedule for a training run."""

    code_len: int
    gamma: float = 200.0
    query_count: int = 1000
    outer_iters: int = 50
    inner_iters: int = 3
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    mode: str = "asymmetric_sampled"
    imbalance_weighting: bool = True
    hidden_dims: tuple[int, ...] = (512,)
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.code_len < 1:
            raise ValueError("code_len must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.query_count < 1:
            raise ValueError("query_count must be >= 1")
        if not 1 <= self.batch_size <= self.query_count:
            raise ValueError("need 1 <= batch_size <= query_count")
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("outer_iters and inner_iters must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)


@dataclass
class HistoryRecord:
    outer: int
    inner: int
    phase: str
    objective: float
    seconds: float

    def csv_line(self) -> str:
        return (
            f"{self.outer},{self.inner},{self.phase},"
            f"{self.objective!r},{self.seconds:.6f}"
        )


def history_to_csv(records) -> str:
    lines = [HISTORY_CSV_HEADER]
    lines.extend(r.csv_line() for r in records)
    return "\n".join(lines) + "\n"


class TrainResult(NamedTuple):
    model: EncoderModel
    codes: CodeMatrix
    history: list


class TrainingDiverged(RuntimeError):
    """Raised when the loss or a gradient goes non-finite.

    ``partial`` holds the last good model, codes, and history.
    """

    def __init__(self, message: str, partial: TrainResult):
        super().__init__(message)
        self.partial = partial


def objective(relaxed, db_signs, block: SimilarityBlock, gamma, weighted=False):
    """Training objective for the current relaxed codes and database codes.

    Pairwise squared residuals against code_len * sign targets, optionally
    imbalance-weighted, plus the pull of each sampled query's own database
    code toward its relaxed code (skipped when the query set is separate).
    """
    relaxed = np.asarray(relaxed, dtype=np.float64)
    db = np.asarray(db_signs, dtype=np.float64)
    code_len = db.shape[1]
    resid = relaxed @ db.T - code_len * block.signs
    sq = resid * resid
    if weighted:
        sq = sq * block.weights()
    total = float(sq.sum())
    if block.query_indices is not None and gamma != 0.0:
        diff = db[block.query_indices] - relaxed
        total += gamma * float((diff * diff).sum())
    return total


@dataclass
class _SweepWork:
    """Per-sweep precomputation shared across column updates."""

    method: str
    gram: np.ndarray | None = None  # c x c, matrix path
    linear: np.ndarray | None = None  # n x c, matrix path
    weights: np.ndarray | None = None  # m x n, entrywise path
    prod: np.ndarray | None = None  # m x n running relaxed @ db.T
    static_linear: np.ndarray | None = None  # n x c, entrywise path
    weighted_sq: np.ndarray | None = None  # n x c, entrywise path


def _prepare_sweep(db, relaxed, block, gamma, weighted, method):
    if method == "auto":
        method = "entrywise" if weighted else "matrix"
    if method == "matrix":
        if weighted:
            raise ValueError("matrix-form updates do not support pair weights")
        code_len = db.shape[1]
        signs = block.signs.astype(np.float64)
        linear = -2.0 * code_len * (signs.T @ relaxed)
        if block.query_indices is not None and gamma != 0.0:
            linear[block.query_indices] -= 2.0 * gamma * relaxed
        return _SweepWork(method="matrix", gram=relaxed.T @ relaxed, linear=linear)
    if method == "entrywise":
        signs = block.signs.astype(np.float64)
        weights = block.weights() if weighted else np.ones_like(signs)
        code_len = db.shape[1]
        static_linear = -code_len * ((weights * signs).T @ relaxed)
        if block.query_indices is not None and gamma != 0.0:
            static_linear[block.query_indices] -= gamma * relaxed
        return _SweepWork(
            method="entrywise",
            weights=weights,
            prod=relaxed @ db.T,
            static_linear=static_linear,
            weighted_sq=weights.T @ (relaxed * relaxed),
        )
    raise ValueError(f"unknown update method {method!r}")


def _update_column(db, relaxed, work: _SweepWork, k: int) -> None:
    """Replace column k with its exact minimizer; zero coefficient gives -1."""
    if work.method == "matrix":
        coef = 2.0 * (db @ work.gram[:, k] - db[:, k] * work.gram[k, k])
        coef += work.linear[:, k]
        db[:, k] = np.where(coef >= 0.0, -1.0, 1.0)
        return
    col = relaxed[:, k]
    coef = (work.weights * work.prod).T @ col
    coef -= db[:, k] * work.weighted_sq[:, k]
    coef += work.static_linear[:, k]
    new = np.where(coef >= 0.0, -1.0, 1.0)
    delta = new - db[:, k]
    if np.any(delta):
        work.prod += np.outer(col, delta)
        db[:, k] = new


def v_step_column(
    db_signs,
    relaxed,
    block: SimilarityBlock,
    gamma,
    k: int,
    weighted=False,
    method="auto",
    work=None,
):
    """Exactly minimize the objective over code column k, in place."""
    code_len = db_signs.shape[1]
    if not 0 <= k < code_len:
        raise ValueError(f"column {k} out of range for code_len {code_len}")
    if work is None:
        work = _prepare_sweep(db_signs, relaxed, block, gamma, weighted, method)
    _update_column(db_signs, relaxed, work, k)
    return db_signs


def v_step(
    db_signs,
    relaxed,
    block: SimilarityBlock,
    gamma,
    weighted=False,
    method="auto",
    track_objective=None,
):
    """One full sweep over all code columns, each using the latest codes.

    When ``track_objective`` is a list, appends one sub-list per sweep
    holding the fully recomputed objective before the first column and
    after every column update.
    """
    relaxed = np.asarray(relaxed, dtype=np.float64)
    work = _prepare_sweep(db_signs, relaxed, block, gamma, weighted, method)
    trace = None
    if track_objective is not None:
        trace = [objective(relaxed, db_signs, block, gamma, weighted)]
        track_objective.append(trace)
    for k in range(db_signs.shape[1]):
        _update_column(db_signs, relaxed, work, k)
        if trace is not None:
            trace.append(objective(relaxed, db_signs, block, gamma, weighted))
    return db_signs


def _init_db_codes(rng, n, code_len):
    return (rng.integers(0, 2, size=(n, code_len)) * 2 - 1).astype(np.float64)


def _batches(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def _pack(db_signs) -> CodeMatrix:
    return CodeMatrix.from_signs(db_signs.astype(np.int8))


def train(
    features,
    labels: LabelMatrix,
    config: TrainConfig,
    query_features=None,
    query_labels=None,
    track_objective=None,
    on_outer_end: Callable | None = None,
) -> TrainResult:
    """Alternating training; returns the encoder, packed codes, and history.

    In the sampled mode a fresh query index set is drawn each outer
    iteration and its supervision rows are rebuilt from labels. With a
    separate query set the supervision is fixed and the code-pull term
    vanishes. ``on_outer_end(outer, seconds, model, db_signs)`` fires after
    each outer iteration.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    if len(labels) != n:
        raise ValueError("labels must have one row per feature row")
    if config.mode == "symmetric_baseline":
        raise ValueError("use train_symmetric_baseline for the symmetric mode")

    rng = np.random.default_rng(config.seed)
    model = init_encoder((dim, *config.hidden_dims, config.code_len), rng)
    db = _init_db_codes(rng, n, config.code_len)
    opt = OptimizerState(config.learning_rate, config.optimizer)
    history: list[HistoryRecord] = []
    weighted = config.imbalance_weighting

    sampled = config.mode == "asymmetric_sampled"
    if sampled:
        if config.query_count > n:
            raise ValueError("query_count exceeds database size")
        block = None
        qfeat = None
    else:
        if query_features is None or query_labels is None:
            raise ValueError(
                "asymmetric_separate_queries mode needs query_features and "
                "query_labels"
            )
        qfeat = np.asarray(query_features, dtype=np.float64)
        block = build_similarity(query_labels, labels)

    # No database row is tied to a separate query, so the pull term vanishes.
    gamma = config.gamma if sampled else 0.0

    def snapshot() -> TrainResult:
        return TrainResult(model, _pack(db), history)

    for outer in range(1, config.outer_iters + 1):
        outer_start = time.perf_counter()
        if sampled:
            omega = sample_query_indices(n, config.query_count, rng)
            block = build_sampled_similarity(labels, omega)
            qfeat = features[omega]
        if outer == 1:
            start_obj = objective(forward(model, qfeat)[1], db, block, gamma, weighted)
            history.append(HistoryRecord(1, 0, "init", start_obj, 0.0))
        m = block.query_count
        for inner in range(1, config.inner_iters + 1):
            phase_start = time.perf_counter()
            order = rng.permutation(m)
            try:
                for batch in _batches(order, config.batch_size):
                    minibatch_step(
                        model, opt, qfeat, batch, db, block, gamma,
                        weighted=weighted,
                    )
                relaxed = forward(model, qfeat)[1]
            except NonFiniteError as err:
                raise TrainingDiverged(str(err), snapshot()) from err
            seconds = time.perf_counter() - phase_start
            history.append(
                HistoryRecord(
                    outer, inner, "theta",
                    objective(relaxed, db, block, gamma, weighted), seconds,
                )
            )
            phase_start = time.perf_counter()
            v_step(
                db, relaxed, block, gamma,
                weighted=weighted, track_objective=track_objective,
            )
            seconds = time.perf_counter() - phase_start
            history.append(
                HistoryRecord(
                    outer, inner, "v",
                    objective(relaxed, db, block, gamma, weighted), seconds,
                )
            )
        if on_outer_end is not None:
            on_outer_end(outer, time.perf_counter() - outer_start, model, db)
    return snapshot()


def _full_pair_imbalance(labels: LabelMatrix, chunk: int = 512) -> float:
    """Positive/negative ratio over all ordered database pairs."""
    n = len(labels)
    pos = 0
    for start in range(0, n, chunk):
        rows = range(start, min(start + chunk, n))
        pos += int(labels.subset(rows).shares_label(labels).sum())
    neg = n * n - pos
    if pos == 0 or neg == 0:
        return 1.0
    return pos / neg


def train_symmetric_baseline(
    features,
    labels: LabelMatrix,
    config: TrainConfig,
    on_epoch_end: Callable | None = None,
):
    """Single-network contrast trainer: every epoch scans all database
    points and pays the full point-times-database pair cost.

    Each epoch freezes the network outputs for the whole database as
    targets, then steps the network minibatch-by-minibatch against them.
    Returns (model, history); database codes come from encode_queries
    afterwards.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    if len(labels) != n:
        raise ValueError("labels must have one row per feature row")
    rng = np.random.default_rng(config.seed)
    model = init_encoder((dim, *config.hidden_dims, config.code_len), rng)
    opt = OptimizerState(config.learning_rate, config.optimizer)
    neg_weight = (
        _full_pair_imbalance(labels) if config.imbalance_weighting else None
    )
    history: list[HistoryRecord] = []
    for epoch in range(1, config.outer_iters + 1):
        epoch_start = time.perf_counter()
        try:
            targets = forward(model, features)[1]
            order = rng.permutation(n)
            epoch_loss = 0.0
            for batch in _batches(order, config.batch_size):
                sign_rows = np.where(
                    labels.subset(batch).shares_label(labels), 1.0, -1.0
                )
                weight_rows = None
                if neg_weight is not None:
                    weight_rows = np.where(sign_rows == 1.0, 1.0, neg_weight)
                loss, grad_w, grad_b = loss_and_param_grads(
                    model, features[batch], targets, sign_rows, weight_rows,
                    None, 0.0,
                )
                if not np.isfinite(loss):
                    raise NonFiniteError("batch loss is non-finite")
                _apply_gradients(model, opt, grad_w, grad_b)
                epoch_loss += loss
        except NonFiniteError as err:
            raise TrainingDiverged(
                str(err), TrainResult(model, None, history)
            ) from err
        seconds = time.perf_counter() - epoch_start
        history.append(HistoryRecord(epoch, 1, "epoch", epoch_loss, seconds))
        if on_epoch_end is not None:
            on_epoch_end(epoch, seconds, model)
    return model, history


@dataclass
class ProbeResult:
    mode: str
    sizes: list[int]
    seconds: list[float]
    slope: float


def complexity_probe(
    n_values,
    query_count: int,
    code_len: int,
    mode: str = "asymmetric_sampled",
    feature_dim: int = 32,
    num_clusters: int = 10,
    noise: float = 0.1,
    hidden_dims: tuple[int, ...] = (64,),
    inner_iters: int = 1,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    optimizer: str = "adam",
    warmup_iters: int = 1,
    measured_iters: int = 2,
    seed: int = 0,
) -> ProbeResult:
    """Measure per-outer-iteration wall-clock across database sizes.

    Fits a straight line to log(seconds) against log(n); the returned
    slope is the growth exponent.
    """
    n_values = [int(n) for n in n_values]
    if len(n_values) < 3:
        raise ValueError("need at least 3 database sizes")
    sizes, secs = [], []
    for n in n_values:
        per_cluster = -(-n // num_clusters)
        feats, labels = dataio.gen_synthetic_clusters(
            num_clusters, per_cluster, feature_dim, noise, seed
        )
        feats = feats[:n]
        labels = labels.subset(range(n))
        config = TrainConfig(
            code_len=code_len,
            query_count=query_count,
            outer_iters=warmup_iters + measured_iters,
            inner_iters=inner_iters,
            batch_size=min(batch_size, query_count),
            learning_rate=learning_rate,
            seed=seed,
            mode="asymmetric_sampled",
            hidden_dims=hidden_dims,
            optimizer=optimizer,
        )
        times: list[float] = []
        if mode == "symmetric_baseline":
            train_symmetric_baseline(
                feats, labels, config,
                on_epoch_end=lambda e, s, _m: times.append(s),
            )
        else:
            train(
                feats, labels, config,
                on_outer_end=lambda o, s, _m, _v: times.append(s),
            )
        sizes.append(n)
        secs.append(float(np.mean(times[warmup_iters:])))
    slope = float(np.polyfit(np.log(sizes), np.log(secs), 1)[0])
    return ProbeResult(mode=mode, sizes=sizes, seconds=secs, slope=slope)
