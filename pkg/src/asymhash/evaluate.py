"""Retrieval evaluation over Hamming rankings.

All functions are pure and deterministic: rankings break distance ties by
ascending database index, so every metric has a single well-defined value.
Conventions for degenerate cases (documented per function) are also
recorded by the CLI in its output metadata.
"""

from __future__ import annotations

import numpy as np

from .hashcore import CodeMatrix, pairwise_hamming
from .simgraph import LabelMatrix

# Per-query list of database indices by ascending Hamming distance.
RankingResult = np.ndarray


def rank_by_hamming(query_codes: CodeMatrix, db_codes: CodeMatrix) -> RankingResult:
    """Full ranking per query; equal distances order by database index."""
    dist = pairwise_hamming(query_codes, db_codes)
    return np.argsort(dist, axis=1, kind="stable")


def relevance_from_labels(
    query_labels: LabelMatrix, db_labels: LabelMatrix
) -> np.ndarray:
    """Ground-truth neighbor matrix: rows sharing at least one label."""
    return query_labels.shares_label(db_labels)


def _check_relevance(ranking, relevance):
    relevance = np.asarray(relevance, dtype=bool)
    if relevance.shape != ranking.shape:
        raise ValueError(
            f"relevance shape {relevance.shape} does not match "
            f"ranking shape {ranking.shape}"
        )
    return relevance


def mean_average_precision(
    ranking: RankingResult, relevance, cutoff: int | None = None
) -> float:
    """MAP with optional rank cutoff.

    Average precision per query sums precision-at-r over relevant ranks
    r <= cutoff and divides by min(#relevant, cutoff). Queries with no
    relevant points contribute 0 and stay in the mean.
    """
    relevance = _check_relevance(ranking, relevance)
    n = ranking.shape[1]
    if cutoff is None:
        cutoff = n
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    cutoff = min(cutoff, n)
    ranked_rel = np.take_along_axis(relevance, ranking, axis=1)
    total_rel = ranked_rel.sum(axis=1)
    top = ranked_rel[:, :cutoff]
    hits = np.cumsum(top, axis=1, dtype=np.float64)
    ranks = np.arange(1, cutoff + 1, dtype=np.float64)
    precision_sum = np.where(top, hits / ranks, 0.0).sum(axis=1)
    denom = np.minimum(total_rel, cutoff)
    ap = np.where(denom > 0, precision_sum / np.maximum(denom, 1), 0.0)
    return float(ap.mean())


def topk_precision_curve(ranking: RankingResult, relevance, k_max: int) -> np.ndarray:
    """precision@k averaged over queries, for k = 1..k_max."""
    relevance = _check_relevance(ranking, relevance)
    n = ranking.shape[1]
    if not 1 <= k_max <= n:
        raise ValueError(f"need 1 <= k_max <= {n}, got {k_max}")
    ranked_rel = np.take_along_axis(relevance, ranking, axis=1)[:, :k_max]
    hits = np.cumsum(ranked_rel, axis=1, dtype=np.float64)
    ranks = np.arange(1, k_max + 1, dtype=np.float64)
    return (hits / ranks).mean(axis=0)


def precision_recall_by_radius(
    query_codes: CodeMatrix, db_codes: CodeMatrix, relevance
):
    """Lookup-style curve: retrieve everything within each Hamming radius.

    Returns (precision, recall) arrays over radius 0..code_len, averaged
    over queries. An empty retrieved set counts as precision 1.0; a query
    with no relevant points counts as recall 1.0.
    """
    dist = pairwise_hamming(query_codes, db_codes)
    relevance = np.asarray(relevance, dtype=bool)
    if relevance.shape != dist.shape:
        raise ValueError(
            f"relevance shape {relevance.shape} does not match "
            f"{dist.shape} query/database pair grid"
        )
    n_rel = relevance.sum(axis=1)
    precisions, recalls = [], []
    for radius in range(query_codes.code_len + 1):
        retrieved = dist <= radius
        n_ret = retrieved.sum(axis=1)
        n_hit = (retrieved & relevance).sum(axis=1)
        prec = np.where(n_ret > 0, n_hit / np.maximum(n_ret, 1), 1.0)
        rec = np.where(n_rel > 0, n_hit / np.maximum(n_rel, 1), 1.0)
        precisions.append(prec.mean())
        recalls.append(rec.mean())
    return np.array(precisions), np.array(recalls)
