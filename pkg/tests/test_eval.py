import numpy as np
import pytest

from asymhash.evaluate import (
    mean_average_precision,
    precision_recall_by_radius,
    rank_by_hamming,
    relevance_from_labels,
    topk_precision_curve,
)
from asymhash.hashcore import CodeMatrix, hamming_distance
from asymhash.simgraph import LabelMatrix


def random_codes(rng, rows, code_len):
    return CodeMatrix.from_signs(rng.integers(0, 2, (rows, code_len)) * 2 - 1)


def naive_ranking(queries, database):
    out = []
    for i in range(queries.rows):
        dist = [
            (hamming_distance(queries.row(i), database.row(j)), j)
            for j in range(database.rows)
        ]
        out.append([j for _, j in sorted(dist)])
    return np.array(out)


def naive_average_precision(ranked_rel, total_rel, cutoff):
    hits = 0
    precision_sum = 0.0
    for rank, rel in enumerate(ranked_rel[:cutoff], start=1):
        if rel:
            hits += 1
            precision_sum += hits / rank
    denom = min(total_rel, cutoff)
    return precision_sum / denom if denom else 0.0


class TestRanking:
    def test_exact_match_ranks_first(self):
        db = CodeMatrix.from_signs([[1, 1, 1], [1, -1, 1], [-1, -1, -1]])
        query = CodeMatrix.from_signs([[1, -1, 1]])
        assert rank_by_hamming(query, db)[0, 0] == 1

    def test_ties_break_by_database_index(self):
        db = CodeMatrix.from_signs([[1, -1], [-1, 1], [1, 1]])
        query = CodeMatrix.from_signs([[1, 1]])
        # rows 0 and 1 are both at distance 1; row 2 at distance 0
        assert rank_by_hamming(query, db)[0].tolist() == [2, 0, 1]

    def test_matches_naive_sort(self):
        rng = np.random.default_rng(0)
        queries = random_codes(rng, 6, 10)
        database = random_codes(rng, 25, 10)
        assert np.array_equal(
            rank_by_hamming(queries, database), naive_ranking(queries, database)
        )

    def test_rejects_code_len_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            rank_by_hamming(
                CodeMatrix.from_signs([[1, 1]]), CodeMatrix.from_signs([[1]])
            )


class TestMeanAveragePrecision:
    def test_perfect_ranking(self):
        ranking = np.array([[0, 1, 2, 3]])
        relevance = np.array([[True, True, False, False]])
        assert mean_average_precision(ranking, relevance) == pytest.approx(1.0)

    def test_alternating_relevance_case(self):
        ranking = np.array([[0, 1, 2]])
        relevance = np.array([[True, False, True]])
        assert mean_average_precision(ranking, relevance) == pytest.approx(5 / 6)

    def test_zero_relevant_counts_as_zero(self):
        ranking = np.array([[0, 1], [0, 1]])
        relevance = np.array([[False, False], [True, False]])
        assert mean_average_precision(ranking, relevance) == pytest.approx(0.5)

    def test_cutoff_normalizes_by_min(self):
        # 3 relevant, cutoff 2, both top slots relevant -> AP 1.0
        ranking = np.array([[0, 1, 2, 3]])
        relevance = np.array([[True, True, True, False]])
        assert mean_average_precision(
            ranking, relevance, cutoff=2
        ) == pytest.approx(1.0)

    def test_rejects_bad_cutoff(self):
        with pytest.raises(ValueError, match="cutoff"):
            mean_average_precision(
                np.array([[0]]), np.array([[True]]), cutoff=0
            )

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            m = int(rng.integers(1, 6))
            ranking = np.stack([rng.permutation(n) for _ in range(m)])
            relevance = rng.random((m, n)) < 0.3
            cutoff = int(rng.integers(1, n + 1))
            expected = float(
                np.mean(
                    [
                        naive_average_precision(
                            relevance[i, ranking[i]].tolist(),
                            int(relevance[i].sum()),
                            cutoff,
                        )
                        for i in range(m)
                    ]
                )
            )
            got = mean_average_precision(ranking, relevance, cutoff)
            assert got == pytest.approx(expected, abs=1e-12)


class TestTopKCurve:
    def test_all_relevant_prefix(self):
        ranking = np.array([[0, 1, 2]])
        relevance = np.array([[True, True, True]])
        assert topk_precision_curve(ranking, relevance, 3).tolist() == [
            1.0, 1.0, 1.0,
        ]

    def test_half_relevant(self):
        ranking = np.array([[0, 1]])
        relevance = np.array([[True, False]])
        assert topk_precision_curve(ranking, relevance, 2).tolist() == [1.0, 0.5]

    def test_rejects_k_beyond_database(self):
        with pytest.raises(ValueError, match="k_max"):
            topk_precision_curve(np.array([[0]]), np.array([[True]]), 2)

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(2)
        ranking = np.stack([rng.permutation(12) for _ in range(4)])
        relevance = rng.random((4, 12)) < 0.4
        curve = topk_precision_curve(ranking, relevance, 12)
        for k in range(1, 13):
            expected = np.mean(
                [
                    relevance[i, ranking[i, :k]].sum() / k
                    for i in range(4)
                ]
            )
            assert curve[k - 1] == pytest.approx(expected, abs=1e-12)


class TestPrecisionRecallByRadius:
    def test_full_radius_has_total_recall(self):
        rng = np.random.default_rng(3)
        queries = random_codes(rng, 4, 6)
        database = random_codes(rng, 15, 6)
        relevance = rng.random((4, 15)) < 0.5
        _, recall = precision_recall_by_radius(queries, database, relevance)
        assert recall[-1] == pytest.approx(1.0)

    def test_zero_radius_exact_neighbor(self):
        database = CodeMatrix.from_signs([[1, 1], [1, -1]])
        queries = CodeMatrix.from_signs([[1, 1]])
        relevance = np.array([[True, False]])
        precision, recall = precision_recall_by_radius(queries, database, relevance)
        assert precision[0] == pytest.approx(1.0)
        assert recall[0] == pytest.approx(1.0)

    def test_recall_is_monotone(self):
        rng = np.random.default_rng(4)
        queries = random_codes(rng, 5, 8)
        database = random_codes(rng, 20, 8)
        relevance = rng.random((5, 20)) < 0.3
        precision, recall = precision_recall_by_radius(queries, database, relevance)
        assert np.all(np.diff(recall) >= -1e-12)
        assert np.all((0.0 <= precision) & (precision <= 1.0))
        assert np.all((0.0 <= recall) & (recall <= 1.0))

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(5)
        queries = random_codes(rng, 3, 5)
        database = random_codes(rng, 12, 5)
        relevance = rng.random((3, 12)) < 0.4
        precision, recall = precision_recall_by_radius(queries, database, relevance)
        for radius in range(6):
            precisions, recalls = [], []
            for i in range(3):
                retrieved = [
                    j
                    for j in range(12)
                    if hamming_distance(queries.row(i), database.row(j)) <= radius
                ]
                hit = sum(1 for j in retrieved if relevance[i, j])
                n_rel = int(relevance[i].sum())
                precisions.append(hit / len(retrieved) if retrieved else 1.0)
                recalls.append(hit / n_rel if n_rel else 1.0)
            assert precision[radius] == pytest.approx(np.mean(precisions), abs=1e-12)
            assert recall[radius] == pytest.approx(np.mean(recalls), abs=1e-12)


def test_metrics_ignore_order_within_equal_relevance_tie_groups():
    # swapping two database rows that are equidistant and equally relevant
    # must not change MAP or precision@k
    rng = np.random.default_rng(6)
    signs = rng.integers(0, 2, (10, 8)) * 2 - 1
    signs[4] = signs[7]  # rows 4 and 7 tie at every distance
    query = CodeMatrix.from_signs((rng.integers(0, 2, (3, 8)) * 2 - 1))
    relevance = rng.random((3, 10)) < 0.4
    relevance[:, 7] = relevance[:, 4]

    swapped = signs.copy()
    swapped[[4, 7]] = swapped[[7, 4]]
    swapped_rel = relevance.copy()
    swapped_rel[:, [4, 7]] = swapped_rel[:, [7, 4]]

    base_rank = rank_by_hamming(query, CodeMatrix.from_signs(signs))
    swap_rank = rank_by_hamming(query, CodeMatrix.from_signs(swapped))
    assert mean_average_precision(base_rank, relevance) == pytest.approx(
        mean_average_precision(swap_rank, swapped_rel), abs=1e-15
    )
    assert topk_precision_curve(base_rank, relevance, 10) == pytest.approx(
        topk_precision_curve(swap_rank, swapped_rel, 10), abs=1e-15
    )


def test_relevance_from_labels_matches_similarity_rule():
    q = LabelMatrix([{0, 2}, {5}])
    d = LabelMatrix([{2}, {1}, {5, 0}])
    assert relevance_from_labels(q, d).tolist() == [
        [True, False, True],
        [False, False, True],
    ]
