import math
import random

import numpy as np
import pytest

from reqtrace.baselines import (
    lsi_rank,
    sweep_threshold,
    tfidf_matrix,
    tokenize,
    truncated_svd,
    vsm_rank,
)
from reqtrace.errors import ConvergenceError, PreconditionError


def test_tokenizer_splits_identifiers():
    assert tokenize("getCulturalHeritage") == ["get", "cultural", "heritage"]
    assert tokenize("snake_case_name") == ["snake", "case", "name"]
    assert tokenize("HTTPResponse") == ["http", "response"]
    assert tokenize("x a b1") == ["b1"]  # single-character tokens dropped


def test_vsm_identical_single_term_docs():
    # idf > 0: the shared term is absent from the third document
    sims = vsm_rank(["apple"], ["apple", "cherry"])
    assert sims[0, 0] == pytest.approx(1.0)
    assert sims[0, 1] == 0.0
    # term in all documents: idf = 0 zeroes the vectors, cosine defined 0
    sims = vsm_rank(["apple"], ["apple"])
    assert sims[0, 0] == 0.0


def test_vsm_disjoint_vocabulary_zero():
    sims = vsm_rank(["alpha beta"], ["gamma delta"])
    assert sims[0, 0] == 0.0


def test_vsm_hand_computed_three_document_oracle():
    # R: "login login password", C1: "login session session", C2: "payment payment"
    # N=3; df(login)=2, df(password)=df(session)=df(payment)=1
    reqs = ["login login password"]
    code = ["login session session", "payment payment"]
    sims = vsm_rank(reqs, code)

    a = math.log(3 / 2)  # idf login
    b = math.log(3 / 1)  # idf of the unique terms
    # R = (2a, b, 0, 0); C1 = (a, 0, 2b, 0); C2 = (0, 0, 0, 2b)
    expected_rc1 = (2 * a * a) / (
        math.sqrt((2 * a) ** 2 + b**2) * math.sqrt(a**2 + (2 * b) ** 2)
    )
    assert sims[0, 0] == pytest.approx(expected_rc1, abs=1e-9)
    assert sims[0, 1] == pytest.approx(0.0, abs=1e-9)


def test_vsm_requires_documents():
    with pytest.raises(PreconditionError):
        vsm_rank([], ["x"])


def test_vsm_symmetric_under_document_permutation():
    reqs = ["login password", "tour booking"]
    code = ["password check", "booking payment", "image util"]
    base = vsm_rank(reqs, code)
    permuted = vsm_rank(list(reversed(reqs)), code[::-1])
    assert np.allclose(base, permuted[::-1, ::-1])


# ---------------------------------------------------------------------------
# LSI


def corpus():
    reqs = ["user login password account", "tour booking reservation payment"]
    code = [
        "login password check session token",
        "booking payment invoice reservation",
        "image resize scale util",
    ]
    return reqs, code


def test_lsi_full_rank_equals_vsm():
    reqs, code = corpus()
    matrix, _ = tfidf_matrix(reqs + code)
    full_rank = min(matrix.shape)
    vsm = vsm_rank(reqs, code)
    lsi = lsi_rank(reqs, code, rank_k=full_rank)
    assert np.abs(lsi - vsm).max() < 1e-6


def test_lsi_rank1_identical_docs_similarity_one():
    sims = lsi_rank(["apple"], ["apple", "banana"], rank_k=1)
    assert sims[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_lsi_rank_k_bounds():
    reqs, code = corpus()
    with pytest.raises(PreconditionError):
        lsi_rank(reqs, code, rank_k=0)
    with pytest.raises(PreconditionError):
        lsi_rank(reqs, code, rank_k=10_000)


def test_truncated_svd_matches_hand_eigen_solution():
    # A^T A = I + J; eigenvalues 4, 1, 1 (char. poly (x-1)^2 (x-4)),
    # so singular values are 2, 1, 1
    matrix = np.array([[1.0, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    sigma, v = truncated_svd(matrix, 2, seed=0)
    assert sigma[0] == pytest.approx(2.0, abs=1e-6)
    assert sigma[1] == pytest.approx(1.0, abs=1e-6)
    # top right-singular vector is (1,1,1)/sqrt(3)
    assert np.abs(v[:, 0]) == pytest.approx(np.full(3, 1 / math.sqrt(3)), abs=1e-6)


def test_truncated_svd_deterministic():
    matrix = np.array([[1.0, 2, 0], [0, 1, 1], [3, 0, 1], [1, 1, 1]])
    s1, v1 = truncated_svd(matrix, 2, seed=5)
    s2, v2 = truncated_svd(matrix, 2, seed=5)
    assert np.array_equal(s1, s2) and np.array_equal(v1, v2)


def test_truncated_svd_nonconvergence_reports_residual():
    matrix = np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]])
    with pytest.raises(ConvergenceError, match="residual"):
        truncated_svd(matrix, 1, seed=0, tol=0.0, max_iter=2)


def test_truncated_svd_zero_matrix():
    sigma, v = truncated_svd(np.zeros((3, 2)), 1, seed=0)
    assert sigma[0] == 0.0


# ---------------------------------------------------------------------------
# sweep


def test_sweep_perfect_separation():
    matrix = np.array([[0.9, 0.1], [0.2, 0.85]])
    result = sweep_threshold(matrix, {(0, 0), (1, 1)}, 0.01)
    assert result.best_f1 == 1.0
    assert 0.2 < result.best_cutoff <= 0.85


def test_sweep_empty_ground_truth():
    matrix = np.array([[0.9]])
    result = sweep_threshold(matrix, set(), 0.01)
    assert result.best_f1 == 0.0


def test_sweep_best_is_max_of_curve_and_smallest_tie():
    rng = random.Random(11)
    matrix = np.array([[rng.random() for _ in range(5)] for _ in range(5)])
    gt = {(i, j) for i in range(5) for j in range(5) if rng.random() < 0.3}
    result = sweep_threshold(matrix, gt, 0.01)
    f1s = [point[3] for point in result.curve]
    assert result.best_f1 == max(f1s)
    first_best = next(c for c, _, _, f in result.curve if f == result.best_f1)
    assert result.best_cutoff == first_best
    for cutoff, precision, recall, f1 in result.curve:
        assert result.best_f1 >= f1


def test_sweep_curve_covers_unit_interval():
    matrix = np.array([[0.5]])
    result = sweep_threshold(matrix, {(0, 0)}, 0.25)
    assert [point[0] for point in result.curve] == [0.25, 0.5, 0.75, 1.0]
