"""Lexical retrieval baselines: tf-idf cosine ranking and its rank-reduced
latent-space variant, plus the cutoff sweep used to report their best F1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, PreconditionError

_ALNUM_RE = re.compile(r"[A-Za-z0-9]+")
_CAMEL_1 = re.compile(r"([a-z0-9])([A-Z])")
_CAMEL_2 = re.compile(r"([A-Z]+)([A-Z][a-z])")


def tokenize(text: str) -> list[str]:
    """Identifier-aware tokens: split on non-alphanumerics, then split
    camelCase runs; lowercase; drop single-character tokens."""
    tokens = []
    for chunk in _ALNUM_RE.findall(text):
        chunk = _CAMEL_2.sub(r"\1 \2", chunk)
        chunk = _CAMEL_1.sub(r"\1 \2", chunk)
        for part in chunk.split():
            part = part.lower()
            if len(part) > 1:
                tokens.append(part)
    return tokens


def tfidf_matrix(documents: list[str]) -> tuple[np.ndarray, list[str]]:
    """Term-document matrix: raw term counts scaled by ln(N/df).

    df is taken over the full document list, so a term present in every
    document weighs zero.
    """
    tokenized = [tokenize(doc) for doc in documents]
    vocab = sorted({tok for toks in tokenized for tok in toks})
    index = {tok: i for i, tok in enumerate(vocab)}
    n_docs = len(documents)
    counts = np.zeros((len(vocab), n_docs))
    for j, toks in enumerate(tokenized):
        for tok in toks:
            counts[index[tok], j] += 1.0
    df = (counts > 0).sum(axis=1)
    with np.errstate(divide="ignore"):
        idf = np.where(df > 0, np.log(n_docs / np.maximum(df, 1)), 0.0)
    return counts * idf[:, None], vocab


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosines of the rows of a against the rows of b; zero rows give 0."""
    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    sims = a @ b.T
    denom = np.outer(norms_a, norms_b)
    out = np.zeros_like(sims)
    nz = denom > 0
    out[nz] = sims[nz] / denom[nz]
    return out


def vsm_rank(requirements: list[str], code_docs: list[str]) -> np.ndarray:
    """matrix[i][j] = tf-idf cosine of requirement i against code doc j."""
    if not requirements or not code_docs:
        raise PreconditionError("vsm_rank needs at least one document on each side")
    matrix, _ = tfidf_matrix(list(requirements) + list(code_docs))
    docs = matrix.T  # documents as rows
    return _cosine_rows(docs[: len(requirements)], docs[len(requirements):])


def truncated_svd(matrix: np.ndarray, rank_k: int, seed: int = 0,
                  tol: float = 1e-10, max_iter: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Top-k singular values and right singular vectors by orthogonal iteration.

    Deterministic: the start subspace comes from a seeded generator. Raises
    when the subspace residual has not reached tol within max_iter sweeps.
    """
    n_docs = matrix.shape[1]
    if not 1 <= rank_k <= min(matrix.shape):
        raise PreconditionError(
            f"rank_k must be within 1..{min(matrix.shape)}, got {rank_k}"
        )
    gram = matrix.T @ matrix  # docs x docs, symmetric PSD
    norm = np.linalg.norm(gram)
    if norm == 0:
        return np.zeros(rank_k), np.zeros((n_docs, rank_k))
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n_docs, rank_k)))
    residual = np.inf
    for _ in range(max_iter):
        z = gram @ q
        q_next, _ = np.linalg.qr(z)
        small = q_next.T @ gram @ q_next
        residual = np.linalg.norm(gram @ q_next - q_next @ small) / norm
        q = q_next
        if residual <= tol:
            break
    else:
        raise ConvergenceError("truncated decomposition did not converge", residual)
    small = q.T @ gram @ q
    eigvals, eigvecs = np.linalg.eigh(small)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    v = q @ eigvecs[:, order]
    return np.sqrt(eigvals), v


def lsi_rank(
    requirements: list[str],
    code_docs: list[str],
    rank_k: int,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Cosine similarity in the rank-k latent space of the tf-idf matrix."""
    if not requirements or not code_docs:
        raise PreconditionError("lsi_rank needs at least one document on each side")
    matrix, _ = tfidf_matrix(list(requirements) + list(code_docs))
    sigma, v = truncated_svd(matrix, rank_k, seed=seed, tol=tol, max_iter=max_iter)
    latent = v * sigma[None, :]  # document coordinates in the latent space
    return _cosine_rows(latent[: len(requirements)], latent[len(requirements):])


@dataclass(frozen=True)
class SweepResult:
    best_cutoff: float
    best_f1: float
    curve: tuple[tuple[float, float, float, float], ...]  # (cutoff, P, R, F1)

    def to_dict(self) -> dict:
        return {
            "best_cutoff": self.best_cutoff,
            "best_f1": self.best_f1,
            "curve": [
                {"cutoff": c, "precision": p, "recall": r, "f1": f} for c, p, r, f in self.curve
            ],
        }


def sweep_threshold(
    matrix: np.ndarray, gt_pairs: set[tuple[int, int]], sweep_step: float = 0.01
) -> SweepResult:
    """Project-optimized cutoff: scan cutoffs, report the best pairwise F1.

    Predicted links at a cutoff are all (i, j) with similarity >= cutoff;
    ties in F1 resolve to the smallest cutoff.
    """
    steps = int(round(1.0 / sweep_step))
    curve = []
    best_cutoff, best_f1 = sweep_step, -1.0
    gt = set(gt_pairs)
    for n in range(1, steps + 1):
        cutoff = round(n * sweep_step, 10)
        predicted = {(i, j) for i, j in zip(*np.nonzero(matrix >= cutoff))}
        true_pos = len(predicted & gt)
        precision = true_pos / len(predicted) if predicted else 0.0
        recall = true_pos / len(gt) if gt else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        curve.append((cutoff, precision, recall, f1))
        if f1 > best_f1:
            best_cutoff, best_f1 = cutoff, f1
    return SweepResult(best_cutoff=best_cutoff, best_f1=max(best_f1, 0.0), curve=tuple(curve))
