"""Clustering baselines, the Euclidean-Prim tree baseline, and evaluation.

All metrics are pure functions of their inputs and safe to evaluate in
parallel across samples and chains. Ground-truth sensor labels come from the
agent model's sensor ownership.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.cluster.vq import kmeans2

from .inference import (ChainSample, TreeStructure, _root_edges,
                        active_components, prim_mst)


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Hubert-Arabie adjusted Rand index between two label vectors.

    When the index's denominator is zero (both partitions trivial) this
    returns 1.0 if the two are identical as set partitions and 0.0 otherwise.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two points")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) // 2

    index = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb2(n)
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        # identical as set partitions <=> the table is a (scaled) permutation
        same = ((np.count_nonzero(table, axis=1) == 1).all()
                and (np.count_nonzero(table, axis=0) == 1).all())
        return 1.0 if same else 0.0
    return float((index - expected) / (max_index - expected))


def kmeans(data: np.ndarray, k: int, seed: int, restarts: int = 10) -> np.ndarray:
    """k-means with k-means++ seeding; best inertia over `restarts` runs."""
    data = np.asarray(data, dtype=float)
    _check_k(data, k)
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centroids, labels = kmeans2(data, k, minit="++", seed=rng, missing="warn")
        inertia = float(np.square(data - centroids[labels]).sum())
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels
    return best_labels


def ward(data: np.ndarray, k: int) -> np.ndarray:
    """Ward agglomerative clustering cut at k clusters."""
    data = np.asarray(data, dtype=float)
    _check_k(data, k)
    if k == data.shape[0]:
        return np.arange(k)
    Z = linkage(data, method="ward")
    return fcluster(Z, t=k, criterion="maxclust") - 1


def gmm_em(data: np.ndarray, k: int, seed: int, tol: float = 1e-8,
           max_iter: int = 500) -> np.ndarray:
    """Full-covariance EM mixture, k-means initialised.

    Converges when the relative log-likelihood change drops below `tol`.
    A component whose responsibility mass collapses is re-seeded from the
    point farthest from every current mean.
    """
    X = np.asarray(data, dtype=float)
    _check_k(X, k)
    n, d = X.shape
    reg = 1e-6 * max(np.trace(np.atleast_2d(np.cov(X.T))) / d, 1e-12)

    labels = kmeans(X, k, seed)
    means = np.stack([X[labels == j].mean(axis=0) if np.any(labels == j)
                      else X[j % n] for j in range(k)])
    covs = np.stack([_safe_cov(X[labels == j], d, reg) for j in range(k)])
    weights = np.maximum(np.bincount(labels, minlength=k), 1) / n
    weights = weights / weights.sum()

    prev_ll = -np.inf
    for _ in range(max_iter):
        logp = np.stack([_mvn_logpdf(X, means[j], covs[j]) for j in range(k)], axis=1)
        logp = logp + np.log(weights)
        top = logp.max(axis=1, keepdims=True)
        log_norm = top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))
        resp = np.exp(logp - log_norm[:, None])
        ll = float(log_norm.sum())

        nk = resp.sum(axis=0)
        dead = np.flatnonzero(nk < 1e-10)
        if dead.size:
            far = int(np.argmin(log_norm))          # worst-explained point
            for j in dead:
                means[j] = X[far]
                covs[j] = _safe_cov(X, d, reg)
                resp[:, j] = 0.0
                resp[far] = 0.0
                resp[far, j] = 1.0
            nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for j in range(k):
            dev = X - means[j]
            covs[j] = (resp[:, j, None] * dev).T @ dev / nk[j] + reg * np.eye(d)
        if abs(ll - prev_ll) < tol * max(abs(prev_ll), 1.0):
            break
        prev_ll = ll
    return np.argmax(resp, axis=1)


def _check_k(data: np.ndarray, k: int) -> None:
    if not 1 <= k <= data.shape[0]:
        raise ValueError(f"k must lie in [1, {data.shape[0]}], got {k}")


def _safe_cov(pts: np.ndarray, d: int, reg: float) -> np.ndarray:
    if pts.shape[0] < 2:
        return np.eye(d) * max(reg, 1e-6)
    return np.atleast_2d(np.cov(pts.T)) + reg * np.eye(d)


def _mvn_logpdf(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(cov)
    dev = np.linalg.solve(L, (X - mean).T)
    return (-0.5 * mean.size * np.log(2 * np.pi)
            - np.log(np.diagonal(L)).sum() - 0.5 * np.square(dev).sum(axis=0))


def euclidean_prim_tree(sample: ChainSample, activation_min: int = 2) -> TreeStructure:
    """Baseline tree: MST over active-component means with Euclidean weights,
    rooted at the most populated component."""
    state = sample.state
    k_max = state.pi.shape[0]
    active = active_components(state.z, k_max, activation_min)
    if not active:
        raise ValueError("no active components in sample")
    means = state.mu[list(active)]
    diff = means[:, None, :] - means[None, :, :]
    w = np.sqrt(np.square(diff).sum(axis=2))
    edges = prim_mst(w)
    counts = np.bincount(state.z, minlength=k_max)
    root_local = int(np.argmax(counts[list(active)]))
    parents_local = _root_edges(edges, len(active), root_local)
    parents = {active[i]: (None if p is None else active[p])
               for i, p in parents_local.items()}
    return TreeStructure(parents, active)


def euclidean_prim_baseline(samples: list[ChainSample],
                            activation_min: int = 2) -> list[TreeStructure]:
    """Per-sample Euclidean-Prim trees for a plain-mixture chain."""
    return [euclidean_prim_tree(s, activation_min) for s in samples]


def component_part_bijection(z: np.ndarray, active: tuple[int, ...],
                             truth_labels: np.ndarray) -> dict[int, int] | None:
    """Map each active component to the single true part its points carry.

    Returns None unless the assignment restricted to active components is a
    bijection onto the parts (which it is exactly when ARI = 1 and the part
    count matches)."""
    mapping: dict[int, int] = {}
    for k in active:
        parts = np.unique(truth_labels[z == k])
        if parts.size != 1:
            return None
        mapping[k] = int(parts[0])
    if len(set(mapping.values())) != len(mapping):
        return None
    return mapping


def tree_success(sample: ChainSample, truth_edges: set[frozenset[int]],
                 truth_labels: np.ndarray, activation_min: int = 2,
                 tree: TreeStructure | None = None) -> bool:
    """True iff the sample is eligible (correct part count, ARI exactly 1)
    and its undirected tree edges match the ground truth under the bijection
    induced by the perfect clustering. Root choice cannot affect the result."""
    state = sample.state
    tree = tree if tree is not None else state.tree
    if tree is None:
        return False
    active = active_components(state.z, state.pi.shape[0], activation_min)
    n_parts = int(np.unique(truth_labels).size)
    if len(active) != n_parts:
        return False
    if adjusted_rand_index(state.z, truth_labels) != 1.0:
        return False
    mapping = component_part_bijection(state.z, active, truth_labels)
    if mapping is None:
        return False
    mapped = {frozenset(mapping[c] for c in e) for e in tree.undirected_edges()}
    return mapped == truth_edges


@dataclass
class EvaluationReport:
    """Per-sample scores for one chain plus sweep metadata.

    success_rate is successes over eligible samples (part count correct and
    ARI exactly 1); it is None when no sample is eligible, never 0 by fiat.
    """
    method: str
    d: int
    p_coordination: float
    seed: int
    ari: np.ndarray
    node_counts: np.ndarray
    eligible: np.ndarray
    tree_correct: np.ndarray
    estimates_trees: bool = True

    @property
    def n_samples(self) -> int:
        return self.ari.size

    @property
    def success_rate(self) -> float | None:
        n_eligible = int(self.eligible.sum())
        if n_eligible == 0:
            return None
        return float(self.tree_correct[self.eligible].sum() / n_eligible)


def aggregate(samples: list[ChainSample], truth_edges: set[frozenset[int]],
              truth_labels: np.ndarray, *, method: str, d: int,
              p_coordination: float, seed: int, activation_min: int = 2,
              trees: list[TreeStructure] | None = None,
              estimates_trees: bool = True) -> EvaluationReport:
    """Score every sample of one chain against the ground truth.

    `trees` overrides the per-sample trees (used for the Euclidean-Prim
    baseline on plain-mixture chains); by default the sample's own tree is
    scored. Pass estimates_trees=False for clustering-only methods so their
    rows stay out of tree_success.csv.
    """
    if not samples:
        raise ValueError("need at least one sample")
    truth_labels = np.asarray(truth_labels)
    n_parts = int(np.unique(truth_labels).size)
    k_max = samples[0].state.pi.shape[0]

    ari = np.empty(len(samples))
    nodes = np.empty(len(samples), dtype=int)
    eligible = np.zeros(len(samples), dtype=bool)
    correct = np.zeros(len(samples), dtype=bool)
    for i, s in enumerate(samples):
        active = active_components(s.state.z, k_max, activation_min)
        nodes[i] = len(active)
        ari[i] = adjusted_rand_index(s.state.z, truth_labels)
        eligible[i] = (nodes[i] == n_parts) and (ari[i] == 1.0)
        tree = trees[i] if trees is not None else s.state.tree
        if estimates_trees and eligible[i] and tree is not None:
            correct[i] = tree_success(s, truth_edges, truth_labels,
                                      activation_min, tree=tree)
    return EvaluationReport(method=method, d=d, p_coordination=p_coordination,
                            seed=seed, ari=ari, node_counts=nodes,
                            eligible=eligible, tree_correct=correct,
                            estimates_trees=estimates_trees)


def clustering_report(labels: np.ndarray, truth_labels: np.ndarray, *, method: str,
                      d: int, p_coordination: float, seed: int) -> EvaluationReport:
    """Single-shot report for a non-Bayesian baseline partition."""
    truth_labels = np.asarray(truth_labels)
    ari = adjusted_rand_index(labels, truth_labels)
    nodes = int(np.unique(labels).size)
    eligible = (nodes == int(np.unique(truth_labels).size)) and (ari == 1.0)
    return EvaluationReport(method=method, d=d, p_coordination=p_coordination,
                            seed=seed, ari=np.array([ari]),
                            node_counts=np.array([nodes]),
                            eligible=np.array([eligible]),
                            tree_correct=np.array([False]),
                            estimates_trees=False)


_CSV_HEADER = ["method", "d", "p_coordination", "seed", "sample_index", "value"]


def write_report_csvs(reports: list[EvaluationReport], out_dir: str) -> dict[str, str]:
    """Write node_counts.csv, ari.csv, and tree_success.csv.

    node_counts and ari carry one row per sample. tree_success carries rows
    for eligible samples only (value 0 or 1); a group with no rows has an
    undefined success rate.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, f"{name}.csv")
             for name in ("node_counts", "ari", "tree_success")}
    rows = {name: [] for name in paths}
    for r in reports:
        meta = [r.method, r.d, r.p_coordination, r.seed]
        for i in range(r.n_samples):
            rows["node_counts"].append(meta + [i, int(r.node_counts[i])])
            rows["ari"].append(meta + [i, repr(float(r.ari[i]))])
            if r.estimates_trees and r.eligible[i]:
                rows["tree_success"].append(meta + [i, int(r.tree_correct[i])])
    for name, path in paths.items():
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            writer.writerows(rows[name])
    return paths
