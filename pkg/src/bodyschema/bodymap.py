"""Information-metric sensor distances and the MDS body map.

For quantized channels a_i, a_j the plug-in joint distribution p_ij(x, y) is
the empirical frequency of (a_i,t = x, a_j,t = y) over the T steps. The
distance D(S_i, S_j) = H(S_i|S_j) + H(S_j|S_i) (base-2 logs) is a true metric
on discrete channels: symmetric, zero iff the channels determine each other,
and satisfying the triangle inequality.

The body map is the classical (Torgerson) MDS embedding of that matrix.

The pair histograms are embarrassingly parallel over unordered pairs; here
they are batched through one-hot matrix products. All outputs are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .simulate import TactileLog

_LOG2 = np.log(2.0)


@dataclass(frozen=True)
class JointHistogram:
    """Joint symbol counts for one sensor pair (i, j); counts[x-1, y-1] counts
    steps with a_i = x and a_j = y."""
    counts: np.ndarray    # (N, N) non-negative integers
    total: int

    def swapped(self) -> "JointHistogram":
        return JointHistogram(counts=self.counts.T, total=self.total)


@dataclass(frozen=True)
class DistanceMatrix:
    d_matrix: np.ndarray   # (M, M) symmetric, zero diagonal, in bits

    @property
    def n_sensors(self) -> int:
        return self.d_matrix.shape[0]


@dataclass(frozen=True)
class BodyMap:
    points: np.ndarray          # (M, d)
    dim: int
    eigen_spectrum: np.ndarray  # all MDS eigenvalues, descending (diagnostics)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def joint_histogram(a_i: np.ndarray, a_j: np.ndarray, n_levels: int) -> JointHistogram:
    """Count joint symbol occurrences of two quantized channels in {1..N}."""
    if a_i.shape != a_j.shape:
        raise ValueError("channels must have equal length")
    idx = (a_i.astype(np.intp) - 1) * n_levels + (a_j.astype(np.intp) - 1)
    counts = np.bincount(idx, minlength=n_levels * n_levels).reshape(n_levels, n_levels)
    return JointHistogram(counts=counts, total=int(a_i.size))


def conditional_entropy(hist: JointHistogram, direction: str = "j_given_i") -> float:
    """Plug-in conditional entropy in bits.

    direction "j_given_i" returns H(S_j | S_i) = -sum p(x,y) log2 p(y|x);
    "i_given_j" returns H(S_i | S_j). Zero-probability cells contribute 0.
    """
    if hist.total <= 0:
        raise ValueError("empty histogram")
    c = hist.counts
    if direction == "j_given_i":
        marg = c.sum(axis=1)
    elif direction == "i_given_j":
        marg = c.sum(axis=0)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    h = (xlogy(marg, marg).sum() - xlogy(c, c).sum()) / (hist.total * _LOG2)
    return float(h)


def pair_distance(hist: JointHistogram) -> float:
    """D(S_i, S_j) = H(S_i|S_j) + H(S_j|S_i) from one joint histogram."""
    return conditional_entropy(hist, "j_given_i") + conditional_entropy(hist, "i_given_j")


def information_metric(log: TactileLog, stride: int = 1,
                       block: int | None = None) -> DistanceMatrix:
    """Full symmetric matrix of pairwise information distances, in bits.

    `stride` subsamples the time axis (entropy estimates converge long before
    full-length logs; useful at full scale). Histograms for all pairs are
    computed as block matrix products of one-hot indicator matrices; each
    unordered pair is computed once and mirrored, so symmetry is exact.
    """
    if log.quantized is None:
        raise ValueError("quantized log required; call quantize() first")
    a = log.quantized[:, ::stride]
    M, T = a.shape
    N = log.n_levels

    # Entropy terms: with c the pair's joint counts and cx, cy its marginals,
    # D = (sum cx log2 cx + sum cy log2 cy - 2 sum c log2 c) / T.
    if block is None:
        block = max(8, int(8e7 / max(N * T * 4, 1)))
    codes = a.astype(np.intp) - 1
    marg = np.zeros((M, N))
    for i in range(M):
        marg[i] = np.bincount(codes[i], minlength=N)
    h_marg = xlogy(marg, marg).sum(axis=1)        # sum cx log cx, in nats

    def onehot(rows: np.ndarray) -> np.ndarray:
        out = np.zeros((rows.shape[0], N, rows.shape[1]), dtype=np.float32)
        for r in range(rows.shape[0]):
            out[r, rows[r], np.arange(rows.shape[1])] = 1.0
        return out.reshape(rows.shape[0] * N, rows.shape[1])

    D = np.zeros((M, M))
    for i0 in range(0, M, block):
        i1 = min(i0 + block, M)
        U_i = onehot(codes[i0:i1])
        for j0 in range(i0, M, block):
            j1 = min(j0 + block, M)
            U_j = U_i if j0 == i0 else onehot(codes[j0:j1])
            counts = (U_i @ U_j.T).astype(np.float64)   # exact: counts < 2**24
            counts = counts.reshape(i1 - i0, N, j1 - j0, N)
            joint = xlogy(counts, counts).sum(axis=(1, 3))     # sum c log c, nats
            d_blk = (h_marg[i0:i1, None] + h_marg[None, j0:j1] - 2.0 * joint) / (T * _LOG2)
            D[i0:i1, j0:j1] = d_blk
    iu = np.triu_indices(M, k=1)
    D[(iu[1], iu[0])] = D[iu]
    np.fill_diagonal(D, 0.0)
    D.flags.writeable = False
    return DistanceMatrix(d_matrix=D)


def mds_embed(dist: DistanceMatrix, dim: int) -> BodyMap:
    """Classical (Torgerson) MDS embedding of a distance matrix.

    Squares the distances, double-centers B = -1/2 J D^2 J, eigendecomposes,
    and keeps the `dim` largest eigenvalues; coordinates are eigenvectors
    scaled by sqrt(eigenvalue). Non-positive eigenvalues contribute zero
    coordinates. Each kept eigenvector is sign-fixed so its first nonzero
    component is positive, making the output deterministic.
    """
    D = dist.d_matrix
    M = D.shape[0]
    if not (1 <= dim <= M - 1):
        raise ValueError(f"dim must lie in [1, {M - 1}], got {dim}")
    if D.shape[0] != D.shape[1] or not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")

    J = np.eye(M) - np.ones((M, M)) / M
    B = -0.5 * J @ (D * D) @ J
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    pts = np.zeros((M, dim))
    for k in range(dim):
        if evals[k] > 0:
            v = evecs[:, k]
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if nz.size and v[nz[0]] < 0:
                v = -v
            pts[:, k] = v * np.sqrt(evals[k])
    pts.flags.writeable = False
    evals.flags.writeable = False
    return BodyMap(points=pts, dim=dim, eigen_spectrum=evals)
