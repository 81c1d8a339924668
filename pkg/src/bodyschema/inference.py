"""Gibbs sampler for the latent-joint Gaussian mixture (and its plain variant).

The model clusters points x_i in R^d with a weak-limit truncated Dirichlet
process Gaussian mixture. In latent-joint mode each pair of connected
components additionally generates a shared "joint point" q_s drawn from both
component densities at once, which makes the component tree identifiable: the
maximum a posteriori tree is the minimum spanning tree under the edge cost
  w(s, t) = -log[ N(q* | mu_s, Sigma_s) * N(q* | mu_t, Sigma_t) ]
evaluated at the product-density maximizer q*.

One sweep resamples assignments, component parameters (joints count as
ordinary observations for both endpoint components), joint points, mixture
weights, and finally the tree. A chain is strictly sequential; distinct
chains share no state. The per-point assignment step is a blocked update:
all z_i are resampled conditioned on the same (pi, mu, Sigma), which is the
correct conditional because the z_i are mutually independent given those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, multigammaln
from scipy.stats import wishart

from .bodymap import BodyMap


class NumericError(RuntimeError):
    """A density or factorization degenerated beyond recovery."""


class StateError(RuntimeError):
    """Sampler state violates a structural precondition."""


@dataclass(frozen=True)
class Hyperparameters:
    """Normal-Wishart / Dirichlet hyperparameters with weak-limit truncation.

    The component precision is Lambda_k ~ Wishart(V0, nu0) and the mean is
    mu_k ~ N(m0, (k0 Lambda_k)^-1); mixing weights are Dirichlet with
    symmetric concentration gamma / k_max.
    """
    gamma: float
    m0: np.ndarray
    k0: float
    V0: np.ndarray
    nu0: float
    k_max: int = 10

    def __post_init__(self):
        d = self.m0.shape[0]
        if self.gamma <= 0 or self.k0 <= 0:
            raise ValueError("gamma and k0 must be positive")
        if self.nu0 <= d - 1:
            raise ValueError(f"nu0 must exceed d - 1 = {d - 1}")
        if self.V0.shape != (d, d) or not np.allclose(self.V0, self.V0.T):
            raise ValueError("V0 must be a symmetric d x d matrix")
        np.linalg.cholesky(self.V0)   # SPD check
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    @property
    def dim(self) -> int:
        return self.m0.shape[0]

    @property
    def V0_inv(self) -> np.ndarray:
        return np.linalg.inv(self.V0)

    @classmethod
    def from_data(cls, data: np.ndarray, k_max: int = 10, gamma: float = 1.0,
                  k0: float = 0.01) -> "Hyperparameters":
        """Weakly informative, scale-adapted defaults.

        nu0 = d + 2 and V0 = cov^-1, so the prior expected component
        covariance E[Sigma] equals the data covariance while typical prior
        draws are ~(d + 2) times tighter; together with the small k0 this
        spreads prior component means across the data, which lets empty
        components nucleate anywhere and split merged clusters.
        """
        data = np.asarray(data, dtype=float)
        d = data.shape[1]
        nu0 = float(d + 2)
        cov = np.cov(data.T) if data.shape[0] > 1 else np.eye(d)
        cov = np.atleast_2d(cov)
        tr = np.trace(cov) / d
        cov = cov + (1e-8 * tr if tr > 0 else 1e-8) * np.eye(d)
        return cls(gamma=gamma, m0=data.mean(axis=0), k0=k0,
                   V0=np.linalg.inv(cov), nu0=nu0, k_max=k_max)


@dataclass
class TreeStructure:
    """Rooted tree over the active components: child -> parent, root -> None."""
    parents: dict[int, int | None]
    active: tuple[int, ...]

    def __post_init__(self):
        roots = [k for k, p in self.parents.items() if p is None]
        if set(self.parents) != set(self.active) or len(roots) != 1:
            raise StateError("parents must cover active components with one root")
        for k in self.active:
            cur, hops = k, 0
            while self.parents[cur] is not None:
                cur = self.parents[cur]
                if cur not in self.parents:
                    raise StateError(f"parent {cur} outside active set")
                hops += 1
                if hops > len(self.active):
                    raise StateError("parent links contain a cycle")

    @property
    def root(self) -> int:
        return next(k for k, p in self.parents.items() if p is None)

    def undirected_edges(self) -> set[frozenset[int]]:
        return {frozenset((k, p)) for k, p in self.parents.items() if p is not None}


@dataclass
class MixtureState:
    pi: np.ndarray                     # (k_max,)
    z: np.ndarray                      # (n,) component ids in 0..k_max-1
    mu: np.ndarray                     # (k_max, d)
    sigma: np.ndarray                  # (k_max, d, d)
    precision: np.ndarray              # (k_max, d, d), cached Sigma^-1
    chol: np.ndarray                   # (k_max, d, d), lower Cholesky of Sigma
    joints: dict[int, np.ndarray]      # child component -> q_s
    tree: TreeStructure | None

    def counts(self, k_max: int | None = None) -> np.ndarray:
        return np.bincount(self.z, minlength=k_max or self.pi.shape[0])

    def copy(self) -> "MixtureState":
        return MixtureState(
            pi=self.pi.copy(), z=self.z.copy(), mu=self.mu.copy(),
            sigma=self.sigma.copy(), precision=self.precision.copy(),
            chol=self.chol.copy(),
            joints={k: v.copy() for k, v in self.joints.items()},
            tree=TreeStructure(dict(self.tree.parents), tuple(self.tree.active))
            if self.tree is not None else None,
        )


@dataclass(frozen=True)
class ChainSample:
    """Deep post-burn-in snapshot of the sampler state."""
    iteration: int
    state: MixtureState
    log_joint: float


def active_components(z: np.ndarray, k_max: int, activation_min: int = 2) -> tuple[int, ...]:
    """Components counted as body parts: occupancy >= activation_min.

    The default follows the "more than one sample" reading; pass 1 to count
    every non-empty component.
    """
    counts = np.bincount(z, minlength=k_max)
    active = tuple(int(k) for k in np.flatnonzero(counts >= activation_min))
    return active


def _gauss_logpdf(X: np.ndarray, mu: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """log N(x | mu, Sigma) for rows of X, given the lower Cholesky of Sigma."""
    d = mu.shape[0]
    dev = solve_triangular(chol, (np.atleast_2d(X) - mu).T, lower=True)
    return (-0.5 * d * math.log(2 * math.pi)
            - np.log(np.diagonal(chol)).sum()
            - 0.5 * np.square(dev).sum(axis=0))


def _sample_wishart(V_factor: np.ndarray, nu: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Bartlett draw: Lambda = (F A)(F A)^T ~ W(V, nu) where V = F F^T."""
    d = V_factor.shape[0]
    A = np.zeros((d, d))
    A[np.tril_indices(d, k=-1)] = rng.standard_normal(d * (d - 1) // 2)
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(nu - np.arange(d)))
    W = V_factor @ A
    return W, W @ W.T


def _spd_factor(S_inv: np.ndarray) -> np.ndarray:
    """Factor F with inv(S_inv) = F F^T, with one jitter retry."""
    S_inv = 0.5 * (S_inv + S_inv.T)
    for attempt in range(2):
        try:
            L = np.linalg.cholesky(S_inv)
            return solve_triangular(L, np.eye(S_inv.shape[0]), lower=True).T
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise NumericError("posterior scale matrix is not positive definite")
            S_inv = S_inv + (1e-8 * np.trace(S_inv) / S_inv.shape[0]) * np.eye(S_inv.shape[0])


def _set_component(state: MixtureState, k: int, mu: np.ndarray,
                   precision: np.ndarray) -> None:
    sigma = np.linalg.inv(precision)
    sigma = 0.5 * (sigma + sigma.T)
    state.mu[k] = mu
    state.sigma[k] = sigma
    state.precision[k] = 0.5 * (precision + precision.T)
    try:
        state.chol[k] = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(np.trace(sigma) / sigma.shape[0], 1e-300)
        state.chol[k] = np.linalg.cholesky(sigma + jitter * np.eye(sigma.shape[0]))


def _draw_normal_wishart(mean: np.ndarray, kappa: float, V_inv: np.ndarray,
                         nu: float, rng: np.random.Generator):
    """One (mu, Lambda) draw from a normal-Wishart with natural parameters."""
    F = _spd_factor(V_inv)
    W, lam = _sample_wishart(F, nu, rng)
    xi = rng.standard_normal(mean.shape[0])
    mu = mean + np.linalg.solve(W.T, xi) / math.sqrt(kappa)
    return mu, lam


def _posterior_nw_params(Y: np.ndarray, hp: Hyperparameters):
    """Conjugate normal-Wishart update for an observation set Y (may be empty)."""
    n = Y.shape[0]
    if n == 0:
        return hp.m0, hp.k0, hp.V0_inv, hp.nu0
    ybar = Y.mean(axis=0)
    dev = Y - ybar
    S = dev.T @ dev
    kn = hp.k0 + n
    mn = (hp.k0 * hp.m0 + n * ybar) / kn
    dm = ybar - hp.m0
    Vn_inv = hp.V0_inv + S + (hp.k0 * n / kn) * np.outer(dm, dm)
    return mn, kn, Vn_inv, hp.nu0 + n


def _kmeans_labels(X: np.ndarray, k: int, rng: np.random.Generator,
                   restarts: int = 10) -> np.ndarray:
    from scipy.cluster.vq import kmeans2
    if np.allclose(X, X[0]):
        return np.zeros(X.shape[0], dtype=np.intp)   # degenerate: one point mass
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        centroids, lab = kmeans2(X, min(k, X.shape[0]), minit="++", seed=rng,
                                 missing="warn")
        inertia = float(np.square(X - centroids[lab]).sum())
        if inertia < best_inertia:
            best_inertia, best = inertia, lab
    return best.astype(np.intp)


def init_state(data: np.ndarray | BodyMap, hp: Hyperparameters,
               seed_or_rng: int | np.random.Generator,
               activation_min: int = 2, init: str = "kmeans") -> MixtureState:
    """Initial sampler state with a Euclidean-MST tree over the active means.

    init "kmeans" (default) assigns z by best-of-10 k-means++ at k_max
    clusters and draws component parameters from their conditional
    normal-Wishart posteriors. init "uniform" assigns z uniformly at random
    and draws parameters from the prior; in dimensions beyond a handful this
    variant freezes the blocked sweep in the basin of its first assignment
    pass (prior draws rarely land on the data), so it is kept for small
    problems and diagnostics only.
    """
    X = data.points if isinstance(data, BodyMap) else np.asarray(data, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("data must be non-empty")
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    n, d = X.shape
    K = hp.k_max

    state = MixtureState(
        pi=np.full(K, 1.0 / K),
        z=rng.integers(0, K, size=n),
        mu=np.zeros((K, d)), sigma=np.zeros((K, d, d)),
        precision=np.zeros((K, d, d)), chol=np.zeros((K, d, d)),
        joints={}, tree=None,
    )
    if init == "kmeans":
        state.z = _kmeans_labels(X, K, rng)
        for k in range(K):
            mn, kn, Vn_inv, nun = _posterior_nw_params(X[state.z == k], hp)
            mu, lam = _draw_normal_wishart(mn, kn, Vn_inv, nun, rng)
            _set_component(state, k, mu, lam)
    elif init == "uniform":
        for k in range(K):
            mu, lam = _draw_normal_wishart(hp.m0, hp.k0, hp.V0_inv, hp.nu0, rng)
            _set_component(state, k, mu, lam)
    else:
        raise ValueError(f"unknown init {init!r}")

    active = active_components(state.z, K, activation_min)
    if not active:
        active = active_components(state.z, K, 1)
    if len(active) == 1:
        state.tree = TreeStructure({active[0]: None}, active)
        return state

    means = state.mu[list(active)]
    diff = means[:, None, :] - means[None, :, :]
    w = np.sqrt(np.square(diff).sum(axis=2))
    edges = prim_mst(w)
    counts = state.counts()
    root_local = int(np.argmax(counts[list(active)]))
    parents_local = _root_edges(edges, len(active), root_local)
    parents = {active[k]: (None if p is None else active[p])
               for k, p in parents_local.items()}
    state.tree = TreeStructure(parents, active)
    state.joints = {s: 0.5 * (state.mu[s] + state.mu[p])
                    for s, p in state.tree.parents.items() if p is not None}
    return state


def sample_assignments(state: MixtureState, data: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Blocked categorical resampling of every z_i from pi_k N(x_i|mu_k, Sigma_k)."""
    K = state.pi.shape[0]
    logp = np.empty((data.shape[0], K))
    with np.errstate(divide="ignore"):
        log_pi = np.log(state.pi)
    for k in range(K):
        logp[:, k] = log_pi[k] + _gauss_logpdf(data, state.mu[k], state.chol[k])
    top = logp.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(top))
    if bad.size:
        raise NumericError(f"all component densities underflowed for point {bad[0]}")
    p = np.exp(logp - top[:, None])
    cdf = np.cumsum(p, axis=1)
    u = rng.random(data.shape[0]) * cdf[:, -1]
    state.z = np.minimum((cdf < u[:, None]).sum(axis=1), K - 1)
    return state.z


def sample_component_params(state: MixtureState, data: np.ndarray,
                            hp: Hyperparameters, rng: np.random.Generator,
                            include_joints: bool = True
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate normal-Wishart redraw of every component.

    The observation set of component k is its assigned points plus, in
    latent-joint mode, every joint point q_s with s = k or parent(s) = k:
    a joint counts as an ordinary observation for both endpoint components.
    Empty components are drawn from the prior.
    """
    parents = state.tree.parents if (include_joints and state.tree is not None) else {}
    for k in range(hp.k_max):
        rows = [data[state.z == k]]
        if include_joints:
            rows += [q[None, :] for s, q in state.joints.items()
                     if s == k or parents.get(s) == k]
        Y = np.concatenate(rows) if len(rows) > 1 else rows[0]
        mn, kn, Vn_inv, nun = _posterior_nw_params(Y, hp)
        mu, lam = _draw_normal_wishart(mn, kn, Vn_inv, nun, rng)
        _set_component(state, k, mu, lam)
    return state.mu, state.sigma


def product_gaussian(state: MixtureState, s: int, t: int):
    """Mean and precision of N(q|mu_s,Sigma_s) N(q|mu_t,Sigma_t) as a density in q."""
    lam = state.precision[s] + state.precision[t]
    m = np.linalg.solve(lam, state.precision[s] @ state.mu[s]
                        + state.precision[t] @ state.mu[t])
    return m, lam


def sample_joint_points(state: MixtureState, rng: np.random.Generator) -> dict[int, np.ndarray]:
    """Redraw every joint point from its product-of-two-Gaussians conditional.

    All edges are drawn in one batched pass: with combined precision
    P = Ps + Pp = L L^T and b = Ps mu_s + Pp mu_p, a draw is
    q = L^-T (L^-1 b + xi), so the mean solve and the noise share one
    back-substitution. Edges are processed in child-id order.
    """
    if state.tree is None:
        raise StateError("no tree to sample joints for")
    children = sorted(s for s, p in state.tree.parents.items() if p is not None)
    if not children:
        return state.joints
    parents = [state.tree.parents[s] for s in children]
    P_c = state.precision[children]
    P_p = state.precision[parents]
    lam = P_c + P_p                                              # (E, d, d)
    b = (np.einsum("eij,ej->ei", P_c, state.mu[children])
         + np.einsum("eij,ej->ei", P_p, state.mu[parents]))
    try:
        L = np.linalg.cholesky(lam)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular joint precision on a tree edge") from exc
    y = np.linalg.solve(L, b[:, :, None])
    xi = rng.standard_normal(b.shape)
    q = np.linalg.solve(np.transpose(L, (0, 2, 1)), y + xi[:, :, None])[:, :, 0]
    for idx, s in enumerate(children):
        state.joints[s] = q[idx]
    return state.joints


def sample_weights(state: MixtureState, hp: Hyperparameters,
                   rng: np.random.Generator) -> np.ndarray:
    """pi ~ Dirichlet(gamma/k_max + n_1, ..., gamma/k_max + n_K)."""
    alpha = hp.gamma / hp.k_max + state.counts(hp.k_max)
    state.pi = rng.dirichlet(alpha)
    return state.pi


def nw_log_evidence(Y: np.ndarray, hp: Hyperparameters) -> float:
    """Closed-form log marginal likelihood of a point set under the
    normal-Wishart prior (component parameters integrated out)."""
    n, d = Y.shape
    if n == 0:
        return 0.0
    mn, kn, Vn_inv, nun = _posterior_nw_params(Y, hp)
    sign0, logdet0 = np.linalg.slogdet(hp.V0_inv)
    signn, logdetn = np.linalg.slogdet(Vn_inv)
    if sign0 <= 0 or signn <= 0:
        raise NumericError("scale matrix lost positive definiteness")
    return float(-0.5 * n * d * math.log(math.pi)
                 + 0.5 * d * (math.log(hp.k0) - math.log(kn))
                 + multigammaln(nun / 2.0, d) - multigammaln(hp.nu0 / 2.0, d)
                 + 0.5 * hp.nu0 * logdet0 - 0.5 * nun * logdetn)


def _refresh_component(state: MixtureState, k: int, data: np.ndarray,
                       hp: Hyperparameters, rng: np.random.Generator) -> None:
    mn, kn, Vn_inv, nun = _posterior_nw_params(data[state.z == k], hp)
    mu, lam = _draw_normal_wishart(mn, kn, Vn_inv, nun, rng)
    _set_component(state, k, mu, lam)


def split_merge_move(state: MixtureState, data: np.ndarray, hp: Hyperparameters,
                     rng: np.random.Generator, attempts: int = 3) -> int:
    """Metropolis split-merge moves on the assignments with the component
    parameters and weights collapsed out (conjugate closed forms).

    This is the simple-random-split variant of the Jain-Neal sampler, run as
    an extra kernel before the blocked sweep: merges let two components that
    carve up one cluster collapse into it, and splits are the reverse path
    that keeps the chain in detailed balance. The blocked sweep alone freezes
    on well-separated high-dimensional data (assignment odds become 0/1), so
    without these moves the chain cannot leave its initial basin. Returns the
    number of accepted moves; parameters of touched components are redrawn
    from their conditionals.
    """
    n = data.shape[0]
    if n < 2:
        return 0
    K = hp.k_max
    alpha = hp.gamma / K
    accepted = 0
    for _ in range(attempts):
        i, j = rng.choice(n, size=2, replace=False)
        zi, zj = state.z[i], state.z[j]
        if zi == zj:
            empties = np.flatnonzero(np.bincount(state.z, minlength=K) == 0)
            if empties.size == 0:
                continue
            target = int(empties[0])
            members = np.flatnonzero(state.z == zi)
            others = members[(members != i) & (members != j)]
            side = rng.random(others.size) < 0.5
            set_a = np.concatenate([[i], others[side]])
            set_b = np.concatenate([[j], others[~side]])
            log_ratio = (
                gammaln(alpha + set_a.size) + gammaln(alpha + set_b.size)
                - gammaln(alpha + members.size) - gammaln(alpha)
                + nw_log_evidence(data[set_a], hp)
                + nw_log_evidence(data[set_b], hp)
                - nw_log_evidence(data[members], hp)
                + others.size * math.log(2.0))
            if math.log(rng.random() + 1e-300) < log_ratio:
                state.z[set_b] = target
                _refresh_component(state, zi, data, hp, rng)
                _refresh_component(state, target, data, hp, rng)
                accepted += 1
        else:
            set_a = np.flatnonzero(state.z == zi)
            set_b = np.flatnonzero(state.z == zj)
            merged = np.concatenate([set_a, set_b])
            log_ratio = (
                gammaln(alpha + merged.size) + gammaln(alpha)
                - gammaln(alpha + set_a.size) - gammaln(alpha + set_b.size)
                + nw_log_evidence(data[merged], hp)
                - nw_log_evidence(data[set_a], hp)
                - nw_log_evidence(data[set_b], hp)
                - (merged.size - 2) * math.log(2.0))
            if math.log(rng.random() + 1e-300) < log_ratio:
                state.z[set_b] = zi
                _refresh_component(state, zi, data, hp, rng)
                _refresh_component(state, zj, data, hp, rng)
                accepted += 1
    return accepted


def prim_mst(weights: np.ndarray) -> list[tuple[int, int]]:
    """Prim's algorithm on a dense symmetric weight matrix; ties pick the
    lowest-index node. Returns n-1 undirected edges."""
    n = weights.shape[0]
    if n == 1:
        return []
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_from = np.zeros(n, dtype=int)
    best[0] = np.inf
    edges = []
    for _ in range(n - 1):
        nxt = int(np.argmin(np.where(in_tree, np.inf, best)))
        edges.append((int(best_from[nxt]), nxt))
        in_tree[nxt] = True
        better = ~in_tree & (weights[nxt] < best)
        best[better] = weights[nxt][better]
        best_from[better] = nxt
        best[nxt] = np.inf
    return edges


def _root_edges(edges: list[tuple[int, int]], n: int, root: int) -> dict[int, int | None]:
    """Orient an undirected edge list away from `root`; returns child -> parent."""
    adj: dict[int, list[int]] = {k: [] for k in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    parents: dict[int, int | None] = {root: None}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in parents:
                parents[v] = u
                stack.append(v)
    if len(parents) != n:
        raise StateError("edge list does not span all nodes")
    return parents


def tree_edge_weight(state: MixtureState, s: int, t: int) -> float:
    """Edge cost -log[N(q*|mu_s,Sigma_s) N(q*|mu_t,Sigma_t)] at the product
    maximizer q*; this is the quadratic cost the MAP tree minimizes."""
    q, _ = product_gaussian(state, s, t)
    return float(-(_gauss_logpdf(q, state.mu[s], state.chol[s])[0]
                   + _gauss_logpdf(q, state.mu[t], state.chol[t])[0]))


def tree_cost(state: MixtureState, edges: set[frozenset[int]]) -> float:
    return sum(tree_edge_weight(state, *sorted(e)) for e in edges)


def update_tree(state: MixtureState, rng: np.random.Generator,
                activation_min: int = 2) -> TreeStructure:
    """Replace the tree with the minimum spanning tree over active components.

    Recomputes the active set from the current assignments, builds the
    complete graph under the product-density edge cost, runs Prim's algorithm,
    roots the tree at the most populated component (ties: lowest index), and
    resamples q_s for every edge whose endpoint pair changed; joints on
    surviving edges are kept.
    """
    K = state.pi.shape[0]
    active = active_components(state.z, K, activation_min)
    if not active:
        raise StateError("empty active set: no component meets the activation rule")

    old_edge_joints = {}
    if state.tree is not None:
        for s, p in state.tree.parents.items():
            if p is not None and s in state.joints:
                old_edge_joints[frozenset((s, p))] = state.joints[s]

    if len(active) == 1:
        state.tree = TreeStructure({active[0]: None}, active)
        state.joints = {}
        return state.tree

    na = len(active)
    w = np.zeros((na, na))
    for a in range(na):
        for b in range(a + 1, na):
            w[a, b] = w[b, a] = tree_edge_weight(state, active[a], active[b])
    edges = prim_mst(w)

    counts = state.counts()
    root_local = int(np.argmax(counts[list(active)]))
    parents_local = _root_edges(edges, na, root_local)
    parents = {active[k]: (None if p is None else active[p])
               for k, p in parents_local.items()}
    tree = TreeStructure(parents, active)

    joints: dict[int, np.ndarray] = {}
    for s, p in tree.parents.items():
        if p is None:
            continue
        key = frozenset((s, p))
        if key in old_edge_joints:
            joints[s] = old_edge_joints[key]
        else:
            m, lam = product_gaussian(state, s, p)
            L = np.linalg.cholesky(lam)
            joints[s] = m + solve_triangular(L.T, rng.standard_normal(m.shape[0]),
                                             lower=False)
    state.tree = tree
    state.joints = joints
    return tree


def log_joint(state: MixtureState, data: np.ndarray, hp: Hyperparameters,
              include_joints: bool = True) -> float:
    """Log of the joint density of all sampled variables (tree prior constant
    omitted). Mixing weights are floored at 1e-300 inside the logs, so empty
    components with pi = 0 score finitely; this is a diagnostic quantity."""
    K = hp.k_max
    pi = np.maximum(state.pi, 1e-300)
    counts = state.counts(K)
    total = float(np.dot(counts, np.log(pi)))
    alpha = hp.gamma / K
    total += (math.lgamma(hp.gamma) - K * math.lgamma(alpha)
              + (alpha - 1.0) * np.log(pi).sum())
    for k in range(K):
        pts = data[state.z == k]
        if pts.size:
            total += float(_gauss_logpdf(pts, state.mu[k], state.chol[k]).sum())
        total += float(wishart.logpdf(state.precision[k], df=hp.nu0, scale=hp.V0))
        mean_chol = np.linalg.cholesky(state.sigma[k] / hp.k0)
        total += float(_gauss_logpdf(state.mu[k], hp.m0, mean_chol)[0])
    if include_joints and state.tree is not None:
        for s, p in state.tree.parents.items():
            if p is None or s not in state.joints:
                continue
            q = state.joints[s]
            total += float(_gauss_logpdf(q, state.mu[s], state.chol[s])[0]
                           + _gauss_logpdf(q, state.mu[p], state.chol[p])[0])
    return total


def validate_state(state: MixtureState, activation_min: int = 2) -> None:
    """Debug-mode invariant checks run after a full sweep."""
    if abs(state.pi.sum() - 1.0) > 1e-12:
        raise StateError("pi does not sum to 1")
    for k in range(state.pi.shape[0]):
        np.linalg.cholesky(0.5 * (state.sigma[k] + state.sigma[k].T))
    if state.tree is not None:
        non_root = {s for s, p in state.tree.parents.items() if p is not None}
        if set(state.joints) != non_root:
            raise StateError("joints must have exactly one entry per non-root component")
        for q in state.joints.values():
            if not np.all(np.isfinite(q)):
                raise StateError("non-finite joint point")


def run_chain(data: np.ndarray | BodyMap, hp: Hyperparameters, iterations: int,
              burn_in: int, seed: int, mode: str = "dpgmm_lj",
              activation_min: int = 2, validate: bool = False,
              init: str = "kmeans", split_merge: bool = True) -> list[ChainSample]:
    """Run one Gibbs chain and return post-burn-in snapshots.

    mode "dpgmm_lj" runs the full sweep; mode "dpgmm" skips the joint and
    tree steps and updates components from assigned points only, which is the
    plain weak-limit mixture used as the clustering baseline. Each sweep is
    preceded by collapsed split-merge moves (see split_merge_move) unless
    disabled.
    """
    if mode not in ("dpgmm_lj", "dpgmm"):
        raise ValueError(f"unknown mode {mode!r}")
    if not iterations > burn_in >= 0:
        raise ValueError("need iterations > burn_in >= 0")
    X = data.points if isinstance(data, BodyMap) else np.asarray(data, dtype=float)
    rng = np.random.default_rng(seed)
    lj = mode == "dpgmm_lj"

    state = init_state(X, hp, rng, activation_min, init=init)
    if not lj:
        state.tree = None
        state.joints = {}

    samples: list[ChainSample] = []
    for it in range(iterations):
        try:
            if split_merge:
                split_merge_move(state, X, hp, rng)
            sample_assignments(state, X, rng)
            sample_component_params(state, X, hp, rng, include_joints=lj)
            if lj:
                sample_joint_points(state, rng)
            sample_weights(state, hp, rng)
            if lj:
                update_tree(state, rng, activation_min)
            if validate:
                validate_state(state, activation_min)
        except NumericError as exc:
            raise NumericError(f"iteration {it}: {exc}") from exc
        if it >= burn_in:
            samples.append(ChainSample(iteration=it, state=state.copy(),
                                       log_joint=log_joint(state, X, hp, include_joints=lj)))
    return samples
