"""Acceptance suite: one criterion per test, each printing a PASS/FAIL line.

Statistical criteria run at fixed seeds; tolerances and runtime budgets are
asserted as stated, never loosened at run time. The desk-scale battery
(criteria 8 and 9) is computed once in a module fixture and shared.
"""

import itertools
import math
import time

import numpy as np
import pytest

from bodyschema import (DistanceMatrix, Hyperparameters, MixtureState,
                        MotionConfig, TactileLog, TreeStructure,
                        adjusted_rand_index, aggregate, build_agent,
                        euclidean_prim_baseline, gmm_em, information_metric,
                        kmeans, mds_embed, prim_mst, quantize, run_chain,
                        simulate, star_agent_spec, update_tree, ward)
from bodyschema.inference import sample_joint_points, tree_edge_weight


def report(num, name, ok, elapsed, budget, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {num} ({name}): {status} [{elapsed:.1f}s / budget {budget}s]"
    if detail:
        line += f" -- {detail}"
    print(line)
    return ok


# ------------------------------------------------------------- criterion 1

def test_criterion_1_metric_axioms():
    t0 = time.time()
    rng = np.random.default_rng(101)
    ok = True
    worst_slack = np.inf
    for _ in range(20):
        raw = rng.random((40, 5000)).astype(np.float32)
        log = quantize(TactileLog(raw=raw, dt=0.1, seed=0,
                                  agent_fingerprint="acceptance"), 10)
        D = information_metric(log).d_matrix
        ok &= np.array_equal(D, D.T)
        ok &= bool(np.all(np.diag(D) == 0.0))
        slack = float((D[:, :, None] + D[None, :, :] - D[:, None, :]).min())
        worst_slack = min(worst_slack, slack)
        ok &= slack >= -1e-9
    elapsed = time.time() - t0
    ok &= elapsed < 30
    assert report(1, "metric axioms", ok, elapsed, 30,
                  f"worst triangle slack {worst_slack:.2e}")


# ------------------------------------------------------------- criterion 2

def procrustes_error(X, Y):
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    U, _, Vt = np.linalg.svd(Xc.T @ Yc)
    return float(np.sqrt(np.mean(np.sum((Xc @ (U @ Vt) - Yc) ** 2, axis=1))))


def test_criterion_2_mds_oracle():
    t0 = time.time()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(4, 101))
        d = int(rng.integers(2, 4))
        X = rng.normal(scale=2.0, size=(n, d))
        diff = X[:, None, :] - X[None, :, :]
        D = np.sqrt(np.square(diff).sum(axis=2))
        bmap = mds_embed(DistanceMatrix(D), d)
        worst = max(worst, procrustes_error(bmap.points, X))
    elapsed = time.time() - t0
    ok = worst < 1e-6 and elapsed < 10
    assert report(2, "MDS round-trip", ok, elapsed, 10,
                  f"worst Procrustes error {worst:.2e}")


# ------------------------------------------------------------- criterion 3

def all_labeled_trees(n):
    import heapq
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        heap = [i for i in range(n) if degree[i] == 1]
        heapq.heapify(heap)
        edges = []
        for v in seq:
            leaf = heapq.heappop(heap)
            edges.append((leaf, v))
            degree[v] -= 1
            if degree[v] == 1:
                heapq.heappush(heap, v)
        edges.append((heapq.heappop(heap), heapq.heappop(heap)))
        yield edges


def random_state(rng, n_active, d=2):
    mus = rng.normal(scale=3.0, size=(n_active, d))
    sigs = []
    for _ in range(n_active):
        A = rng.normal(size=(d, d))
        sigs.append(A @ A.T + 0.2 * np.eye(d))
    sigma = np.stack(sigs)
    z = np.repeat(np.arange(n_active), 3)
    return MixtureState(
        pi=np.full(n_active, 1.0 / n_active), z=z, mu=mus, sigma=sigma,
        precision=np.stack([np.linalg.inv(s) for s in sigma]),
        chol=np.stack([np.linalg.cholesky(s) for s in sigma]),
        joints={}, tree=None)


def test_criterion_3_mst_oracle():
    t0 = time.time()
    rng = np.random.default_rng(103)
    ok = True
    for trial in range(200):
        n_active = int(rng.integers(3, 6))
        state = random_state(rng, n_active)
        w = np.zeros((n_active, n_active))
        for a in range(n_active):
            for b in range(a + 1, n_active):
                w[a, b] = w[b, a] = tree_edge_weight(state, a, b)
        tree = update_tree(state, np.random.default_rng(0))
        got_edges = tree.undirected_edges()
        got_cost = sum(w[tuple(sorted(e))] for e in got_edges)
        best_cost, best_edges = np.inf, None
        for cand in all_labeled_trees(n_active):
            c = sum(w[a, b] for a, b in cand)
            if c < best_cost:
                best_cost, best_edges = c, {frozenset(e) for e in cand}
        ok &= got_edges == best_edges
        ok &= abs(got_cost - best_cost) < 1e-9
    elapsed = time.time() - t0
    ok &= elapsed < 10
    assert report(3, "MST vs exhaustive enumeration", ok, elapsed, 10,
                  "200 states, |S| in {3,4,5}")


# ------------------------------------------------------------- criterion 4

def star_pair_state(d, rng, n_edges=100):
    def spd():
        A = rng.normal(size=(d, d))
        return A @ A.T + 0.2 * np.eye(d)
    sig_parent, sig_child = spd(), spd()
    mu_parent = rng.normal(scale=2.0, size=d)
    mu_child = rng.normal(scale=2.0, size=d)
    K = n_edges + 1
    mu = np.zeros((K, d))
    mu[0] = mu_parent
    mu[1:] = mu_child
    sigma = np.stack([sig_parent] + [sig_child] * n_edges)
    parents = {0: None, **{k: 0 for k in range(1, K)}}
    return MixtureState(
        pi=np.full(K, 1.0 / K), z=np.zeros(1, dtype=np.intp), mu=mu,
        sigma=sigma, precision=np.stack([np.linalg.inv(s) for s in sigma]),
        chol=np.stack([np.linalg.cholesky(s) for s in sigma]),
        joints={}, tree=TreeStructure(parents, tuple(range(K))))


def test_criterion_4_product_gaussian_sampler():
    t0 = time.time()
    rng = np.random.default_rng(104)
    draw_rng = np.random.default_rng(205)
    ok = True
    n_draws = 100_000
    dims = [1] * 7 + [2] * 7 + [5] * 6
    for d in dims:
        state = star_pair_state(d, rng)
        lam = state.precision[0] + state.precision[1]
        cov = np.linalg.inv(lam)
        mean = cov @ (state.precision[1] @ state.mu[1]
                      + state.precision[0] @ state.mu[0])
        draws = np.empty((n_draws, d))
        for call in range(n_draws // 100):
            sample_joint_points(state, draw_rng)
            for e in range(100):
                draws[call * 100 + e] = state.joints[e + 1]
        emp_mean = draws.mean(axis=0)
        emp_cov = np.cov(draws.T).reshape(d, d)
        se_mean = np.sqrt(np.diag(cov) / n_draws)
        ok &= bool(np.all(np.abs(emp_mean - mean) < 3 * se_mean))
        var_cov = (np.outer(np.diag(cov), np.diag(cov)) + cov ** 2) / n_draws
        ok &= bool(np.all(np.abs(emp_cov - cov) < 3 * np.sqrt(var_cov)))
    elapsed = time.time() - t0
    ok &= elapsed < 30
    assert report(4, "product-Gaussian joint sampler", ok, elapsed, 30,
                  f"20 SPD pairs x {n_draws} draws, 3 standard errors")


# ------------------------------------------------------------- criterion 5

def ari_pair_counting(a, b):
    n = len(a)
    n11 = n10 = n01 = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa = a[i] == a[j]
            sb = b[i] == b[j]
            n11 += sa and sb
            n10 += sa and not sb
            n01 += sb and not sa
    total = n * (n - 1) / 2
    expected = (n11 + n10) * (n11 + n01) / total
    max_index = (2 * n11 + n10 + n01) / 2
    if max_index == expected:
        return 1.0 if (n10 == 0 and n01 == 0) else 0.0
    return (n11 - expected) / (max_index - expected)


def test_criterion_5_ari_oracle():
    t0 = time.time()
    rng = np.random.default_rng(105)
    ok = True
    for _ in range(100):
        a = rng.integers(0, rng.integers(2, 8), size=200)
        b = rng.integers(0, rng.integers(2, 8), size=200)
        ok &= abs(adjusted_rand_index(a, b) - ari_pair_counting(a, b)) <= 1e-12
    chance = np.mean([adjusted_rand_index(rng.integers(0, 5, 200),
                                          rng.integers(0, 5, 200))
                      for _ in range(100)])
    ok &= abs(chance) < 0.05
    elapsed = time.time() - t0
    assert report(5, "ARI vs pair-counting oracle", ok, elapsed, 60,
                  f"chance-level mean {chance:+.4f}")


# ------------------------------------------------------------- criterion 6

def test_criterion_6_synthetic_clustering_recovery():
    t0 = time.time()
    rng = np.random.default_rng(106)
    means = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, math.sqrt(75)]])
    X = np.concatenate([rng.normal(m, 1.0, size=(100, 2)) for m in means])
    truth = np.repeat([0, 1, 2], 100)
    hp = Hyperparameters.from_data(X, k_max=10)
    ok = True
    details = []
    for mode in ("dpgmm_lj", "dpgmm"):
        samples = run_chain(X, hp, 600, 300, seed=1106, mode=mode)
        counts = np.array([len(np.flatnonzero(
            np.bincount(s.state.z, minlength=10) >= 2)) for s in samples])
        vals, cnt = np.unique(counts, return_counts=True)
        mode_count = int(vals[np.argmax(cnt)])
        aris = np.array([adjusted_rand_index(s.state.z, truth) for s in samples])
        frac = float(np.mean(aris >= 0.95))
        ok &= mode_count == 3 and frac >= 0.90
        details.append(f"{mode}: mode={mode_count} frac(ARI>=0.95)={frac:.2f}")
    elapsed = time.time() - t0
    ok &= elapsed < 60
    assert report(6, "synthetic 3-blob recovery", ok, elapsed, 60,
                  "; ".join(details))


# ------------------------------------------------------------- criterion 7

def success_counts(samples, truth_edges, truth_labels, trees=None):
    rep = aggregate(samples, truth_edges, truth_labels, method="x", d=2,
                    p_coordination=0.0, seed=0, trees=trees)
    return int(rep.tree_correct[rep.eligible].sum()), int(rep.eligible.sum())


def test_criterion_7_synthetic_tree_recovery():
    t0 = time.time()
    rng = np.random.default_rng(107)
    ok = True

    # collinear chain
    Xc = np.concatenate([rng.normal(m, 1.0, size=(100, 2))
                         for m in [[0, 0], [8, 0], [16, 0]]])
    tc = np.repeat([0, 1, 2], 100)
    edges = {frozenset((0, 1)), frozenset((1, 2))}
    hp = Hyperparameters.from_data(Xc, k_max=10)
    succ = elig = 0
    for chain in range(5):
        samples = run_chain(Xc, hp, 600, 300, seed=1200 + chain, mode="dpgmm_lj")
        s, e = success_counts(samples, edges, tc)
        succ += s
        elig += e
    chain_rate = succ / max(elig, 1)
    ok &= elig > 0 and chain_rate >= 0.70

    # anisotropic: Euclidean-mean MST differs from the product-density MST
    def rot_cov(direction, long_var=0.25, short_var=0.005):
        u = np.asarray(direction, float)
        u = u / np.linalg.norm(u)
        v = np.array([-u[1], u[0]])
        return long_var * np.outer(u, u) + short_var * np.outer(v, v)

    A, B, C = np.array([0.0, 0.0]), np.array([0.0, 5.0]), np.array([1.5, 1.5])
    covs = [rot_cov(B - A), rot_cov(C - B), rot_cov(C - B)]
    # construction sanity: the two MSTs disagree at the true parameters
    eu = {(a, b): np.linalg.norm(m1 - m2) for (a, m1), (b, m2)
          in itertools.combinations(enumerate([A, B, C]), 2)}
    trees3 = [{(0, 1), (1, 2)}, {(0, 1), (0, 2)}, {(0, 2), (1, 2)}]
    euclid_best = min(trees3, key=lambda t: sum(eu[e] for e in t))
    assert euclid_best != {(0, 1), (1, 2)}

    Xa = np.concatenate([rng.multivariate_normal(m, c, size=100)
                         for m, c in zip([A, B, C], covs)])
    ta = np.repeat([0, 1, 2], 100)
    hp = Hyperparameters.from_data(Xa, k_max=10)
    lj = [0, 0]
    pr = [0, 0]
    for chain in range(5):
        s_lj = run_chain(Xa, hp, 600, 300, seed=1300 + chain, mode="dpgmm_lj")
        s, e = success_counts(s_lj, edges, ta)
        lj[0] += s
        lj[1] += e
        s_pl = run_chain(Xa, hp, 600, 300, seed=1300 + chain, mode="dpgmm")
        s, e = success_counts(s_pl, edges, ta,
                              trees=euclidean_prim_baseline(s_pl))
        pr[0] += s
        pr[1] += e
    lj_rate = lj[0] / max(lj[1], 1)
    pr_rate = pr[0] / max(pr[1], 1)
    ok &= lj[1] > 0 and lj_rate > pr_rate
    elapsed = time.time() - t0
    ok &= elapsed < 120
    assert report(7, "synthetic tree recovery", ok, elapsed, 120,
                  f"chain {chain_rate:.2f}; anisotropic LJ {lj_rate:.2f} "
                  f"vs euclid-prim {pr_rate:.2f}")


# ---------------------------------------------------- criteria 8 and 9 (desk)

DESK_SIM_SEED = 2
DESK_T = 20_000
DESK_D = 14


@pytest.fixture(scope="module")
def desk_battery():
    t0 = time.time()
    agent = build_agent(star_agent_spec(160))
    labels = agent.sensor_part_labels()
    truth_edges = agent.ground_truth_edges()
    out = {"labels": labels, "edges": truth_edges, "maps": {}, "chains": {}}
    for p in (0.0, 0.9, 1.0):
        cfg = MotionConfig(p_coordination=p, seed=DESK_SIM_SEED,
                           total_steps=DESK_T, decision_interval=100,
                           controller_gain=19.9)
        log = quantize(simulate(agent, cfg), 10)
        bmap = mds_embed(DistanceMatrix(information_metric(log).d_matrix), DESK_D)
        hp = Hyperparameters.from_data(bmap.points, k_max=10)
        chains = [run_chain(bmap, hp, 600, 300, seed=7000 + c, mode="dpgmm_lj")
                  for c in range(5)]
        out["maps"][p] = bmap
        out["chains"][p] = chains
    out["elapsed"] = time.time() - t0
    return out


def pooled_stats(chains, truth_edges, labels):
    ari, nodes, succ, elig = [], [], 0, 0
    for samples in chains:
        rep = aggregate(samples, truth_edges, labels, method="lj", d=DESK_D,
                        p_coordination=0.0, seed=0)
        ari.append(rep.ari)
        nodes.append(rep.node_counts)
        succ += int(rep.tree_correct[rep.eligible].sum())
        elig += int(rep.eligible.sum())
    ari = np.concatenate(ari)
    nodes = np.concatenate(nodes)
    vals, cnt = np.unique(nodes, return_counts=True)
    rate = succ / elig if elig else None
    return float(np.median(ari)), int(vals[np.argmax(cnt)]), rate, elig


def test_criterion_8_desk_scale_trends(desk_battery):
    t0 = time.time()
    labels = desk_battery["labels"]
    edges = desk_battery["edges"]
    med09, mode09, rate09, elig09 = pooled_stats(desk_battery["chains"][0.9],
                                                 edges, labels)
    med00, _, rate00, _ = pooled_stats(desk_battery["chains"][0.0], edges, labels)
    med10, _, rate10, _ = pooled_stats(desk_battery["chains"][1.0], edges, labels)
    rate00_cmp = rate00 if rate00 is not None else 0.0
    rate10_cmp = rate10 if rate10 is not None else 0.0

    ok = True
    ok &= med09 >= 0.8                       # (a)
    ok &= 5 <= mode09 <= 7                   # (b)
    ok &= med10 <= 0.2                       # (c)
    ok &= rate09 is not None and rate09 > rate00_cmp and rate09 > rate10_cmp  # (d)
    elapsed = desk_battery["elapsed"] + (time.time() - t0)
    ok &= elapsed < 1800
    assert report(8, "desk-scale end-to-end trends", ok, elapsed, 1800,
                  f"medARI@0.9={med09:.3f} mode={mode09} "
                  f"success@0.9={rate09 if rate09 is not None else 'n/a'} "
                  f"@0.0={rate00_cmp:.2f} @1.0={rate10_cmp:.2f} "
                  f"(eligible@0.9={elig09})")


def test_criterion_9_baseline_sensitivity(desk_battery):
    t0 = time.time()
    X = desk_battery["maps"][0.9].points
    labels = desk_battery["labels"]
    ok = True
    details = []
    for name, fn in (("kmeans", lambda k, s: kmeans(X, k, seed=s)),
                     ("gmm", lambda k, s: gmm_em(X, k, seed=s)),
                     ("ward", lambda k, s: ward(X, k))):
        means = {}
        for k in (3, 5, 10):
            vals = [adjusted_rand_index(fn(k, s), labels) for s in (0, 1, 2)]
            means[k] = float(np.mean(vals))
        ok &= means[5] >= 0.8 and means[3] < means[5] and means[10] < means[5]
        details.append(f"{name}: k3={means[3]:.2f} k5={means[5]:.2f} "
                       f"k10={means[10]:.2f}")
    elapsed = time.time() - t0
    assert report(9, "baseline sensitivity to K", ok, elapsed, 300,
                  "; ".join(details))
