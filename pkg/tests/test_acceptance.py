"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS/FAIL
lines.  The heavy criteria share session-scoped fixtures so the whole gate
stays inside its runtime budgets.
"""

import math

import numpy as np
import pytest

from normforge import (BlockStructure, CutFunction, Euclidean, GraphEdge,
                       Hyperedge, Linear, LpImage, RoundedNorm, SamplerConfig,
                       SumNorm, apply_weights, block_lewis_fixed_point, certify,
                       empirical_eps, exact_cut_eps, exact_leverage_probs,
                       homotopy_sparsify, lovasz_extension, radial_resample,
                       sample_mu, sample_support, seminorm_suite, sos_lp_probs,
                       uniform_ball_walk)
from normforge.norms import Lovasz
from normforge.sparsify import SparsifyConfig
from normforge.submodular import sfm_sparsify
from normforge.weights import estimate_tau, to_probabilities
from normforge._streams import substream

from conftest import complete_graph_edges, graph_norm, l1_norm


def report(num, name, ok, detail):
    print(f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


# -- criterion 1: sampler moment identity -----------------------------------

def test_criterion_1_sampler_moment_identity():
    n, k = 5, 200000
    linf = SumNorm(n, 1.0, (LpImage(np.eye(n), np.inf),))
    cases = [
        ("l1", l1_norm(n), 1.0, math.sqrt(n)),
        ("linf", linf, 1.0 / math.sqrt(n), 1.0),
    ]
    details = []
    ok = True
    for name, N, r, R in cases:
        cfg = SamplerConfig.for_dim(n, seed=101, chains=512)
        ball = uniform_ball_walk(RoundedNorm(N, r, R), k, cfg)
        for phat in (1.0, 2.0):
            z = radial_resample(ball, N, phat, substream(101, 7, int(phat)))
            mean = float(N.value_batch(z.points) ** phat @ np.ones(k)) / k
            target = n / phat
            rel = abs(mean / target - 1.0)
            ok &= rel <= 0.03
            details.append(f"{name} phat={phat:g}: mean={mean:.4f} target={target:g} "
                           f"rel={rel:.4%}")
    report(1, "sampler moment identity", ok, "; ".join(details))


# -- criterion 2: leverage-score oracle agreement ----------------------------

def test_criterion_2_leverage_agreement():
    n, m = 6, 40
    gen = np.random.default_rng(2024)
    A = gen.standard_normal((m, n))
    N = SumNorm(n, 2.0, tuple(Linear(a) for a in A))
    sv = np.linalg.svd(A, compute_uv=False)
    exact = exact_leverage_probs([Linear(a) for a in A]).rho
    k_tau = int(np.ceil(200 * np.sqrt(np.log(n)) * np.log(m + n)))
    good = 0
    worst = (1.0, 1.0)
    for seed in range(40):
        cfg = SamplerConfig.for_dim(n, seed=seed, chains=64)
        batch = sample_mu(RoundedNorm(N, sv[-1], sv[0]), 2.0, k_tau, cfg)
        rho = to_probabilities(estimate_tau(N, batch, 2.0)).rho
        ratio = rho / exact
        worst = (min(worst[0], ratio.min()), max(worst[1], ratio.max()))
        if ratio.min() >= 0.5 and ratio.max() <= 2.0:
            good += 1
    report(2, "leverage-score agreement", good >= 38,
           f"{good}/40 runs inside the factor-2 window, k_tau={k_tau}, "
           f"worst ratios [{worst[0]:.3f}, {worst[1]:.3f}]")


# -- criteria 3 + 7: K10 homotopy runs (shared) ------------------------------

K10_R_DECLARED = 9.0       # cut norm of K10 is (sqrt(90), sqrt(330))-rounded
K10_R_UPPER = 18.2         # on the complement of the all-ones kernel
K10_EPS = 0.25


@pytest.fixture(scope="session")
def k10_runs():
    n = 10
    edges = complete_graph_edges(n)
    N = graph_norm(n, edges)
    F = CutFunction(n, edges)
    runs = []
    for seed in range(20):
        cfg = SparsifyConfig(epsilon=K10_EPS, C_M=0.5, seed=seed)
        res = homotopy_sparsify(N, K10_R_DECLARED, K10_R_UPPER, K10_EPS, cfg)
        rep = exact_cut_eps(F, res.weights, epsilon=K10_EPS)
        runs.append((res, rep))
    return runs


def test_criterion_3_exact_cut_sparsification(k10_runs):
    passes = sum(rep.passed for _, rep in k10_runs)
    support_ok = all(res.sparsity <= res.M for res, _ in k10_runs)
    errs = [rep.max_rel_err for _, rep in k10_runs]
    report(3, "K10 exact cut sparsification",
           passes >= 18 and support_ok,
           f"{passes}/20 runs with exact cut error <= {K10_EPS}, "
           f"max observed {max(errs):.4f}, support <= M in all runs: {support_ok}")


def test_criterion_7_homotopy_stage_bound(k10_runs):
    bound = math.ceil(math.log2(K10_R_UPPER / (K10_EPS * K10_R_DECLARED))) + 2
    lengths = [len(res.stage_log) for res, _ in k10_runs]
    report(7, "homotopy stage bound", max(lengths) <= bound,
           f"stage counts {sorted(set(lengths))} vs bound {bound}")


# -- criterion 4: Lewis certification ----------------------------------------

def test_criterion_4_lewis_certification():
    gen = np.random.default_rng(404)
    A = gen.standard_normal((50, 8))
    blocks = BlockStructure.contiguous([5] * 10, [4.0] * 10, 2.0)
    res = block_lewis_fixed_point(A, blocks, tol=1e-12, max_iter=20000)
    cert = certify(res, A, blocks, probes=10000, rng=np.random.default_rng(0),
                   slack=1e-9, sum_tol=1e-6)

    B = gen.standard_normal((30, 6))
    sblocks = BlockStructure.contiguous([1] * 30, [2.0] * 30, 2.0)
    sres = block_lewis_fixed_point(B, sblocks, tol=1e-12)
    lev = np.einsum("ij,ij->i", B, np.linalg.solve(B.T @ B, B.T).T)
    lev_gap = float(np.abs(sres.alpha**2 - lev).max())

    ok = (res.converged and cert.ok and lev_gap <= 1e-8)
    report(4, "Lewis certification", ok,
           f"converged in {res.iterations} iters, residual {res.residual:.2e}, "
           f"alpha-sum err {cert.alpha_sum_error:.2e} (tol 1e-6), "
           f"probe violations (a) {cert.max_block_violation:.2e} "
           f"(b) {cert.max_lower_violation:.2e} (slack 1e-9), "
           f"leverage gap {lev_gap:.2e} (tol 1e-8)")


# -- criterion 5: Lovasz extension equivalence -------------------------------

def test_criterion_5_lovasz_extension_equivalence():
    n = 8
    gen = np.random.default_rng(55)
    edges = [(u, v, float(gen.random() + 0.5)) for u in range(n)
             for v in range(u + 1, n) if gen.random() < 0.5]
    f = CutFunction(n, edges)
    worst = 0.0
    for _ in range(1000):
        x = gen.standard_normal(n)
        closed = sum(c * abs(x[u] - x[v]) for u, v, c in edges)
        worst = max(worst, abs(lovasz_extension(f, x) - closed))
    indicators_ok = True
    for mask in range(2 ** n):
        x = np.array([(mask >> i) & 1 for i in range(n)], dtype=float)
        if lovasz_extension(f, x) != f.value(mask):
            indicators_ok = False
            break
    report(5, "Lovasz extension equivalence", worst <= 1e-12 and indicators_ok,
           f"max |extension - edge sum| = {worst:.2e} over 1000 points (tol 1e-12); "
           f"exact on all {2**n} indicators: {indicators_ok}")


# -- criterion 6: submodular pipeline ----------------------------------------

def test_criterion_6_submodular_pipeline():
    n, m, eps = 6, 6, 0.5
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (0, 5, 1.0)]
    fs = [CutFunction(n, [e]) for e in edges]
    F = CutFunction(n, edges)
    good = 0
    errs = []
    for seed in range(20):
        res = sfm_sparsify(fs, eps, seed=seed)
        rep = exact_cut_eps(F, res.weights, epsilon=eps, components=fs)
        errs.append(rep.max_rel_err)
        if rep.passed and res.sum_w <= 2 * m:
            good += 1
    report(6, "submodular pipeline", good >= 11,
           f"{good}/20 seeds with cut error <= {eps} and sum w <= {2*m}, "
           f"max error {max(errs):.4f}")


# -- criterion 8: estimator unbiasedness -------------------------------------

def test_criterion_8_estimator_unbiasedness():
    n = 4
    N = graph_norm(n, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.5), (0, 2, 1.0)])
    gen = np.random.default_rng(88)
    probes = gen.standard_normal((3, n))
    base = N.power_batch(probes)
    # any valid probability vector keeps the estimator unbiased
    rho = to_probabilities(estimate_tau(
        N, _plain_batch(gen.standard_normal((300, n))), 1.0))
    M = 100
    vals = np.empty((200, 3))
    for seed in range(200):
        w = sample_support(rho, M, substream(seed, 3)).weights
        vals[seed] = apply_weights(N, w).power_batch(probes)
    ok = True
    details = []
    for j in range(3):
        se = vals[:, j].std(ddof=1) / math.sqrt(200)
        dev = abs(vals[:, j].mean() - base[j])
        ok &= dev <= 3 * se
        details.append(f"probe {j}: |mean - N| = {dev:.4f} vs 3 SE = {3*se:.4f}")
    report(8, "estimator unbiasedness", ok, "; ".join(details))


def _plain_batch(points):
    from normforge.sampler import SampleBatch
    return SampleBatch(points, None, SamplerConfig(burn_in=1, steps_per_sample=1), {})


# -- criterion 9: property suites and determinism ----------------------------

def test_criterion_9_property_suites_and_determinism():
    gen = np.random.default_rng(99)
    f = CutFunction(5, [(0, 1, 1.0), (1, 2, 2.0), (2, 4, 0.7)])
    N = SumNorm(5, 1.0, (
        Linear(gen.standard_normal(5)),
        GraphEdge(0, 4, 1.2),
        Hyperedge((1, 2, 3), 0.8),
        LpImage(gen.standard_normal((3, 5)), 3.0),
        Lovasz(f, ridge=0.1),
        Euclidean(0.5),
    ))
    suite = seminorm_suite(N, trials=1000, rng=np.random.default_rng(7))

    cfg = SamplerConfig(burn_in=200, steps_per_sample=10, seed=17, chains=8)
    ball = RoundedNorm(l1_norm(3), 1.0, math.sqrt(3))
    s1 = sample_mu(ball, 1.0, 300, cfg)
    s2 = sample_mu(ball, 1.0, 300, cfg)
    sample_det = np.array_equal(s1.points, s2.points)

    K = graph_norm(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
    scfg = SparsifyConfig(epsilon=0.5, seed=23)
    w1 = homotopy_sparsify(K, 2.4, 2.9, 0.5, scfg).weights
    w2 = homotopy_sparsify(K, 2.4, 2.9, 0.5, scfg).weights
    sparsify_det = np.array_equal(w1, w2)

    Nt = apply_weights(K, np.array([1.0, 1.1, 0.9]))
    v1 = empirical_eps(K, Nt, probes=2000, rng=np.random.default_rng(31))
    v2 = empirical_eps(K, Nt, probes=2000, rng=np.random.default_rng(31))
    verify_det = (v1.max_rel_err == v2.max_rel_err)

    ok = suite["passed"] and sample_det and sparsify_det and verify_det
    report(9, "property suites and determinism", ok,
           f"seminorm suite: homogeneity {suite['homogeneity_max_rel_err']:.1e}, "
           f"triangle {suite['triangle_max_violation']:.1e}, "
           f"symmetry exact {suite['symmetry_exact']}; determinism "
           f"sample={sample_det} sparsify={sparsify_det} verify={verify_det}")
