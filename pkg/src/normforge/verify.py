"""Measuring approximation quality: empirical over probe families, exact
over cuts for small combinatorial instances, plus the semi-norm property
suite.

Relative error is measured on the p-th powers, |N(x)^p - Ntilde(x)^p| / N(x)^p,
which is the quantity the sparsifier controls; for p = 1 it coincides with
the error on the norms themselves.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .norms import SumNorm
from .submodular import CutFunction


@dataclass(frozen=True)
class VerificationReport:
    max_rel_err: float
    argmax_probe: object
    probe_counts: dict
    exact: bool
    epsilon: float
    passed: bool
    zero_violations: int = 0


def _family_probes(name, n, count, rng):
    if name == "gaussian":
        return rng.standard_normal((count, n))
    if name == "sphere":
        X = rng.standard_normal((count, n))
        return X / np.sqrt((X * X).sum(axis=1))[:, None]
    if name == "coordinates":
        idx = np.arange(n) if n <= count else rng.choice(n, size=count, replace=False)
        return np.eye(n)[idx]
    if name == "pair_diffs":
        pairs = list(itertools.combinations(range(n), 2))
        if len(pairs) > count:
            sel = rng.choice(len(pairs), size=count, replace=False)
            pairs = [pairs[i] for i in sel]
        X = np.zeros((len(pairs), n))
        for row, (i, j) in enumerate(pairs):
            X[row, i] = 1.0
            X[row, j] = -1.0
        return X
    raise ValueError(name)


def empirical_eps(N: SumNorm, Ntilde: SumNorm, probes: int = 10000,
                  rng: np.random.Generator = None, epsilon: float = None,
                  mu_samples=None) -> VerificationReport:
    """Largest relative p-power deviation over the probe families.

    Families: standard Gaussian directions, uniform sphere points, coordinate
    vectors, pairwise coordinate differences, and (when given) points from
    the sampling measure, where the heavy deviations live.  Probes with
    N(x) = 0 are skipped.
    """
    if N.n != Ntilde.n or N.p != Ntilde.p:
        raise ValueError("norms must share dimension and power")
    rng = rng or np.random.default_rng(0)
    families = ["gaussian", "sphere", "coordinates", "pair_diffs"]
    if mu_samples is not None:
        families.append("mu")
    share = max(1, probes // len(families))

    worst = 0.0
    argmax = None
    counts = {}
    for name in families:
        if name == "mu":
            X = np.asarray(mu_samples, dtype=np.float64)
            if X.ndim != 2 or X.shape[1] != N.n:
                raise ValueError("mu_samples must be a (k, n) array")
        else:
            X = _family_probes(name, N.n, share, rng)
        counts[name] = X.shape[0]
        a = N.power_batch(X)
        b = Ntilde.power_batch(X)
        live = a > 0
        if not live.any():
            continue
        rel = np.abs(a[live] - b[live]) / a[live]
        j = int(np.argmax(rel))
        if rel[j] > worst:
            worst = float(rel[j])
            argmax = X[live][j].tolist()
    return VerificationReport(
        max_rel_err=worst, argmax_probe=argmax, probe_counts=counts, exact=False,
        epsilon=epsilon, passed=(epsilon is None or worst <= epsilon))


def exact_cut_eps(F: CutFunction, w, epsilon: float = None,
                  components=None) -> VerificationReport:
    """Exact maximum relative cut error over all nontrivial cuts.

    Enumerates the 2^(n-1) - 1 cuts up to complement (n <= 20).  The
    reweighted value is sum_i w_i f_i(S) where the f_i default to F's own
    edges in term order; pass ``components`` (a list of cut functions) when
    the weighted pieces are whole functions, as in the submodular pipeline.
    Cuts with F(S) = 0 are checked for zero consistency: the reweighted
    value must be exactly zero there, else the violation count is reported
    separately and the report fails.
    """
    w = np.asarray(w, dtype=np.float64)
    if components is None:
        if w.shape != (F.m,):
            raise ValueError("weight length must match the number of cut components")
        masks, comp = F.cut_values_all()
        orig = comp.sum(axis=1)
    else:
        if w.shape != (len(components),):
            raise ValueError("weight length must match the number of component functions")
        masks, fcomp = F.cut_values_all()
        orig = fcomp.sum(axis=1)
        cols = []
        for f in components:
            if f.n != F.n:
                raise ValueError("component ground set mismatch")
            cols.append(f.cut_values_all()[1].sum(axis=1))
        comp = np.stack(cols, axis=1)
    tilde = comp @ w
    zero = orig == 0.0
    zero_violations = int(np.count_nonzero(tilde[zero] != 0.0))
    live = ~zero
    if live.any():
        rel = np.abs(orig[live] - tilde[live]) / orig[live]
        j = int(np.argmax(rel))
        worst = float(rel[j])
        mask = int(masks[live][j])
        argmax = [v for v in range(F.n) if (mask >> v) & 1]
    else:
        worst, argmax = 0.0, None
    passed = (zero_violations == 0) and (epsilon is None or worst <= epsilon)
    return VerificationReport(
        max_rel_err=worst, argmax_probe=argmax,
        probe_counts={"cuts": int(masks.shape[0])}, exact=True, epsilon=epsilon,
        passed=passed, zero_violations=zero_violations)


def seminorm_suite(N: SumNorm, trials: int = 1000, rng: np.random.Generator = None) -> dict:
    """Homogeneity, triangle inequality and symmetry checks for any SumNorm."""
    rng = rng or np.random.default_rng(0)
    X = rng.standard_normal((trials, N.n))
    Y = rng.standard_normal((trials, N.n))
    lam = rng.standard_normal(trials) * 3.0

    vx = N.value_batch(X)
    scale_ref = vx.max() + 1e-30
    hom = N.value_batch(X * lam[:, None])
    hom_err = float(np.max(np.abs(hom - np.abs(lam) * vx) / (np.abs(lam) * vx + 1e-300)))

    vy = N.value_batch(Y)
    vxy = N.value_batch(X + Y)
    tri_violation = float(np.max(vxy - (vx + vy)))

    sym_exact = bool(np.array_equal(N.value_batch(-X), vx))

    passed = hom_err <= 1e-10 and tri_violation <= 1e-10 * scale_ref and sym_exact
    return {
        "homogeneity_max_rel_err": hom_err,
        "triangle_max_violation": tri_violation,
        "symmetry_exact": sym_exact,
        "trials": trials,
        "passed": passed,
    }
