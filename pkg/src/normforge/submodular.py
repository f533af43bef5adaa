"""Symmetric submodular set functions, their piecewise-linear extensions,
and the cut-function sparsification pipeline.

The extension of a set function f with f(empty)=f(V)=0 is computed by
sorting coordinates and summing f over the sorted prefix level sets; for a
symmetric submodular f it is a semi-norm, which is what lets the norm
sparsifier run on sums of such functions.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _streams
from .norms import Lovasz, SumNorm

_FULLMASK = {}


def _full_mask(n):
    if n not in _FULLMASK:
        _FULLMASK[n] = (1 << n) - 1
    return _FULLMASK[n]


class SetFunction:
    """Deterministic set-function oracle on a ground set of size n.

    Subsets are passed to the oracle as int bitmasks when n <= 62 and as
    frozensets otherwise.  ``value`` also accepts any iterable of indices.
    Declared structure (symmetry, f(empty)=0, submodularity) is spot-checked
    on random subsets at construction.
    """

    def __init__(self, n, oracle, *, symmetric=False, normalized_empty=True,
                 spot_check=True, check_trials=24):
        if n < 1:
            raise ValueError("ground set must be nonempty")
        self.n = int(n)
        self._oracle = oracle
        self.symmetric = bool(symmetric)
        self.normalized_empty = bool(normalized_empty)
        self._masks = self.n <= 62
        if spot_check:
            self._spot_check(check_trials)

    # -- subset plumbing ---------------------------------------------------

    def _canon(self, subset):
        if isinstance(subset, (int, np.integer)):
            if not self._masks:
                raise ValueError("bitmask subsets only supported for n <= 62")
            return int(subset)
        idx = frozenset(int(i) for i in subset)
        if idx and (min(idx) < 0 or max(idx) >= self.n):
            raise ValueError("subset index out of range")
        if self._masks:
            mask = 0
            for i in idx:
                mask |= 1 << i
            return mask
        return idx

    def value(self, subset) -> float:
        v = float(self._oracle(self._canon(subset)))
        if not math.isfinite(v) or v < 0:
            raise ValueError("set function oracle returned a non-finite or negative value")
        return v

    def complement(self, canon):
        if self._masks:
            return _full_mask(self.n) ^ canon
        return frozenset(range(self.n)) - canon

    def _spot_check(self, trials):
        if self.normalized_empty and self.value(()) != 0.0:
            raise ValueError("f(empty) must be 0")
        rng = _streams.substream(0xF00D, self.n)
        for _ in range(trials):
            bits = rng.random(self.n) < 0.5
            S = self._canon(np.nonzero(bits)[0])
            if self.symmetric:
                a, b = self.value(S), self.value(self.complement(S))
                if abs(a - b) > 1e-9 * (1.0 + abs(a)):
                    raise ValueError("declared symmetric but f(S) != f(V\\S)")
            # submodularity: f(S+v)-f(S) >= f(T+v)-f(T) for S subset T, v outside T
            extra = rng.random(self.n) < 0.5
            tbits = bits | extra
            free = np.nonzero(~tbits)[0]
            if free.size == 0:
                continue
            v = int(free[rng.integers(free.size)])
            T = self._canon(np.nonzero(tbits)[0])
            Sv = self._canon(list(np.nonzero(bits)[0]) + [v])
            Tv = self._canon(list(np.nonzero(tbits)[0]) + [v])
            lhs = self.value(Sv) - self.value(S)
            rhs = self.value(Tv) - self.value(T)
            scale = 1.0 + abs(lhs) + abs(rhs)
            if lhs < rhs - 1e-9 * scale:
                raise ValueError("submodularity spot-check failed")

    # -- extension protocol used by the Lovasz norm term --------------------

    def lovasz(self, x) -> float:
        return lovasz_extension(self, x)

    def lovasz_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.array([lovasz_extension(self, row) for row in X])

    def singleton_sum(self) -> float:
        """sum_v f({v}), an upper bound on max_S f(S) by subadditivity."""
        return sum(self.value((v,)) for v in range(self.n))


def lovasz_extension(f, x) -> float:
    """Extension value at x, via sorted prefix level sets.

    Makes exactly n+1 oracle calls (the ascending prefixes, including the
    empty and full sets).  Requires f(empty) = f(V) = 0; otherwise the
    defining integral diverges.
    """
    x = np.asarray(x, dtype=np.float64)
    n = f.n
    if x.shape != (n,):
        raise ValueError("dimension mismatch")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    masks = f._masks
    prefix = 0 if masks else frozenset()
    values = [f.value(prefix)]
    for i in order:
        prefix = (prefix | (1 << int(i))) if masks else (prefix | {int(i)})
        values.append(f.value(prefix))
    if values[0] != 0.0:
        raise ValueError("f(empty) must be 0")
    if abs(values[-1]) > 0.0:
        raise ValueError("f(V) must be 0: the level-set integral diverges")
    return math.fsum(values[k] * (xs[k] - xs[k - 1]) for k in range(1, n))


class CutFunction(SetFunction):
    """Cut function of a weighted graph / hypergraph.

    f(S) = sum of c_e over graph edges crossing S, plus c_e over hyperedges
    split by S.  Symmetric with f(empty)=0.  The extension has the closed
    form  sum c_e |x_u - x_v|  +  sum c_e (max_e x - min_e x), which backs a
    vectorized fast path; the generic sorted-prefix path is untouched and
    the two are equal up to roundoff.
    """

    def __init__(self, n, edges=(), hyperedges=(), spot_check=False):
        edges = [(int(u), int(v), float(c)) for (u, v, c) in edges]
        hyperedges = [(tuple(int(w) for w in vs), float(c)) for (vs, c) in hyperedges]
        for u, v, c in edges:
            if c < 0 or min(u, v) < 0 or max(u, v) >= n:
                raise ValueError("bad edge")
        for vs, c in hyperedges:
            if c < 0 or min(vs) < 0 or max(vs) >= n or len(vs) < 2:
                raise ValueError("bad hyperedge")
        self.edges = edges
        self.hyperedges = hyperedges
        self._eu = np.array([e[0] for e in edges], dtype=np.intp)
        self._ev = np.array([e[1] for e in edges], dtype=np.intp)
        self._ec = np.array([e[2] for e in edges], dtype=np.float64)
        self._hmask = [sum(1 << w for w in vs) for vs, _ in hyperedges]
        self._hsize = [len(vs) for vs, _ in hyperedges]
        super().__init__(n, self._cut_value, symmetric=True, spot_check=spot_check)

    @property
    def m(self) -> int:
        return len(self.edges) + len(self.hyperedges)

    def _cut_value(self, canon) -> float:
        if self._masks:
            total = 0.0
            if len(self._eu):
                bits_u = (canon >> self._eu) & 1
                bits_v = (canon >> self._ev) & 1
                total += float(self._ec @ (bits_u != bits_v))
            for (vs, c), mask, size in zip(self.hyperedges, self._hmask, self._hsize):
                inside = bin(canon & mask).count("1")
                if 0 < inside < size:
                    total += c
            return total
        total = 0.0
        for u, v, c in self.edges:
            if (u in canon) != (v in canon):
                total += c
        for vs, c in self.hyperedges:
            inside = sum(1 for w in vs if w in canon)
            if 0 < inside < len(vs):
                total += c
        return total

    def lovasz(self, x) -> float:
        return float(self.lovasz_batch(np.asarray(x, dtype=np.float64)[None, :])[0])

    def lovasz_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        if len(self._eu):
            total += np.abs(X[:, self._eu] - X[:, self._ev]) @ self._ec
        for (vs, c) in self.hyperedges:
            sub = X[:, list(vs)]
            total += c * (sub.max(axis=1) - sub.min(axis=1))
        return total

    def cut_values_all(self) -> tuple:
        """(masks, per-component cut matrix) over all nontrivial cuts.

        Cuts are canonicalized by excluding vertex 0 from S.  Columns follow
        the term order: graph edges first, then hyperedges.  Only available
        for n <= 20.
        """
        n = self.n
        if n > 20:
            raise ValueError("exact cut enumeration is limited to n <= 20")
        masks = np.arange(1, 1 << (n - 1), dtype=np.uint64) << np.uint64(1)
        cols = []
        for u, v, c in self.edges:
            bu = (masks >> np.uint64(u)) & np.uint64(1)
            bv = (masks >> np.uint64(v)) & np.uint64(1)
            cols.append(c * (bu != bv).astype(np.float64))
        for (vs, c) in self.hyperedges:
            inside = np.zeros(masks.shape, dtype=np.int64)
            for w in vs:
                inside += ((masks >> np.uint64(w)) & np.uint64(1)).astype(np.int64)
            cols.append(c * ((inside > 0) & (inside < len(vs))).astype(np.float64))
        comp = np.stack(cols, axis=1) if cols else np.zeros((masks.size, 0))
        return masks, comp


@dataclass(frozen=True)
class SfmResult:
    weights: np.ndarray
    sum_w: float
    retries: int
    sparsifier: object  # the underlying SparsifierResult of the final attempt


def sfm_sparsify(functions, epsilon, *, seed=0, config=None, max_retries=8) -> SfmResult:
    """Sparsify F = f_1 + ... + f_m for symmetric submodular f_i.

    Each term is regularized to f_i + m^-5 ||x||_2 so the summed objective is
    a genuine (m^-4, R)-rounded norm, then driven through the homotopy
    sparsifier.  The draw scheme gives E[sum w] = m, so attempts are retried
    on a fresh seed while sum w > 2m.
    """
    from .sparsify import SparsifyConfig, homotopy_sparsify

    functions = list(functions)
    m = len(functions)
    if m == 0:
        raise ValueError("need at least one set function")
    n = functions[0].n
    for f in functions:
        if f.n != n:
            raise ValueError("all set functions must share a ground set")
        if not f.symmetric:
            raise ValueError("sfm_sparsify requires symmetric set functions")
        if f.value(()) != 0.0:
            raise ValueError("set functions must be normalized (f(empty)=0)")
    if epsilon < m ** -0.5:
        warnings.warn(
            f"epsilon={epsilon:g} is below m^-1/2={m**-0.5:g}; the sparsity "
            "target is vacuous in this regime", stacklevel=2)

    ridge = float(m) ** -5
    terms = tuple(Lovasz(f, ridge=ridge) for f in functions)
    N = SumNorm(n, 1.0, terms)
    r = float(m) ** -4
    R = 2.0 * sum(f.singleton_sum() for f in functions) + r

    last = None
    for attempt in range(max_retries + 1):
        cfg = config or SparsifyConfig(epsilon=epsilon)
        cfg = cfg.with_seed(_streams.child_seed(seed, _streams.STAGE, 99, attempt))
        res = homotopy_sparsify(N, r, R, epsilon, cfg)
        total = float(res.weights.sum())
        if total <= 2.0 * m:
            return SfmResult(res.weights, total, attempt, res)
        last = (res, total)
    raise RuntimeError(
        f"sum of weights stayed above 2m after {max_retries + 1} attempts "
        f"(last sum {last[1]:.3f} vs bound {2 * m})")
