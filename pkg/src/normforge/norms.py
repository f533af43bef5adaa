"""Semi-norm terms and weighted sums of their p-th powers.

The central object is :class:`SumNorm`, modelling

    N(x)^p = sum_i w_i * N_i(x)^p

for nonnegative weights w and term semi-norms N_i.  Terms are immutable
records and evaluation is pure, so a SumNorm may be evaluated concurrently
from any number of workers.  Batch evaluation groups terms by variant so
that the sampling walk stays vectorized even with thousands of terms.
"""

import json
import math
import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class EvalCounter:
    """Global counter of individual term evaluations.

    A batched call on B points and m terms adds B*m.  The counter is the
    instrumentation behind the bench command; it never changes behaviour.
    """

    __slots__ = ("_lock", "count")

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, k: int) -> None:
        with self._lock:
            self.count += int(k)

    def reset(self) -> int:
        with self._lock:
            old, self.count = self.count, 0
        return old


EVAL_COUNTER = EvalCounter()


def _as_vector(x, n=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: vector has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite entries in input vector")
    return x


def _frozen_array(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Linear:
    """N(x) = |<a, x>|."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_array(_as_vector(self.a)))

    def check_dim(self, n: int):
        if self.a.shape[0] != n:
            raise ValueError("linear term has wrong dimension")

    def value(self, x: np.ndarray) -> float:
        return abs(float(self.a @ x))

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        return np.abs(X @ self.a)


@dataclass(frozen=True)
class GraphEdge:
    """N(x) = c * |x_u - x_v|."""

    u: int
    v: int
    c: float

    def __post_init__(self):
        if self.u < 0 or self.v < 0:
            raise ValueError("vertex indices must be nonnegative")
        if self.c < 0:
            raise ValueError("edge weight must be nonnegative")

    def check_dim(self, n: int):
        if max(self.u, self.v) >= n:
            raise ValueError("edge vertex index out of range")

    def value(self, x: np.ndarray) -> float:
        return self.c * abs(float(x[self.u] - x[self.v]))

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        return self.c * np.abs(X[:, self.u] - X[:, self.v])


@dataclass(frozen=True)
class Hyperedge:
    """N(x) = sqrt(c) * max over vertex pairs of |x_u - x_v|.

    The max pairwise gap equals max(x restricted) - min(x restricted).
    """

    vertices: tuple
    c: float

    def __post_init__(self):
        vs = tuple(int(v) for v in self.vertices)
        if len(vs) < 2 or len(set(vs)) != len(vs):
            raise ValueError("hyperedge needs at least two distinct vertices")
        if self.c < 0:
            raise ValueError("hyperedge weight must be nonnegative")
        object.__setattr__(self, "vertices", vs)

    def check_dim(self, n: int):
        if max(self.vertices) >= n:
            raise ValueError("hyperedge vertex index out of range")

    def value(self, x: np.ndarray) -> float:
        sub = x[list(self.vertices)]
        return math.sqrt(self.c) * float(sub.max() - sub.min())

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        sub = X[:, list(self.vertices)]
        return math.sqrt(self.c) * (sub.max(axis=1) - sub.min(axis=1))


@dataclass(frozen=True)
class LpImage:
    """N(x) = ||A x||_p for a dense matrix A; p = inf means max |(Ax)_i|."""

    a: np.ndarray
    p: float

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("LpImage matrix must be 2-d")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries in LpImage matrix")
        if self.p < 1:
            raise ValueError("LpImage exponent must be >= 1")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", float(self.p))

    def check_dim(self, n: int):
        if self.a.shape[1] != n:
            raise ValueError("LpImage matrix has wrong column count")

    def value(self, x: np.ndarray) -> float:
        y = self.a @ x
        if math.isinf(self.p):
            return float(np.abs(y).max())
        return float(np.linalg.norm(y, ord=self.p))

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        Y = np.abs(X @ self.a.T)
        if math.isinf(self.p):
            return Y.max(axis=1)
        if self.p == 1.0:
            return Y.sum(axis=1)
        if self.p == 2.0:
            return np.sqrt((Y * Y).sum(axis=1))
        return (Y**self.p).sum(axis=1) ** (1.0 / self.p)


@dataclass(frozen=True)
class Lovasz:
    """N(x) = extension(f)(x) + ridge * ||x||_2 for a symmetric set function f.

    ``f`` is any object with the set-function protocol (``n``, ``lovasz``,
    ``lovasz_batch``); see the submodular module.  The optional Euclidean
    ridge lets a pipeline regularize each term without an extra term slot.
    """

    f: object
    ridge: float = 0.0

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")

    def check_dim(self, n: int):
        if getattr(self.f, "n", n) != n:
            raise ValueError("set function ground set does not match dimension")

    def value(self, x: np.ndarray) -> float:
        v = float(self.f.lovasz(x))
        if self.ridge:
            v += self.ridge * float(np.linalg.norm(x))
        return v

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        v = np.asarray(self.f.lovasz_batch(X), dtype=np.float64)
        if self.ridge:
            v = v + self.ridge * np.sqrt((X * X).sum(axis=1))
        return v


@dataclass(frozen=True)
class Euclidean:
    """N(x) = t * ||x||_2."""

    t: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("scale must be nonnegative")

    def check_dim(self, n: int):
        pass

    def value(self, x: np.ndarray) -> float:
        return self.t * float(np.linalg.norm(x))

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        return self.t * np.sqrt((X * X).sum(axis=1))


TERM_TYPES = (Linear, GraphEdge, Hyperedge, LpImage, Lovasz, Euclidean)


def _is_cut_function(f) -> bool:
    # duck-typed: a set function exposing explicit edge/hyperedge lists
    return hasattr(f, "edges") and hasattr(f, "hyperedges")


def eval_term(term, x) -> float:
    """Evaluate a single term semi-norm at x."""
    x = _as_vector(x)
    term.check_dim(x.shape[0])
    EVAL_COUNTER.add(1)
    return term.value(x)


class _Plan:
    """Grouped evaluators: one vectorized pass per term variant.

    ``power_total`` is the hot path of the sampling walk; it folds the fixed
    weights and power into per-group coefficient vectors so the weighted
    p-power sum never materializes a (batch, terms) intermediate.
    """

    def __init__(self, terms, p, weights):
        self.p = p
        self.linear_idx = [i for i, t in enumerate(terms) if isinstance(t, Linear)]
        self.edge_idx = [i for i, t in enumerate(terms) if isinstance(t, GraphEdge)]
        self.hyper_idx = [i for i, t in enumerate(terms) if isinstance(t, Hyperedge)]
        self.eucl_idx = [i for i, t in enumerate(terms) if isinstance(t, Euclidean)]
        self.other_idx = [
            i for i, t in enumerate(terms) if isinstance(t, (LpImage, Lovasz))
        ]
        self.terms = terms
        if self.linear_idx:
            self.lin_A = np.array([terms[i].a for i in self.linear_idx])
            self.lin_coef = weights[self.linear_idx]
        if self.edge_idx:
            self.edge_u = np.array([terms[i].u for i in self.edge_idx])
            self.edge_v = np.array([terms[i].v for i in self.edge_idx])
            self.edge_c = np.array([terms[i].c for i in self.edge_idx])
            self.edge_coef = self.edge_c**p * weights[self.edge_idx]
        if self.hyper_idx:
            size = max(len(terms[i].vertices) for i in self.hyper_idx)
            pad = np.empty((len(self.hyper_idx), size), dtype=np.intp)
            for r, i in enumerate(self.hyper_idx):
                vs = terms[i].vertices
                pad[r, : len(vs)] = vs
                pad[r, len(vs):] = vs[0]  # repeats do not change max/min
            self.hyper_pad = pad
            self.hyper_c = np.sqrt(np.array([terms[i].c for i in self.hyper_idx]))
            self.hyper_coef = self.hyper_c**p * weights[self.hyper_idx]
        if self.eucl_idx:
            self.eucl_t = np.array([terms[i].t for i in self.eucl_idx])
            self.eucl_coef = float((self.eucl_t**p * weights[self.eucl_idx]).sum())
        # p = 1 lets cut-function extensions fuse across terms: the weighted
        # sum of (edge sums + ridge ||x||) is itself one edge sum + one ridge
        self.lovasz_cut_fused = False
        if p == 1.0:
            cut_idx = [i for i in self.other_idx
                       if isinstance(terms[i], Lovasz) and _is_cut_function(terms[i].f)]
            if cut_idx:
                self.lovasz_cut_fused = True
                self.other_idx = [i for i in self.other_idx if i not in set(cut_idx)]
                us, vs, cs, hyp = [], [], [], []
                ridge_total = 0.0
                for i in cut_idx:
                    t, w = terms[i], weights[i]
                    for (eu, ev, ec) in t.f.edges:
                        us.append(eu)
                        vs.append(ev)
                        cs.append(w * ec)
                    for (evs, ec) in t.f.hyperedges:
                        hyp.append((list(evs), w * ec))
                    ridge_total += w * t.ridge
                self.cut_u = np.array(us, dtype=np.intp)
                self.cut_v = np.array(vs, dtype=np.intp)
                self.cut_c = np.array(cs)
                self.cut_hyper = hyp
                self.cut_ridge = ridge_total
        self.other_coef = weights[self.other_idx] if self.other_idx else None

    def values(self, X: np.ndarray, out: np.ndarray) -> np.ndarray:
        if self.linear_idx:
            out[:, self.linear_idx] = np.abs(X @ self.lin_A.T)
        if self.edge_idx:
            out[:, self.edge_idx] = self.edge_c * np.abs(X[:, self.edge_u] - X[:, self.edge_v])
        if self.hyper_idx:
            sub = X[:, self.hyper_pad]
            out[:, self.hyper_idx] = self.hyper_c * (sub.max(axis=2) - sub.min(axis=2))
        if self.eucl_idx:
            out[:, self.eucl_idx] = np.outer(np.sqrt((X * X).sum(axis=1)), self.eucl_t)
        for i in self.other_idx:
            out[:, i] = self.terms[i].value_batch(X)
        return out

    def _pow_inplace(self, a):
        if self.p == 1.0:
            return a
        if self.p == 2.0:
            a *= a
        else:
            a **= self.p
        return a

    def power_total(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0])
        if self.linear_idx:
            d = np.abs(X @ self.lin_A.T)
            total += self._pow_inplace(d) @ self.lin_coef
        if self.edge_idx:
            d = X[:, self.edge_u] - X[:, self.edge_v]
            np.abs(d, out=d)
            total += self._pow_inplace(d) @ self.edge_coef
        if self.hyper_idx:
            sub = X[:, self.hyper_pad]
            d = sub.max(axis=2)
            d -= sub.min(axis=2)
            total += self._pow_inplace(d) @ self.hyper_coef
        if self.eucl_idx:
            nrm = np.sqrt((X * X).sum(axis=1))
            total += self.eucl_coef * self._pow_inplace(nrm)
        if self.lovasz_cut_fused:
            if self.cut_u.size:
                d = X[:, self.cut_u] - X[:, self.cut_v]
                np.abs(d, out=d)
                total += d @ self.cut_c
            for vs, c in self.cut_hyper:
                sub = X[:, vs]
                total += c * (sub.max(axis=1) - sub.min(axis=1))
            if self.cut_ridge:
                total += self.cut_ridge * np.sqrt((X * X).sum(axis=1))
        for i, w in zip(self.other_idx, self.other_coef if self.other_idx else ()):
            d = self.terms[i].value_batch(X)
            total += w * self._pow_inplace(d)
        return total


@dataclass(frozen=True)
class SumNorm:
    """A weighted sum of p-th powers of term semi-norms on R^n.

    value(x) = (sum_i weights[i] * terms[i](x)**p) ** (1/p)
    """

    n: int
    p: float
    terms: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if self.p < 1:
            raise ValueError("power must be >= 1")
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a SumNorm needs at least one term")
        for t in terms:
            if not isinstance(t, TERM_TYPES):
                raise TypeError(f"unknown term type {type(t).__name__}")
            t.check_dim(self.n)
        w = self.weights
        w = np.ones(len(terms)) if w is None else np.array(w, dtype=np.float64)
        if w.shape != (len(terms),):
            raise ValueError("weights length must equal the number of terms")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "p", float(self.p))

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def phat(self) -> float:
        return min(self.p, 2.0)

    @cached_property
    def _plan(self) -> _Plan:
        return _Plan(self.terms, self.p, self.weights)

    def term_values(self, x) -> np.ndarray:
        """Raw term values (N_1(x), ..., N_m(x)), without weights or powers."""
        x = _as_vector(x, self.n)
        return self.term_values_batch(x[None, :])[0]

    def term_values_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.m))
        EVAL_COUNTER.add(X.shape[0] * self.m)
        return self._plan.values(X, out)

    def term_powers_batch(self, X: np.ndarray) -> np.ndarray:
        """Weighted p-th powers w_i * N_i(x)^p, one column per term."""
        vals = self.term_values_batch(X)
        if self.p == 1.0:
            vals *= self.weights
        elif self.p == 2.0:
            vals *= vals
            vals *= self.weights
        else:
            vals **= self.p
            vals *= self.weights
        return vals

    def power_batch(self, X: np.ndarray) -> np.ndarray:
        """N(x)^p on a batch of points."""
        X = np.asarray(X, dtype=np.float64)
        EVAL_COUNTER.add(X.shape[0] * self.m)
        return self._plan.power_total(X)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        pw = self.power_batch(X)
        if self.p == 1.0:
            return pw
        if self.p == 2.0:
            return np.sqrt(pw)
        return pw ** (1.0 / self.p)

    def power(self, x) -> float:
        x = _as_vector(x, self.n)
        return float(self.power_batch(x[None, :])[0])

    def value(self, x) -> float:
        x = _as_vector(x, self.n)
        return float(self.value_batch(x[None, :])[0])

    __call__ = value

    def with_extra_term(self, term, weight: float) -> "SumNorm":
        return SumNorm(self.n, self.p, self.terms + (term,),
                       np.append(self.weights, float(weight)))


def eval_sum(N: SumNorm, x) -> float:
    """(sum_i w_i N_i(x)^p)^(1/p)."""
    return N.value(x)


def apply_weights(N: SumNorm, w) -> SumNorm:
    """Reweight the terms of N multiplicatively and drop zero-weight terms.

    The result models sum_i (w_i * weights_i) * N_i(x)^p with the zero-weight
    terms removed, so its term count is literally the support size.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (N.m,):
        raise ValueError("weight vector length must equal the number of terms")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    combined = N.weights * w
    keep = np.nonzero(combined > 0)[0]
    if keep.size == 0:
        raise ValueError("all weights are zero; the result would be empty")
    return SumNorm(N.n, N.p, tuple(N.terms[i] for i in keep), combined[keep])


# ---------------------------------------------------------------------------
# instance JSON  { "dim": n, "p": p, "terms": [ {"type": ..., ...}, ... ] }
# ---------------------------------------------------------------------------

def _term_from_json(obj) -> object:
    kind = obj.get("type")
    if kind == "linear":
        return Linear(np.asarray(obj["a"], dtype=np.float64))
    if kind == "graph_edge":
        return GraphEdge(int(obj["u"]), int(obj["v"]), float(obj["c"]))
    if kind == "hyperedge":
        return Hyperedge(tuple(obj["vertices"]), float(obj["c"]))
    if kind == "lp_image":
        p = obj["p"]
        p = math.inf if isinstance(p, str) else float(p)
        return LpImage(np.asarray(obj["rows"], dtype=np.float64), p)
    if kind == "euclidean":
        return Euclidean(float(obj["t"]))
    raise ValueError(f"unknown term type {kind!r} in instance")


def _term_to_json(term) -> dict:
    if isinstance(term, Linear):
        return {"type": "linear", "a": term.a.tolist()}
    if isinstance(term, GraphEdge):
        return {"type": "graph_edge", "u": term.u, "v": term.v, "c": term.c}
    if isinstance(term, Hyperedge):
        return {"type": "hyperedge", "vertices": list(term.vertices), "c": term.c}
    if isinstance(term, LpImage):
        p = "inf" if math.isinf(term.p) else term.p
        return {"type": "lp_image", "p": p, "rows": term.a.tolist()}
    if isinstance(term, Euclidean):
        return {"type": "euclidean", "t": term.t}
    raise ValueError(f"term type {type(term).__name__} has no JSON form")


def load_instance(source) -> SumNorm:
    """Build a SumNorm from an instance dict, JSON string, or file path."""
    if isinstance(source, dict):
        obj = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        obj = json.loads(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    n = int(obj["dim"])
    p = float(obj.get("p", 1.0))
    terms = tuple(_term_from_json(t) for t in obj["terms"])
    weights = obj.get("weights")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
    return SumNorm(n, p, terms, weights)


def dump_instance(N: SumNorm) -> dict:
    return {
        "dim": N.n,
        "p": N.p,
        "terms": [_term_to_json(t) for t in N.terms],
        "weights": N.weights.tolist(),
    }


def save_weights(path, w) -> None:
    """Write weights as a JSON array (.json) or 'index,weight' CSV (.csv)."""
    w = np.asarray(w, dtype=np.float64)
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,weight\n")
            for i, wi in enumerate(w):
                fh.write(f"{i},{float(wi)!r}\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(w.tolist(), fh)


def load_weights(path) -> np.ndarray:
    path = str(path)
    if path.endswith(".csv"):
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        w = np.zeros(int(rows[:, 0].max()) + 1)
        w[rows[:, 0].astype(int)] = rows[:, 1]
        return w
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        obj = obj["weights"]
    return np.asarray(obj, dtype=np.float64)
