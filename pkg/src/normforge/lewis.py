"""Block Lewis weights: a damped fixed point for the diagonal W with
U = (A^T W A)^(-1/2), plus an a-posteriori certificate.

For a partition S_1, ..., S_m of the rows of A with exponents p_j >= 2 and an
outer exponent q, the target relation is

    W_ii = u_i^(p_j - 2) * Nj(u)^(q - p_j),   u_i = ||U a_i||_2,

where Nj is the block l_{p_j} norm of u over S_j.  At that point the block
norms alpha_j = Nj(u) satisfy sum_j alpha_j^q = n (after an extra n^(1/2-1/q)
rescale of U when q > 2, the sum is n^(q/2)), every block obeys
Nj(A x) <= alpha_j ||U^-1 x||_2, and ||U^-1 x||_2 <= N(A x).  The iteration
scheme itself carries no trust: ``certify`` checks all three properties
directly on the returned (W, alpha).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .linalg import gram, inv_sqrt
from .weights import ProbabilityVector

log = logging.getLogger("normforge.lewis")


@dataclass(frozen=True)
class BlockStructure:
    """A partition of row indices [k] with per-block exponents and outer q."""

    blocks: tuple
    p: tuple
    q: float

    def __post_init__(self):
        blocks = tuple(np.array(sorted(int(i) for i in b), dtype=np.intp) for b in self.blocks)
        p = tuple(float(v) for v in self.p)
        if len(blocks) != len(p) or not blocks:
            raise ValueError("need one exponent per block")
        for pj in p:
            if pj < 2:
                raise ValueError("block exponents must be >= 2")
            if math.isinf(pj):
                raise ValueError(
                    "p_j = inf is not solved directly; use the finite surrogate "
                    "p_j = max(2, ceil(log(block size)))")
        if self.q < 1:
            raise ValueError("outer exponent q must be >= 1")
        seen = np.concatenate(blocks) if blocks else np.array([], dtype=np.intp)
        k = seen.shape[0]
        if k == 0 or np.unique(seen).shape[0] != k or seen.min() != 0 or seen.max() != k - 1:
            raise ValueError("blocks must partition 0..k-1 disjointly")
        for b in blocks:
            b.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", float(self.q))

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def k(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    def row_block(self) -> np.ndarray:
        out = np.empty(self.k, dtype=np.intp)
        for j, b in enumerate(self.blocks):
            out[b] = j
        return out

    @staticmethod
    def contiguous(sizes, p, q) -> "BlockStructure":
        """Blocks of the given sizes over consecutive row indices."""
        blocks, start = [], 0
        for s in sizes:
            blocks.append(range(start, start + s))
            start += s
        return BlockStructure(tuple(blocks), tuple(p), q)


@dataclass(frozen=True)
class LewisResult:
    W: np.ndarray
    U: np.ndarray
    alpha: np.ndarray
    iterations: int
    residual: float
    converged: bool
    damping_monotone: bool

    def __post_init__(self):
        for name in ("W", "U", "alpha"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def _block_pnorms(u, blocks):
    return np.array([np.linalg.norm(u[b], ord=pj) for b, pj in zip(blocks.blocks, blocks.p)])


def block_lewis_fixed_point(A, blocks: BlockStructure, tol: float = 1e-10,
                            max_iter: int = 5000) -> LewisResult:
    """Damped fixed-point iteration for the block weights.

    Geometric damping W <- W^(1-theta) * update^theta with
    theta = min(1, 2 / max_j p_j), started at W = I.  Non-convergence within
    ``max_iter`` returns the best iterate with ``converged=False``; the
    certificate, not the iteration, is the contract.
    """
    A = np.asarray(A, dtype=np.float64)
    k, n = A.shape
    if blocks.k != k:
        raise ValueError("block structure does not cover the rows of A")
    if np.linalg.matrix_rank(A) < n:
        raise ValueError("A must have full column rank")
    prow = np.array(blocks.p)[blocks.row_block()]
    q = blocks.q
    theta = min(1.0, 2.0 / max(blocks.p))

    W = np.ones(k)
    tiny = 1e-300
    residual = math.inf
    hist = []
    it = 0
    best = (math.inf, W)

    def norms_of(Wd):
        G = gram(A, Wd)
        lam_max = np.linalg.eigvalsh(G.a)[-1]
        S = inv_sqrt(G, floor=1e-12 * lam_max)
        u = np.sqrt(((A @ S.a) ** 2).sum(axis=1))
        return G, S, u

    for it in range(1, max_iter + 1):
        _, _, u = norms_of(W)
        Nj = _block_pnorms(u, blocks)
        update = u ** (prow - 2.0) * Nj[blocks.row_block()] ** (q - prow)
        residual = float(np.max(np.abs(W - update) / (W + tiny)))
        hist.append(residual)
        if residual < best[0]:
            best = (residual, W.copy())
        if residual <= tol:
            break
        W = np.exp((1.0 - theta) * np.log(np.maximum(W, tiny))
                   + theta * np.log(np.maximum(update, tiny)))

    converged = residual <= tol
    if not converged:
        log.warning("fixed point not converged after %d iterations (residual %.3e); "
                    "returning best iterate", it, best[0])
        residual, W = best

    _, S, u = norms_of(W)
    U = S.a.copy()
    alpha = _block_pnorms(u, blocks)
    if q > 2.0:
        # move to the normalization with sum alpha^q = n^(q/2)
        c = n ** (0.5 - 1.0 / q)
        U = c * U
        W = W * n ** (-(1.0 - 2.0 / q))
        u = c * u
        alpha = _block_pnorms(u, blocks)

    tail = hist[-10:]
    monotone = all(tail[i + 1] <= tail[i] * (1.0 + 1e-9) for i in range(len(tail) - 1))
    if not monotone:
        log.warning("damped residual was not monotone over the last 10 iterations; "
                    "instance may be ill-conditioned")
    return LewisResult(W=W, U=U, alpha=alpha, iterations=it, residual=residual,
                       converged=converged, damping_monotone=monotone)


@dataclass(frozen=True)
class CertificateReport:
    ok: bool
    max_block_violation: float   # check (a): Nj(Ax) vs alpha_j ||U^-1 x||
    max_lower_violation: float   # check (b): ||U^-1 x|| vs N(Ax)
    alpha_sum_error: float       # check (c): sum alpha^q vs its target
    alpha_sum_target: float
    probes: int
    failures: tuple


def certify(result: LewisResult, A, blocks: BlockStructure, probes: int = 10000,
            rng: np.random.Generator = None, slack: float = 1e-9,
            sum_tol: float = 1e-6) -> CertificateReport:
    """Check the three defining properties of a block-weight result.

    Everything is recomputed from result.W and A, so a corrupted W fails
    regardless of what the result object claims.  On violation the report
    carries (check name, block, witness x, relative margin) tuples.
    """
    A = np.asarray(A, dtype=np.float64)
    k, n = A.shape
    rng = rng or np.random.default_rng(0)
    G = gram(A, result.W)
    lam_max = np.linalg.eigvalsh(G.a)[-1]
    U = inv_sqrt(G, floor=1e-12 * lam_max).a
    u = np.sqrt(((A @ U) ** 2).sum(axis=1))
    alpha = _block_pnorms(u, blocks)
    q = blocks.q

    target = float(n) if q <= 2.0 else float(n) ** (q / 2.0)
    total = float((alpha ** q).sum())
    sum_err = abs(total - target) / target

    X = rng.standard_normal((probes, n))
    Y = X @ A.T
    bn = np.stack([np.linalg.norm(Y[:, b], ord=pj, axis=1)
                   for b, pj in zip(blocks.blocks, blocks.p)], axis=1)
    un = np.sqrt(np.maximum(np.einsum("pi,ij,pj->p", X, G.a, X), 0.0))
    ntot = np.linalg.norm(bn, ord=q, axis=1)

    failures = []
    # (a) Nj(Ax) <= alpha_j ||U^-1 x|| (1 + slack)
    rhs = alpha[None, :] * un[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_a = np.where(bn > 0, bn / np.where(rhs > 0, rhs, np.inf), 0.0)
    worst_a = float(ratio_a.max()) if ratio_a.size else 0.0
    if worst_a > 1.0 + slack:
        pi, bj = np.unravel_index(np.argmax(ratio_a), ratio_a.shape)
        failures.append(("block_upper", int(bj), X[pi].tolist(), worst_a - 1.0))
    # (b) ||U^-1 x|| <= N(Ax) (1 + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_b = np.where(un > 0, un / np.where(ntot > 0, ntot, np.inf), 0.0)
    worst_b = float(ratio_b.max()) if ratio_b.size else 0.0
    if worst_b > 1.0 + slack:
        pi = int(np.argmax(ratio_b))
        failures.append(("euclidean_lower", -1, X[pi].tolist(), worst_b - 1.0))
    # (c) the alpha-sum identity
    if sum_err > sum_tol:
        failures.append(("alpha_sum", -1, None, sum_err))

    return CertificateReport(
        ok=not failures, max_block_violation=max(worst_a - 1.0, 0.0),
        max_lower_violation=max(worst_b - 1.0, 0.0), alpha_sum_error=sum_err,
        alpha_sum_target=target, probes=probes, failures=tuple(failures))


def sos_lp_probs(A, blocks: BlockStructure, result: LewisResult) -> ProbabilityVector:
    """Block sampling probabilities rho_j = alpha_j^2 / sum alpha^2 (q = 2)."""
    if blocks.q != 2.0:
        raise ValueError("block probabilities are defined in the q = 2 setting")
    a2 = result.alpha ** 2
    total = a2.sum()
    if total <= 0:
        raise ValueError("all block norms are zero")
    a2 = np.maximum(a2, total * 1e-15 / a2.shape[0])
    return ProbabilityVector(a2 / a2.sum())
