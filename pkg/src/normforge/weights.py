"""Per-term importance masses tau and sampling probabilities rho.

tau_i is 1.5 times the empirical mean of the weighted term power
w_i N_i(Z)^p over sample points Z; the 3/2 multiplier centers tau inside
the working window [E, 2E] around the true mean.  Probabilities are the
normalized tau, with a tiny floor so that zero-mass terms keep a nonzero
(hence invertible) probability.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import gram, solve_spd
from .norms import Linear, SumNorm
from .sampler import SampleBatch

TAU_MULTIPLIER = 1.5
#: dimension-dependent concentration factor used in sample-count heuristics
PSI_EXPONENT = 0.5


def psi_n(n: int) -> float:
    """sqrt(log max(n, 3)): the concentration constant behind sample counts."""
    return float(np.log(max(n, 3)) ** PSI_EXPONENT)


def default_k_tau(n: int, m: int, C_w: float = 200.0) -> int:
    """Sample count for factor-2 accurate tau: ceil(C_w psi_n log(m+n))."""
    return int(np.ceil(C_w * psi_n(n) * np.log(m + n)))


@dataclass(frozen=True)
class TauVector:
    tau: np.ndarray
    p: float
    sample_count: int

    def __post_init__(self):
        t = np.asarray(self.tau, dtype=np.float64)
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("tau entries must be finite and nonnegative")
        t.flags.writeable = False
        object.__setattr__(self, "tau", t)

    @property
    def m(self) -> int:
        return self.tau.shape[0]


@dataclass(frozen=True)
class ProbabilityVector:
    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=np.float64)
        if np.any(r <= 0):
            raise ValueError("probabilities must be strictly positive")
        if abs(r.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        r.flags.writeable = False
        object.__setattr__(self, "rho", r)

    @property
    def m(self) -> int:
        return self.rho.shape[0]


def estimate_tau(N: SumNorm, batch: SampleBatch, p: float) -> TauVector:
    """tau_i = 1.5 * mean_j of w_i N_i(Z_j)^p over the batch points."""
    if batch.k < 1:
        raise ValueError("empty sample batch")
    expected_phat = min(p, 2.0)
    if batch.phat is not None and abs(batch.phat - expected_phat) > 1e-12:
        warnings.warn(
            f"batch was drawn with phat={batch.phat:g} but power p={p:g} "
            f"expects phat={expected_phat:g}", stacklevel=2)
    if p == N.p:
        powers = N.term_powers_batch(batch.points)
    else:
        vals = N.term_values_batch(batch.points)
        powers = (vals ** p) * N.weights
    tau = TAU_MULTIPLIER * powers.mean(axis=0)
    return TauVector(tau, float(p), batch.k)


def to_probabilities(tau: TauVector) -> ProbabilityVector:
    """rho_i = max(tau_i, floor) / sum_j max(tau_j, floor).

    The floor, ||tau||_1 * 1e-12 / m, keeps zero-mass terms invertible in
    w = c/(M rho) while perturbing the distribution below test tolerances.
    """
    t = tau.tau
    total = t.sum()
    if total <= 0:
        raise ValueError("all tau entries are zero; no sampling distribution exists")
    floored = np.maximum(t, total * 1e-12 / tau.m)
    return ProbabilityVector(floored / floored.sum())


def exact_leverage_probs(terms, weights=None) -> ProbabilityVector:
    """Exact sampling probabilities for rank-one squared terms.

    For N_i(x) = sqrt(w_i) |<a_i, x>| the average of N_i(Z)^2 under the
    measure exp(-N(x)^2) is proportional to the leverage score of row
    sqrt(w_i) a_i, so rho is the leverage profile normalized by its sum
    (which is n for full-rank rows, by the trace identity).
    """
    rows = []
    for t in terms:
        if not isinstance(t, Linear):
            raise TypeError("exact_leverage_probs expects Linear terms")
        rows.append(t.a)
    A = np.array(rows)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        A = A * np.sqrt(w)[:, None]
    G = gram(A)
    try:
        lev = np.einsum("ij,ij->i", A, solve_spd(G, A.T).T)
    except np.linalg.LinAlgError:
        lev = None
    if lev is None or not np.all(np.isfinite(lev)):
        warnings.warn("rank-deficient rows: using the pseudo-inverse on the row span",
                      stacklevel=2)
        lev = np.einsum("ij,ij->i", A, A @ np.linalg.pinv(G.a))
    lev = np.maximum(lev, 0.0)
    return ProbabilityVector(lev / lev.sum())


def augment_with_lewis(tau: TauVector, alpha, p: float) -> ProbabilityVector:
    """rho_i proportional to tau_i + alpha_i^p, mixing in block importance."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != tau.tau.shape:
        raise ValueError("alpha length must match tau length")
    if np.any(alpha < 0):
        raise ValueError("alpha entries must be nonnegative")
    mix = tau.tau + alpha ** p
    total = mix.sum()
    if total <= 0:
        raise ValueError("tau and alpha are both identically zero")
    mix = np.maximum(mix, total * 1e-12 / tau.m)
    return ProbabilityVector(mix / mix.sum())
