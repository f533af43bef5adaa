"""The sampling sparsifier and the homotopy driver.

One sparsification round is: estimate per-term masses tau from points drawn
against a norm equivalent to the target, normalize to probabilities rho,
draw M term indices independently from rho, and return the reweighting
w_i = count_i / (M rho_i), which is unbiased (E[w_i] = 1) per index.

The homotopy driver makes the round self-hosting for rounded norms: it
interpolates N_s^p = N^p + s^p ||x||_2^p from s = R (where the Euclidean
surrogate is directly samplable) down to s = epsilon * r, halving s and
re-sparsifying at accuracy 1/2 against the previous stage's sparsifier,
finishing with one accurate pass and stripping the regularizer term.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _streams
from .norms import EVAL_COUNTER, Euclidean, SumNorm, apply_weights
from .sampler import (ChordError, RoundedNorm, SampleBatch, SamplerConfig,
                      sample_euclidean, sample_mu)
from .weights import (ProbabilityVector, default_k_tau, estimate_tau, psi_n,
                      to_probabilities)

log = logging.getLogger("normforge.sparsify")


class StageError(RuntimeError):
    """A homotopy stage failed its equivalence check on every retry."""


@dataclass(frozen=True)
class SparsifyConfig:
    epsilon: float = 0.25
    C_M: float = 0.5
    p: float = None
    surrogate: SumNorm = None
    k_tau: int = None
    C_w: float = 200.0
    sampler: SamplerConfig = None
    seed: int = 0
    max_stage_retries: int = 3
    equiv_probes: int = 64
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.C_M <= 0:
            raise ValueError("C_M must be positive")

    def with_seed(self, seed: int) -> "SparsifyConfig":
        cfg = replace(self, seed=seed)
        if self.sampler is not None:
            cfg = replace(cfg, sampler=replace(self.sampler, seed=seed))
        return cfg

    def stage_sampler(self, n: int, seed: int) -> SamplerConfig:
        """Per-stage walk parameters.

        Stage measures are 2-equivalent to the previous stage's, so the
        walk needs less burn-in than a cold standalone run; the moment and
        equivalence diagnostics police the choice.
        """
        if self.sampler is not None:
            return replace(self.sampler, seed=seed)
        return SamplerConfig(burn_in=10 * n * n, steps_per_sample=5 * n,
                             chord_tol=1e-3, seed=seed, chains=64)


@dataclass(frozen=True)
class SparsifierResult:
    weights: np.ndarray
    M: int
    support: np.ndarray
    stage_log: tuple
    seed: int
    diagnostics: dict

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        s = np.asarray(self.support, dtype=np.intp)
        s.flags.writeable = False
        object.__setattr__(self, "support", s)

    @property
    def sparsity(self) -> int:
        return int(self.support.shape[0])


def choose_M(n: int, epsilon: float, p: float, C_M: float) -> int:
    """Number of independent index draws for a target accuracy epsilon.

    For p <= 2:  C_M n log(n/eps)^p psi_n log(n)^2 / eps^2.
    For p > 2:   C_M ((n+p)/2)^(p/2) p^2 (log(n/eps) log(n) psi_n)^2 / eps^2.
    log(n) factors are evaluated at max(n, 3) so tiny dimensions stay sane.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    L = math.log(max(n, 3))
    lne = math.log(n / epsilon)
    psi = psi_n(n)
    if p <= 2.0:
        raw = C_M * n * lne**p * psi * L**2 / epsilon**2
    else:
        raw = C_M * ((n + p) / 2.0) ** (p / 2.0) * p * p * (lne * L * psi) ** 2 / epsilon**2
    return max(1, int(math.ceil(raw)))


def sample_support(rho, M: int, rng: np.random.Generator) -> SparsifierResult:
    """Draw M indices from rho by inverse CDF; w_i = count_i / (M rho_i)."""
    if isinstance(rho, ProbabilityVector):
        rho = rho.rho
    rho = np.asarray(rho, dtype=np.float64)
    if M < 1:
        raise ValueError("M must be >= 1")
    cdf = np.cumsum(rho)
    cdf[-1] = 1.0  # guard the last bin against cumulative roundoff
    draws = rng.random(M)
    idx = np.searchsorted(cdf, draws, side="right")
    counts = np.bincount(idx, minlength=rho.shape[0]).astype(np.float64)
    w = counts / (M * rho)
    return SparsifierResult(
        weights=w, M=M, support=np.nonzero(w)[0], stage_log=(), seed=None,
        diagnostics={"counts_total": int(counts.sum())})


def sparsify_once(N: SumNorm, batch: SampleBatch, cfg: SparsifyConfig,
                  rng: np.random.Generator = None) -> SparsifierResult:
    """One sampling round against a batch the caller drew from an equivalent norm."""
    p = N.p if cfg.p is None else cfg.p
    tau = estimate_tau(N, batch, p)
    rho = to_probabilities(tau)
    M = choose_M(N.n, cfg.epsilon, p, cfg.C_M)
    if rng is None:
        rng = _streams.substream(cfg.seed, _streams.SUPPORT)
    res = sample_support(rho, M, rng)
    diag = dict(res.diagnostics)
    diag.update(tau=tau.tau, rho=rho.rho, k_tau=batch.k, M=M)
    return replace(res, seed=cfg.seed, diagnostics=diag)


def _equivalence_ratio(target: SumNorm, candidate: SumNorm, rng, probes: int) -> float:
    """max over probes of max(target/candidate, candidate/target), in norm scale."""
    X = rng.standard_normal((probes, target.n))
    X = np.vstack([X, np.eye(target.n)])
    a = target.value_batch(X)
    b = candidate.value_batch(X)
    live = a > 0
    if not np.any(live):
        return 1.0
    a, b = a[live], b[live]
    if np.any(b <= 0):
        return math.inf
    r = a / b
    return float(max(r.max(), (1.0 / r).max()))


def _regularized(N: SumNorm, s: float) -> SumNorm:
    """N_s with N_s(x)^p = N(x)^p + (s ||x||_2)^p, regularizer as last term."""
    return N.with_extra_term(Euclidean(1.0), s ** N.p)


def homotopy_sparsify(N: SumNorm, r: float, R: float, epsilon: float,
                      cfg: SparsifyConfig = None) -> SparsifierResult:
    """Sparsify a declared (r, R)-rounded semi-norm sum, p in [1, 2].

    Stages: (i) at s = R the regularized norm is 2-equivalent to R||x||_2,
    which is directly samplable; (ii) each halving of s re-sparsifies at
    accuracy 1/2 by sampling against the previous sparsifier; (iii) a final
    pass at s = epsilon r runs at accuracy epsilon/3 so that stripping the
    regularizer stays within the total budget.  Every stage must pass an
    equivalence spot-check (ratio <= 2 (1 + stage accuracy)) and the sampler
    moment diagnostic before the driver moves on; failures re-run the stage
    with a fresh seed up to cfg.max_stage_retries times.
    """
    cfg = cfg or SparsifyConfig(epsilon=epsilon)
    if not (0 < r <= R):
        raise ValueError("need 0 < r <= R")
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0, 1)")
    p = N.p
    if p > 2.0:
        raise ValueError("homotopy driver handles p in [1, 2]; use sparsify_p_power")
    seed = cfg.sampler.seed if cfg.sampler is not None else cfg.seed
    n, m = N.n, N.m
    eps_final = epsilon / 3.0
    k_tau = cfg.k_tau or default_k_tau(n, m + 1, cfg.C_w)
    s_floor = epsilon * r

    stage_log = []
    current = None  # sparsifier of the s-regularized norm, built stage by stage
    s = R

    def run_stage(stage_idx, s_sample, s_target, eps_stage, sampling_norm, kind):
        """Build an eps_stage-sparsifier of the s_target-regularized norm."""
        target = _regularized(N, s_target)
        last_err = None
        for attempt in range(cfg.max_stage_retries + 1):
            t0 = time.perf_counter()
            evals0 = EVAL_COUNTER.count
            stage_seed = _streams.child_seed(seed, _streams.STAGE, stage_idx, attempt)
            try:
                if sampling_norm is None:
                    rng = _streams.substream(stage_seed, _streams.RADIAL)
                    pts = sample_euclidean(s_sample, n, p, k_tau, rng)
                    scfg = cfg.stage_sampler(n, stage_seed)
                    batch = SampleBatch(pts, p, scfg, {"direct": "euclidean"})
                    moment_ok = True
                else:
                    lo = s_sample / 3.0 * 0.99
                    hi = 6.0 * max(R, s_sample) * 1.01
                    rounded = RoundedNorm(sampling_norm, lo, hi)
                    batch = sample_mu(rounded, p, k_tau,
                                      cfg.stage_sampler(n, stage_seed),
                                      threads=cfg.threads)
                    moment_ok = batch.diagnostics["mean_power"]["ok"]
                tau = estimate_tau(target, batch, p)
                rho = to_probabilities(tau)
                M = choose_M(n, eps_stage, p, cfg.C_M)
                srng = _streams.substream(stage_seed, _streams.SUPPORT)
                res = sample_support(rho, M, srng)
                # Intermediate sparsifiers exist only to be sampled against,
                # so pin the regularizer term at no less than its true weight;
                # without it a seminorm's kernel would make the next stage's
                # ball unbounded.  Output weights are never touched.
                wc = res.weights.copy()
                wc[-1] = max(wc[-1], 1.0)
                candidate = apply_weights(target, wc)
                prng = _streams.substream(stage_seed, _streams.PROBE)
                ratio = _equivalence_ratio(target, candidate, prng, cfg.equiv_probes)
            except (ChordError, ValueError, StageError) as exc:
                last_err = exc
                log.info("stage %d attempt %d failed: %s", stage_idx, attempt, exc)
                continue
            bound = 2.0 * (1.0 + eps_stage)
            if ratio <= bound and moment_ok:
                stage_log.append({
                    "stage": stage_idx, "kind": kind, "s": s_target,
                    "eps": eps_stage, "k_tau": k_tau, "M": M,
                    "support": int(res.support.shape[0]), "equiv_ratio": ratio,
                    "retries": attempt, "moment_ok": bool(moment_ok),
                    "evals": EVAL_COUNTER.count - evals0,
                    "seconds": time.perf_counter() - t0,
                })
                diag = dict(res.diagnostics)
                diag.update(tau=tau.tau, rho=rho.rho, k_tau=k_tau, M=M)
                res = replace(res, diagnostics=diag)
                return candidate, res
            last_err = StageError(
                f"equivalence ratio {ratio:.3f} > {bound:.3f} (moment_ok={moment_ok})")
            log.info("stage %d attempt %d rejected: %s", stage_idx, attempt, last_err)
        raise StageError(f"stage {stage_idx} failed after retries: {last_err}")

    # (i) bootstrap against the Euclidean surrogate
    stage_idx = 0
    current, _ = run_stage(stage_idx, R, R, 0.5, None, "euclidean")

    # (ii) halving schedule down to the floor
    while s > s_floor * (1.0 + 1e-12):
        s_next = max(0.5 * s, s_floor)
        stage_idx += 1
        current, _ = run_stage(stage_idx, s, s_next, 0.5, current, "halving")
        s = s_next

    # (iii) accurate final pass, then strip the regularizer term
    stage_idx += 1
    _, final = run_stage(stage_idx, s_floor, s_floor, eps_final, current, "final")
    w = final.weights[:m]
    diag = dict(final.diagnostics)
    diag["stripped_regularizer_weight"] = float(final.weights[m])
    diag["declared_r"], diag["declared_R"] = float(r), float(R)
    return SparsifierResult(weights=w, M=final.M, support=np.nonzero(w)[0],
                            stage_log=tuple(stage_log), seed=seed, diagnostics=diag)


def _empirical_roundedness(N: SumNorm, probes: int = 256, seed: int = 0):
    """Measured (min, max) of N on random unit vectors, with safety margins."""
    rng = _streams.substream(seed, _streams.PROBE, 1)
    U = rng.standard_normal((probes, N.n))
    U /= np.sqrt((U * U).sum(axis=1))[:, None]
    vals = N.value_batch(U)
    return float(vals.min()) / 2.0, float(vals.max()) * 2.0


def sparsify_p_power(N: SumNorm, cfg: SparsifyConfig) -> SparsifierResult:
    """Sparsify N^p for general p.

    p in [1, 2]: run the homotopy driver with empirically measured
    roundedness (callers with seminorms should declare (r, R) themselves and
    call homotopy_sparsify).  p > 2: draw against exp(-S(x)^2) for a
    2-smooth surrogate S -- by default a scaled Euclidean envelope, which is
    directly samplable and whose scale cancels from the probabilities.
    """
    p = N.p
    if p <= 2.0:
        r_hat, R_hat = _empirical_roundedness(N, seed=cfg.seed)
        if r_hat <= 0:
            raise ValueError("norm vanished on a probe direction; declare (r, R) "
                             "and use homotopy_sparsify for seminorms")
        return homotopy_sparsify(N, r_hat, R_hat, cfg.epsilon, cfg)

    k_tau = cfg.k_tau or default_k_tau(N.n, N.m, cfg.C_w)
    if cfg.surrogate is None:
        r_hat, R_hat = _empirical_roundedness(N, seed=cfg.seed)
        scale = R_hat / 2.0  # undo the margin: measured max of N on the sphere
        ratio = (R_hat / 2.0) / (2.0 * r_hat) if r_hat > 0 else math.inf
        if ratio > 16.0:
            warnings.warn(
                f"default Euclidean surrogate is only {ratio:.1f}-equivalent to N; "
                "supply cfg.surrogate for a smooth equivalent", stacklevel=2)
        rng = _streams.substream(cfg.seed, _streams.RADIAL)
        pts = sample_euclidean(scale, N.n, 2.0, k_tau, rng)
        batch = SampleBatch(pts, 2.0, None, {"direct": "euclidean", "scale": scale})
    else:
        r_hat, R_hat = _empirical_roundedness(cfg.surrogate, seed=cfg.seed)
        rounded = RoundedNorm(cfg.surrogate, r_hat, R_hat)
        scfg = cfg.sampler or SamplerConfig.for_dim(N.n, seed=cfg.seed)
        batch = sample_mu(rounded, 2.0, k_tau, scfg, threads=cfg.threads)

    tau = estimate_tau(N, batch, p)
    rho = to_probabilities(tau)
    M = choose_M(N.n, cfg.epsilon, p, cfg.C_M)
    rng = _streams.substream(cfg.seed, _streams.SUPPORT)
    res = sample_support(rho, M, rng)
    diag = dict(res.diagnostics)
    diag.update(tau=tau.tau, rho=rho.rho, k_tau=batch.k, M=M)
    return replace(res, seed=cfg.seed, diagnostics=diag)
