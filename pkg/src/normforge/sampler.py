"""Sampling from the log-concave measure with density prop. to exp(-N(x)^phat).

The sampler factors the measure radially: hit-and-run over the unit ball
{N <= 1} targets the uniform measure, and an independent Gamma draw supplies
the radius.  Concretely, if X is uniform on the ball and u ~ Gamma(n/phat, 1),
then Z = u^(1/phat) * X / N(X) has density prop. to exp(-N(z)^phat): the
radial density prop. to exp(-t^phat) t^(n-1) becomes Gamma(n/phat, 1) under
the substitution u = t^phat.

A useful consequence is that N(Z)^phat is exactly Gamma(n/phat, 1), mean
n/phat, which makes every batch self-certifying (``mean_power_check``).

Each hit-and-run chain owns a named RNG stream, so results are bit-for-bit
reproducible for a given (seed, config) regardless of how chains are grouped
across worker threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _streams
from .norms import SumNorm


class ChordError(RuntimeError):
    """The ray never exits the unit ball (direction in the kernel of N)."""


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int
    steps_per_sample: int
    chord_tol: float = 1e-3
    seed: int = 0
    chains: int = 8

    def __post_init__(self):
        if self.burn_in < 1 or self.steps_per_sample < 1 or self.chains < 1:
            raise ValueError("burn_in, steps_per_sample and chains must be >= 1")
        if not (0.0 < self.chord_tol <= 1e-3):
            raise ValueError("chord_tol must lie in (0, 1e-3]")

    @staticmethod
    def for_dim(n: int, seed: int = 0, chains: int = 8, chord_tol: float = 1e-3):
        """Walk defaults: burn_in = 50 n^2, steps_per_sample = 10 n."""
        return SamplerConfig(burn_in=50 * n * n, steps_per_sample=10 * n,
                             chord_tol=chord_tol, seed=seed, chains=chains)


@dataclass(frozen=True)
class RoundedNorm:
    """A SumNorm declared to satisfy r ||x||_2 <= N(x) <= R ||x||_2.

    The declaration is spot-checked on random unit vectors at construction;
    it is the caller's statement that N is a genuine norm, which is what the
    ball walk needs.
    """

    norm: SumNorm
    r: float
    R: float

    def __post_init__(self):
        if not (0 < self.r <= self.R):
            raise ValueError("need 0 < r <= R")
        rng = _streams.substream(0x5EED, self.norm.n)
        U = rng.standard_normal((48, self.norm.n))
        U /= np.sqrt((U * U).sum(axis=1))[:, None]
        ratios = self.norm.value_batch(U)
        lo, hi = self.r * (1 - 1e-9), self.R * (1 + 1e-9)
        if ratios.min() < lo or ratios.max() > hi:
            raise ValueError(
                f"roundedness spot-check failed: N(u)/||u|| ranges over "
                f"[{ratios.min():.6g}, {ratios.max():.6g}], declared [{self.r:g}, {self.R:g}]")


@dataclass(frozen=True)
class SampleBatch:
    """Points with provenance.  ``phat`` is None for uniform ball batches."""

    points: np.ndarray
    phat: float
    config: SamplerConfig
    diagnostics: dict

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]


def _chord_batch(value_fn, X, D, tol, max_iter=80):
    """Chord of {N <= 1} through the rows of X along the rows of D.

    Returns (t_minus, t_plus) with N(x + t d) within tol below 1 at both
    endpoints.  Brackets come from the triangle inequality
    (1 - N(x))/N(d) <= t* <= (1 + N(x))/N(d); a doubling pass widens the
    outer end in the rare event that roundoff lands it inside, and bisection
    does the rest.  Raises ChordError when some N(d) is zero (kernel ray).
    """
    B = X.shape[0]
    stacked = np.vstack([X, D])
    g = value_fn(stacked)
    g0, nd = g[:B], g[B:]
    if np.any(nd <= 0.0) or not np.all(np.isfinite(nd)):
        raise ChordError("direction with N(d) = 0: ray never exits the ball")
    inner_p = (1.0 - g0) / nd
    outer_p = (1.0 + g0) / nd
    inner_m, outer_m = -inner_p, -outer_p

    cand = np.empty_like(stacked)

    # evaluate g at both candidate endpoints in one stacked call
    def g_pair(tp, tm):
        np.multiply(D, tp[:, None], out=cand[:B])
        cand[:B] += X
        np.multiply(D, tm[:, None], out=cand[B:])
        cand[B:] += X
        gv = value_fn(cand)
        return gv[:B], gv[B:]

    # widen outer ends until they are outside (normally zero iterations)
    go_p, go_m = g_pair(outer_p, outer_m)
    for _ in range(60):
        bad_p = go_p < 1.0
        bad_m = go_m < 1.0
        if not (bad_p.any() or bad_m.any()):
            break
        outer_p = np.where(bad_p, outer_p * 2.0, outer_p)
        outer_m = np.where(bad_m, outer_m * 2.0, outer_m)
        go_p, go_m = g_pair(outer_p, outer_m)
    else:
        raise ChordError("bracket expansion failed: ray appears confined to the ball")

    # Stop each side once its bracket is short in parameter: |N(x+td) - 1| is
    # then within tol by the Lipschitz bound |g(s) - g(t)| <= |s - t| N(d).
    # A value-based stop would be wrong here: near the boundary the whole
    # neighbourhood of the current point has values within tol of 1, which
    # says nothing about how far the exit actually is.  Rows freeze
    # individually, so a chord never depends on what shares its batch.
    width_tol = 0.5 * tol / nd
    for _ in range(max_iter):
        live_p = outer_p - inner_p > width_tol
        live_m = inner_m - outer_m > width_tol
        if not (live_p.any() or live_m.any()):
            break
        mid_p = np.where(live_p, 0.5 * (inner_p + outer_p), inner_p)
        mid_m = np.where(live_m, 0.5 * (inner_m + outer_m), inner_m)
        gm_p, gm_m = g_pair(mid_p, mid_m)
        le = live_p & (gm_p <= 1.0)
        inner_p = np.where(le, mid_p, inner_p)
        outer_p = np.where(live_p & ~le, mid_p, outer_p)
        le = live_m & (gm_m <= 1.0)
        inner_m = np.where(le, mid_m, inner_m)
        outer_m = np.where(live_m & ~le, mid_m, outer_m)
    return inner_m, inner_p


def chord_endpoints(N: SumNorm, x, d, tol: float = 1e-6):
    """(t-, t+) with t- < 0 < t+ and |N(x + t d) - 1| <= tol at both ends."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if N.value(x) >= 1.0:
        raise ValueError("x must be strictly inside the unit ball of N")
    tm, tp = _chord_batch(N.value_batch, x[None, :], d[None, :], tol, max_iter=200)
    return float(tm[0]), float(tp[0])


def _run_chains(value_fn, n, seed, chain_ids, per, cfg):
    """Run a block of chains in lockstep; returns (len(chain_ids), per, n)."""
    C = len(chain_ids)
    gens = [_streams.substream(seed, _streams.WALK_CHAIN, c) for c in chain_ids]
    states = np.zeros((C, n))
    total = cfg.burn_in + per * cfg.steps_per_sample
    out = np.empty((C, per, n))
    oi = 0
    seg = 512
    step = 0
    dirs = np.empty((C, seg, n))
    us = np.empty((C, seg))
    while step < total:
        L = min(seg, total - step)
        for c, gen in enumerate(gens):
            dirs[c, :L] = gen.standard_normal((L, n))
            us[c, :L] = gen.random(L)
        for j in range(L):
            d = dirs[:, j, :]
            tm, tp = _chord_batch(value_fn, states, d, cfg.chord_tol)
            t = tm + us[:, j] * (tp - tm)
            states = states + t[:, None] * d
            gs = step + j + 1
            if gs > cfg.burn_in and (gs - cfg.burn_in) % cfg.steps_per_sample == 0 and oi < per:
                out[:, oi] = states
                oi += 1
        step += L
    return out


def uniform_ball_walk(rounded: RoundedNorm, k: int, cfg: SamplerConfig,
                      *, threads: int = 1) -> SampleBatch:
    """k approximately uniform points on the unit ball of a rounded norm.

    Hit-and-run: from the current point, pick a uniformly random direction,
    then move to a uniform point of the chord through the ball.  Chains start
    at the origin (interior, since N is a norm) and run concurrently; sample
    order is chain-major and independent of the thread count.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    N = rounded.norm
    C = cfg.chains
    per = -(-k // C)
    ids = list(range(C))
    if threads > 1 and C > 1:
        groups = np.array_split(np.array(ids), min(threads, C))
        with ThreadPoolExecutor(max_workers=len(groups)) as ex:
            futs = [ex.submit(_run_chains, N.value_batch, N.n, cfg.seed,
                              [int(c) for c in grp], per, cfg) for grp in groups]
            blocks = [f.result() for f in futs]
        out = np.concatenate(blocks, axis=0)
    else:
        out = _run_chains(N.value_batch, N.n, cfg.seed, ids, per, cfg)
    points = out.reshape(C * per, N.n)[:k]
    vals = N.value_batch(points)
    diag = {
        "chains": C,
        "per_chain": per,
        "burn_in": cfg.burn_in,
        "steps_per_sample": cfg.steps_per_sample,
        "max_value": float(vals.max()),
        "min_value": float(vals.min()),
    }
    return SampleBatch(points, None, cfg, diag)


def radial_resample(batch: SampleBatch, N: SumNorm, phat: float,
                    rng: np.random.Generator) -> SampleBatch:
    """Attach the exact radial law: Z = u^(1/phat) X / N(X), u ~ Gamma(n/phat).

    Requires every batch point to have N(X) > 0.
    """
    if not (1.0 <= phat <= 2.0):
        raise ValueError("phat must lie in [1, 2]")
    X = batch.points
    nx = N.value_batch(X)
    if np.any(nx <= 0.0):
        raise ValueError(f"{int((nx <= 0).sum())} batch points have N(X) = 0; "
                         "cannot place them on a ray")
    u = rng.gamma(N.n / phat, 1.0, size=X.shape[0])
    lam = u ** (1.0 / phat)
    pts = X * (lam / nx)[:, None]
    out = SampleBatch(pts, phat, batch.config, dict(batch.diagnostics))
    out.diagnostics["mean_power"] = mean_power_check(out, N)
    return out


def mean_power_check(batch: SampleBatch, N: SumNorm) -> dict:
    """Self-certification: (1/k) sum N(Z)^phat must sit near n/phat.

    N(Z)^phat is an exact Gamma(n/phat, 1) variable, so the empirical mean of
    k draws stays within a 4-sigma relative window 4 sqrt(phat) / sqrt(k n).
    """
    phat = batch.phat
    if phat is None:
        raise ValueError("mean_power_check needs a radially resampled batch")
    vals = N.value_batch(batch.points) ** phat
    k = batch.k
    target = N.n / phat
    window = 4.0 * math.sqrt(phat) / math.sqrt(k * N.n)
    mean = float(vals.mean())
    return {
        "mean": mean,
        "target": target,
        "rel_window": window,
        "ok": bool(abs(mean / target - 1.0) <= window),
    }


def sample_mu(rounded: RoundedNorm, phat: float, k: int, cfg: SamplerConfig,
              *, threads: int = 1) -> SampleBatch:
    """k points with density prop. to exp(-N(x)^phat): walk then radial draw."""
    batch = uniform_ball_walk(rounded, k, cfg, threads=threads)
    rng = _streams.substream(cfg.seed, _streams.RADIAL)
    return radial_resample(batch, rounded.norm, phat, rng)


def sample_euclidean(scale: float, n: int, phat: float, k: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Direct sampler for density prop. to exp(-(scale ||x||_2)^phat)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    dirs = rng.standard_normal((k, n))
    dirs /= np.sqrt((dirs * dirs).sum(axis=1))[:, None]
    lam = rng.gamma(n / phat, 1.0, size=k) ** (1.0 / phat)
    return dirs * (lam / scale)[:, None]
