"""Batch front door: sample / weights / sparsify / lewis / verify / bench.

Every run is driven by one --seed through named RNG streams, writes its
artifacts plus a manifest referencing them, and exits 0 on success, 1 on a
verification failure, 2 on usage or input errors.  Set NORMFORGE_LOG to a
level name (debug, info, ...) for logging.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .linalg import read_matrix_csv
from .norms import (EVAL_COUNTER, Euclidean, SumNorm, apply_weights,
                    load_instance, load_weights, save_weights)
from .lewis import BlockStructure, block_lewis_fixed_point, certify
from .sampler import RoundedNorm, SampleBatch, SamplerConfig, sample_mu
from .sparsify import (SparsifyConfig, homotopy_sparsify, sparsify_p_power)
from .submodular import CutFunction
from .verify import empirical_eps, exact_cut_eps
from .weights import estimate_tau, to_probabilities

log = logging.getLogger("normforge.cli")


def _write_manifest(out_path, command, args, seed, timings, artifacts, extra=None):
    manifest = {
        "command": command,
        "config": {k: v for k, v in vars(args).items() if not k.startswith("_")},
        "seed": seed,
        "timings": timings,
        "artifacts": artifacts,
        "library_version": __version__,
    }
    if extra:
        manifest.update(extra)
    path = str(out_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return path


def _declared_roundedness(N, args):
    if args.r is not None and args.R is not None:
        return float(args.r), float(args.R)
    # measure and widen; fine for genuine norms, callers with seminorms
    # should declare
    rng = np.random.default_rng(0)
    U = rng.standard_normal((256, N.n))
    U /= np.sqrt((U * U).sum(axis=1))[:, None]
    vals = N.value_batch(U)
    r, R = float(vals.min()) / 2.0, float(vals.max()) * 2.0
    log.warning("no (r, R) declared; using measured bounds (%.4g, %.4g)", r, R)
    return r, R


def cmd_sample(args) -> int:
    t0 = time.perf_counter()
    N = load_instance(args.instance)
    r, R = _declared_roundedness(N, args)
    cfg = SamplerConfig.for_dim(N.n, seed=args.seed, chains=args.chains)
    try:
        rounded = RoundedNorm(N, r, R)
    except ValueError as exc:
        raise ValueError(
            f"{exc}; the measure exp(-N^phat) needs a genuine norm -- "
            "seminorm instances must go through the sparsify homotopy") from exc
    batch = sample_mu(rounded, args.phat, args.count, cfg, threads=args.threads)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in batch.points:
            fh.write(json.dumps(row.tolist()) + "\n")
    timings = {"total_s": time.perf_counter() - t0}
    _write_manifest(args.out, "sample", args, args.seed, timings, [args.out],
                    {"diagnostics": batch.diagnostics})
    return 0


def _read_samples(path, phat=None) -> SampleBatch:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise ValueError(f"no sample points in {path}")
    return SampleBatch(np.asarray(rows, dtype=np.float64), phat, None, {})


def cmd_weights(args) -> int:
    t0 = time.perf_counter()
    N = load_instance(args.instance)
    batch = _read_samples(args.samples, phat=None)
    tau = estimate_tau(N, batch, args.p)
    rho = to_probabilities(tau)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"tau": tau.tau.tolist(), "rho": rho.rho.tolist(),
                   "p": args.p, "sample_count": tau.sample_count}, fh)
    timings = {"total_s": time.perf_counter() - t0}
    _write_manifest(args.out, "weights", args, args.seed, timings, [args.out])
    return 0


def _cut_function_from_instance(N: SumNorm) -> CutFunction:
    from .norms import GraphEdge, Hyperedge
    edges, hyper = [], []
    for t, w in zip(N.terms, N.weights):
        if isinstance(t, GraphEdge):
            edges.append((t.u, t.v, w * t.c))
        elif isinstance(t, Hyperedge):
            hyper.append((t.vertices, w * np.sqrt(t.c)))
        else:
            raise ValueError("exact cut verification needs a graph/hypergraph instance")
    return CutFunction(N.n, edges, hyper)


def cmd_sparsify(args) -> int:
    t0 = time.perf_counter()
    N = load_instance(args.instance)
    if args.p is not None and abs(args.p - N.p) > 1e-12:
        log.warning("--p %.3g differs from instance p=%.3g; using the instance",
                    args.p, N.p)
    cfg = SparsifyConfig(epsilon=args.epsilon, seed=args.seed, threads=args.threads)
    if N.p <= 2.0 and args.r is not None and args.R is not None:
        result = homotopy_sparsify(N, args.r, args.R, args.epsilon, cfg)
    else:
        result = sparsify_p_power(N, cfg)
    save_weights(args.out, result.weights)
    artifacts = [args.out]

    Nt = apply_weights(N, result.weights)
    rep = empirical_eps(N, Nt, rng=np.random.default_rng(args.seed),
                        epsilon=args.epsilon)
    report = {
        "M": result.M,
        "support_size": result.sparsity,
        "stage_log": list(result.stage_log),
        "tau_summary": _summary(result.diagnostics.get("tau")),
        "rho_summary": _summary(result.diagnostics.get("rho")),
        "verify": {"max_rel_err": rep.max_rel_err, "passed": rep.passed},
        "seed": result.seed,
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, default=float)
        artifacts.append(args.report)
    timings = {"total_s": time.perf_counter() - t0}
    _write_manifest(args.out, "sparsify", args, args.seed, timings, artifacts)
    return 0


def _summary(arr):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=np.float64)
    return {"min": float(arr.min()), "max": float(arr.max()),
            "sum": float(arr.sum()), "len": int(arr.shape[0])}


def cmd_lewis(args) -> int:
    t0 = time.perf_counter()
    A = read_matrix_csv(args.matrix)
    with open(args.blocks, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    q = args.q if args.q is not None else float(spec.get("q", 2.0))
    blocks = BlockStructure(tuple(spec["blocks"]), tuple(spec["p"]), q)
    result = block_lewis_fixed_point(A, blocks, tol=args.tol)
    cert = certify(result, A, blocks, probes=args.probes,
                   rng=np.random.default_rng(args.seed))
    out = {
        "W": result.W.tolist(),
        "alpha": result.alpha.tolist(),
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "certificate": {
            "ok": cert.ok,
            "max_block_violation": cert.max_block_violation,
            "max_lower_violation": cert.max_lower_violation,
            "alpha_sum_error": cert.alpha_sum_error,
            "failures": [list(f[:2]) + [f[3]] for f in cert.failures],
        },
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
    timings = {"total_s": time.perf_counter() - t0}
    _write_manifest(args.out, "lewis", args, args.seed, timings, [args.out])
    return 0 if cert.ok and result.converged else 1


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    N = load_instance(args.instance)
    w = load_weights(args.weights)
    Nt = apply_weights(N, w)
    rep = empirical_eps(N, Nt, probes=args.probes,
                        rng=np.random.default_rng(args.seed), epsilon=args.epsilon)
    out = {
        "max_rel_err": rep.max_rel_err,
        "argmax_probe": rep.argmax_probe,
        "probe_counts": rep.probe_counts,
        "epsilon": args.epsilon,
        "passed": rep.passed,
    }
    ok = rep.passed
    if args.exact_cuts:
        F = _cut_function_from_instance(N)
        crep = exact_cut_eps(F, w, epsilon=args.epsilon)
        out["exact_cuts"] = {
            "max_rel_err": crep.max_rel_err,
            "argmax_cut": crep.argmax_probe,
            "zero_violations": crep.zero_violations,
            "passed": crep.passed,
        }
        ok = ok and crep.passed
    text = json.dumps(out, indent=2)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(args.report, "verify", args, args.seed,
                        {"total_s": time.perf_counter() - t0}, [args.report])
    print(text)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    N = load_instance(args.instance)
    rng = np.random.default_rng(args.seed)
    rows = []

    X = rng.standard_normal((args.count, N.n))
    EVAL_COUNTER.reset()
    t = time.perf_counter()
    N.power_batch(X)
    dt = time.perf_counter() - t
    evals = EVAL_COUNTER.count
    rows.append(("eval_terms_per_sec", evals / dt))
    rows.append(("eval_count_power_batch", evals))

    r, R = _declared_roundedness(N, args)
    cfg = SamplerConfig.for_dim(N.n, seed=args.seed, chains=args.chains)
    k = max(64, args.count // 16)
    try:
        rounded = RoundedNorm(N, r, R)
    except ValueError:
        # seminorm instance: bench the walk on the homotopy-style
        # regularized norm instead, which is what sparsify actually samples
        target = N.with_extra_term(Euclidean(1.0), r ** N.p)
        U = np.random.default_rng(1).standard_normal((256, N.n))
        U /= np.sqrt((U * U).sum(axis=1))[:, None]
        vals = target.value_batch(U)
        rounded = RoundedNorm(target, float(vals.min()) / 2.0, float(vals.max()) * 2.0)
        log.info("instance is a seminorm; benching the regularized walk")
    EVAL_COUNTER.reset()
    t = time.perf_counter()
    sample_mu(rounded, min(N.p, 2.0), k, cfg, threads=args.threads)
    dt = time.perf_counter() - t
    rows.append(("walk_samples_per_sec", k / dt))
    rows.append(("eval_count_walk", EVAL_COUNTER.count))

    if N.p <= 2.0:
        EVAL_COUNTER.reset()
        res = homotopy_sparsify(N, r, R, args.epsilon,
                                SparsifyConfig(epsilon=args.epsilon, seed=args.seed,
                                               threads=args.threads))
        for entry in res.stage_log:
            rows.append((f"homotopy_stage_{entry['stage']}_seconds", entry["seconds"]))
            rows.append((f"homotopy_stage_{entry['stage']}_evals", entry["evals"]))
        rows.append(("eval_count_homotopy", EVAL_COUNTER.count))

    lines = ["metric,value"] + [f"{k},{v!r}" for k, v in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(args.out, "bench", args, args.seed,
                        {"total_s": time.perf_counter() - t0}, [args.out])
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normforge",
                                 description="sparsify sums of semi-norm powers")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("sample", help="draw points from exp(-N(x)^phat)")
    p.add_argument("--instance", required=True)
    p.add_argument("--phat", type=float, default=1.0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--chains", type=int, default=8)
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("weights", help="estimate tau/rho from samples")
    p.add_argument("--instance", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("sparsify", help="compute sparse reweighting")
    p.add_argument("--instance", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    common(p)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("lewis", help="block Lewis weights with certificate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--blocks", required=True)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--probes", type=int, default=10000)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_lewis)

    p = sub.add_parser("verify", help="measure approximation quality")
    p.add_argument("--instance", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--exact-cuts", action="store_true")
    p.add_argument("--probes", type=int, default=10000)
    p.add_argument("--report", default=None)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="throughput and eval-count table")
    p.add_argument("--instance", required=True)
    p.add_argument("--count", type=int, default=4096)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--chains", type=int, default=8)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("NORMFORGE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
