"""Command-line experiment runner.

Every subcommand emits long-format rows (one metric per row) as CSV or JSON,
plus a manifest with the full configuration, seeds and library versions so
that any row can be regenerated.  Exit codes: 0 success, 1 usage error,
2 data error, 3 partial result (some cells skipped).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import statistics
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

import numpy as np

from . import __version__
from .approx import che_lru, fagin_lru, fifo_approx
from .bounds import (belady, exhaustive_offline_optimum, knapsack_2d_bounds,
                     static_knapsack_bound)
from .errors import CacheLabError, InvalidArgument, ResourceLimit
from .markov import (ChainSpec, brute_force_chain, lru_exact_variable_size,
                     multilevel_product_form, probabilistic_substitution,
                     product_form_hit_ratio)
from .sim import Kind, PolicyConfig, TtlFlag, hrc_sweep_stack, run_codes, simulate
from .sim.engine import report_from_codes
from .sim.policies import parse_kind
from .ttl import simulate_ttl_prm, ttl_hit, ttl_occupancy, ttl_trace_codes
from .workload import (Catalog, ChurnModel, generate_churn_trace, generate_irm_trace,
                       load_trace, lognormal_sizes, lognormal_values, loop_trace, save_trace,
                       zipf_pmf)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

ROW_FIELDS = ("experiment", "solver", "capacity", "metric", "value", "stderr", "seed", "rep",
              "runtime", "status")

SKIPPED = "skipped: resource-limit"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def row(experiment, solver, capacity, metric, value, stderr=None, seed=None, rep=None,
        runtime=None, status="ok") -> dict:
    value = None if value is None else float(value)
    stderr = None if stderr is None else float(stderr)
    if value is not None and not math.isfinite(value):
        value, status = None, "undefined"
    if stderr is not None and not math.isfinite(stderr):
        stderr = None
    return dict(experiment=experiment, solver=solver, capacity=capacity, metric=metric,
                value=value, stderr=stderr, seed=seed, rep=rep, runtime=runtime, status=status)


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_capacities(text: str) -> list:
    """``"4"``, ``"1,2,8"``, ``"log:10:10000:20"`` or ``"lin:1:10:10"``.

    The grid is returned sorted ascending without duplicates.
    """
    t = text.strip()
    try:
        if t.startswith(("log:", "lin:")):
            kind, a, b, n = t.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1 or a <= 0 and kind == "log":
                raise ValueError
            grid = np.geomspace(a, b, n) if kind == "log" else np.linspace(a, b, n)
            caps = [int(round(x)) for x in grid]
        else:
            caps = [int(x) for x in t.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse capacity grid {text!r}") from None
    if not caps or min(caps) < 0:
        raise UsageError("capacity grid must be nonempty and >= 0")
    return sorted(set(caps))


def _parse_dist(text, n, seed, kind):
    t = text.strip().lower()
    if t == "unit":
        return np.ones(n, dtype=np.int64) if kind == "sizes" else np.ones(n)
    if t.startswith("lognormal:"):
        try:
            mu, sigma = (float(x) for x in t.split(":", 1)[1].split(","))
        except ValueError:
            raise UsageError(f"cannot parse --{kind} {text!r}") from None
        if kind == "sizes":
            return lognormal_sizes(n, mu, sigma, seed)
        return lognormal_values(n, mu, sigma, seed + 1)
    try:
        xs = [float(x) for x in t.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse --{kind} {text!r}") from None
    if len(xs) != n:
        raise UsageError(f"--{kind} lists {len(xs)} entries for {n} objects")
    return np.asarray(xs, dtype=np.int64 if kind == "sizes" else np.float64)


def parse_policy(text: str, seed: int = 0) -> PolicyConfig:
    """``NAME[:ARG]``: ``WINDOW_LFU:100``, ``SGC:c*v/s``, ``LFU:c/s``,
    ``MULTI_LEVEL:1FIFO+1RANDOM``, ``PROB_ADMIT:LRU@0.5`` (beta) or
    ``PROB_ADMIT:FIFO@1:0.5:0.5`` (per-object probabilities)."""
    name, _, arg = text.strip().partition(":")
    try:
        kind = parse_kind(name)
        if kind is Kind.WINDOW_LFU:
            return PolicyConfig(kind, seed=seed, window=int(arg or 0))
        if kind in (Kind.SCORE_GATED_CLOCK, Kind.GREEDY_DUAL, Kind.LFU):
            return PolicyConfig(kind, seed=seed, score=arg or None)
        if kind is Kind.MULTI_LEVEL:
            return PolicyConfig(kind, seed=seed, levels=parse_levels(arg))
        if kind is Kind.PROB_ADMIT:
            inner, _, rule = arg.partition("@")
            parts = rule.split(":")
            admit = float(parts[0]) if len(parts) == 1 else tuple(float(x) for x in parts)
            return PolicyConfig(kind, seed=seed, inner=inner, admit=admit)
        if arg:
            raise UsageError(f"policy {name} takes no argument")
        return PolicyConfig(kind, seed=seed)
    except (InvalidArgument, ValueError) as e:
        raise UsageError(f"bad policy {text!r}: {e}") from None


def parse_levels(text: str) -> tuple:
    """``"1FIFO+2RANDOM"`` -> ``((1, FIFO), (2, RANDOM))``, top level first."""
    out = []
    for part in text.split("+"):
        digits = len(part) - len(part.lstrip("0123456789"))
        if digits == 0:
            raise UsageError(f"cannot parse level {part!r}")
        out.append((int(part[:digits]), parse_kind(part[digits:])))
    return tuple(out)


def _policies(args, default):
    names = []
    for chunk in args.policy or [default]:
        names.extend(x for x in chunk.split(",") if x.strip())
    return names


def _floats(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


# ---------------------------------------------------------------------------
# workloads


FIXTURES = ("figure5", "figure11", "loop3", "loop4")


def build_catalog(args, seed) -> Catalog:
    if getattr(args, "fixture", None) == "figure11":
        from .fixtures import figure11_catalog
        return figure11_catalog()
    if getattr(args, "pmf", None):
        w = np.asarray(_floats(args.pmf))
        n = len(w)
    else:
        n = args.catalog
        w = zipf_pmf(n, args.zipf)
    sizes = _parse_dist(args.sizes, n, seed, "sizes")
    values = _parse_dist(args.values, n, seed, "values")
    return Catalog.from_arrays(w, sizes, values)


def build_trace(args, rep: int = 0):
    """Trace for replication ``rep``.  File and fixture traces are fixed;
    generated traces use seed ``args.seed + rep``."""
    seed = args.seed + rep
    if args.trace:
        return load_trace(args.trace)
    fx = getattr(args, "fixture", None)
    if fx == "figure5":
        from .fixtures import figure5_trace
        return figure5_trace()
    if fx in ("loop3", "loop4"):
        from .fixtures import loop_fixture
        return loop_fixture(int(fx[-1]))
    if getattr(args, "loop", None):
        return loop_trace(args.loop, args.requests)
    cat = build_catalog(args, args.seed)
    if getattr(args, "churn", None):
        return generate_churn_trace(ChurnModel(args.churn, cat), args.requests, seed)[0]
    if getattr(args, "rate", None):
        from .ttl import generate_prm_trace
        return generate_prm_trace(cat, args.rate, args.requests / args.rate, seed)
    return generate_irm_trace(cat, args.requests, seed)


@lru_cache(maxsize=4)
def _cached_trace(args_json: str, rep: int):
    return build_trace(argparse.Namespace(**json.loads(args_json)), rep)


# ---------------------------------------------------------------------------
# cells (run in worker processes when --workers > 1)


def _sim_cell(args_json, policy_text, capacity, rep):
    args = argparse.Namespace(**json.loads(args_json))
    seed = args.seed + rep
    trace = _cached_trace(args_json, rep)
    cfg = parse_policy(policy_text, seed)
    ttl = None
    if args.discipline and args.delta_t:
        ttl = TtlFlag(args.discipline, float(args.delta_t))
    t0 = time.perf_counter()
    rep_ = simulate(cfg, trace, capacity, args.warmup, ttl=ttl)
    dt = time.perf_counter() - t0
    d = rep_.as_dict()
    out = []
    for metric, err in (("ohr", "ohr_stderr"), ("bhr", "bhr_stderr"), ("vhr", "vhr_stderr"),
                        ("upload_ratio", "upload_stderr")):
        out.append(row("sim", cfg.name, capacity, metric, d[metric], d[err], seed, rep, dt))
    return out


def _map(fn, cells, workers):
    if workers and workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(fn, *c) for c in cells]
            return [r for f in futs for r in f.result()]
    return [r for c in cells for r in fn(*c)]


def _args_json(args) -> str:
    keep = {k: v for k, v in vars(args).items() if k not in ("func", "argv")}
    return json.dumps(keep, sort_keys=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    trace = build_trace(args, 0)
    data = save_trace(trace)
    if args.out:
        with open(args.out, "wb") as f:
            f.write(data)
        _write_manifest(args, args.out + ".manifest.json", n_rows=0)
    else:
        sys.stdout.write(data.decode())
    return [], EXIT_OK


def cmd_sim(args):
    caps = parse_capacities(args.capacity)
    aj = _args_json(args)
    cells = [(aj, p, c, r) for p in _policies(args, "LRU") for c in caps for r in range(args.reps)]
    return _map(_sim_cell, cells, args.workers), EXIT_OK


def _stack_ok(trace, caps) -> bool:
    sizes = trace.catalog.sizes
    return len(sizes) == 0 or int(sizes.max()) <= 1 or int(sizes.max()) <= min(caps)


def cmd_sweep(args):
    caps = parse_capacities(args.capacity)
    rows = []
    aj = _args_json(args)
    slow = []
    for rep in range(args.reps):
        trace = build_trace(args, rep)
        seed = args.seed + rep
        for p in _policies(args, "LRU"):
            cfg = parse_policy(p, seed)
            if cfg.kind is Kind.LRU and _stack_ok(trace, caps):
                t0 = time.perf_counter()
                reports = hrc_sweep_stack(cfg, trace, caps, args.warmup)
                dt = (time.perf_counter() - t0) / len(caps)
                for r in reports:
                    d = r.as_dict()
                    for metric, err in (("ohr", "ohr_stderr"), ("bhr", "bhr_stderr"),
                                        ("vhr", "vhr_stderr"), ("upload_ratio", "upload_stderr")):
                        rows.append(row("sweep", "LRU[stack]", r.capacity, metric, d[metric],
                                        d[err], seed, rep, dt))
            else:
                slow.extend((aj, p, c, rep) for c in caps)
        rows.extend(_analytic_rows(trace, caps, seed, rep))
    sim_rows = _map(_sim_cell, slow, args.workers)
    for r in sim_rows:
        r["experiment"] = "sweep"
    rows.extend(sim_rows)
    status = EXIT_PARTIAL if any(r["status"] == SKIPPED for r in rows) else EXIT_OK
    return rows, status


def _analytic_rows(trace, caps, seed, rep):
    """Static knapsack bound per capacity (empirical pmf of the trace) and the
    LRU characteristic-time estimate for unit sizes."""
    cat = trace.catalog
    counts = np.bincount(trace.objects, minlength=len(cat)).astype(float)
    if counts.sum() == 0:
        return []
    pmf = counts / counts.sum()
    out = []
    unit = bool(np.all(cat.sizes == 1))
    # with unit values the value hit ratio bound is an object hit ratio bound
    metric = "ohr" if bool(np.all(cat.values == 1)) else "vhr"
    for c in caps:
        t0 = time.perf_counter()
        kb = static_knapsack_bound(pmf, cat.sizes, cat.values, c)
        out.append(row("sweep", "STATIC_BOUND", c, metric, kb.bound,
                       seed=seed, rep=rep, runtime=time.perf_counter() - t0))
        if unit and 1 <= c:
            t0 = time.perf_counter()
            a = che_lru(pmf[pmf > 0], min(c, int((pmf > 0).sum())))
            out.append(row("sweep", "CHE", c, "ohr", a.hit_ratio, seed=seed, rep=rep,
                           runtime=time.perf_counter() - t0))
    return out


def _pmf_sizes_values(args):
    cat = build_catalog(args, args.seed)
    return cat.pmf, cat.sizes, cat.values


def cmd_exact(args):
    pmf, sizes, values = _pmf_sizes_values(args)
    caps = parse_capacities(args.capacity) if args.capacity else [_fixture_capacity(args)]
    rows = []
    unit = bool(np.all(sizes == 1))
    names = _policies(args, "LRU,FIFO,CPR,RANDOM")
    admit = tuple(_floats(args.admit)) if args.admit else None
    for c in caps:
        for name in names:
            cfg = parse_policy(name)
            solver = cfg.name
            try:
                if cfg.kind is Kind.LRU and admit is None:
                    t0 = time.perf_counter()
                    r = lru_exact_variable_size(pmf, sizes, c, values, max_objects=args.max_objects)
                    dt = time.perf_counter() - t0
                    for m in ("ohr", "bhr", "vhr"):
                        rows.append(row("exact", "LRU[exact]", c, m, getattr(r, m), runtime=dt))
                t0 = time.perf_counter()
                spec = ChainSpec(cfg.kind, tuple(pmf), c, tuple(sizes), tuple(values), admit,
                                 cfg.levels, max_states=args.max_states)
                r = brute_force_chain(spec)
                dt = time.perf_counter() - t0
                for m in ("ohr", "bhr", "vhr"):
                    rows.append(row("exact", f"{solver}[chain]", c, m, getattr(r, m), runtime=dt))
            except ResourceLimit:
                rows.append(row("exact", solver, c, "ohr", None, status=SKIPPED))
            except InvalidArgument as e:
                rows.append(row("exact", solver, c, "ohr", None, status=f"skipped: {e}"))
            if unit and cfg.kind in (Kind.FIFO, Kind.RANDOM, Kind.CLOCK_PER_REQUEST):
                t0 = time.perf_counter()
                content = pmf if admit is None else probabilistic_substitution(pmf, admit)
                v = product_form_hit_ratio(content, c, weights=pmf)
                rows.append(row("exact", "PRODUCT_FORM", c, "ohr", v,
                                runtime=time.perf_counter() - t0))
            if unit and cfg.kind is Kind.MULTI_LEVEL:
                t0 = time.perf_counter()
                try:
                    v = multilevel_product_form(pmf, cfg.levels)
                    rows.append(row("exact", "PRODUCT_FORM[levels]", c, "ohr", v,
                                    runtime=time.perf_counter() - t0))
                except ResourceLimit:
                    rows.append(row("exact", "PRODUCT_FORM[levels]", c, "ohr", None,
                                    status=SKIPPED))
    status = EXIT_PARTIAL if any(r["status"].startswith("skipped") for r in rows) else EXIT_OK
    return rows, status


def _fixture_capacity(args):
    if args.fixture == "figure11":
        from .fixtures import figure11_instance
        return int(figure11_instance()["capacity"])
    raise UsageError("--capacity is required")


def cmd_approx(args):
    pmf, _, _ = _pmf_sizes_values(args)
    caps = parse_capacities(args.capacity)
    rows = []
    nz = int(np.count_nonzero(pmf))
    for c in caps:
        if not 1 <= c <= len(pmf):
            rows.append(row("approx", "*", c, "ohr", None, status="skipped: M outside [1, N]"))
            continue
        for solver, fn, rmetric in (("CHE", che_lru, "t_che"), ("FAGIN", fagin_lru, "ct"),
                                    ("FIFO_APPROX", fifo_approx, "t_fifo")):
            t0 = time.perf_counter()
            a = fn(pmf, c)
            dt = time.perf_counter() - t0
            rows.append(row("approx", solver, c, "ohr", a.hit_ratio, runtime=dt))
            if c < nz:
                rows.append(row("approx", solver, c, rmetric, a.root, runtime=dt))
    return rows, EXIT_OK


def _trim_values(trace, trim):
    R = len(trace)
    lo, hi = int(math.floor(trim * R)), R - int(math.floor(trim * R))
    v = trace.request_values.astype(float).copy()
    v[:lo] = 0.0
    v[hi:] = 0.0
    return v


def cmd_bounds(args):
    caps = parse_capacities(args.capacity)
    rows = []
    status = EXIT_OK
    for rep in range(args.reps):
        trace = build_trace(args, rep)
        seed = args.seed + rep
        piv = _trim_values(trace, args.trim) if args.trim > 0 else None
        unit = bool(np.all(trace.catalog.sizes == 1))
        for c in caps:
            t0 = time.perf_counter()
            b = knapsack_2d_bounds(trace, c, piv)
            dt = time.perf_counter() - t0
            rows.append(row("bounds", "KNAPSACK_2D", c, "bound_lo", b.vhr_lower, seed=seed,
                            rep=rep, runtime=dt))
            rows.append(row("bounds", "KNAPSACK_2D", c, "bound_hi", b.vhr_upper, seed=seed,
                            rep=rep, runtime=dt))
            if unit and piv is None:
                t0 = time.perf_counter()
                hits, _ = belady(trace, c)
                total = b.v_total
                rows.append(row("bounds", "BELADY", c, "vhr", hits / total if total else None,
                                seed=seed, rep=rep, runtime=time.perf_counter() - t0))
            if args.exhaustive:
                t0 = time.perf_counter()
                try:
                    v = exhaustive_offline_optimum(trace, c, per_interval_values=piv)
                    rows.append(row("bounds", "EXHAUSTIVE", c, "vhr",
                                    v / b.v_total if b.v_total else None, seed=seed, rep=rep,
                                    runtime=time.perf_counter() - t0))
                except ResourceLimit:
                    rows.append(row("bounds", "EXHAUSTIVE", c, "vhr", None, seed=seed, rep=rep,
                                    status=SKIPPED))
                    status = EXIT_PARTIAL
    return rows, status


def cmd_ttl(args):
    rows = []
    discs = [d.strip().upper() for d in args.discipline.split(",")]
    dts = _floats(args.delta_t)
    if args.trace or args.fixture:
        trace = build_trace(args, 0)
        w = int(math.floor(args.warmup * len(trace)))
        for d in discs:
            for dt in dts:
                t0 = time.perf_counter()
                codes = ttl_trace_codes(trace, d, dt)
                rep_ = report_from_codes(f"TTL[{d}]", 0, trace, codes, args.warmup)
                rows.append(row("ttl", f"TTL[{d}]", dt, "ohr", rep_.ohr, rep_.ohr_stderr,
                                runtime=time.perf_counter() - t0,
                                status="ok" if w < len(trace) else "undefined"))
        return rows, EXIT_OK
    lams = _floats(args.lam)
    for d in discs:
        for dt in dts:
            for lam in lams:
                rows.append(row("ttl", f"FORMULA[{d}]", dt, f"hit@lam={lam:g}",
                                ttl_hit(d, lam, dt)))
                for rep in range(args.reps if args.requests else 0):
                    seed = args.seed + rep
                    t0 = time.perf_counter()
                    est = simulate_ttl_prm(lam, dt, d, args.requests, seed)
                    rows.append(row("ttl", f"DES[{d}]", dt, f"hit@lam={lam:g}", est.value,
                                    est.stderr, seed, rep, time.perf_counter() - t0))
            rows.append(row("ttl", f"FORMULA[{d}]", dt, "occupancy",
                            ttl_occupancy(np.asarray(lams), d, dt)))
    return rows, EXIT_OK


BENCH_ORDER = ("FIFO", "SCORE_GATED_CLOCK", "LRU", "LFU")


def cmd_bench(args):
    trace = build_trace(args, 0)
    caps = parse_capacities(args.capacity)
    rows = []
    medians = {}
    for p in _policies(args, "FIFO,SGC,LRU,LFU"):
        cfg = parse_policy(p, args.seed)
        for c in caps:
            tp = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                run_codes(cfg, trace, c)
                tp.append(len(trace) / max(time.perf_counter() - t0, 1e-12))
            med = statistics.median(tp)
            medians.setdefault(c, {})[cfg.kind.value] = med
            rows.append(row("bench", cfg.name, c, "throughput", med, seed=args.seed,
                            runtime=len(trace) / med * args.repeat))
    for c, m in medians.items():
        seq = [m[k] for k in BENCH_ORDER if k in m]
        if any(a < b for a, b in zip(seq, seq[1:])):
            warnings.warn(f"capacity {c}: throughput order differs from the usual "
                          f"FIFO >= SGC >= LRU >= LFU: {m}", stacklevel=1)
    return rows, EXIT_OK


# ---------------------------------------------------------------------------
# output


def versions() -> dict:
    import numba
    import scipy
    return {"cachelab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def manifest(args, n_rows) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "argv")}
    return {"config": cfg, "argv": getattr(args, "argv", None), "seeds": _seeds(args), "versions": versions(),
            "rows": n_rows, "fields": list(ROW_FIELDS)}


def _seeds(args):
    reps = getattr(args, "reps", 1) or 1
    return [args.seed + r for r in range(reps)]


def _write_manifest(args, path, n_rows):
    with open(path, "w") as f:
        json.dump(manifest(args, n_rows), f, indent=2, sort_keys=True)
        f.write("\n")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else _fmt(r[k])) for k in ROW_FIELDS})
    return buf.getvalue()


def _fmt(x):
    return repr(x) if isinstance(x, float) else x


def rows_from_csv(text: str) -> list:
    """Inverse of :func:`rows_to_csv` (numbers come back as floats/ints)."""
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        d = {}
        for k in ROW_FIELDS:
            v = r[k]
            if v == "":
                d[k] = None
            elif k in ("value", "stderr", "runtime"):
                d[k] = float(v)
            elif k in ("seed", "rep"):
                d[k] = int(v)
            elif k == "capacity":
                d[k] = float(v) if any(ch in v for ch in ".eE") else int(v)
            else:
                d[k] = v
        out.append(d)
    return out


def emit(args, rows):
    if args.format == "json":
        text = json.dumps({"manifest": manifest(args, len(rows)), "rows": rows}, indent=1)
        text += "\n"
    else:
        text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        if args.format == "csv":
            _write_manifest(args, args.out + ".manifest.json", len(rows))
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser


def _common(p, requests=100_000):
    g = p.add_argument_group("workload")
    g.add_argument("--trace", help="request trace CSV (time,object,size,value)")
    g.add_argument("--fixture", choices=FIXTURES, help="checked-in instance")
    g.add_argument("--catalog", type=int, default=1000, metavar="N", help="catalog size")
    g.add_argument("--zipf", type=float, default=1.0, metavar="BETA", help="Zipf exponent")
    g.add_argument("--pmf", help="explicit request probabilities (comma list)")
    g.add_argument("--sizes", default="unit", help="unit | lognormal:MU,SIGMA | comma list")
    g.add_argument("--values", default="unit", help="unit | lognormal:MU,SIGMA | comma list")
    g.add_argument("--requests", type=int, default=requests, metavar="R")
    g.add_argument("--loop", type=int, metavar="N", help="cyclic trace over N unit objects")
    g.add_argument("--churn", type=float, metavar="P_NEW", help="new-object probability")
    g.add_argument("--rate", type=float, help="total Poisson request rate (adds timestamps)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reps", type=int, default=1, metavar="K")
    o = p.add_argument_group("output")
    o.add_argument("--out", help="output path (default stdout)")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--workers", type=int, default=1, metavar="K")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cachelab", description="Cache simulation and analysis experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a request trace")
    _common(p)
    p.set_defaults(func=cmd_gen)

    for name, fn, hlp in (("sim", cmd_sim, "trace-driven simulation"),
                          ("sweep", cmd_sweep, "hit ratio curves over a capacity grid")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--policy", action="append", help="NAME[:ARG], comma separated")
        p.add_argument("--capacity", required=True, help="LIST | log:A:B:N | lin:A:B:N")
        p.add_argument("--warmup", type=float, default=0.1, metavar="FRAC")
        p.add_argument("--discipline", help="TTL invalidation discipline")
        p.add_argument("--delta-t", dest="delta_t", help="TTL in seconds")
        p.set_defaults(func=fn)

    p = sub.add_parser("exact", help="exact Markov analysis")
    _common(p)
    p.add_argument("--policy", action="append")
    p.add_argument("--capacity")
    p.add_argument("--admit", help="per-object admission probabilities (comma list)")
    p.add_argument("--max-objects", dest="max_objects", type=int, default=20)
    p.add_argument("--max-states", dest="max_states", type=int, default=10**6)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("approx", help="characteristic-time approximations")
    _common(p)
    p.add_argument("--capacity", required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("bounds", help="offline bounds on a trace")
    _common(p)
    p.add_argument("--capacity", required=True)
    p.add_argument("--trim", type=float, default=0.1, help="fraction trimmed at each end")
    p.add_argument("--exhaustive", action="store_true", help="also run the exact optimum")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("ttl", help="TTL hit ratios: closed forms, simulation, trace replay")
    _common(p, requests=0)
    p.add_argument("--discipline", default="RESET_PER_MISS,RESET_PER_REQUEST,PERIODIC")
    p.add_argument("--delta-t", dest="delta_t", default="1")
    p.add_argument("--lam", default="1", help="request rates (comma list)")
    p.add_argument("--warmup", type=float, default=0.1)
    p.set_defaults(func=cmd_ttl)

    p = sub.add_parser("bench", help="policy throughput")
    _common(p)
    p.add_argument("--policy", action="append")
    p.add_argument("--capacity", required=True)
    p.add_argument("--repeat", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return ap


def _validate(args):
    if getattr(args, "reps", 1) < 1:
        raise UsageError("--reps must be >= 1")
    w = getattr(args, "warmup", None)
    if w is not None and not 0 <= w < 1:
        raise UsageError("--warmup must lie in [0, 1)")
    t = getattr(args, "trim", None)
    if t is not None and not 0 <= t < 0.5:
        raise UsageError("--trim must lie in [0, 0.5)")
    if getattr(args, "repeat", 1) < 1:
        raise UsageError("--repeat must be >= 1")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        argv = list(sys.argv[1:] if argv is None else argv)
        args = ap.parse_args(argv)
        args.argv = argv
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _validate(args)
        rows, status = args.func(args)
        if args.command != "gen":
            emit(args, rows)
    except UsageError as e:
        print(f"cachelab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CacheLabError, OSError, ValueError) as e:
        print(f"cachelab: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return status


if __name__ == "__main__":
    sys.exit(main())
