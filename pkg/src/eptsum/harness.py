"""Batch experiments: approximation ratios, lemma audits and timing runs.

Every record type writes to CSV with a fixed header.  Ratios are kept as
exact integer pairs; the decimal column is rendered from them with integer
arithmetic.  Outputs depend only on the configuration and seed, never on
the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
import statistics
import time
from dataclasses import astuple, dataclass, fields
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .balanced import build_balanced_fast, build_balanced_naive
from .ept import (
    Ept,
    aug_sum,
    augment,
    correctly_placed,
    correctly_placed_all,
    ept_cost,
    ept_sum_edges,
    ept_sum_leaves,
    split,
    validate_ept,
)
from .oracle import (
    DEFAULT_CAP,
    labeled_tree_at,
    optimal_ept_sum,
    random_tree,
    random_weights,
    zero_mass_weights,
)
from .tree import InputTree, format_tree, parse_tree

log = logging.getLogger(__name__)

NAIVE_BENCH_CAP = 1 << 14
CHECKS = ("def-equivalence", "aug-lemma", "split-lemma", "correctly-placed")


class InvariantViolation(RuntimeError):
    """A checked property failed; carries the offending instance."""

    def __init__(self, instance_id: str, tree: InputTree, detail: str, records: Sequence = ()):
        super().__init__(f"{instance_id}: {detail}")
        self.instance_id = instance_id
        self.tree = tree
        self.detail = detail
        self.records = list(records)


@dataclass(frozen=True)
class RatioRecord:
    instance_id: str
    n: int
    total_weight: int
    balanced_cost: int
    optimal_cost: int

    @property
    def ratio_num(self) -> int:
        return self.balanced_cost

    @property
    def ratio_den(self) -> int:
        return self.optimal_cost

    @property
    def ratio_decimal(self) -> str:
        return decimal_ratio(self.balanced_cost, self.optimal_cost)


@dataclass(frozen=True)
class AuditRecord:
    check: str
    instance_id: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class BenchRecord:
    algo: str
    shape: str
    n: int
    repeats: int
    median_nanos: int


def decimal_ratio(num: int, den: int, places: int = 6) -> str:
    """``num / den`` rounded half-up to ``places`` decimals."""
    scale = 10**places
    q, r = divmod(num * scale, den)
    if 2 * r >= den:
        q += 1
    whole, frac = divmod(q, scale)
    return f"{whole}.{frac:0{places}d}"


# -- instance supplies -------------------------------------------------------

# An instance spec is a small picklable tuple so workers rebuild trees locally.
InstanceSpec = tuple


def exhaustive_specs(max_n: int, min_n: int = 2) -> Iterator[InstanceSpec]:
    for n in range(min_n, max_n + 1):
        for rank in range(n ** (n - 2)):
            yield ("exhaustive", n, rank)


def random_specs(
    n_range: tuple[int, int], trials: int, weight_range: tuple[int, int], seed: int
) -> Iterator[InstanceSpec]:
    lo_n, hi_n = n_range
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    for t in range(trials):
        n = int(rng.integers(lo_n, hi_n, endpoint=True))
        tree_seed, weight_seed = (int(x) for x in rng.integers(0, 1 << 63, size=2))
        yield ("random", n, t, tree_seed, weight_range, weight_seed)


def instance_id(spec: InstanceSpec) -> str:
    if spec[0] == "exhaustive":
        return f"n{spec[1]:02d}-p{spec[2]:07d}"
    return f"r{spec[2]:06d}-n{spec[1]:02d}"


def materialize(spec: InstanceSpec) -> InputTree:
    if spec[0] == "exhaustive":
        return labeled_tree_at(spec[1], spec[2])
    _, n, _, tree_seed, (lo, hi), weight_seed = spec
    g = random_tree(n, tree_seed)
    if lo == 0:
        return zero_mass_weights(g, hi, weight_seed)
    if (lo, hi) == (1, 1):
        return g
    return random_weights(g, lo, hi, weight_seed)


def _map(func: Callable, specs: Iterable[InstanceSpec], jobs: int) -> list:
    """Apply ``func`` to every spec; results come back sorted by instance id."""
    specs = list(specs)
    if jobs <= 1 or len(specs) < 2:
        results = [func(s) for s in specs]
    else:
        build_balanced_fast(InputTree(2, [(0, 1)]))  # compile before forking
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs) as pool:
            results = pool.map(func, specs, chunksize=max(1, len(specs) // (jobs * 16)))
    results.sort(key=lambda r: r[0])
    return results


# -- ratio sweeps ------------------------------------------------------------

def _ratio_task(spec: InstanceSpec, cap: int = DEFAULT_CAP) -> tuple:
    iid = instance_id(spec)
    g = materialize(spec)
    balanced = ept_cost(g, build_balanced_fast(g))
    optimal, _ = optimal_ept_sum(g, cap)
    rec = RatioRecord(iid, g.n, g.total_weight, balanced, optimal)
    problem = None
    if optimal > balanced:
        problem = f"optimal cost {optimal} exceeds balanced cost {balanced}"
    elif 2 * balanced > 3 * optimal:
        problem = f"2*balanced = {2 * balanced} > 3*optimal = {3 * optimal}"
    return iid, rec, problem, (format_tree(g) if problem else None)


def _summarize(records: Sequence[RatioRecord]) -> dict:
    best: Optional[RatioRecord] = None
    for r in records:
        if best is None or r.balanced_cost * best.optimal_cost > best.balanced_cost * r.optimal_cost:
            best = r
    return {
        "count": len(records),
        "max_ratio_num": best.balanced_cost if best else None,
        "max_ratio_den": best.optimal_cost if best else None,
        "max_ratio_decimal": best.ratio_decimal if best else None,
        "argmax_instance": best.instance_id if best else None,
        "argmax_tree": None,
    }


def _collect(results: list) -> list[RatioRecord]:
    records = []
    for iid, rec, problem, text in results:
        if problem:
            raise InvariantViolation(iid, parse_tree(text), problem, records)
        records.append(rec)
    return records


def run_ratio_exhaustive(max_n: int, jobs: int = 1) -> tuple[list[RatioRecord], dict]:
    """Balanced vs optimal cost on every labelled tree with 2 <= n <= max_n."""
    if not 2 <= max_n <= 8:
        raise ValueError("exhaustive ratio sweep supports 2 <= max_n <= 8")
    records = _collect(_map(_ratio_task, exhaustive_specs(max_n), jobs))
    summary = _summarize(records)
    if summary["argmax_instance"]:
        n, rank = (int(p[1:]) for p in summary["argmax_instance"].split("-"))
        summary["argmax_tree"] = format_tree(labeled_tree_at(n, rank))
    return records, summary


def run_ratio_random(
    n_range: tuple[int, int],
    trials: int,
    weight_range: tuple[int, int] = (1, 1),
    seed: int = 0,
    jobs: int = 1,
    cap: int = DEFAULT_CAP,
) -> tuple[list[RatioRecord], dict]:
    """Balanced vs optimal cost on seeded random (weighted) trees.

    A lower weight bound of 0 switches to zero-mass stress weights.
    """
    if trials < 1:
        raise ValueError("empty experiment: trials must be at least 1")
    lo_n, hi_n = n_range
    if not 2 <= lo_n <= hi_n:
        raise ValueError(f"bad vertex-count range {n_range}")
    if hi_n > cap:
        raise ValueError(f"n up to {hi_n} exceeds the oracle cap {cap}")
    if weight_range[0] < 0 or weight_range[1] < max(1, weight_range[0]):
        raise ValueError(f"bad weight range {weight_range}")
    specs = list(random_specs(n_range, trials, weight_range, seed))
    results = _map(_RatioCapped(cap), specs, jobs)
    records = _collect(results)
    summary = _summarize(records)
    if summary["argmax_instance"]:
        spec = next(s for s in specs if instance_id(s) == summary["argmax_instance"])
        summary["argmax_tree"] = format_tree(materialize(spec))
    return records, summary


class _RatioCapped:
    # picklable partial for the worker pool
    def __init__(self, cap: int):
        self.cap = cap

    def __call__(self, spec):
        return _ratio_task(spec, self.cap)


# -- lemma audits ------------------------------------------------------------

def audit_ept(g: InputTree, t: Ept, label: str, checks: Sequence[str] = CHECKS, builder: bool = True) -> list[tuple[str, bool, str]]:
    """Run the selected checks on one EPT; returns ``(check, passed, detail)`` rows."""
    rows = []
    cost = ept_cost(g, t)
    if "def-equivalence" in checks and g.edge_weights is None:
        d1 = ept_sum_edges(g, t).total
        d2 = ept_sum_leaves(g, t)
        rows.append(("def-equivalence", d1 == d2, f"{label}: def1={d1} def2={d2}"))
    if "aug-lemma" in checks:
        a = aug_sum(g, augment(g, t))
        rows.append(("aug-lemma", 2 * a <= 3 * cost, f"{label}: 2*aug={2 * a} 3*ept={3 * cost}"))
    if "split-lemma" in checks:
        rows.append(("split-lemma", *_split_audit(g, t, cost, label)))
    if "correctly-placed" in checks and builder:
        ok = correctly_placed_all(g, t)
        rows.append(("correctly-placed", ok, f"{label}: {'all nodes' if ok else 'misplaced node'}"))
    return rows


def _split_audit(g: InputTree, t: Ept, cost: int, label: str) -> tuple[bool, str]:
    below: dict = {}
    for x in t.internal_nodes():
        below[t.edge[x]] = sum(g.weights[v] for v in t.leaves(x))
    checked = 0
    for e, weight in below.items():
        tu, tv = split(g, t, e)
        side_u, side_v = tu.leaves(), tv.leaves()
        for part, verts in ((tu, side_u), (tv, side_v)):
            report = validate_ept(g, part, verts)
            if not report:
                return False, f"{label}: split along {e} gives invalid EPT ({report})"
        parts = ept_cost(g, tu) + ept_cost(g, tv)
        if parts > cost or (weight > 0 and parts == cost):
            return False, f"{label}: split along {e}: {parts} not below {cost}"
        checked += 1
    return True, f"{label}: {checked} edges split, all strictly cheaper"


def _audit_task(args: tuple) -> tuple:
    spec, checks, cap = args
    iid = instance_id(spec)
    g = materialize(spec)
    epts = [("balanced-fast", build_balanced_fast(g), True), ("balanced-naive", build_balanced_naive(g), True)]
    if g.n <= cap:
        epts.append(("optimal", optimal_ept_sum(g, cap)[1], False))
    rows = []
    for label, t, is_builder in epts:
        rows.extend(audit_ept(g, t, label, checks, is_builder))
    failed = next((d for _, ok, d in rows if not ok), None)
    return iid, [AuditRecord(c, iid, ok, d) for c, ok, d in rows], failed, (format_tree(g) if failed else None)


def run_audits(
    specs: Iterable[InstanceSpec], checks: Sequence[str] = CHECKS, jobs: int = 1, cap: int = DEFAULT_CAP
) -> list[AuditRecord]:
    """Audit every instance; the first failing instance raises :class:`InvariantViolation`."""
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    results = _map(_audit_task, [(s, tuple(checks), cap) for s in specs], jobs)
    records: list[AuditRecord] = []
    for iid, recs, failed, text in results:
        records.extend(recs)
        if failed:
            raise InvariantViolation(iid, parse_tree(text), failed, records)
    return records


# -- benchmarks --------------------------------------------------------------

def bench_tree(shape: str, n: int, seed: int = 0) -> InputTree:
    if shape == "path":
        return InputTree(n, [(i, i + 1) for i in range(n - 1)])
    if shape == "star":
        return InputTree(n, [(0, i) for i in range(1, n)])
    if shape == "random":
        return random_tree(n, seed)
    raise ValueError(f"unknown shape {shape!r}")


def loglog_slope(ns: Sequence[int], times: Sequence[float]) -> float:
    """Least-squares slope of log(time) against log(n)."""
    if len(ns) < 2:
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(times), 1)[0])


def run_bench(
    sizes: Sequence[int],
    shapes: Sequence[str] = ("path",),
    repeats: int = 3,
    algos: Sequence[str] = ("fast",),
    seed: int = 0,
) -> tuple[list[BenchRecord], dict[str, float]]:
    """Median wall time of each builder; returns records and log-log slopes.

    Naive runs above ``2**14`` vertices are skipped.
    """
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    if repeats < 3:
        raise ValueError("repeats must be at least 3")
    builders = {"fast": build_balanced_fast, "naive": build_balanced_naive}
    build_balanced_fast(InputTree(2, [(0, 1)]))  # keep JIT compilation out of the timings
    records = []
    for algo in algos:
        build = builders[algo]
        for shape in shapes:
            for n in sizes:
                if algo == "naive" and n > NAIVE_BENCH_CAP:
                    log.warning("skipping naive builder at n=%d (cap %d)", n, NAIVE_BENCH_CAP)
                    continue
                g = bench_tree(shape, n, seed)
                g.csr  # input preparation is not part of the timing
                samples = []
                for _ in range(repeats):
                    start = time.perf_counter_ns()
                    build(g)
                    samples.append(time.perf_counter_ns() - start)
                records.append(BenchRecord(algo, shape, n, repeats, int(statistics.median(samples))))
    slopes = {}
    for algo in algos:
        for shape in shapes:
            rows = [r for r in records if r.algo == algo and r.shape == shape]
            if len(rows) >= 2:
                slopes[f"{algo}/{shape}"] = loglog_slope([r.n for r in rows], [r.median_nanos for r in rows])
    return records, slopes


def spot_check_placement(g: InputTree, t: Ept, samples: int = 100, seed: int = 0) -> bool:
    """``correctly_placed`` on a seeded sample of internal nodes (for huge trees)."""
    nodes = t.internal_nodes()
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(nodes), size=min(samples, len(nodes)), replace=False)
    return all(correctly_placed(g, t, nodes[i]) for i in pick)


# -- CSV ---------------------------------------------------------------------

RATIO_HEADER = ("instance_id", "n", "total_weight", "balanced_cost", "optimal_cost", "ratio_decimal")
BENCH_HEADER = tuple(f.name for f in fields(BenchRecord))
AUDIT_HEADER = tuple(f.name for f in fields(AuditRecord))


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def ratio_csv(records: Sequence[RatioRecord]) -> str:
    return _csv(
        RATIO_HEADER,
        ((r.instance_id, r.n, r.total_weight, r.balanced_cost, r.optimal_cost, r.ratio_decimal) for r in records),
    )


def audit_csv(records: Sequence[AuditRecord]) -> str:
    return _csv(AUDIT_HEADER, ((r.check, r.instance_id, "true" if r.passed else "false", r.detail) for r in records))


def bench_csv(records: Sequence[BenchRecord]) -> str:
    return _csv(BENCH_HEADER, (astuple(r) for r in records))


def summary_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=False, separators=(",", ":")) + "\n"
