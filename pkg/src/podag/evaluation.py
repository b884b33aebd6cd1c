"""Metrics, faithfulness-strength analysis, and the benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .baselines import pc, pc_plus
from .errors import SingularityError
from .graph import Pdag
from .search import PodagConfig, learn
from .sem import generate_layered_dag, GenConfig, population_covariance, random_weights, sample, spawn_rngs
from .stats import GaussianEngine, OracleEngine, RecordingEngine, partial_correlation

__all__ = [
    "EdgeMetrics",
    "edge_metrics",
    "collect_test_tuples",
    "rho_min_star",
    "faithfulness_report",
    "FAITHFULNESS_FIELDS",
    "BenchmarkSpec",
    "run_benchmark",
    "BENCHMARK_FIELDS",
    "rows_to_csv",
]

ZERO_RHO_TOL = 1e-10


@dataclass(frozen=True)
class EdgeMetrics:
    """Confusion counts over an eligible pair universe.

    ``tpr`` is tp/(tp+fn) with 0/0 read as 1; ``fpr`` is fp/(fp+tn) with
    0/0 read as 0.  ``shd`` counts unordered pairs whose relation
    (->, <-, -, none) differs between the estimate and the truth,
    restricted to the scope's universe.
    """

    scope: str
    tp: int
    fp: int
    tn: int
    fn: int
    shd: int

    @property
    def tpr(self):
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def fpr(self):
        return 0.0 if self.fp + self.tn == 0 else self.fp / (self.fp + self.tn)

    @property
    def universe_size(self):
        return self.tp + self.fp + self.tn + self.fn


def _estimated_relations(estimated, ordering):
    """Normalize an estimate into pairwise relations.

    Returns (directed set, adjacency set).  Undirected edges whose
    endpoints are ordered count as directed the forward way; undirected
    edges between unordered peers contribute adjacency only.
    """
    if isinstance(estimated, Pdag):
        directed = set(estimated.directed_edges)
        undirected = set(estimated.undirected_edges)
    else:
        directed = {(int(u), int(v)) for u, v in estimated}
        undirected = set()
    for u, v in sorted(undirected):
        if ordering is not None and ordering.orders_before(u, v):
            directed.add((u, v))
        elif ordering is not None and ordering.orders_before(v, u):
            directed.add((v, u))
    adjacency = {(min(u, v), max(u, v)) for u, v in directed} | {
        (min(u, v), max(u, v)) for u, v in undirected
    }
    return directed, adjacency


def edge_metrics(estimated, truth, scope="all_edges", ordering=None):
    """Confusion counts of an estimate against the true DAG.

    ``scope`` selects the eligible universe: ``cross_only`` counts
    ordered pairs whose endpoints are ordered by the layering,
    ``all_edges`` all ordered pairs, ``skeleton`` unordered pairs.

    ``estimated`` may be a directed edge set or a :class:`Pdag`; for
    directed scopes an undirected edge counts as directed only when the
    ordering orients it (same-layer undirected edges count as misses of
    the true direction, never as extra directed edges).
    """
    if isinstance(estimated, Pdag) and estimated.n_nodes != truth.n_nodes:
        raise ValueError("estimate and truth disagree on the node count")
    if scope not in ("cross_only", "all_edges", "skeleton"):
        raise ValueError(f"unknown scope {scope!r}")
    if scope == "cross_only" and ordering is None:
        raise ValueError("cross_only scope needs an ordering")
    n = truth.n_nodes
    directed, adjacency = _estimated_relations(estimated, ordering)
    for u, v in directed | adjacency:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"estimated edge ({u}, {v}) outside the node universe")

    if scope == "skeleton":
        universe = [(i, j) for i in range(n) for j in range(i + 1, n)]
        truth_set = {(min(u, v), max(u, v)) for u, v in truth.edges}
        est_set = adjacency
    elif scope == "cross_only":
        universe = [
            (u, v)
            for u in range(n)
            for v in range(n)
            if u != v and ordering.orders_before(u, v)
        ]
        truth_set = set(truth.edges)
        est_set = directed
    else:
        universe = [(u, v) for u in range(n) for v in range(n) if u != v]
        truth_set = set(truth.edges)
        est_set = directed

    allowed = set(universe)
    tp = fp = tn = fn = 0
    for pair in universe:
        est = pair in est_set
        tru = pair in truth_set
        tp += est and tru
        fp += est and not tru
        fn += tru and not est
        tn += not est and not tru

    # SHD over unordered pairs of the scope universe
    if scope == "skeleton":
        shd = sum(1 for pair in universe if (pair in est_set) != (pair in truth_set))
    else:
        unordered = {(min(u, v), max(u, v)) for u, v in universe}

        def relation(u, v, directed_set, adj_set):
            if (u, v) in directed_set:
                return ">"
            if (v, u) in directed_set:
                return "<"
            if (u, v) in adj_set:
                return "-"
            return "."

        truth_adj = {(min(u, v), max(u, v)) for u, v in truth.edges}
        shd = sum(
            1
            for u, v in sorted(unordered)
            if relation(u, v, est_set, adjacency) != relation(u, v, truth_set, truth_adj)
        )
    return EdgeMetrics(scope=scope, tp=tp, fp=fp, tn=tn, fn=fn, shd=shd)


def _run_algorithm(name, engine, ordering, n_nodes, labels=None, cfg=None, truth=None):
    """Dispatch one algorithm against an engine; returns (Pdag, ci_tests)."""
    if name == "pc":
        res = pc(engine, n_nodes, labels=labels)
        return res.pdag, res.ci_tests
    if name == "pc_plus":
        res = pc_plus(engine, ordering, labels=labels)
        return res.pdag, res.ci_tests
    if name == "podag":
        cfg = cfg or PodagConfig(learn_within_layers=True)
        result = learn(truth, ordering, cfg=cfg, engine=engine)
        return result.as_pdag(), result.diagnostics.ci_tests
    raise ValueError(f"unknown algorithm {name!r}")


def collect_test_tuples(algorithm, g, ordering, cfg=None, phases=None):
    """Run an algorithm against a recording d-separation oracle.

    Returns the ordered list of tuples ``(i, j, S)`` the algorithm's
    constraint-based part queried.  For the screen-then-search estimator
    that is the searching loop plus orientation-phase queries: screening
    is set inference (a regression problem in the sample version), so its
    probes do not enter the test collection; every returned tuple then
    conditions on ``cross(j) - {k}`` plus a blanket subset.  ``phases``
    restricts the collection further (e.g. ``("search",)`` for the
    skeleton-recovery tests alone).
    """
    recorder = RecordingEngine(OracleEngine(g))
    recorder.phase = "search"
    _run_algorithm(algorithm, recorder, ordering, g.n_nodes, cfg=cfg, truth=g)
    if phases is None and algorithm == "podag":
        phases = ("search", "orient")
    return recorder.tuples(phases=phases)


def rho_min_star(sem, tuples, zero_tol=ZERO_RHO_TOL):
    """Minimum nonzero absolute population partial correlation over tuples.

    Returns ``math.inf`` when every tuple's partial correlation is zero.
    Duplicated or reordered tuples do not change the value.
    """
    cov = population_covariance(sem)
    best = math.inf
    for i, j, s in tuples:
        try:
            rho = abs(partial_correlation(cov, i, j, s))
        except SingularityError as err:
            warnings.warn(f"skipping tuple ({i}, {j}, {sorted(s)}): {err}")
            continue
        if rho > zero_tol:
            best = min(best, rho)
    return best


FAITHFULNESS_FIELDS = [
    "replicate",
    "algorithm",
    "rho_min_skeleton",
    "rho_min_full",
    "ci_tests",
]


def faithfulness_report(
    replicates=100,
    n_nodes=20,
    expected_edges_per_node=2.0,
    layers=2,
    seed=0,
    weight_range=(0.1, 1.0),
    threads=1,
):
    """Faithfulness-strength comparison of PC, PC+, and PODAG.

    For each random SEM, runs every algorithm against the d-separation
    oracle, collects the tuples its constraint-based part tested (for the
    screen-then-search estimator the searching loop and orientation
    queries; screening is regression-style set inference), and evaluates
    the minimum nonzero population partial correlation over (a) the
    skeleton-phase tuples and (b) the full run including
    orientation-phase queries, together with the number of CI tests.
    Returns one row per (replicate, algorithm).
    """
    rngs = spawn_rngs(seed, replicates)

    def one(rep):
        rng = rngs[rep]
        cfg = GenConfig(
            n_nodes=n_nodes,
            expected_edges_per_node=expected_edges_per_node,
            layers=layers,
            weight_range=weight_range,
        )
        dag, ordering = generate_layered_dag(cfg, rng)
        sem = random_weights(dag, rng, weight_range=weight_range)
        rows = []
        for algo in ("pc", "pc_plus", "podag"):
            recorder = RecordingEngine(OracleEngine(dag))
            recorder.phase = "search"
            _run_algorithm(algo, recorder, ordering, n_nodes, truth=dag)
            skeleton_tuples = recorder.tuples(phases=("search",))
            full_tuples = recorder.tuples(phases=("search", "orient"))
            rows.append(
                {
                    "replicate": rep,
                    "algorithm": algo,
                    "rho_min_skeleton": rho_min_star(sem, skeleton_tuples),
                    "rho_min_full": rho_min_star(sem, full_tuples),
                    "ci_tests": len(full_tuples),
                }
            )
        return rows

    results = _map_replicates(one, range(replicates), threads)
    return [row for rows in results for row in rows]


@dataclass(frozen=True)
class BenchmarkSpec:
    """Grid specification for the simulation benchmark.

    ``alpha`` is the test level for PC and PC+.  The searching loop of
    the screen-then-search estimator runs at its own ``podag_alpha``,
    stricter by default: its per-candidate test count is small and its
    consistency theory wants a level that shrinks with n, whereas PC's
    effective per-edge error is already deflated by its much larger
    number of (diverse) tests.
    """

    n_nodes: tuple = (50,)
    layers: tuple = (2, 5)
    n: tuple = (500,)
    backends: tuple = ("pcor",)
    algorithms: tuple = ("pc", "pc_plus", "podag")
    replicates: int = 20
    seed: int = 0
    expected_edges_per_node: float = 3.0
    alpha: float = 0.05
    podag_alpha: float = 0.005
    screen_alpha: float = 0.5
    max_sepset_size: int | None = 3
    weight_range: tuple = (0.1, 1.0)
    scopes: tuple = ("cross_only", "all_edges", "skeleton")

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        kwargs = {}
        for key in (
            "n_nodes",
            "layers",
            "n",
            "backends",
            "algorithms",
            "scopes",
        ):
            if key in doc:
                value = doc[key]
                kwargs[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
        for key in (
            "replicates",
            "seed",
            "expected_edges_per_node",
            "alpha",
            "podag_alpha",
            "screen_alpha",
            "max_sepset_size",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        if "weight_range" in doc:
            kwargs["weight_range"] = tuple(doc["weight_range"])
        return cls(**kwargs)


BENCHMARK_FIELDS = [
    "n_nodes",
    "layers",
    "n",
    "algorithm",
    "backend",
    "replicate",
    "seed",
    "scope",
    "tp",
    "fp",
    "tn",
    "fn",
    "tpr",
    "fpr",
    "shd",
    "ci_tests",
    "elapsed_ms",
]


def _metric_rows(cell, algo, backend, rep, seed, pdag, truth, ordering, ci_tests, elapsed_ms, scopes):
    rows = []
    for scope in scopes:
        m = edge_metrics(pdag, truth, scope=scope, ordering=ordering)
        rows.append(
            {
                "n_nodes": cell[0],
                "layers": cell[1],
                "n": cell[2],
                "algorithm": algo,
                "backend": backend,
                "replicate": rep,
                "seed": seed,
                "scope": scope,
                "tp": m.tp,
                "fp": m.fp,
                "tn": m.tn,
                "fn": m.fn,
                "tpr": m.tpr,
                "fpr": m.fpr,
                "shd": m.shd,
                "ci_tests": ci_tests,
                "elapsed_ms": elapsed_ms,
            }
        )
    return rows


def run_benchmark(spec, threads=1, progress=None):
    """Run the benchmark grid; returns (rows, failures).

    Per-replicate failures are recorded as ``(cell, replicate, algorithm,
    error)`` tuples and excluded from the rows, never silently dropped.
    Rows are deterministic given the spec (replicate seeds derive from
    the root seed) and sorted independently of completion order.
    """
    cells = [
        (p, layers, n)
        for p in spec.n_nodes
        for layers in spec.layers
        for n in spec.n
    ]
    jobs = [(cell, rep) for cell in cells for rep in range(spec.replicates)]
    streams = {job: rng for job, rng in zip(jobs, spawn_rngs(spec.seed, len(jobs)))}

    def one(job):
        cell, rep = job
        p, layers, n = cell
        rng = streams[job]
        rows = []
        failures = []
        gen = GenConfig(
            n_nodes=p,
            expected_edges_per_node=spec.expected_edges_per_node,
            layers=layers,
            weight_range=spec.weight_range,
        )
        dag, ordering = generate_layered_dag(gen, rng)
        sem = random_weights(dag, rng, weight_range=spec.weight_range)
        dataset = sample(sem, n, rng)
        for algo in spec.algorithms:
            backends = spec.backends if algo == "podag" else ("",)
            for backend in backends:
                started = time.perf_counter()
                try:
                    if algo == "podag":
                        cfg = PodagConfig(
                            backend=backend,
                            alpha=spec.podag_alpha,
                            screen_alpha=spec.screen_alpha,
                            max_sepset_size=spec.max_sepset_size,
                            learn_within_layers=True,
                            on_conflict="ignore",
                        )
                        result = learn(dataset, ordering, cfg=cfg)
                        pdag, ci = result.as_pdag(), result.diagnostics.ci_tests
                    else:
                        engine = GaussianEngine(dataset, alpha=spec.alpha)
                        if algo == "pc":
                            res = pc(engine, p, labels=dataset.labels, on_conflict="ignore")
                        else:
                            res = pc_plus(
                                engine, ordering, labels=dataset.labels, on_conflict="ignore"
                            )
                        pdag, ci = res.pdag, res.ci_tests
                except Exception as err:  # noqa: BLE001 - recorded per contract
                    label = f"{algo}/{backend}" if backend else algo
                    failures.append((cell, rep, label, repr(err)))
                    continue
                elapsed_ms = int(round((time.perf_counter() - started) * 1000))
                rows.extend(
                    _metric_rows(
                        cell,
                        algo,
                        backend,
                        rep,
                        spec.seed,
                        pdag,
                        dag,
                        ordering,
                        ci,
                        elapsed_ms,
                        spec.scopes,
                    )
                )
        if progress is not None:
            progress(job)
        return rows, failures

    results = _map_replicates(one, jobs, threads)
    rows = [row for r, _ in results for row in r]
    failures = [f for _, fs in results for f in fs]
    rows.sort(
        key=lambda r: (
            r["n_nodes"],
            r["layers"],
            r["n"],
            r["algorithm"],
            r["backend"],
            r["replicate"],
            r["scope"],
        )
    )
    return rows, failures


def _map_replicates(fn, jobs, threads):
    jobs = list(jobs)
    if threads in (None, 0):
        threads = 1
    if threads == 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def rows_to_csv(rows, fields):
    """Render result rows as CSV text with a fixed column order."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(row.get(k)) for k in fields})
    return buf.getvalue()


def _format_cell(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".10g")
    return value
