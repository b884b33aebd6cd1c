"""Per-node screening: candidate parent sets and conditional Markov blankets.

For each target node j, screening estimates two sets using one of three
backends (exact partial correlation, sure-independence screening, lasso):

* ``s0``: nodes ordered strictly before j that remain associated with j
  after adjusting for the rest of the earlier nodes.
* ``s1``: members of ``s0`` plus j's unordered peers that remain
  associated with j after adjusting for all of ``s0`` and the peers.

The derived sets drive the searching loop: ``cross = s0 & s1`` holds the
candidate incoming cross edges and ``cmb = s1 - s0`` is the conditional
Markov blanket of j within its own layer.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InsufficientDataError, ScreeningError, SelectionError
from .stats import (
    CiEngine,
    CovMatrix,
    Dataset,
    GaussianEngine,
    ThresholdEngine,
    block_partial_correlations,
    sample_covariance,
)

__all__ = [
    "ScreenEntry",
    "ScreenSets",
    "LassoFit",
    "screen_node_engine",
    "screen_pcor",
    "screen_pcor_block",
    "screen_sis",
    "screen_lasso",
    "screen_all",
    "lasso_fit",
    "lasso_lambda_max",
    "default_lambda_grid",
    "select_lambda_aic",
    "inflate_screen_sets",
]

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class ScreenEntry:
    """Screening output for one target node."""

    node: int
    s0: frozenset
    s1: frozenset
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "s0", frozenset(int(v) for v in self.s0))
        object.__setattr__(self, "s1", frozenset(int(v) for v in self.s1))
        if self.node in self.s0 or self.node in self.s1:
            raise ValueError("a node cannot screen itself")

    @property
    def cross(self):
        """Candidate cross-edge parents: s0 & s1."""
        return self.s0 & self.s1

    @property
    def cmb(self):
        """Conditional Markov blanket among unordered peers: s1 - s0."""
        return self.s1 - self.s0


class ScreenSets:
    """Screening entries for a collection of target nodes."""

    def __init__(self, entries, n_nodes, labels=None):
        self.n_nodes = int(n_nodes)
        self.entries = {int(e.node): e for e in entries}
        if labels is None:
            labels = [f"V{i}" for i in range(self.n_nodes)]
        self.labels = tuple(str(x) for x in labels)

    def __getitem__(self, j):
        return self.entries[j]

    def __contains__(self, j):
        return j in self.entries

    def nodes(self):
        return sorted(self.entries)

    def validate(self, ordering):
        """Check set-membership invariants against an ordering."""
        for j, e in self.entries.items():
            before = ordering.before_set(j)
            peers = ordering.peer_set(j)
            if not e.s0 <= before:
                raise ValueError(f"s0 of node {j} contains non-earlier nodes")
            if not e.s1 <= (e.s0 | peers):
                raise ValueError(f"s1 of node {j} leaves its eligible pool")

    def cross_candidates(self):
        """Ordered candidate cross edges (k, j) with k in cross(j)."""
        return sorted((k, j) for j, e in self.entries.items() for k in e.cross)

    def within_candidates(self):
        """Ordered candidate within-layer pairs, each direction listed.

        A pair enters when either endpoint screens the other into its
        conditional Markov blanket, and is then tested from both sides:
        the separating set of a nonadjacent pair may exist in only one
        endpoint's restricted search family (the one that is not an
        ancestor of the other), so one-sided testing can strand spurious
        pairs.
        """
        pairs = set()
        for j, e in self.entries.items():
            for k in e.cmb:
                pairs.add((k, j))
                if k in self.entries:
                    pairs.add((j, k))
        return sorted(pairs)

    def to_json(self):
        doc = {
            self.labels[j]: {
                "s0": sorted(self.labels[v] for v in e.s0),
                "s1": sorted(self.labels[v] for v in e.s1),
            }
            for j, e in self.entries.items()
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text, labels):
        index = {lab: i for i, lab in enumerate(labels)}
        doc = json.loads(text)
        entries = []
        for lab, sets in doc.items():
            j = index[lab]
            entries.append(
                ScreenEntry(
                    j,
                    {index[x] for x in sets["s0"]},
                    {index[x] for x in sets["s1"]},
                )
            )
        return cls(entries, n_nodes=len(labels), labels=labels)


def _success_warnings(j, s0, s1, n):
    """Warn when the screening-success size condition |s0 & s1| <= n fails."""
    if n is not None and len(s0 & s1) > n:
        msg = f"screening for node {j}: |s0 & s1| = {len(s0 & s1)} exceeds n = {n}"
        warnings.warn(msg)
        return (msg,)
    return ()


def screen_node_engine(engine, ordering, j, n=None):
    """Screen one node by direct conditional-independence queries.

    ``s0 = {k before j : k dep j | before(j) - k}`` and
    ``s1 = {z in s0 + peers(j) : z dep j | (s0 + peers(j)) - z}``.
    """
    before = sorted(ordering.before_set(j))
    s0 = {
        k
        for k in before
        if not engine.query(k, j, [v for v in before if v != k]).independent
    }
    peers = sorted(ordering.peer_set(j))
    pool1 = sorted(s0) + peers
    base = set(pool1)
    s1 = {
        z
        for z in pool1
        if not engine.query(z, j, base - {z}).independent
    }
    return ScreenEntry(j, s0, s1, warnings=_success_warnings(j, frozenset(s0), frozenset(s1), n))


def _pcor_engine(data, threshold=None, alpha=0.5):
    if isinstance(data, CovMatrix):
        if threshold is not None:
            return ThresholdEngine(data, threshold), None
        return GaussianEngine(data, alpha=alpha), data.n
    if isinstance(data, Dataset):
        if threshold is not None:
            return ThresholdEngine(sample_covariance(data), threshold), data.n
        return GaussianEngine(data, alpha=alpha), data.n
    raise TypeError("data must be a Dataset or CovMatrix")


def screen_pcor_block(data, ordering, j, threshold=None, alpha=0.5):
    """Partial-correlation screening via one precision matrix per stage.

    Returns ``(entry, n_tests)``.  Verdicts coincide with per-pair engine
    queries (the conditioning set of each membership test is exactly the
    rest of its block), so this is a batched fast path, with the logical
    test count reported for diagnostics.
    """
    cov = sample_covariance(data) if isinstance(data, Dataset) else data
    n = data.n
    if threshold is None and n is None:
        raise ValueError("Fisher-z screening needs a sample size; population input wants threshold mode")

    def dependent(rhos, pool):
        if threshold is not None:
            return np.abs(rhos) > threshold
        dof = n - (len(pool) - 1) - 3
        if dof <= 0:
            raise InsufficientDataError(
                f"fisher z needs n - |s| - 3 > 0 (n={n}, |s|={len(pool) - 1})"
            )
        z = np.sqrt(dof) * np.arctanh(np.clip(rhos, -1 + 1e-15, 1 - 1e-15))
        return np.abs(z) > norm.ppf(1.0 - alpha / 2.0)

    tests = 0
    before = sorted(ordering.before_set(j))
    s0 = set()
    if before:
        rhos = block_partial_correlations(cov, j, before)
        keep = dependent(rhos, before)
        s0 = {k for k, flag in zip(before, keep) if flag}
        tests += len(before)
    pool1 = sorted(s0) + sorted(ordering.peer_set(j))
    s1 = set()
    if pool1:
        rhos = block_partial_correlations(cov, j, pool1)
        keep = dependent(rhos, pool1)
        s1 = {z for z, flag in zip(pool1, keep) if flag}
        tests += len(pool1)
    entry = ScreenEntry(
        j, s0, s1, warnings=_success_warnings(j, frozenset(s0), frozenset(s1), n)
    )
    return entry, tests


def screen_pcor(data, ordering, j, threshold=None, alpha=0.5, engine=None):
    """Partial-correlation screening for node ``j``.

    With ``threshold`` set, a node is kept when its absolute partial
    correlation exceeds the threshold (population mode).  Otherwise the
    Fisher z test at the deliberately liberal ``alpha`` (default 0.5, to
    avoid false negatives) decides.
    """
    if engine is None:
        engine, n = _pcor_engine(data, threshold=threshold, alpha=alpha)
    else:
        n = data.n if isinstance(data, (Dataset, CovMatrix)) else None
    return screen_node_engine(engine, ordering, j, n=n)


def _standardized(data):
    x = data.data - data.data.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return x / sd


def _sis_select(scores, candidates, n, t):
    """Indices of the ceil(t*n) largest scores; ties resolved by node index."""
    m = int(np.ceil(t * n))
    order = sorted(range(len(candidates)), key=lambda idx: (-scores[idx], candidates[idx]))
    return {candidates[idx] for idx in order[:m]}


def screen_sis(data, ordering, j, t=0.5, mode="top", pvalue_cutoff=0.5):
    """Sure-independence screening for node ``j``.

    ``mode="top"`` keeps the ceil(t*n) candidates with the largest
    marginal inner products |x_k' y_j| over standardized columns (all of
    them when fewer are available).  ``mode="pvalue"`` instead keeps
    candidates whose marginal Fisher-z correlation p-value falls below
    ``pvalue_cutoff``.
    """
    if mode == "top" and not 0 < t < 1:
        raise ValueError("t must be in (0, 1)")
    if mode not in ("top", "pvalue"):
        raise ValueError("mode must be 'top' or 'pvalue'")
    x = _standardized(data)
    n = data.n
    y = x[:, j]

    def select(candidates):
        if not candidates:
            return set()
        scores = np.abs(x[:, candidates].T @ y)
        if mode == "top":
            return _sis_select(scores, candidates, n, t)
        # marginal Fisher-z p-values on the correlations scores / n
        rho = np.clip(scores / n, 0.0, 1.0 - 1e-15)
        z = np.sqrt(n - 3) * np.arctanh(rho)
        pvals = 2.0 * norm.sf(z)
        return {k for k, p in zip(candidates, pvals) if p < pvalue_cutoff}

    before = sorted(ordering.before_set(j))
    s0 = select(before)
    pool1 = sorted(s0) + sorted(ordering.peer_set(j))
    s1 = select(pool1)
    return ScreenEntry(j, s0, s1, warnings=_success_warnings(j, frozenset(s0), frozenset(s1), n))


@dataclass(frozen=True)
class LassoFit:
    """Solution of one lasso problem."""

    coefficients: np.ndarray
    lam: float
    active_set: frozenset
    iterations: int
    converged: bool


def lasso_lambda_max(y, x):
    """Smallest penalty with an all-zero solution: max |x' y| / n."""
    n = x.shape[0]
    return float(np.max(np.abs(x.T @ y)) / n) if x.shape[1] else 0.0


def lasso_fit(y, x, lam, warm_start=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, trace=None):
    """Coordinate-descent minimizer of ||y - x b||^2 / (2n) + lam ||b||_1.

    Cyclic coordinate descent with active-set iteration: sweep the active
    set until it stabilizes, then one full sweep to confirm optimality.
    ``converged`` is False when the sweep cap is hit; the caller decides
    how to treat that.  When ``trace`` is a list, the objective value is
    appended after every sweep.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    n, p = x.shape
    beta = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    col_sq = (x**2).sum(axis=0) / n
    resid = y - x @ beta
    sweeps = 0

    def sweep(indices):
        nonlocal resid, sweeps
        sweeps += 1
        max_delta = 0.0
        for k in indices:
            if col_sq[k] == 0.0:
                continue
            old = beta[k]
            z = (x[:, k] @ resid) / n + col_sq[k] * old
            new = np.sign(z) * max(abs(z) - lam, 0.0) / col_sq[k]
            if new != old:
                beta[k] = new
                resid += x[:, k] * (old - new)
                max_delta = max(max_delta, abs(new - old))
        if trace is not None:
            trace.append(float(resid @ resid / (2 * n) + lam * np.abs(beta).sum()))
        return max_delta

    everything = range(p)
    converged = False
    while sweeps < max_sweeps:
        delta = sweep(everything)
        if delta < tol:
            converged = True
            break
        active = np.nonzero(beta)[0]
        while sweeps < max_sweeps:
            if sweep(active) < tol:
                break
    return LassoFit(
        coefficients=beta,
        lam=float(lam),
        active_set=frozenset(int(k) for k in np.nonzero(beta)[0]),
        iterations=sweeps,
        converged=converged,
    )


def default_lambda_grid(y, x, size=50, ratio=0.01):
    """Log-spaced grid from the null threshold down to ``ratio`` times it."""
    lam_max = lasso_lambda_max(y, x)
    if lam_max <= 0:
        return [0.0]
    return list(np.geomspace(lam_max, ratio * lam_max, size))


def select_lambda_aic(y, x, lambda_grid, max_sweeps=LASSO_MAX_SWEEPS):
    """Pick the grid value minimizing n log(RSS/n) + 2 |active set|.

    Fits are warm-started along the grid in decreasing order.  Fits that
    fail to converge are skipped; if none converge a
    :class:`SelectionError` is raised.
    """
    grid = list(lambda_grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    n = x.shape[0]
    order = sorted(range(len(grid)), key=lambda idx: -grid[idx])
    aic = [None] * len(grid)
    warm = None
    for idx in order:
        fit = lasso_fit(y, x, grid[idx], warm_start=warm, max_sweeps=max_sweeps)
        if fit.converged:
            warm = fit.coefficients
            rss = float(np.sum((y - x @ fit.coefficients) ** 2))
            aic[idx] = n * np.log(max(rss, 1e-300) / n) + 2 * len(fit.active_set)
    if all(a is None for a in aic):
        raise SelectionError("no lasso fit converged on the lambda grid")
    best = min((a, idx) for idx, a in enumerate(aic) if a is not None)
    return grid[best[1]]


def screen_lasso(
    data,
    ordering,
    j,
    lambda0=None,
    lambda1=None,
    standardize=True,
    aic=False,
    grid_size=50,
):
    """Lasso screening for node ``j``.

    ``s0`` is the active set of a lasso of y_j on the earlier-layer
    columns at ``lambda0``; ``s1`` the active set of a lasso on the
    ``s0`` columns plus j's unordered peers at ``lambda1``.  Default
    penalties follow the sqrt(2 log p / n) rate; ``aic=True`` instead
    selects each penalty by AIC over a log-spaced grid.  Columns are
    standardized internally by default (membership in the active set is
    what matters downstream).
    """
    n = data.n
    x = _standardized(data) if standardize else (data.data - data.data.mean(axis=0))
    y = x[:, j]
    notes = []

    def active(pool, lam, tag, default_count):
        if not pool:
            return set()
        design = x[:, pool]
        if aic:
            lam = select_lambda_aic(y, design, default_lambda_grid(y, design, size=grid_size))
        elif lam is None:
            lam = np.sqrt(2.0 * np.log(max(default_count, 2)) / n)
        fit = lasso_fit(y, design, lam)
        if not fit.converged:
            notes.append(f"lasso for node {j} ({tag}) did not converge")
        return {pool[k] for k in fit.active_set}

    before = sorted(ordering.before_set(j))
    s0 = active(before, lambda0, "s0", len(before))
    pool1 = sorted(s0) + sorted(ordering.peer_set(j))
    s1 = active(pool1, lambda1, "s1", data.m)
    notes.extend(_success_warnings(j, frozenset(s0), frozenset(s1), n))
    return ScreenEntry(j, s0, s1, warnings=tuple(notes))


def screen_all(
    data,
    ordering,
    backend="pcor",
    params=None,
    targets=None,
    keep_going=False,
    engine=None,
):
    """Run the chosen per-node screen over every target node.

    ``targets`` defaults to all nodes (first-layer nodes get ``s0 = {}``
    and are screened only for within-layer structure).  Per-node errors
    fail fast unless ``keep_going`` is set, in which case failing nodes
    are dropped with a warning; an aggregate :class:`ScreeningError` is
    raised only when every node fails.
    """
    params = dict(params or {})
    if targets is None:
        targets = range(ordering.n_nodes)
    use_block_pcor = backend == "pcor" and engine is None
    if use_block_pcor and not isinstance(data, (Dataset, CovMatrix)):
        raise TypeError("data must be a Dataset or CovMatrix")
    n_for_check = data.n if isinstance(data, (Dataset, CovMatrix)) else None

    entries = []
    failures = []
    for j in sorted(targets):
        try:
            if use_block_pcor:
                entry, _ = screen_pcor_block(
                    data,
                    ordering,
                    j,
                    threshold=params.get("threshold"),
                    alpha=params.get("alpha", 0.5),
                )
                entries.append(entry)
            elif backend == "pcor":
                entries.append(screen_node_engine(engine, ordering, j, n=n_for_check))
            elif backend == "sis":
                entries.append(screen_sis(data, ordering, j, **params))
            elif backend == "lasso":
                entries.append(screen_lasso(data, ordering, j, **params))
            else:
                raise ValueError(f"unknown screening backend {backend!r}")
        except (ValueError, TypeError):
            raise
        except Exception as err:  # noqa: BLE001 - aggregated per contract
            if not keep_going:
                raise
            failures.append((j, err))
    if failures:
        if not entries:
            raise ScreeningError(failures)
        warnings.warn(
            f"screening dropped {len(failures)} node(s): "
            + "; ".join(f"{j}: {e}" for j, e in failures)
        )
    labels = getattr(data, "labels", None)
    return ScreenSets(entries, n_nodes=ordering.n_nodes, labels=labels)


def inflate_screen_sets(screen, ordering, rng, extra=3):
    """Inflate every s0 and s1 with up to ``extra`` random eligible nodes.

    Used to exercise superset robustness: the searching loop must return
    the same graph when screening sets are replaced by supersets.
    """
    entries = []
    for j in screen.nodes():
        e = screen[j]
        before = sorted(ordering.before_set(j) - e.s0)
        pick0 = set(rng.choice(before, size=min(extra, len(before)), replace=False)) if before else set()
        s0 = e.s0 | {int(v) for v in pick0}
        pool1 = sorted((s0 | ordering.peer_set(j)) - e.s1)
        pick1 = set(rng.choice(pool1, size=min(extra, len(pool1)), replace=False)) if pool1 else set()
        s1 = e.s1 | {int(v) for v in pick1}
        entries.append(ScreenEntry(j, s0, s1))
    return ScreenSets(entries, n_nodes=screen.n_nodes, labels=screen.labels)
