"""Datasets, covariance, partial correlations, and conditional-independence tests.

Two interchangeable test engines implement the same contract: a Gaussian
sample test (Fisher z on partial correlations) and a population
d-separation oracle.  Engines are deterministic, memoize verdicts, and
keep an exact count of logical queries (memoized repeats still count).
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpocon
from scipy.stats import norm

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    SingularityError,
)

__all__ = [
    "Dataset",
    "CovMatrix",
    "CiVerdict",
    "CiEngine",
    "OracleEngine",
    "GaussianEngine",
    "ThresholdEngine",
    "RecordingEngine",
    "sample_covariance",
    "partial_correlation",
    "block_partial_correlations",
    "fisher_z_test",
    "oracle_engine",
    "gaussian_engine",
]

RCOND_MIN = 1e-12  # reciprocal condition number below this raises SingularityError


class Dataset:
    """An n x m observation matrix with per-column node labels."""

    def __init__(self, data, labels=None):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be a 2-d array")
        n, m = data.shape
        if m < 2:
            raise ValueError("need at least two columns")
        if n < 1:
            raise ValueError("need at least one observation")
        if not np.all(np.isfinite(data)):
            raise ValueError("data contains non-finite entries")
        self.data = data
        self.data.setflags(write=False)
        if labels is None:
            labels = [f"V{i}" for i in range(m)]
        if len(labels) != m:
            raise ValueError("labels must have one entry per column")
        self.labels = tuple(str(x) for x in labels)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]

    @classmethod
    def from_csv(cls, source):
        """Read a dataset from CSV text, a path, or a file object.

        The header row carries node labels.  A tab-separated file is
        autodetected by sniffing the header line.
        """
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) < 2:
            raise ValueError("CSV must contain a header and at least one row")
        header = lines[0]
        delim = "\t" if header.count("\t") > header.count(",") else ","
        labels = [x.strip() for x in header.split(delim)]
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=delim, ndmin=2)
        return cls(data, labels)

    def to_csv(self):
        """Render as CSV text with the header row of labels."""
        buf = io.StringIO()
        buf.write(",".join(self.labels) + "\n")
        np.savetxt(buf, self.data, delimiter=",", fmt="%.17g")
        return buf.getvalue()


class CovMatrix:
    """Symmetric covariance matrix with provenance (sample size or population)."""

    def __init__(self, values, n=None, source="sample"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(np.abs(values).max(), 1.0)
        if np.abs(values - values.T).max() > 1e-12 * scale:
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(values) <= 0):
            raise DegenerateDataError("covariance has a non-positive diagonal entry")
        self.values = 0.5 * (values + values.T)
        self.values.setflags(write=False)
        self.source = source
        self.n = None if n is None else int(n)

    @property
    def m(self):
        return self.values.shape[0]


def sample_covariance(dataset):
    """Centered empirical covariance with divisor n.

    Raises
    ------
    InsufficientDataError
        If fewer than two observations are available.
    DegenerateDataError
        If some column is constant.
    """
    if dataset.n < 2:
        raise InsufficientDataError("sample covariance needs n >= 2")
    x = dataset.data - dataset.data.mean(axis=0)
    cov = (x.T @ x) / dataset.n
    variances = np.diag(cov)
    if np.any(variances <= 0):
        bad = [dataset.labels[i] for i in np.nonzero(variances <= 0)[0]]
        raise DegenerateDataError(f"constant column(s): {bad}")
    return CovMatrix(cov, n=dataset.n, source="sample")


def _factor_spd(block, context):
    """Cholesky-factor a conditioning block, guarding its conditioning.

    Raises :class:`SingularityError` when the block is not positive
    definite or its reciprocal condition number (LAPACK 1-norm estimate)
    falls below ``RCOND_MIN``.
    """
    try:
        factor = cho_factor(block, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularityError(context=context) from None
    anorm = float(np.abs(block).sum(axis=0).max())
    rcond, info = dpocon(factor[0], anorm, uplo=b"L")
    if info != 0 or rcond < RCOND_MIN:
        raise SingularityError(context=context)
    return factor


def partial_correlation(cov, i, j, s):
    """Partial correlation rho(i, j | s) from a covariance matrix.

    Computed from the Schur complement on the ``s + {i, j}`` submatrix:
    the conditional covariance ``Sij - Ssi' Sss^-1 Ssj`` normalized by the
    conditional standard deviations.  Equals ``-Omega_ij /
    sqrt(Omega_ii Omega_jj)`` on the precision matrix of the submatrix.

    Raises
    ------
    SingularityError
        If the conditioning block is numerically singular (reciprocal
        condition number below 1e-12).
    """
    s = sorted(set(int(v) for v in s))
    i, j = int(i), int(j)
    if i == j or i in s or j in s:
        raise ValueError("i, j and s must be disjoint")
    i, j = min(i, j), max(i, j)  # the value is symmetric; make it exactly so
    sigma = cov.values
    if not s:
        d = sigma[i, j]
        vii = sigma[i, i]
        vjj = sigma[j, j]
    else:
        sss = sigma[np.ix_(s, s)]
        factor = _factor_spd(sss, context=(i, j, tuple(s)))
        rhs = sigma[np.ix_(s, [i, j])]
        solved = cho_solve(factor, rhs, check_finite=False)
        row_i = sigma[i, s]
        row_j = sigma[j, s]
        d = float(sigma[i, j] - row_i @ solved[:, 1])
        vii = float(sigma[i, i] - row_i @ solved[:, 0])
        vjj = float(sigma[j, j] - row_j @ solved[:, 1])
    if vii <= 0 or vjj <= 0:
        raise SingularityError(
            context=(i, j, tuple(s)),
            message="non-positive conditional variance",
        )
    rho = d / np.sqrt(vii * vjj)
    return float(np.clip(rho, -1.0, 1.0))


def block_partial_correlations(cov, j, pool):
    """rho(k, j | pool - {k}) for every k in ``pool``, via one factorization.

    The partial correlation of k and j given the rest of the block equals
    ``-Omega_kj / sqrt(Omega_kk Omega_jj)`` on the precision matrix of the
    ``pool + [j]`` block, so a single inversion serves all k.  Verdicts
    agree exactly with per-pair :func:`partial_correlation` calls.
    """
    pool = [int(v) for v in pool]
    if j in pool:
        raise ValueError("pool must not contain j")
    if not pool:
        return np.zeros(0)
    idx = pool + [int(j)]
    block = cov.values[np.ix_(idx, idx)]
    factor = _factor_spd(block, context=(j, "pool", tuple(pool)))
    omega = cho_solve(factor, np.eye(len(idx)), check_finite=False)
    diag = np.diag(omega)
    if np.any(diag <= 0):
        raise SingularityError(context=(j, "pool", tuple(pool)))
    rhos = -omega[:-1, -1] / np.sqrt(diag[:-1] * diag[-1])
    return np.clip(rhos, -1.0, 1.0)


@dataclass(frozen=True)
class CiVerdict:
    """Outcome of one conditional-independence query."""

    independent: bool
    statistic: float
    p_value: float | None = None


def fisher_z_test(cov, n, i, j, s, alpha):
    """Fisher z test of zero partial correlation.

    ``z = sqrt(n - |s| - 3) * atanh(rho)``; the verdict is independent iff
    ``|z| <= Phi^-1(1 - alpha/2)``.  The p-value is two-sided.

    Raises
    ------
    InsufficientDataError
        If the effective degrees of freedom ``n - |s| - 3`` are not positive.
    """
    s = sorted(set(int(v) for v in s))
    dof = n - len(s) - 3
    if dof <= 0:
        raise InsufficientDataError(
            f"fisher z needs n - |s| - 3 > 0 (n={n}, |s|={len(s)})"
        )
    rho = partial_correlation(cov, i, j, s)
    if abs(rho) >= 1.0:
        return CiVerdict(independent=False, statistic=np.inf if rho > 0 else -np.inf, p_value=0.0)
    z = np.sqrt(dof) * np.arctanh(rho)
    p = 2.0 * norm.sf(abs(z))
    threshold = norm.ppf(1.0 - alpha / 2.0)
    return CiVerdict(independent=bool(abs(z) <= threshold), statistic=float(z), p_value=float(p))


class _Counter:
    """Monotone call counter, exact under concurrent access."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def increment(self):
        with self._lock:
            self._count += 1
            return self._count

    @property
    def value(self):
        with self._lock:
            return self._count


class CiEngine:
    """Contract for pluggable conditional-independence tests.

    Subclasses implement ``_decide(i, j, s)``.  ``query`` normalizes
    arguments, memoizes verdicts on ``(min(i,j), max(i,j), sorted(s))``,
    and increments the call counter exactly once per query, including
    memoized repeats: the counter measures logical tests performed by the
    algorithms driving the engine.  Engines are safe to share across
    threads.
    """

    def __init__(self):
        self._counter = _Counter()
        self._memo = {}
        self._memo_lock = threading.Lock()

    @property
    def n_queries(self):
        return self._counter.value

    def query(self, i, j, s=()):
        i, j = int(i), int(j)
        s = frozenset(int(v) for v in s)
        if i == j or i in s or j in s:
            raise ValueError("i, j and s must be disjoint")
        self._counter.increment()
        key = (min(i, j), max(i, j), s)
        with self._memo_lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        verdict = self._decide(key[0], key[1], s)
        with self._memo_lock:
            self._memo.setdefault(key, verdict)
        return verdict

    def _decide(self, i, j, s):
        raise NotImplementedError


class OracleEngine(CiEngine):
    """Population oracle: independent iff d-separated in the given DAG."""

    def __init__(self, dag):
        super().__init__()
        self.dag = dag

    def _decide(self, i, j, s):
        dsep = self.dag.is_dsep(i, j, s)
        return CiVerdict(independent=dsep, statistic=0.0 if dsep else 1.0)


class GaussianEngine(CiEngine):
    """Fisher z test over a (memoized) covariance matrix.

    Accepts a :class:`Dataset` (covariance computed lazily on first
    query, so degenerate data surfaces per query) or a ready
    :class:`CovMatrix` with a sample size.
    """

    def __init__(self, source, alpha=0.05, n=None):
        super().__init__()
        self.alpha = float(alpha)
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        self._dataset = None
        self._cov = None
        if isinstance(source, Dataset):
            if source.n < 4:
                raise InsufficientDataError("gaussian engine needs n >= 4")
            self._dataset = source
            self._n = source.n
        elif isinstance(source, CovMatrix):
            self._cov = source
            self._n = n if n is not None else source.n
            if self._n is None:
                raise ValueError("a CovMatrix source needs a sample size n")
        else:
            raise TypeError("source must be a Dataset or CovMatrix")
        self._cov_lock = threading.Lock()

    @property
    def cov(self):
        if self._cov is None:
            with self._cov_lock:
                if self._cov is None:
                    self._cov = sample_covariance(self._dataset)
        return self._cov

    def _decide(self, i, j, s):
        return fisher_z_test(self.cov, self._n, i, j, s, self.alpha)


class ThresholdEngine(CiEngine):
    """Absolute partial-correlation threshold test, for population studies.

    Independent iff ``|rho(i, j | s)| <= threshold``.
    """

    def __init__(self, cov, threshold):
        super().__init__()
        self.cov = cov
        self.threshold = float(threshold)
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    def _decide(self, i, j, s):
        rho = partial_correlation(self.cov, i, j, s)
        return CiVerdict(independent=bool(abs(rho) <= self.threshold), statistic=rho)


class RecordingEngine(CiEngine):
    """Wrapper that records every query issued to an inner engine.

    Records ``(i, j, s, phase)`` tuples in call order; ``phase`` is a
    caller-controlled tag (e.g. "screen", "search", "orient").
    """

    def __init__(self, inner):
        super().__init__()
        self.inner = inner
        self.records = []
        self.phase = "search"
        self._records_lock = threading.Lock()

    def query(self, i, j, s=()):
        i, j = int(i), int(j)
        s = frozenset(int(v) for v in s)
        self._counter.increment()
        with self._records_lock:
            self.records.append((min(i, j), max(i, j), s, self.phase))
        return self.inner.query(i, j, s)

    def tuples(self, phases=None):
        """Recorded (i, j, s) tuples, optionally filtered by phase tags."""
        if phases is None:
            return [(i, j, s) for i, j, s, _ in self.records]
        phases = set(phases)
        return [(i, j, s) for i, j, s, ph in self.records if ph in phases]


def oracle_engine(dag):
    """d-separation oracle engine for ``dag``."""
    return OracleEngine(dag)


def gaussian_engine(dataset, alpha=0.05):
    """Fisher z engine over the sample covariance of ``dataset``."""
    return GaussianEngine(dataset, alpha=alpha)
