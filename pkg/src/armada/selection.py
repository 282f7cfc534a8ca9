"""Feature statistics, Fréchet distance, and similarity-band selection.

Each image contributes a small matrix of feature vectors; a Gaussian summary
(mean, covariance) is fit per image and the squared Fréchet distance between
two summaries scores how far an edit drifted. Candidates are kept when their
distance falls inside an absolute or batch-quantile band: close enough to
stay faithful, far enough to add signal.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyBatch,
    InvalidBand,
    NonFiniteInput,
    NumericalFailure,
    TooFewSamples,
)

# covariance regularizer added when the smallest eigenvalue sits below the floor
EPSILON = 1e-6
_EIG_FLOOR = 1e-10

HISTOGRAM_BINS = 32


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray


def gaussian_stats(features) -> GaussianStats:
    """Fit (mean, covariance) over the rows of an N x D feature matrix.

    Uses the biased 1/N covariance. Near-singular covariances are
    regularized by adding EPSILON * I. A single row is allowed (point mode):
    the covariance is exactly zero and never regularized, so the distance
    degenerates to the squared mean gap.
    """
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2:
        raise TooFewSamples(f"features must be a 2-D matrix, got shape {matrix.shape}")
    n, dim = matrix.shape
    if n < 1 or dim < 1:
        raise TooFewSamples(f"features must be non-empty, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise NonFiniteInput("features contain NaN or infinite entries")
    mean = matrix.mean(axis=0)
    if n == 1:
        return GaussianStats(mean=mean, cov=np.zeros((dim, dim)))
    centered = matrix - mean
    cov = centered.T @ centered / n
    cov = (cov + cov.T) / 2.0
    if np.linalg.eigvalsh(cov).min() < _EIG_FLOOR:
        cov = cov + EPSILON * np.eye(dim)
    return GaussianStats(mean=mean, cov=cov)


def _sym_sqrt(matrix: np.ndarray) -> np.ndarray:
    """PSD square root via eigendecomposition, clamping eigenvalues at 0."""
    try:
        values, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Fréchet distance between two Gaussian summaries.

    d2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2),
    with the cross term computed through symmetric eigendecompositions only.
    Tiny negative results from roundoff clamp to zero.
    """
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise DimensionMismatch(
            f"stats of dimension {a.mean.shape[0]} vs {b.mean.shape[0]}"
        )
    for stats in (a, b):
        if not (np.isfinite(stats.mean).all() and np.isfinite(stats.cov).all()):
            raise NonFiniteInput("Gaussian stats contain NaN or infinite entries")
    diff = a.mean - b.mean
    mean_term = float(diff @ diff)
    sqrt_a = _sym_sqrt((a.cov + a.cov.T) / 2.0)
    inner = sqrt_a @ b.cov @ sqrt_a
    try:
        cross = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    cross = np.clip(cross, 0.0, None)
    trace_term = float(np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sqrt(cross).sum())
    return max(0.0, mean_term + trace_term)


def pair_distance(original, edited, embedder) -> float:
    """Fréchet distance between the feature summaries of two images."""
    stats_a = gaussian_stats(embedder.embed(original))
    stats_b = gaussian_stats(embedder.embed(edited))
    return frechet_distance(stats_a, stats_b)


# ---------------------------------------------------------------------------
# band selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AbsoluteBand:
    lo: float
    hi: float


@dataclass(frozen=True)
class QuantileBand:
    qlo: float
    qhi: float


DEFAULT_POLICY = QuantileBand(0.25, 0.75)


def parse_policy(spec: str) -> AbsoluteBand | QuantileBand:
    """Parse a policy spec: quantile:<qlo>:<qhi> or absolute:<lo>:<hi>."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise InvalidBand(f"policy must look like kind:<lo>:<hi>, got {spec!r}")
    kind, lo_text, hi_text = parts
    try:
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        raise InvalidBand(f"non-numeric band edges in {spec!r}") from None
    if kind == "quantile":
        if not (0.0 <= lo <= hi <= 1.0):
            raise InvalidBand(f"quantile band must satisfy 0 <= qlo <= qhi <= 1, got {spec!r}")
        return QuantileBand(lo, hi)
    if kind == "absolute":
        if lo > hi:
            raise InvalidBand(f"absolute band must satisfy lo <= hi, got {spec!r}")
        return AbsoluteBand(lo, hi)
    raise InvalidBand(f"unknown policy kind {kind!r}")


def nearest_rank_quantile(ordered: list[float], q: float) -> float:
    """Nearest-rank empirical quantile over an ascending list."""
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


@dataclass
class SelectionEntry:
    distance: float
    accepted: bool


@dataclass
class SelectionReport:
    entries: list[SelectionEntry]
    lo: float
    hi: float
    histogram_counts: list[int]
    histogram_edges: list[float]

    @property
    def accepted_count(self) -> int:
        return sum(1 for e in self.entries if e.accepted)


def select_candidates(
    distances: list[float], policy: AbsoluteBand | QuantileBand
) -> SelectionReport:
    """Apply a band policy to a batch of distances.

    Quantile bands cut at nearest-rank quantiles with an exclusive lower
    edge (strictly above the low cut, at or below the high cut), so the two
    middle quartiles of 1..8 come out as exactly {3,4,5,6}. The reported lo
    is nudged just above the cut, keeping accepted equivalent to
    lo <= d <= hi.
    """
    if not distances:
        raise EmptyBatch("no distances to select over")
    if any(not math.isfinite(d) for d in distances):
        raise NonFiniteInput("distances must be finite")

    if isinstance(policy, AbsoluteBand):
        if policy.lo > policy.hi:
            raise InvalidBand(f"lo {policy.lo} exceeds hi {policy.hi}")
        lo, hi = policy.lo, policy.hi
    else:
        if not (0.0 <= policy.qlo <= policy.qhi <= 1.0):
            raise InvalidBand(f"bad quantile band ({policy.qlo}, {policy.qhi})")
        ordered = sorted(distances)
        hi = nearest_rank_quantile(ordered, policy.qhi)
        if policy.qlo <= 0.0:
            lo = -math.inf
        else:
            lo = math.nextafter(nearest_rank_quantile(ordered, policy.qlo), math.inf)

    entries = [SelectionEntry(distance=d, accepted=lo <= d <= hi) for d in distances]
    counts, edges = np.histogram(distances, bins=HISTOGRAM_BINS)
    return SelectionReport(
        entries=entries,
        lo=lo,
        hi=hi,
        histogram_counts=[int(c) for c in counts],
        histogram_edges=[float(e) for e in edges],
    )
