"""Statistical kernels: entropy, spread, bootstrap, rank correlation,
two-sample KS, 2-d density, and sector assignment.

Everything here is deterministic; the bootstrap takes an explicit seed
and records the generator it used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats as sps

from .errors import (
    DegeneratePoints,
    EmptyList,
    EmptySample,
    EmptyVector,
    GroupTooLarge,
    LengthMismatch,
    TooFewPoints,
    ZeroVariance,
)

RNG_ALGORITHM = "numpy-pcg64"

# Keep bootstrap scratch arrays around this many float64 cells per chunk.
_CHUNK_CELLS = 20_000_000


def normalized_class_entropy(labels) -> float:
    """Shannon entropy of a class vector, normalized to [0, 1].

    ``labels`` holds one class label per distinct company mentioned in a
    tweet (X = len(labels)). The normalizer is the maximum entropy for X
    companies, log2(X), so the value is 0 iff every company shares one
    class and 1 iff all classes are distinct. A single company has no
    mixing to measure: X = 1 returns 0 by definition.
    """
    labels = list(labels)
    if not labels:
        raise EmptyVector("entropy of an empty class vector")
    x = len(labels)
    if x == 1:
        return 0.0
    counts: dict[object, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    p = np.array(list(counts.values()), dtype=np.float64) / x
    h = float(-(p * np.log2(p)).sum())
    h_norm = h / float(np.log2(x))
    return min(1.0, max(0.0, h_norm))


@dataclass(frozen=True)
class KSResult:
    d: float
    p_value: float
    n_a: int
    n_b: int


def ks_two_sample(a, b) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the supremum of |F_a - F_b| over the pooled support; the
    p-value is the asymptotic Kolmogorov distribution evaluated with the
    effective size n_a * n_b / (n_a + n_b).
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptySample("ks_two_sample needs non-empty samples")
    pooled = np.concatenate([a, b])
    f_a = np.searchsorted(a, pooled, side="right") / a.size
    f_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.abs(f_a - f_b).max())
    n_eff = a.size * b.size / (a.size + b.size)
    p = float(special.kolmogorov(np.sqrt(n_eff) * d))
    return KSResult(d=d, p_value=min(1.0, max(0.0, p)), n_a=int(a.size), n_b=int(b.size))


def cap_std(caps) -> float:
    """Population standard deviation of a capitalization list."""
    caps = np.asarray(caps, dtype=np.float64)
    if caps.size == 0:
        raise EmptyList("cap_std of an empty list")
    return float(caps.std())


@dataclass(frozen=True)
class BootstrapResult:
    """Mean spread of random same-size company groups.

    ``mean_std`` averages the population std of capitalization over
    ``samples`` groups of ``group_size`` companies drawn uniformly
    without replacement (within each group). ``std_of_stds`` is the
    spread of those per-group values, for standard-error bands.
    """

    group_size: int
    samples: int
    seed: object
    mean_std: float
    std_of_stds: float
    rng: str = RNG_ALGORITHM


def bootstrap_cap_std(caps, group_size: int, *, samples: int = 10_000, seed) -> BootstrapResult:
    """Bootstrap the expected capitalization spread of random groups.

    Group members are distinct (drawn without replacement); groups are
    independent. The draw uses the x-smallest-random-keys trick so the
    whole run vectorizes, chunked to bound memory on large catalogs.
    """
    caps = np.asarray(caps, dtype=np.float64)
    n = caps.size
    if group_size > n:
        raise GroupTooLarge(f"group_size {group_size} exceeds catalog size {n}")
    if group_size < 2:
        raise ValueError("group_size must be at least 2")
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    rows_per_chunk = max(1, _CHUNK_CELLS // n)
    stds = np.empty(samples, dtype=np.float64)
    done = 0
    while done < samples:
        rows = min(rows_per_chunk, samples - done)
        keys = rng.random((rows, n))
        picks = np.argpartition(keys, group_size - 1, axis=1)[:, :group_size]
        stds[done : done + rows] = caps[picks].std(axis=1)
        done += rows
    return BootstrapResult(
        group_size=int(group_size),
        samples=int(samples),
        seed=seed,
        mean_std=float(stds.mean()),
        std_of_stds=float(stds.std()),
    )


def bootstrap_cap_spread_curve(
    caps, *, x_values=range(2, 23), samples: int = 10_000, seed
) -> dict[int, BootstrapResult]:
    """bootstrap_cap_std for each group size in ``x_values``.

    Each x gets its own child seed from SeedSequence(seed), so any
    single point of the curve can be reproduced on its own.
    """
    xs = [int(x) for x in x_values]
    children = np.random.SeedSequence(seed).spawn(len(xs))
    out: dict[int, BootstrapResult] = {}
    for x, child in zip(xs, children):
        result = bootstrap_cap_std(caps, x, samples=samples, seed=child)
        # Record the parent seed; the child is derived from (seed, position).
        out[x] = BootstrapResult(
            group_size=result.group_size,
            samples=result.samples,
            seed=seed,
            mean_std=result.mean_std,
            std_of_stds=result.std_of_stds,
        )
    return out


@dataclass(frozen=True)
class RankCorrelationResult:
    value: float
    n: int
    method: str


def _paired(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise LengthMismatch(f"paired vectors, got shapes {xs.shape} and {ys.shape}")
    if xs.size < 2:
        raise LengthMismatch("rank correlation needs at least two pairs")
    return xs, ys


def spearman_rho(xs, ys) -> RankCorrelationResult:
    """Spearman rho: Pearson correlation of mid-ranks (ties averaged)."""
    xs, ys = _paired(xs, ys)
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ZeroVariance("spearman_rho undefined for a constant input")
    rx = sps.rankdata(xs)
    ry = sps.rankdata(ys)
    value = float(np.corrcoef(rx, ry)[0, 1])
    return RankCorrelationResult(
        value=min(1.0, max(-1.0, value)), n=int(xs.size), method="spearman"
    )


def kendall_tau(xs, ys) -> RankCorrelationResult:
    """Kendall tau-b, tie-corrected, equal to a brute-force pair scan."""
    xs, ys = _paired(xs, ys)
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ZeroVariance("kendall_tau undefined for a constant input")
    value = float(sps.kendalltau(xs, ys, variant="b").statistic)
    return RankCorrelationResult(
        value=min(1.0, max(-1.0, value)), n=int(xs.size), method="kendall"
    )


@dataclass(frozen=True)
class KDE2DResult:
    """Gaussian product-kernel density on a regular grid.

    ``density[i, j]`` is the estimate at (x_grid[i], y_grid[j]); the
    Riemann sum over the grid is ~1 because the box pads each side by
    three bandwidths.
    """

    x_grid: np.ndarray
    y_grid: np.ndarray
    density: np.ndarray
    bandwidth: tuple[float, float]
    n: int


def kde2d(xs, ys, *, grid_size: int = 100) -> KDE2DResult:
    """2-d Gaussian KDE with per-axis Scott's-rule bandwidths.

    Scott's factor for two dimensions is n**(-1/6), applied to each
    axis's sample standard deviation.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise LengthMismatch(f"paired vectors, got shapes {xs.shape} and {ys.shape}")
    n = xs.size
    if n < 3:
        raise TooFewPoints(f"kde2d needs >= 3 points, got {n}")
    sx = float(xs.std(ddof=1))
    sy = float(ys.std(ddof=1))
    if sx == 0.0 or sy == 0.0:
        raise DegeneratePoints("kde2d needs spread on both axes")
    factor = n ** (-1.0 / 6.0)
    hx = sx * factor
    hy = sy * factor
    x_grid = np.linspace(xs.min() - 3 * hx, xs.max() + 3 * hx, grid_size)
    y_grid = np.linspace(ys.min() - 3 * hy, ys.max() + 3 * hy, grid_size)
    ex = np.exp(-0.5 * ((x_grid[:, None] - xs[None, :]) / hx) ** 2)
    ey = np.exp(-0.5 * ((y_grid[:, None] - ys[None, :]) / hy) ** 2)
    density = ex @ ey.T / (n * 2.0 * np.pi * hx * hy)
    return KDE2DResult(
        x_grid=x_grid, y_grid=y_grid, density=density, bandwidth=(hx, hy), n=int(n)
    )


SECTORS = ("A", "B", "C", "D")


def sector_assign(financial: float, social: float, x_split: float, y_split: float) -> str:
    """Quadrant of the social-vs-financial map a point falls in.

    A: high financial, high social. B: high financial, low social.
    C: low financial, low social. D: low financial, high social.
    Points exactly on a boundary go to the high side.
    """
    fin_high = financial >= x_split
    soc_high = social >= y_split
    if fin_high and soc_high:
        return "A"
    if fin_high:
        return "B"
    if soc_high:
        return "D"
    return "C"
