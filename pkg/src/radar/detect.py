"""Campaign detection: baselines, peak analysis, suspicion scoring, and
the report document.

A peak is suspicious when its tweets look unlike the dataset at large
in four ways at once: retweet-heavy, cashtag-stuffed, industrially
incoherent (high class entropy), and mixing companies whose market caps
are spread far wider than random groups of the same size. Each signal
becomes a clamped [0, 1] excess term; the suspicion score is their
weighted sum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .cooccur import build_graph, capitalization_assortativity
from .errors import (
    BadWeights,
    ConfigInvalid,
    DegeneratePoints,
    MissingBaseline,
    NoPeaks,
    TooFewPoints,
    ZeroVariance,
)
from .ingest import MARKETS, Dataset
from .stats import (
    RNG_ALGORITHM,
    BootstrapResult,
    KSResult,
    bootstrap_cap_spread_curve,
    kde2d,
    ks_two_sample,
    normalized_class_entropy,
    sector_assign,
    spearman_rho,
    kendall_tau,
)
from .timeseries import (
    Peak,
    build_hourly_series,
    collect_peak_tweets,
    detect_peaks,
    peak_count_curve,
)

TRBC_LEVELS = 5

TERM_NAMES = ("retweet", "cashtags", "entropy", "cap_spread")

DEFAULT_WEIGHTS = {name: 0.25 for name in TERM_NAMES}

# Saturation scales: the raw excess at which a term clamps to 1. Chosen
# so a blatant campaign saturates while ordinary chatter stays near 0.
DEFAULT_SCALES = {"retweet": 0.3, "cashtags": 3.0, "entropy": 0.25, "cap_spread": 1.0}

# A lone retweet can saturate single-tweet terms by itself, so the flag
# threshold sits above any two-term sum.
DEFAULT_THRESHOLD = 0.65


@dataclass
class DetectConfig:
    """Tunable knobs of the detection pass, all recorded in the report."""

    k: float = 10.0
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    scales: dict = field(default_factory=lambda: dict(DEFAULT_SCALES))
    threshold: float = DEFAULT_THRESHOLD
    entropy_level: int = TRBC_LEVELS
    bootstrap_samples: int = 10_000
    bootstrap_x_max: int = 22
    curve_ks: tuple = tuple(range(2, 13))
    kde_grid_size: int = 100

    def validate(self) -> None:
        if self.k <= 0:
            raise ConfigInvalid("k must be positive")
        if not 1 <= self.entropy_level <= TRBC_LEVELS:
            raise ConfigInvalid(f"entropy_level must be 1..{TRBC_LEVELS}")
        if self.bootstrap_samples < 1:
            raise ConfigInvalid("bootstrap_samples must be positive")
        if self.bootstrap_x_max < 2:
            raise ConfigInvalid("bootstrap_x_max must be >= 2")
        if not 0 <= self.threshold <= 1:
            raise ConfigInvalid("threshold must be in [0, 1]")
        check_weights(self.weights)
        if set(self.scales) != set(TERM_NAMES):
            raise ConfigInvalid(f"scales must have keys {TERM_NAMES}")
        if any(v <= 0 for v in self.scales.values()):
            raise ConfigInvalid("scales must be positive")


def check_weights(weights: dict) -> None:
    if set(weights) != set(TERM_NAMES):
        raise BadWeights(f"weights must have keys {TERM_NAMES}")
    if any(w < 0 for w in weights.values()):
        raise BadWeights("weights must be non-negative")
    if abs(sum(weights.values()) - 1.0) > 1e-9:
        raise BadWeights("weights must sum to 1")


def load_detect_config(path: str) -> DetectConfig:
    """Read a detect TOML file; unknown keys are config errors."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - version dependent
        import tomli as tomllib
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    config = DetectConfig()
    known = {
        "k",
        "threshold",
        "entropy_level",
        "bootstrap_samples",
        "bootstrap_x_max",
        "kde_grid_size",
        "weights",
        "scales",
    }
    for key, value in raw.items():
        if key not in known:
            raise ConfigInvalid(f"unknown detect config key {key!r}")
        if key in ("weights", "scales"):
            if not isinstance(value, dict):
                raise ConfigInvalid(f"{key} must be a table")
            merged = dict(getattr(config, key))
            for sub, number in value.items():
                if sub not in TERM_NAMES:
                    raise ConfigInvalid(f"unknown {key} key {key}.{sub}")
                merged[sub] = float(number)
            setattr(config, key, merged)
        else:
            setattr(config, key, type(getattr(config, key))(value))
    config.validate()
    return config


@dataclass
class Baselines:
    """Dataset-wide reference values plus per-tweet feature arrays.

    Per-tweet arrays are indexed by tweet position so peak analyses can
    slice rather than recompute: ``entropy[pos, level-1]`` (NaN when the
    tweet has no classified company), ``cap_count[pos]`` (companies with
    positive cap), ``cap_spread[pos]`` (their population std, NaN when
    fewer than 2).
    """

    retweet_fraction: float
    mean_cashtags_per_tweet: float
    entropy: np.ndarray
    cap_count: np.ndarray
    cap_spread: np.ndarray
    entropy_sorted: dict[int, np.ndarray]
    entropy_mean_by_level: dict[int, float]
    bootstrap: dict[int, BootstrapResult]
    observed_spread_by_x: dict[int, dict]
    volume_by_hour_of_day: list[float]
    seed: int
    samples: int


def compute_baselines(dataset: Dataset, config: DetectConfig, seed: int) -> Baselines:
    tweets = dataset.tweets
    n = len(tweets)
    entropy = np.full((n, TRBC_LEVELS), np.nan)
    cap_count = np.zeros(n, dtype=np.int64)
    cap_spread = np.full(n, np.nan)
    hour_of_day = np.zeros(24, dtype=np.int64)

    for pos, tweet in enumerate(tweets):
        hour_of_day[tweet.created_at.hour] += 1
        companies = dataset.resolved(tweet)
        classified = [c for c in companies if c.trbc is not None]
        if classified:
            for level in range(1, TRBC_LEVELS + 1):
                entropy[pos, level - 1] = normalized_class_entropy(
                    [c.trbc[level - 1] for c in classified]
                )
        caps = [c.capitalization for c in companies if c.capitalization > 0]
        cap_count[pos] = len(caps)
        if len(caps) >= 2:
            cap_spread[pos] = float(np.std(caps))

    entropy_sorted = {}
    entropy_mean = {}
    for level in range(1, TRBC_LEVELS + 1):
        values = entropy[:, level - 1]
        values = np.sort(values[~np.isnan(values)])
        entropy_sorted[level] = values
        entropy_mean[level] = float(values.mean()) if values.size else 0.0

    caps_catalog = dataset.catalog.capitalizations()
    x_values = [
        x for x in range(2, config.bootstrap_x_max + 1) if x <= len(caps_catalog)
    ]
    if not x_values:
        raise MissingBaseline("catalog too small for any bootstrap group size")
    bootstrap = bootstrap_cap_spread_curve(
        caps_catalog, x_values=x_values, samples=config.bootstrap_samples, seed=seed
    )

    observed: dict[int, dict] = {}
    for x in x_values:
        mask = cap_count == x
        spreads = cap_spread[mask]
        spreads = spreads[~np.isnan(spreads)]
        observed[x] = {
            "tweets": int(spreads.size),
            "mean_std": float(spreads.mean()) if spreads.size else None,
        }

    if tweets:
        lo, hi = dataset.span()
        span_hours = max(1.0, (hi - lo).total_seconds() / 3600.0)
    else:
        span_hours = 1.0
    days = span_hours / 24.0
    volume_profile = [float(c) / days for c in hour_of_day]

    retweets = sum(1 for t in tweets if t.is_retweet)
    return Baselines(
        retweet_fraction=retweets / n if n else 0.0,
        mean_cashtags_per_tweet=(
            sum(len(t.cashtags) for t in tweets) / n if n else 0.0
        ),
        entropy=entropy,
        cap_count=cap_count,
        cap_spread=cap_spread,
        entropy_sorted=entropy_sorted,
        entropy_mean_by_level=entropy_mean,
        bootstrap=bootstrap,
        observed_spread_by_x=observed,
        volume_by_hour_of_day=volume_profile,
        seed=seed,
        samples=config.bootstrap_samples,
    )


@dataclass
class PeakAnalysis:
    """Evidence gathered from one peak's tweet set."""

    peak: Peak
    positions: tuple[int, ...]
    n_tweets: int
    retweet_fraction: float
    mean_cashtags_per_tweet: float
    entropy_mean_by_level: dict[int, float | None]
    entropy_n: int
    entropy_ks: dict[int, KSResult | None]
    cap_spread_mean: float | None
    cap_spread_excess: float
    market_mix: dict[str, float]
    score: float | None = None
    terms: dict[str, float] | None = None
    flagged: bool | None = None


def analyze_peak(dataset: Dataset, baselines: Baselines, peak: Peak) -> PeakAnalysis:
    """Collect a peak's tweets and compare them with the baselines."""
    tweet_set = collect_peak_tweets(dataset, peak)
    positions = np.asarray(tweet_set.positions, dtype=np.int64)

    entropy_mean: dict[int, float | None] = {}
    entropy_ks: dict[int, KSResult | None] = {}
    entropy_n = 0
    for level in range(1, TRBC_LEVELS + 1):
        values = baselines.entropy[positions, level - 1]
        values = values[~np.isnan(values)]
        if level == 1:
            entropy_n = int(values.size)
        if values.size:
            entropy_mean[level] = float(values.mean())
            background = baselines.entropy_sorted[level]
            entropy_ks[level] = (
                ks_two_sample(values, background) if background.size else None
            )
        else:
            entropy_mean[level] = None
            entropy_ks[level] = None

    if not baselines.bootstrap:
        raise MissingBaseline("bootstrap curve is empty")
    x_max = max(baselines.bootstrap)
    spreads = baselines.cap_spread[positions]
    counts = baselines.cap_count[positions]
    usable = ~np.isnan(spreads)
    excesses = []
    for spread, x in zip(spreads[usable], counts[usable]):
        reference = baselines.bootstrap[min(int(x), x_max)].mean_std
        if reference > 0:
            excesses.append(spread / reference - 1.0)
    spread_values = spreads[usable]

    mention_markets = np.zeros(len(MARKETS), dtype=np.int64)
    market_pos = {m: i for i, m in enumerate(MARKETS)}
    for pos in tweet_set.positions:
        for company in dataset.resolved(dataset.tweets[pos]):
            mention_markets[market_pos[company.market]] += 1
    total_mentions = int(mention_markets.sum())
    market_mix = {
        market: (int(mention_markets[i]) / total_mentions if total_mentions else 0.0)
        for i, market in enumerate(MARKETS)
        if mention_markets[i]
    }

    return PeakAnalysis(
        peak=peak,
        positions=tweet_set.positions,
        n_tweets=len(tweet_set.positions),
        retweet_fraction=tweet_set.retweet_fraction,
        mean_cashtags_per_tweet=tweet_set.mean_cashtags_per_tweet,
        entropy_mean_by_level=entropy_mean,
        entropy_n=entropy_n,
        entropy_ks=entropy_ks,
        cap_spread_mean=float(spread_values.mean()) if spread_values.size else None,
        cap_spread_excess=float(np.mean(excesses)) if excesses else 0.0,
        market_mix=market_mix,
    )


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def score_peak(
    analysis: PeakAnalysis, baselines: Baselines, config: DetectConfig
) -> PeakAnalysis:
    """Fill in the suspicion score; monotone in every excess signal."""
    check_weights(config.weights)
    scales = config.scales
    level = config.entropy_level
    peak_entropy = analysis.entropy_mean_by_level.get(level)
    entropy_excess = (
        peak_entropy - baselines.entropy_mean_by_level[level]
        if peak_entropy is not None
        else 0.0
    )
    terms = {
        "retweet": _clamp01(
            (analysis.retweet_fraction - baselines.retweet_fraction)
            / scales["retweet"]
        ),
        "cashtags": _clamp01(
            (analysis.mean_cashtags_per_tweet - baselines.mean_cashtags_per_tweet)
            / scales["cashtags"]
        ),
        "entropy": _clamp01(entropy_excess / scales["entropy"]),
        "cap_spread": _clamp01(analysis.cap_spread_excess / scales["cap_spread"]),
    }
    score = sum(config.weights[name] * terms[name] for name in TERM_NAMES)
    analysis.terms = terms
    analysis.score = score
    analysis.flagged = score >= config.threshold
    return analysis


def rank_correlation_report(dataset: Dataset, peak_positions: set[int]) -> dict:
    """Per-market rank correlations of capitalization vs mention count.

    The same stock population (mentioned at least once, positive cap)
    backs both cells of a market, so "all" and "peaks" are comparable;
    the peaks cell counts mentions inside the deduplicated union of
    peak tweet sets and may be zero for a stock.
    """
    report: dict[str, dict] = {}
    for market in dataset.catalog.markets():
        tickers = sorted(
            t
            for t in dataset.index
            if dataset.catalog[t].market == market
            and dataset.catalog[t].capitalization > 0
        )
        caps = [dataset.catalog[t].capitalization for t in tickers]
        all_counts = [len(dataset.index[t]) for t in tickers]
        peak_counts = [
            sum(1 for pos in dataset.index[t] if pos in peak_positions)
            for t in tickers
        ]
        report[market] = {
            "all": _correlation_cell(caps, all_counts),
            "peaks": _correlation_cell(caps, peak_counts),
        }
    return report


def _correlation_cell(caps: list[float], counts: list[int]) -> dict:
    n = len(caps)
    if n < 2:
        return {"rho": None, "tau": None, "n": n, "degenerate": n < 2}
    try:
        rho = spearman_rho(caps, counts).value
        tau = kendall_tau(caps, counts).value
    except ZeroVariance:
        return {"rho": None, "tau": None, "n": n, "degenerate": True}
    return {"rho": rho, "tau": tau, "n": n, "degenerate": False}


def social_financial_map(
    dataset: Dataset,
    analyses: list[PeakAnalysis],
    config: DetectConfig,
    splits: tuple[float, float] | None = None,
) -> dict:
    """Social-vs-financial importance table, sector splits, and KDEs.

    Social importance of a stock is the median of its mention counts
    over the peaks it appears in; stocks in no peak are excluded.
    Splits default to the per-axis medians over the plotted stocks
    (positive capitalization), ties going to the high side.
    """
    if not analyses:
        raise NoPeaks("social_financial_map needs at least one peak")
    per_stock: dict[str, list[int]] = {}
    for analysis in analyses:
        counts: dict[str, int] = {}
        for pos in analysis.positions:
            for company in dataset.resolved(dataset.tweets[pos]):
                counts[company.ticker] = counts.get(company.ticker, 0) + 1
        for ticker, count in counts.items():
            per_stock.setdefault(ticker, []).append(count)

    rows = []
    for ticker in sorted(per_stock):
        record = dataset.catalog[ticker]
        rows.append(
            {
                "ticker": ticker,
                "market": record.market,
                "capitalization": record.capitalization,
                "social_importance": float(np.median(per_stock[ticker])),
                "peaks_seen": len(per_stock[ticker]),
            }
        )

    plotted = [r for r in rows if r["capitalization"] > 0]
    if splits is None:
        if not plotted:
            raise NoPeaks("no stock with positive capitalization appears in a peak")
        x_split = float(np.median([r["capitalization"] for r in plotted]))
        y_split = float(np.median([r["social_importance"] for r in plotted]))
    else:
        x_split, y_split = float(splits[0]), float(splits[1])

    sectors: dict[str, dict[str, int]] = {}
    for row in rows:
        sector = sector_assign(
            row["capitalization"], row["social_importance"], x_split, y_split
        )
        row["sector"] = sector
        cell = sectors.setdefault(row["market"], {s: 0 for s in "ABCD"})
        cell[sector] += 1

    kde: dict[str, dict] = {}
    for market in dataset.catalog.markets():
        points = [r for r in plotted if r["market"] == market]
        if len(points) < 3:
            kde[market] = {"skipped": f"{len(points)} plottable stocks"}
            continue
        xs = np.log10([r["capitalization"] for r in points])
        ys = np.log10([r["social_importance"] for r in points])
        try:
            result = kde2d(xs, ys, grid_size=config.kde_grid_size)
        except (DegeneratePoints, TooFewPoints) as exc:
            kde[market] = {"skipped": str(exc)}
            continue
        kde[market] = {
            "x_log10_capitalization": [float(v) for v in result.x_grid],
            "y_log10_social": [float(v) for v in result.y_grid],
            "density": [[float(v) for v in row] for row in result.density],
            "bandwidth": [float(result.bandwidth[0]), float(result.bandwidth[1])],
            "n": result.n,
        }

    return {
        "splits": {"financial": x_split, "social": y_split},
        "table": rows,
        "sectors": sectors,
        "kde": kde,
    }


def isoformat_z(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def config_digest(config: DetectConfig, seed: int) -> str:
    payload = {
        "k": config.k,
        "weights": config.weights,
        "scales": config.scales,
        "threshold": config.threshold,
        "entropy_level": config.entropy_level,
        "bootstrap_samples": config.bootstrap_samples,
        "bootstrap_x_max": config.bootstrap_x_max,
        "curve_ks": list(config.curve_ks),
        "kde_grid_size": config.kde_grid_size,
        "seed": seed,
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run_detection(
    dataset: Dataset,
    *,
    seed: int,
    config: DetectConfig | None = None,
    inputs: dict | None = None,
) -> dict:
    """Full detection pass over a dataset; returns the report document.

    The report is pure JSON-ready data and contains no wall-clock
    values, so the same inputs, seed, and config produce identical
    bytes.
    """
    config = config or DetectConfig()
    config.validate()

    series_list = [
        build_hourly_series(dataset, ticker) for ticker in sorted(dataset.index)
    ]
    peaks: list[Peak] = []
    for series in series_list:
        peaks.extend(detect_peaks(series, config.k))
    peaks.sort(key=lambda p: (p.hour_utc, p.ticker))

    curve = peak_count_curve(series_list, [float(k) for k in config.curve_ks])
    baselines = compute_baselines(dataset, config, seed)

    analyses = [
        score_peak(analyze_peak(dataset, baselines, peak), baselines, config)
        for peak in peaks
    ]

    peak_positions: set[int] = set()
    for analysis in analyses:
        peak_positions.update(analysis.positions)

    correlations = rank_correlation_report(dataset, peak_positions)

    try:
        social = social_financial_map(dataset, analyses, config)
    except NoPeaks:
        social = {"splits": None, "table": [], "sectors": {}, "kde": {}}

    graph = build_graph(dataset, sorted(peak_positions))
    assortativity: dict[str, dict] = {}
    for market in dataset.catalog.markets():
        try:
            fit = capitalization_assortativity(graph, market)
        except TooFewPoints as exc:
            assortativity[market] = {"skipped": str(exc)}
            continue
        assortativity[market] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "n_points": fit.n_points,
            "excluded": fit.excluded,
            "points": [
                {"ticker": t, "log10_cap": float(x), "log10_neighbor_cap": float(y)}
                for t, x, y in zip(fit.tickers, fit.x, fit.y)
            ],
        }

    peaks_json = []
    for analysis in analyses:
        peak = analysis.peak
        peaks_json.append(
            {
                "ticker": peak.ticker,
                "hour_utc": isoformat_z(peak.hour_utc),
                "volume": peak.volume,
                "mean": peak.mean,
                "sigma": peak.sigma,
                "threshold": peak.threshold,
                "k": peak.k,
                "n_tweets": analysis.n_tweets,
                "retweet_fraction": analysis.retweet_fraction,
                "mean_cashtags_per_tweet": analysis.mean_cashtags_per_tweet,
                "entropy_mean_by_level": {
                    str(level): analysis.entropy_mean_by_level[level]
                    for level in range(1, TRBC_LEVELS + 1)
                },
                "entropy_ks_p": {
                    str(level): (
                        analysis.entropy_ks[level].p_value
                        if analysis.entropy_ks[level] is not None
                        else None
                    )
                    for level in range(1, TRBC_LEVELS + 1)
                },
                "cap_spread_mean": analysis.cap_spread_mean,
                "cap_spread_excess": analysis.cap_spread_excess,
                "market_mix": analysis.market_mix,
                "terms": analysis.terms,
                "score": analysis.score,
                "flagged": analysis.flagged,
            }
        )

    flags = [
        {
            "ticker": a.peak.ticker,
            "hour_utc": isoformat_z(a.peak.hour_utc),
            "score": a.score,
        }
        for a in analyses
        if a.flagged
    ]

    # Pooled entropy histograms (all tweets vs peak tweets) for export.
    peak_pos_sorted = np.asarray(sorted(peak_positions), dtype=np.int64)
    bins = np.linspace(0.0, 1.0, 21)
    entropy_hist: dict[str, dict] = {}
    for level in range(1, TRBC_LEVELS + 1):
        background = baselines.entropy_sorted[level]
        peak_values = (
            baselines.entropy[peak_pos_sorted, level - 1]
            if peak_pos_sorted.size
            else np.empty(0)
        )
        peak_values = peak_values[~np.isnan(peak_values)]
        entropy_hist[str(level)] = {
            "bin_edges": [float(b) for b in bins],
            "all": [int(c) for c in np.histogram(background, bins)[0]],
            "peaks": [int(c) for c in np.histogram(peak_values, bins)[0]],
            "mean_all": baselines.entropy_mean_by_level[level],
            "mean_peaks": float(peak_values.mean()) if peak_values.size else None,
        }

    report = {
        "meta": {
            "tool": "radar",
            "version": __version__,
            "k": config.k,
            "seed": seed,
            "rng": RNG_ALGORITHM,
            "config_hash": config_digest(config, seed),
            "weights": config.weights,
            "scales": config.scales,
            "threshold": config.threshold,
            "entropy_level": config.entropy_level,
            "inputs": inputs or {},
        },
        "baselines": {
            "retweet_fraction": baselines.retweet_fraction,
            "mean_cashtags_per_tweet": baselines.mean_cashtags_per_tweet,
            "entropy_mean_by_level": {
                str(level): baselines.entropy_mean_by_level[level]
                for level in range(1, TRBC_LEVELS + 1)
            },
            "entropy_histograms": entropy_hist,
            "bootstrap": {
                str(x): {
                    "mean_std": r.mean_std,
                    "std_of_stds": r.std_of_stds,
                    "samples": r.samples,
                    "seed": seed,
                    "rng": r.rng,
                }
                for x, r in baselines.bootstrap.items()
            },
            "observed_spread_by_x": {
                str(x): cell for x, cell in baselines.observed_spread_by_x.items()
            },
            "volume_by_hour_of_day": baselines.volume_by_hour_of_day,
            "tweets": len(dataset.tweets),
            "stocks_mentioned": len(dataset.index),
        },
        "peaks": peaks_json,
        "peak_count_curve": [{"k": k, "peaks": c} for k, c in curve],
        "rank_correlations": correlations,
        "social_financial": social,
        "assortativity": assortativity,
        "flags": flags,
    }
    return report


def report_to_json(report: dict) -> str:
    """Canonical, byte-stable serialization of a report document."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
