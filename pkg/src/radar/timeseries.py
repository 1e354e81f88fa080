"""Hourly mention series and K-sigma peak detection.

A stock's series counts, for every UTC hour in the span, the tweets
whose cashtag set contains the stock. Hour j is a peak iff

    s[j] > mean(s) + k * sigma(s)

with a strict inequality and the population sigma taken over the full
span, zero hours included. A constant series therefore never peaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import EmptySpan, NonPositiveK, StalePeak, UnknownTicker
from .ingest import Dataset, TweetRecord

HOUR = timedelta(hours=1)


def floor_hour(stamp: datetime) -> datetime:
    return stamp.replace(minute=0, second=0, microsecond=0)


@dataclass(frozen=True)
class StockTimeSeries:
    """Hourly mention counts for one ticker over a half-open span.

    ``counts[j]`` covers [start + j hours, start + j+1 hours). ``mean``
    and ``sigma`` are the population moments over the whole span.
    """

    ticker: str
    start: datetime
    counts: np.ndarray

    @property
    def hours(self) -> int:
        return len(self.counts)

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def sigma(self) -> float:
        # Population sigma (ddof=0): the span is the whole object of
        # study, not a sample from it.
        return float(self.counts.std())

    def hour_at(self, index: int) -> datetime:
        return self.start + index * HOUR


@dataclass(frozen=True)
class Peak:
    """One hour where a stock's volume exceeds mean + k * sigma."""

    ticker: str
    index: int
    hour_utc: datetime
    volume: int
    mean: float
    sigma: float
    threshold: float
    k: float


@dataclass(frozen=True)
class PeakTweetSet:
    """The tweets behind one peak, with their headline stats."""

    peak: Peak
    positions: tuple[int, ...]
    retweet_fraction: float
    mean_cashtags_per_tweet: float

    def tweets(self, dataset: Dataset) -> list[TweetRecord]:
        return [dataset.tweets[i] for i in self.positions]


def build_hourly_series(
    dataset: Dataset,
    ticker: str,
    start: datetime | None = None,
    end: datetime | None = None,
) -> StockTimeSeries:
    """Hourly series for ``ticker`` over [start, end).

    Defaults to the dataset's full collection window, floored to the
    hour on both sides (the last partial hour is included). Tweets
    outside an explicit span are ignored.
    """
    if ticker not in dataset.index:
        raise UnknownTicker(ticker)
    lo, hi = dataset.span()
    if start is None:
        start = floor_hour(lo)
    if end is None:
        end = floor_hour(hi) + HOUR
    start = start.astimezone(timezone.utc)
    end = end.astimezone(timezone.utc)
    hours = int((end - start) // HOUR)
    if hours < 1:
        raise EmptySpan(f"span [{start}, {end}) covers no full hour")

    offsets = []
    for pos in dataset.index[ticker]:
        stamp = dataset.tweets[pos].created_at
        if start <= stamp < start + hours * HOUR:
            offsets.append(int((stamp - start) // HOUR))
    counts = np.bincount(np.asarray(offsets, dtype=np.int64), minlength=hours)
    return StockTimeSeries(ticker=ticker, start=start, counts=counts)


def detect_peaks(series: StockTimeSeries, k: float) -> list[Peak]:
    """All peaks of ``series`` at sensitivity ``k``, in hour order."""
    if k <= 0:
        raise NonPositiveK(f"k must be positive, got {k}")
    mean = series.mean
    sigma = series.sigma
    threshold = mean + k * sigma
    hits = np.flatnonzero(series.counts > threshold)
    return [
        Peak(
            ticker=series.ticker,
            index=int(j),
            hour_utc=series.hour_at(int(j)),
            volume=int(series.counts[j]),
            mean=mean,
            sigma=sigma,
            threshold=threshold,
            k=float(k),
        )
        for j in hits
    ]


def peak_count_curve(
    series_list: list[StockTimeSeries], ks: list[float]
) -> list[tuple[float, int]]:
    """Total peak count across ``series_list`` for each k, plot-ready.

    Counts are non-increasing in k because each series' threshold only
    rises.
    """
    out = []
    for k in ks:
        if k <= 0:
            raise NonPositiveK(f"k must be positive, got {k}")
    moments = [(s.counts, s.mean, s.sigma) for s in series_list]
    for k in ks:
        total = 0
        for counts, mean, sigma in moments:
            total += int((counts > mean + k * sigma).sum())
        out.append((float(k), total))
    return out


def collect_peak_tweets(dataset: Dataset, peak: Peak) -> PeakTweetSet:
    """Resolve a peak back to its tweets.

    Raises StalePeak when the ticker is missing from the dataset or the
    hour's tweet count no longer matches the peak's recorded volume,
    which catches peaks applied to the wrong stream.
    """
    if peak.ticker not in dataset.index:
        raise StalePeak(f"{peak.ticker} is not in the dataset index")
    lo = peak.hour_utc
    hi = lo + HOUR
    positions = tuple(
        pos
        for pos in dataset.index[peak.ticker]
        if lo <= dataset.tweets[pos].created_at < hi
    )
    if len(positions) != peak.volume:
        raise StalePeak(
            f"{peak.ticker} @ {lo.isoformat()}: dataset has {len(positions)} "
            f"tweets, peak recorded {peak.volume}"
        )
    tweets = [dataset.tweets[i] for i in positions]
    n = len(tweets)
    retweets = sum(1 for t in tweets if t.is_retweet)
    return PeakTweetSet(
        peak=peak,
        positions=positions,
        retweet_fraction=retweets / n if n else 0.0,
        mean_cashtags_per_tweet=(
            sum(len(t.cashtags) for t in tweets) / n if n else 0.0
        ),
    )
