"""Cashtag co-occurrence graphs and capitalization assortativity.

Nodes are catalog-resolved tickers; an edge's weight is the number of
tweets whose cashtag set contains both endpoints. The assortativity fit
regresses each node's log10 weighted neighbor-mean capitalization on
its own log10 capitalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import TooFewPoints
from .ingest import Dataset

MIN_FIT_POINTS = 3


@dataclass
class CoOccurrenceGraph:
    """Undirected weighted co-occurrence graph.

    ``weights`` keys are (src, dst) with src < dst; ``adjacency`` mirrors
    them symmetrically. ``node_market`` and ``node_cap`` cover every
    node, including isolated ones (tickers that never co-occur).
    """

    weights: dict[tuple[str, str], int] = field(default_factory=dict)
    adjacency: dict[str, dict[str, int]] = field(default_factory=dict)
    node_market: dict[str, str] = field(default_factory=dict)
    node_cap: dict[str, float] = field(default_factory=dict)

    def degree(self, ticker: str) -> int:
        """Number of distinct neighbors (unweighted)."""
        return len(self.adjacency.get(ticker, ()))

    def nodes(self) -> list[str]:
        return sorted(self.node_market)

    def neighbor_mean_cap(self, ticker: str) -> float | None:
        """Edge-weighted mean capitalization over all neighbors.

        Neighbors with zero/unknown capitalization are skipped; returns
        None when no neighbor has a usable value.
        """
        total = 0.0
        weight_sum = 0.0
        for other, w in self.adjacency.get(ticker, {}).items():
            cap = self.node_cap.get(other, 0.0)
            if cap > 0:
                total += w * cap
                weight_sum += w
        if weight_sum == 0:
            return None
        return total / weight_sum


def build_graph(dataset: Dataset, positions: Iterable[int] | None = None) -> CoOccurrenceGraph:
    """Build the co-occurrence graph over a dataset (or a tweet subset).

    ``positions`` selects tweets by index into ``dataset.tweets``;
    duplicates are ignored so a tweet contributes each pair at most
    once per appearance list.
    """
    graph = CoOccurrenceGraph()
    if positions is None:
        chosen = range(len(dataset.tweets))
    else:
        chosen = sorted(set(positions))
    catalog = dataset.catalog
    for pos in chosen:
        tweet = dataset.tweets[pos]
        resolved = [t for t in tweet.cashtags if t in catalog]
        for ticker in resolved:
            if ticker not in graph.node_market:
                rec = catalog[ticker]
                graph.node_market[ticker] = rec.market
                graph.node_cap[ticker] = rec.capitalization
        for a, b in combinations(sorted(set(resolved)), 2):
            graph.weights[(a, b)] = graph.weights.get((a, b), 0) + 1
            graph.adjacency.setdefault(a, {})[b] = graph.weights[(a, b)]
            graph.adjacency.setdefault(b, {})[a] = graph.weights[(a, b)]
    return graph


def filter_by_degree(graph: CoOccurrenceGraph, min_degree: int) -> CoOccurrenceGraph:
    """Subgraph induced by nodes whose original degree is >= min_degree.

    Degrees are measured on the input graph before any node is removed;
    an edge survives only when both endpoints do.
    """
    keep = {t for t in graph.node_market if graph.degree(t) >= min_degree}
    out = CoOccurrenceGraph()
    out.node_market = {t: graph.node_market[t] for t in keep}
    out.node_cap = {t: graph.node_cap[t] for t in keep}
    for (a, b), w in graph.weights.items():
        if a in keep and b in keep:
            out.weights[(a, b)] = w
            out.adjacency.setdefault(a, {})[b] = w
            out.adjacency.setdefault(b, {})[a] = w
    return out


@dataclass(frozen=True)
class AssortativityFit:
    """Least-squares line through (log10 own cap, log10 neighbor mean cap).

    Slope ~1 means stocks co-occur with peers of their own size; slope
    ~0 means neighbor size is unrelated to own size. ``excluded`` counts
    nodes dropped for zero/unknown capitalization (their own or all of
    their neighbors').
    """

    market: str | None
    slope: float
    intercept: float
    n_points: int
    excluded: int
    tickers: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray


def capitalization_assortativity(
    graph: CoOccurrenceGraph, market: str | None = None
) -> AssortativityFit:
    """Fit the assortativity line for one market (or the whole graph).

    Each node of the selected market with positive capitalization and
    at least one positive-cap neighbor contributes one point; neighbors
    from every market count toward the weighted mean.
    """
    tickers: list[str] = []
    xs: list[float] = []
    ys: list[float] = []
    excluded = 0
    for ticker in graph.nodes():
        if market is not None and graph.node_market[ticker] != market:
            continue
        if graph.degree(ticker) == 0:
            continue
        cap = graph.node_cap.get(ticker, 0.0)
        neighbor_mean = graph.neighbor_mean_cap(ticker)
        if cap <= 0 or neighbor_mean is None:
            excluded += 1
            continue
        tickers.append(ticker)
        xs.append(np.log10(cap))
        ys.append(np.log10(neighbor_mean))
    if len(xs) < MIN_FIT_POINTS:
        raise TooFewPoints(
            f"assortativity fit needs >= {MIN_FIT_POINTS} points, got {len(xs)}"
        )
    x = np.asarray(xs)
    y = np.asarray(ys)
    if np.ptp(x) == 0:
        raise TooFewPoints("assortativity fit needs spread in capitalization")
    slope, intercept = np.polyfit(x, y, 1)
    return AssortativityFit(
        market=market,
        slope=float(slope),
        intercept=float(intercept),
        n_points=len(xs),
        excluded=excluded,
        tickers=tuple(tickers),
        x=x,
        y=y,
    )
