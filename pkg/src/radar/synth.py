"""Seeded synthetic stream generator and detection scorer.

The generator emits three artifacts from one config and one seed: a
company catalog CSV, a tweet JSONL stream ordered by timestamp, and a
ground-truth JSON labeling every tweet and user and listing the peaks
each injected campaign is expected to cause. Everything funnels through
a single numpy PCG64 generator, so a (config, seed) pair reproduces the
same bytes on every run.

Background chatter mentions a stock at a rate proportional to
capitalization**gamma times a per-stock lognormal activity factor,
concentrated in a daily active window; extra cashtags per tweet follow
1 + Binomial(4, p) with companions biased toward the same economic
sector. Campaigns are bot bursts: bot_count * tweets_per_bot tweets in
the burst hour(s) pairing one or two high-cap "carrier" stocks with a
handful of low-cap targets, mostly retweets of the campaign's own
originals.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ConfigInvalid, StreamMismatch
from .ingest import MARKETS, CompanyRecord

GENERATOR_VERSION = "1"

RNG_NAME = "numpy-pcg64"

DEFAULT_SECTORS = (
    "Energy",
    "Materials",
    "Industrials",
    "ConsumerCyclicals",
    "ConsumerNonCyclicals",
    "Financials",
    "Healthcare",
    "Technology",
)

TEXT_TEMPLATES = (
    "{tags} looking strong into the close",
    "watching {tags} this morning",
    "big volume on {tags} today",
    "{tags} chart setting up nicely",
    "news out on {tags}",
    "adding {tags} to the watchlist",
)


@dataclass
class MarketSpec:
    """Company population of one listed market."""

    name: str
    companies: int
    log10_cap_mean: float
    log10_cap_sigma: float
    log10_price_mean: float = 1.2
    log10_price_sigma: float = 0.5
    ticker_length: tuple[int, int] = (3, 4)


@dataclass
class BackgroundSpec:
    """Organic chatter model.

    ``base_rate_per_hour`` is the hourly tweet rate of a stock at the
    catalog's median capitalization with activity factor 1; actual
    rates scale with (cap / median_cap)**gamma times a lognormal factor
    of sigma ``mention_noise_sigma`` (normalized to mean 1, so totals
    stay calibrated while rank(cap) vs rank(mentions) lands mid-range
    instead of ~1).
    """

    base_rate_per_hour: float = 0.02
    gamma: float = 0.5
    mention_noise_sigma: float = 1.5
    retweet_probability: float = 0.23
    extra_cashtag_draws: int = 2
    extra_cashtag_p: float = 0.25
    same_sector_probability: float = 1.0
    window_start_hour: int = 13
    window_hours: int = 7
    window_share: float = 0.8


@dataclass
class CampaignPlan:
    """Recipe for drawing concrete campaigns from the catalog.

    Carriers come from the top ``carrier_top_fraction`` of the carrier
    markets by capitalization, targets from the bottom
    ``target_bottom_fraction`` of the target market.
    """

    count: int = 0
    bots: tuple[int, int] = (150, 250)
    tweets_per_bot: tuple[int, int] = (2, 4)
    burst_hours: int = 1
    carrier_pool: int = 2
    carrier_markets: tuple[str, ...] = ("NASDAQ", "NYSE")
    carrier_top_fraction: float = 0.1
    target_pool: tuple[int, int] = (6, 10)
    target_market: str = "OTCMKTS"
    target_bottom_fraction: float = 0.5
    carriers_per_tweet: tuple[int, int] = (1, 2)
    targets_per_tweet: tuple[int, int] = (3, 8)
    retweet_probability: float = 0.8


DEFAULT_MARKETS = (
    MarketSpec("NASDAQ", 50, 9.2, 0.8, 1.5, 0.4),
    MarketSpec("NYSE", 50, 9.4, 0.8, 1.6, 0.4),
    MarketSpec("NYSEARCA", 50, 8.4, 0.7, 1.6, 0.3),
    MarketSpec("NYSEMKT", 50, 7.8, 0.7, 1.0, 0.4),
    MarketSpec("OTCMKTS", 60, 5.8, 1.1, -0.7, 0.6, (4, 5)),
)


@dataclass
class SynthConfig:
    """Full generator configuration; see configs/synth.toml for docs."""

    horizon_hours: int = 2160
    start: datetime = datetime(2017, 5, 1, tzinfo=timezone.utc)
    users: int = 4000
    seed: int | None = None
    truth_k: float = 10.0
    markets: list[MarketSpec] = field(default_factory=lambda: list(DEFAULT_MARKETS))
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    campaign_plan: CampaignPlan = field(default_factory=CampaignPlan)
    trbc_sectors: tuple[str, ...] = DEFAULT_SECTORS
    trbc_fanout: tuple[int, int, int, int] = (2, 2, 2, 2)

    def validate(self) -> None:
        bg = self.background
        plan = self.campaign_plan
        checks = [
            (self.horizon_hours >= 24, "horizon_hours must be >= 24"),
            (self.users >= 1, "users must be >= 1"),
            (self.truth_k > 0, "truth_k must be positive"),
            (len(self.markets) >= 1, "markets must be non-empty"),
            (len(self.trbc_sectors) >= 1, "trbc.sectors must be non-empty"),
            (all(f >= 1 for f in self.trbc_fanout), "trbc.fanout entries must be >= 1"),
            (bg.base_rate_per_hour > 0, "background.base_rate_per_hour must be positive"),
            (bg.gamma >= 0, "background.gamma must be >= 0"),
            (bg.mention_noise_sigma >= 0, "background.mention_noise_sigma must be >= 0"),
            (0 <= bg.retweet_probability <= 1, "background.retweet_probability must be in [0, 1]"),
            (bg.extra_cashtag_draws >= 0, "background.extra_cashtag_draws must be >= 0"),
            (0 <= bg.extra_cashtag_p <= 1, "background.extra_cashtag_p must be in [0, 1]"),
            (0 <= bg.same_sector_probability <= 1, "background.same_sector_probability must be in [0, 1]"),
            (0 <= bg.window_start_hour <= 23, "background.window_start_hour must be in 0..23"),
            (1 <= bg.window_hours <= 24, "background.window_hours must be in 1..24"),
            (0 < bg.window_share <= 1, "background.window_share must be in (0, 1]"),
            (plan.count >= 0, "campaigns.count must be >= 0"),
        ]
        for spec in self.markets:
            checks.append(
                (spec.name in MARKETS, f"markets.{spec.name}: unknown market name")
            )
            checks.append(
                (spec.companies >= 5, f"markets.{spec.name}.companies must be >= 5")
            )
            checks.append(
                (spec.log10_cap_sigma >= 0, f"markets.{spec.name}.log10_cap_sigma must be >= 0")
            )
        if plan.count > 0:
            names = {spec.name for spec in self.markets}
            checks += [
                (plan.target_market in names, "campaigns.target_market is not in markets"),
                (all(m in names for m in plan.carrier_markets), "campaigns.carrier_markets is not in markets"),
                (plan.bots[0] >= 1 and plan.bots[0] <= plan.bots[1], "campaigns.bots range is invalid"),
                (plan.tweets_per_bot[0] >= 1 and plan.tweets_per_bot[0] <= plan.tweets_per_bot[1], "campaigns.tweets_per_bot range is invalid"),
                (plan.burst_hours >= 1, "campaigns.burst_hours must be >= 1"),
                (plan.carrier_pool >= 1, "campaigns.carrier_pool must be >= 1"),
                (plan.target_pool[0] >= 1 and plan.target_pool[0] <= plan.target_pool[1], "campaigns.target_pool range is invalid"),
                (0 < plan.carrier_top_fraction <= 1, "campaigns.carrier_top_fraction must be in (0, 1]"),
                (0 < plan.target_bottom_fraction <= 1, "campaigns.target_bottom_fraction must be in (0, 1]"),
                (plan.carriers_per_tweet[0] >= 1 and plan.carriers_per_tweet[0] <= plan.carriers_per_tweet[1], "campaigns.carriers_per_tweet range is invalid"),
                (plan.targets_per_tweet[0] >= 1 and plan.targets_per_tweet[0] <= plan.targets_per_tweet[1], "campaigns.targets_per_tweet range is invalid"),
                (0 <= plan.retweet_probability <= 1, "campaigns.retweet_probability must be in [0, 1]"),
            ]
        for ok, message in checks:
            if not ok:
                raise ConfigInvalid(message)


def _pair(raw, path: str) -> tuple[int, int]:
    if not isinstance(raw, list) or len(raw) != 2:
        raise ConfigInvalid(f"{path} must be a [min, max] pair")
    return int(raw[0]), int(raw[1])


def load_synth_config(path: str) -> SynthConfig:
    """Read a synth TOML file; unknown keys are config errors."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - version dependent
        import tomli as tomllib
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    config = SynthConfig()

    top_simple = {"horizon_hours": int, "users": int, "seed": int, "truth_k": float}
    for key, value in raw.items():
        if key in top_simple:
            setattr(config, key, top_simple[key](value))
        elif key == "start":
            if isinstance(value, datetime):
                stamp = value
            else:
                text = str(value)
                stamp = datetime.fromisoformat(
                    text[:-1] + "+00:00" if text.endswith("Z") else text
                )
            if stamp.tzinfo is None:
                stamp = stamp.replace(tzinfo=timezone.utc)
            config.start = stamp.astimezone(timezone.utc)
        elif key == "background":
            if not isinstance(value, dict):
                raise ConfigInvalid("background must be a table")
            for sub, number in value.items():
                if not hasattr(config.background, sub):
                    raise ConfigInvalid(f"unknown key background.{sub}")
                current = getattr(config.background, sub)
                setattr(config.background, sub, type(current)(number))
        elif key == "trbc":
            if not isinstance(value, dict):
                raise ConfigInvalid("trbc must be a table")
            for sub, entry in value.items():
                if sub == "sectors":
                    config.trbc_sectors = tuple(str(s) for s in entry)
                elif sub == "fanout":
                    if len(entry) != 4:
                        raise ConfigInvalid("trbc.fanout must have 4 entries")
                    config.trbc_fanout = tuple(int(v) for v in entry)
                else:
                    raise ConfigInvalid(f"unknown key trbc.{sub}")
        elif key == "markets":
            if not isinstance(value, list):
                raise ConfigInvalid("markets must be an array of tables")
            specs = []
            for i, entry in enumerate(value):
                spec_path = f"markets[{i}]"
                if "name" not in entry or "companies" not in entry:
                    raise ConfigInvalid(f"{spec_path} needs name and companies")
                spec = MarketSpec(
                    name=str(entry["name"]), companies=int(entry["companies"]),
                    log10_cap_mean=float(entry.get("log10_cap_mean", 8.0)),
                    log10_cap_sigma=float(entry.get("log10_cap_sigma", 0.8)),
                )
                if "log10_price_mean" in entry:
                    spec.log10_price_mean = float(entry["log10_price_mean"])
                if "log10_price_sigma" in entry:
                    spec.log10_price_sigma = float(entry["log10_price_sigma"])
                if "ticker_length" in entry:
                    spec.ticker_length = _pair(entry["ticker_length"], f"{spec_path}.ticker_length")
                unknown = set(entry) - {
                    "name", "companies", "log10_cap_mean", "log10_cap_sigma",
                    "log10_price_mean", "log10_price_sigma", "ticker_length",
                }
                if unknown:
                    raise ConfigInvalid(f"unknown key {spec_path}.{sorted(unknown)[0]}")
                specs.append(spec)
            config.markets = specs
        elif key == "campaigns":
            if not isinstance(value, dict):
                raise ConfigInvalid("campaigns must be a table")
            plan = config.campaign_plan
            for sub, entry in value.items():
                if sub in ("bots", "tweets_per_bot", "target_pool",
                           "carriers_per_tweet", "targets_per_tweet"):
                    setattr(plan, sub, _pair(entry, f"campaigns.{sub}"))
                elif sub == "carrier_markets":
                    plan.carrier_markets = tuple(str(m) for m in entry)
                elif sub in ("count", "burst_hours", "carrier_pool"):
                    setattr(plan, sub, int(entry))
                elif sub in ("carrier_top_fraction", "target_bottom_fraction",
                             "retweet_probability"):
                    setattr(plan, sub, float(entry))
                elif sub == "target_market":
                    plan.target_market = str(entry)
                else:
                    raise ConfigInvalid(f"unknown key campaigns.{sub}")
        else:
            raise ConfigInvalid(f"unknown config key {key!r}")
    config.validate()
    return config


@dataclass
class SynthResult:
    """In-memory generator output, ready for serialization."""

    companies: list[CompanyRecord]
    tweets: list[dict]
    truth: dict


class _Event:
    """One tweet before ids are assigned (mutable scratch)."""

    __slots__ = ("seq", "ts", "user", "cashtags", "source_seq", "label", "text")

    def __init__(self, seq, ts, user, cashtags, source_seq, label):
        self.seq = seq
        self.ts = ts
        self.user = user
        self.cashtags = cashtags
        self.source_seq = source_seq
        self.label = label
        self.text = ""


def _make_tickers(rng: np.random.Generator, spec: MarketSpec, used: set[str]) -> list[str]:
    out = []
    lo, hi = spec.ticker_length
    while len(out) < spec.companies:
        length = int(rng.integers(lo, hi + 1))
        letters = rng.integers(0, 26, size=length)
        ticker = "".join(chr(ord("A") + int(c)) for c in letters)
        if ticker in used:
            continue
        used.add(ticker)
        out.append(ticker)
    return out


def _make_trbc_path(rng: np.random.Generator, config: SynthConfig) -> tuple[str, ...]:
    sector = config.trbc_sectors[int(rng.integers(0, len(config.trbc_sectors)))]
    path = [sector]
    for fanout in config.trbc_fanout:
        child = int(rng.integers(0, fanout)) + 1
        path.append(f"{path[-1]}.{child}")
    # path is coarse -> fine; records store finest first.
    return tuple(reversed(path))


def _diurnal_weights(bg: BackgroundSpec) -> np.ndarray:
    weights = np.empty(24)
    out_hours = 24 - bg.window_hours
    in_w = 24.0 * bg.window_share / bg.window_hours
    out_w = 24.0 * (1.0 - bg.window_share) / out_hours if out_hours else 0.0
    for hour in range(24):
        offset = (hour - bg.window_start_hour) % 24
        weights[hour] = in_w if offset < bg.window_hours else out_w
    return weights


def generate(config: SynthConfig, seed: int | None = None) -> SynthResult:
    """Generate companies, a tweet stream, and ground truth.

    ``seed`` overrides ``config.seed``; one of them must be set. The
    output is fully determined by (config, seed).
    """
    config.validate()
    if seed is None:
        seed = config.seed
    if seed is None:
        raise ConfigInvalid("seed: a seed is required")
    rng = np.random.default_rng(int(seed))

    # --- catalog ------------------------------------------------------
    companies: list[CompanyRecord] = []
    used: set[str] = set()
    for spec in config.markets:
        tickers = _make_tickers(rng, spec, used)
        log_caps = rng.normal(spec.log10_cap_mean, spec.log10_cap_sigma, spec.companies)
        log_prices = rng.normal(spec.log10_price_mean, spec.log10_price_sigma, spec.companies)
        for ticker, log_cap, log_price in zip(tickers, log_caps, log_prices):
            price = max(0.01, round(float(10.0 ** log_price), 2))
            shares = max(1.0, float(np.round(10.0 ** log_cap / price)))
            companies.append(
                CompanyRecord(
                    ticker=ticker,
                    market=spec.name,
                    capitalization=price * shares,
                    trbc=_make_trbc_path(rng, config),
                    share_price=price,
                    shares_outstanding=shares,
                )
            )

    caps = np.array([c.capitalization for c in companies])
    median_cap = float(np.median(caps))
    by_market: dict[str, list[int]] = {}
    by_market_sector: dict[tuple[str, str], list[int]] = {}
    for i, company in enumerate(companies):
        by_market.setdefault(company.market, []).append(i)
        by_market_sector.setdefault((company.market, company.trbc[-1]), []).append(i)
    market_pools = {m: np.array(ix) for m, ix in by_market.items()}
    sector_pools = {k: np.array(ix) for k, ix in by_market_sector.items()}

    # --- background events --------------------------------------------
    bg = config.background
    noise = np.exp(
        rng.normal(0.0, bg.mention_noise_sigma, len(companies))
        - 0.5 * bg.mention_noise_sigma**2
    )
    rates = bg.base_rate_per_hour * (caps / median_cap) ** bg.gamma * noise
    hour_weights = _diurnal_weights(bg)
    hourly_weight = np.tile(hour_weights, config.horizon_hours // 24 + 1)[
        : config.horizon_hours
    ]

    events: list[_Event] = []
    originals_by_primary: dict[int, list[int]] = {}
    start_epoch = int(config.start.timestamp())

    def new_event(ts, user, cashtags, source_seq, label) -> _Event:
        event = _Event(len(events), ts, user, cashtags, source_seq, label)
        events.append(event)
        return event

    for i, company in enumerate(companies):
        lam = rates[i] * hourly_weight
        counts = rng.poisson(lam)
        pool = originals_by_primary.setdefault(i, [])
        for hour in np.flatnonzero(counts):
            for _ in range(int(counts[hour])):
                second = int(rng.integers(0, 3600))
                ts = start_epoch + int(hour) * 3600 + second
                user = f"u{int(rng.integers(0, config.users)):05d}"
                if pool and rng.random() < bg.retweet_probability:
                    source = pool[int(rng.integers(0, len(pool)))]
                    # A retweet never precedes its source; same-hour
                    # draws clamp to the source's second.
                    new_event(
                        max(ts, events[source].ts),
                        user,
                        events[source].cashtags,
                        source,
                        "background",
                    )
                else:
                    extra = int(rng.binomial(bg.extra_cashtag_draws, bg.extra_cashtag_p))
                    tags = [company.ticker]
                    if extra:
                        key = (company.market, company.trbc[-1])
                        candidates = (
                            sector_pools[key]
                            if rng.random() < bg.same_sector_probability
                            else market_pools[company.market]
                        )
                        candidates = candidates[candidates != i]
                        if candidates.size < extra:
                            candidates = market_pools[company.market]
                            candidates = candidates[candidates != i]
                        take = min(extra, candidates.size)
                        picks = rng.choice(candidates, size=take, replace=False)
                        tags.extend(companies[int(p)].ticker for p in picks)
                    event = new_event(ts, user, tuple(tags), None, "background")
                    pool.append(event.seq)

    # --- campaigns -----------------------------------------------------
    plan = config.campaign_plan
    campaigns_meta: list[dict] = []
    horizon_days = config.horizon_hours // 24
    for c in range(plan.count):
        bots = int(rng.integers(plan.bots[0], plan.bots[1] + 1))
        tweets_per_bot = int(rng.integers(plan.tweets_per_bot[0], plan.tweets_per_bot[1] + 1))

        day = int(rng.integers(0, horizon_days))
        offset = int(rng.integers(0, bg.window_hours))
        first = day * 24 + (bg.window_start_hour + offset) % 24
        burst = [min(first + j, config.horizon_hours - 1) for j in range(plan.burst_hours)]

        carrier_candidates: list[int] = []
        for market in plan.carrier_markets:
            pool_m = sorted(
                by_market.get(market, ()), key=lambda ix: -companies[ix].capitalization
            )
            top = max(1, int(np.ceil(len(pool_m) * plan.carrier_top_fraction)))
            carrier_candidates.extend(pool_m[:top])
        carrier_candidates.sort()
        n_car = min(plan.carrier_pool, len(carrier_candidates))
        carriers = [
            int(v)
            for v in rng.choice(np.array(carrier_candidates), size=n_car, replace=False)
        ]

        target_candidates = sorted(
            by_market[plan.target_market], key=lambda ix: companies[ix].capitalization
        )
        bottom = max(1, int(np.ceil(len(target_candidates) * plan.target_bottom_fraction)))
        target_candidates = sorted(target_candidates[:bottom])
        pool_size = min(
            int(rng.integers(plan.target_pool[0], plan.target_pool[1] + 1)),
            len(target_candidates),
        )
        targets = [
            int(v)
            for v in rng.choice(np.array(target_candidates), size=pool_size, replace=False)
        ]

        label = f"campaign:{c}"
        campaign_originals: list[int] = []
        total = bots * tweets_per_bot
        for k in range(total):
            bot = f"bot{c:02d}_{k // tweets_per_bot:03d}"
            hour = burst[k % len(burst)]
            ts = start_epoch + hour * 3600 + int(rng.integers(0, 3600))
            if campaign_originals and rng.random() < plan.retweet_probability:
                source = campaign_originals[int(rng.integers(0, len(campaign_originals)))]
                # Same clamp as the background path: no retweet before
                # its source.
                new_event(max(ts, events[source].ts), bot, events[source].cashtags, source, label)
            else:
                n_car_tweet = min(
                    int(rng.integers(plan.carriers_per_tweet[0], plan.carriers_per_tweet[1] + 1)),
                    len(carriers),
                )
                n_tar_tweet = min(
                    int(rng.integers(plan.targets_per_tweet[0], plan.targets_per_tweet[1] + 1)),
                    len(targets),
                )
                picks_car = rng.choice(np.array(carriers), size=n_car_tweet, replace=False)
                picks_tar = rng.choice(np.array(targets), size=n_tar_tweet, replace=False)
                tags = tuple(
                    companies[int(p)].ticker for p in list(picks_car) + list(picks_tar)
                )
                event = new_event(ts, bot, tags, None, label)
                campaign_originals.append(event.seq)

        campaigns_meta.append(
            {
                "index": c,
                "bots": bots,
                "tweets_per_bot": tweets_per_bot,
                "emitted": total,
                "burst_hours": [
                    _iso_z(config.start + timedelta(hours=h)) for h in burst
                ],
                "burst_hour_indices": burst,
                "carriers": sorted(companies[i].ticker for i in carriers),
                "targets": sorted(companies[i].ticker for i in targets),
            }
        )

    # --- texts (generation order: retweet sources already have text) ---
    for event in events:
        if event.source_seq is not None:
            source = events[event.source_seq]
            event.text = f"RT @{source.user}: {source.text}"
        else:
            template = TEXT_TEMPLATES[int(rng.integers(0, len(TEXT_TEMPLATES)))]
            event.text = template.format(
                tags=" ".join("$" + t for t in event.cashtags)
            )

    # --- finalize stream ------------------------------------------------
    order = sorted(range(len(events)), key=lambda s: (events[s].ts, s))
    final_id = {}
    for position, seq in enumerate(order):
        final_id[seq] = f"t{position + 1:07d}"

    tweets: list[dict] = []
    labels: dict[str, str] = {}
    for seq in order:
        event = events[seq]
        record = {
            "id": final_id[seq],
            "created_at": _iso_z(datetime.fromtimestamp(event.ts, tz=timezone.utc)),
            "user_id": event.user,
            "text": event.text,
        }
        if event.source_seq is not None:
            record["retweet_of"] = final_id[event.source_seq]
        tweets.append(record)
        labels[final_id[seq]] = event.label

    users: dict[str, str] = {}
    for event in events:
        if event.label == "background":
            users.setdefault(event.user, "human")
        else:
            users.setdefault(event.user, "bot:" + event.label.split(":", 1)[1])

    # --- expected peaks --------------------------------------------------
    ticker_index = {c.ticker: i for i, c in enumerate(companies)}
    mention_counts = np.zeros((len(companies), config.horizon_hours), dtype=np.int64)
    campaign_counts: dict[tuple[int, int, int], int] = {}
    for event in events:
        hour = (event.ts - start_epoch) // 3600
        if not 0 <= hour < config.horizon_hours:
            continue
        if event.label == "background":
            campaign = None
        else:
            campaign = int(event.label.split(":", 1)[1])
        for tag in event.cashtags:
            row = ticker_index[tag]
            mention_counts[row, hour] += 1
            if campaign is not None:
                key = (campaign, row, int(hour))
                campaign_counts[key] = campaign_counts.get(key, 0) + 1

    for meta in campaigns_meta:
        expected = []
        involved = sorted(
            set(meta["carriers"]) | set(meta["targets"]),
            key=lambda t: ticker_index[t],
        )
        for ticker in involved:
            row = ticker_index[ticker]
            series = mention_counts[row]
            mean = series.mean()
            sigma = series.std()
            for hour in meta["burst_hour_indices"]:
                own = campaign_counts.get((meta["index"], row, hour), 0)
                total_mentions = int(series[hour])
                if own == 0 or total_mentions == 0:
                    continue
                # Same peak rule the detector applies: strict K-sigma
                # over the full span. Credit the campaign only when it
                # produced at least half of the hour's mentions.
                if total_mentions > mean + config.truth_k * sigma and own * 2 >= total_mentions:
                    expected.append(
                        [ticker, _iso_z(config.start + timedelta(hours=hour))]
                    )
        meta["expected_peaks"] = sorted(expected)
        del meta["burst_hour_indices"]

    truth = {
        "generator_version": GENERATOR_VERSION,
        "rng": RNG_NAME,
        "seed": int(seed),
        "truth_k": config.truth_k,
        "start": _iso_z(config.start),
        "horizon_hours": config.horizon_hours,
        "counts": {
            "companies": len(companies),
            "tweets": len(tweets),
            "background_tweets": sum(1 for e in events if e.label == "background"),
            "campaign_tweets": sum(1 for e in events if e.label != "background"),
        },
        "campaigns": campaigns_meta,
        "labels": labels,
        "users": users,
        "stream": {},
    }
    return SynthResult(companies=companies, tweets=tweets, truth=truth)


def _iso_z(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def serialize_companies(companies: list[CompanyRecord]) -> str:
    """Company catalog CSV bytes (as text) in the canonical column order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "ticker", "market", "share_price", "shares_outstanding",
            "capitalization", "trbc_l1", "trbc_l2", "trbc_l3", "trbc_l4", "trbc_l5",
        ]
    )
    for company in companies:
        writer.writerow(
            [
                company.ticker,
                company.market,
                repr(company.share_price),
                repr(company.shares_outstanding),
                repr(company.capitalization),
                *company.trbc,
            ]
        )
    return buffer.getvalue()


def serialize_tweets(tweets: list[dict]) -> str:
    return "".join(
        json.dumps(tweet, sort_keys=True, separators=(",", ":")) + "\n"
        for tweet in tweets
    )


def write_fixture(
    config: SynthConfig,
    seed: int,
    tweets_path: str,
    companies_path: str,
    truth_path: str,
) -> dict:
    """Generate and write all three artifacts; returns the truth dict.

    The truth embeds SHA-256 digests of the tweet and company files so
    evaluate() can detect a report computed from a different stream.
    """
    result = generate(config, seed)
    companies_text = serialize_companies(result.companies)
    tweets_text = serialize_tweets(result.tweets)
    with open(companies_path, "w", encoding="utf-8") as handle:
        handle.write(companies_text)
    with open(tweets_path, "w", encoding="utf-8") as handle:
        handle.write(tweets_text)
    result.truth["stream"] = {
        "tweets_sha256": hashlib.sha256(tweets_text.encode()).hexdigest(),
        "companies_sha256": hashlib.sha256(companies_text.encode()).hexdigest(),
        "tweets": len(result.tweets),
    }
    with open(truth_path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(result.truth, sort_keys=True, indent=2) + "\n")
    return result.truth


def evaluate(report: dict, truth: dict) -> dict:
    """Score a detection report against generator ground truth.

    Flagged (ticker, hour) pairs are matched against the union of every
    campaign's expected peaks. Raises StreamMismatch when the report
    was computed from a different tweet stream than the truth describes.
    """
    report_sha = report.get("meta", {}).get("inputs", {}).get("tweets_sha256")
    truth_sha = truth.get("stream", {}).get("tweets_sha256")
    if report_sha and truth_sha and report_sha != truth_sha:
        raise StreamMismatch(
            f"report stream {report_sha[:12]} != truth stream {truth_sha[:12]}"
        )

    expected: set[tuple[str, str]] = set()
    per_campaign: dict[str, set[tuple[str, str]]] = {}
    for meta in truth.get("campaigns", []):
        pairs = {(t, h) for t, h in meta.get("expected_peaks", [])}
        per_campaign[str(meta["index"])] = pairs
        expected |= pairs

    flagged = {(f["ticker"], f["hour_utc"]) for f in report.get("flags", [])}
    tp = len(flagged & expected)
    fp = len(flagged - expected)
    fn = len(expected - flagged)
    precision = tp / len(flagged) if flagged else None
    recall = tp / len(expected) if expected else None

    campaign_rows = {}
    for index, pairs in sorted(per_campaign.items(), key=lambda kv: int(kv[0])):
        hit = len(pairs & flagged)
        campaign_rows[index] = {
            "expected": len(pairs),
            "flagged": hit,
            "recall": hit / len(pairs) if pairs else None,
        }

    return {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "precision": precision,
        "recall": recall,
        "expected_peaks": len(expected),
        "flagged_peaks": len(flagged),
        "detected_peaks": len(report.get("peaks", [])),
        "per_campaign": campaign_rows,
    }
