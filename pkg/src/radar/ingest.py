"""Tweet stream and company catalog ingestion.

Input formats:

* tweets: JSON Lines, one object per line with fields ``id``,
  ``created_at`` (ISO-8601, UTC), ``user_id``, ``text``, optional
  ``retweet_of`` and optional precomputed ``cashtags``.
* companies: CSV with header ``ticker,market,share_price,
  shares_outstanding,capitalization,trbc_l1,trbc_l2,trbc_l3,trbc_l4,
  trbc_l5``. TRBC level 1 is the finest activity label, level 5 the
  economic sector.

Malformed tweet lines are counted, never fatal; malformed catalog rows
are fatal because every downstream statistic depends on the catalog.
"""

from __future__ import annotations

import csv
import json
import re
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator

from .errors import (
    DuplicateTicker,
    MalformedRecord,
    MalformedRow,
    MissingCapitalization,
)

MARKETS = ("NASDAQ", "NYSE", "NYSEARCA", "NYSEMKT", "OTCMKTS", "OTHERS")

TRBC_LEVELS = 5

# A cashtag is '$' followed by 1-6 ASCII letters and an optional class
# suffix of '.' plus 1-2 letters. The token must be delimited: no letter
# or digit directly before the '$' or after the symbol, so "x$AAPL" and
# "$TOOLONGX" match nothing. '$' followed by a digit is a price, not a
# cashtag.
PAT_CASHTAG = re.compile(
    r"(?<![A-Za-z0-9])\$([A-Za-z]{1,6}(?:\.[A-Za-z]{1,2})?)(?![A-Za-z0-9])"
)

# Bare symbol form accepted in explicit "cashtags" arrays.
PAT_SYMBOL = re.compile(r"[A-Za-z]{1,6}(?:\.[A-Za-z]{1,2})?\Z")

COMPANY_COLUMNS = (
    "ticker",
    "market",
    "share_price",
    "shares_outstanding",
    "capitalization",
    "trbc_l1",
    "trbc_l2",
    "trbc_l3",
    "trbc_l4",
    "trbc_l5",
)


def extract_cashtags(text: str) -> list[str]:
    """Return the distinct cashtags in ``text``, uppercased, in first-seen order."""
    return list(dict.fromkeys(m.group(1).upper() for m in PAT_CASHTAG.finditer(text)))


@dataclass(frozen=True, slots=True)
class TweetRecord:
    """One well-formed tweet.

    ``cashtags`` holds every distinct symbol in the text (or the
    explicit array from the record), uppercased, in first-seen order;
    it is not filtered against any catalog. ``retweet_of`` is the id of
    the retweeted status, never equal to ``id``.
    """

    id: str
    created_at: datetime
    user_id: str
    text: str
    cashtags: tuple[str, ...]
    retweet_of: str | None = None

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None


def _parse_created_at(raw: object) -> datetime:
    if not isinstance(raw, str) or not raw:
        raise MalformedRecord(f"created_at must be an ISO-8601 string, got {raw!r}")
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise MalformedRecord(f"bad created_at {raw!r}") from exc
    if stamp.tzinfo is None:
        # Naive timestamps are taken as UTC rather than rejected.
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def _string_field(obj: dict, key: str, *, required: bool) -> str | None:
    value = obj.get(key)
    if value is None:
        if required:
            raise MalformedRecord(f"missing field {key!r}")
        return None
    if isinstance(value, int) and not isinstance(value, bool):
        value = str(value)
    if not isinstance(value, str) or value == "":
        raise MalformedRecord(f"field {key!r} must be a non-empty string")
    return value


def _normalize_symbols(raw: object) -> tuple[str, ...]:
    if not isinstance(raw, list):
        raise MalformedRecord("cashtags must be an array of strings")
    out: dict[str, None] = {}
    for item in raw:
        if not isinstance(item, str):
            raise MalformedRecord(f"cashtag {item!r} is not a string")
        symbol = item.removeprefix("$").upper()
        if not PAT_SYMBOL.match(symbol):
            raise MalformedRecord(f"cashtag {item!r} does not match the symbol grammar")
        out.setdefault(symbol)
    return tuple(out)


def parse_tweet_record(line: str) -> TweetRecord:
    """Parse one JSONL line into a TweetRecord.

    Raises MalformedRecord on any schema violation, including a tweet
    marked as a retweet of itself.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")

    tweet_id = _string_field(obj, "id", required=True)
    user_id = _string_field(obj, "user_id", required=True)
    text = obj.get("text")
    if not isinstance(text, str):
        raise MalformedRecord("field 'text' must be a string")
    created_at = _parse_created_at(obj.get("created_at"))
    retweet_of = _string_field(obj, "retweet_of", required=False)
    if retweet_of == tweet_id:
        raise MalformedRecord(f"tweet {tweet_id} retweets itself")

    if "cashtags" in obj and obj["cashtags"] is not None:
        cashtags = _normalize_symbols(obj["cashtags"])
    else:
        cashtags = tuple(extract_cashtags(text))

    return TweetRecord(
        id=tweet_id,
        created_at=created_at,
        user_id=user_id,
        text=text,
        cashtags=cashtags,
        retweet_of=retweet_of,
    )


@dataclass(frozen=True, slots=True)
class CompanyRecord:
    """One catalog entry.

    ``trbc`` is the 5-level classification path, finest first, or None
    for tickers registered on the fly from tweets (market OTHERS).
    Capitalization is USD, >= 0; 0.0 marks an unknown value and keeps
    the stock out of every capitalization-based statistic.
    """

    ticker: str
    market: str
    capitalization: float
    trbc: tuple[str, str, str, str, str] | None
    share_price: float | None = None
    shares_outstanding: float | None = None


class CompanyCatalog:
    """Immutable ticker -> CompanyRecord mapping with per-market views."""

    def __init__(self, records: Iterable[CompanyRecord]):
        self._by_ticker: dict[str, CompanyRecord] = {}
        for rec in records:
            if rec.ticker in self._by_ticker:
                raise DuplicateTicker(rec.ticker)
            self._by_ticker[rec.ticker] = rec

    def __contains__(self, ticker: str) -> bool:
        return ticker in self._by_ticker

    def __len__(self) -> int:
        return len(self._by_ticker)

    def __iter__(self) -> Iterator[CompanyRecord]:
        return iter(self._by_ticker.values())

    def get(self, ticker: str) -> CompanyRecord | None:
        return self._by_ticker.get(ticker)

    def __getitem__(self, ticker: str) -> CompanyRecord:
        return self._by_ticker[ticker]

    def tickers(self) -> list[str]:
        return sorted(self._by_ticker)

    def market_of(self, ticker: str) -> str:
        return self._by_ticker[ticker].market

    def records_for_market(self, market: str) -> list[CompanyRecord]:
        return [r for r in self._by_ticker.values() if r.market == market]

    def markets(self) -> list[str]:
        present = {r.market for r in self._by_ticker.values()}
        return [m for m in MARKETS if m in present]

    def capitalizations(self, market: str | None = None) -> list[float]:
        """Positive capitalizations, optionally restricted to one market."""
        return [
            r.capitalization
            for r in self._by_ticker.values()
            if r.capitalization > 0 and (market is None or r.market == market)
        ]

    def with_registered(self, tickers: Iterable[str]) -> "CompanyCatalog":
        """Return a catalog extended with placeholder OTHERS entries."""
        extra = [
            CompanyRecord(ticker=t, market="OTHERS", capitalization=0.0, trbc=None)
            for t in tickers
            if t not in self
        ]
        return CompanyCatalog(list(self._by_ticker.values()) + extra)


def _parse_money(raw: str, column: str, line_no: int) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError as exc:
        raise MalformedRow(f"line {line_no}: {column} is not a number: {raw!r}") from exc
    if value < 0:
        raise MalformedRow(f"line {line_no}: {column} is negative")
    return value


def load_company_catalog(path: str) -> CompanyCatalog:
    """Load a company CSV into a CompanyCatalog.

    Capitalization is share_price * shares_outstanding whenever both are
    present; otherwise the explicit capitalization column must hold a
    value. Unknown markets, empty TRBC labels, and unparsable numbers
    raise MalformedRow; a repeated ticker raises DuplicateTicker.
    """
    records: list[CompanyRecord] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in COMPANY_COLUMNS if c not in header]
        if missing:
            raise MalformedRow(f"header is missing columns: {', '.join(missing)}")
        for line_no, row in enumerate(reader, start=2):
            if any(row.get(c) is None for c in COMPANY_COLUMNS):
                raise MalformedRow(f"line {line_no}: wrong number of fields")
            ticker = row["ticker"].strip().upper()
            if not ticker:
                raise MalformedRow(f"line {line_no}: empty ticker")
            market = row["market"].strip()
            if market not in MARKETS:
                raise MalformedRow(f"line {line_no}: unknown market {market!r}")
            price = _parse_money(row["share_price"], "share_price", line_no)
            shares = _parse_money(row["shares_outstanding"], "shares_outstanding", line_no)
            explicit_cap = _parse_money(row["capitalization"], "capitalization", line_no)
            if price is not None and shares is not None:
                cap = price * shares
            elif explicit_cap is not None:
                cap = explicit_cap
            else:
                raise MissingCapitalization(
                    f"line {line_no}: {ticker} has no capitalization and no "
                    "price/share count to derive one"
                )
            trbc = tuple(row[f"trbc_l{i}"].strip() for i in range(1, TRBC_LEVELS + 1))
            if any(label == "" for label in trbc):
                raise MalformedRow(f"line {line_no}: empty TRBC label for {ticker}")
            records.append(
                CompanyRecord(
                    ticker=ticker,
                    market=market,
                    capitalization=cap,
                    trbc=trbc,  # type: ignore[arg-type]
                    share_price=price,
                    shares_outstanding=shares,
                )
            )
    return CompanyCatalog(records)


@dataclass
class Dataset:
    """Parsed tweet stream joined against a company catalog.

    ``index`` maps each catalog-resolved ticker to the positions (into
    ``tweets``) of every tweet whose cashtag set contains it, in stream
    order. ``summary`` carries the ingest counters that the summary CLI
    formats.
    """

    tweets: list[TweetRecord]
    catalog: CompanyCatalog
    index: dict[str, list[int]]
    summary: dict = field(default_factory=dict)

    def resolved(self, tweet: TweetRecord) -> list[CompanyRecord]:
        """Catalog records for a tweet's cashtags, in cashtag order."""
        out = []
        for tag in tweet.cashtags:
            rec = self.catalog.get(tag)
            if rec is not None:
                out.append(rec)
        return out

    def span(self) -> tuple[datetime, datetime]:
        """(min, max) created_at over kept tweets."""
        lo = min(t.created_at for t in self.tweets)
        hi = max(t.created_at for t in self.tweets)
        return lo, hi


def ingest(
    lines: Iterable[str],
    catalog: CompanyCatalog,
    *,
    keep_unknown: bool = False,
) -> Dataset:
    """Stream JSONL lines into a Dataset.

    A tweet is kept when at least one of its cashtags resolves in the
    catalog. With ``keep_unknown`` every unresolved ticker is first
    registered as a placeholder company under market OTHERS, so tweets
    carrying only unknown symbols survive too. Malformed lines and
    tweets with no usable cashtag are counted in the summary, not
    raised.
    """
    parsed = 0
    malformed = 0
    filtered = 0
    pending: list[TweetRecord] = []
    unknown: dict[str, None] = {}

    for line in lines:
        if not line.strip():
            continue
        try:
            record = parse_tweet_record(line)
        except MalformedRecord:
            malformed += 1
            continue
        parsed += 1
        known = [t for t in record.cashtags if t in catalog]
        if known:
            pending.append(record)
        elif keep_unknown and record.cashtags:
            pending.append(record)
            unknown.update(dict.fromkeys(record.cashtags))
        else:
            filtered += 1
            continue
        if keep_unknown:
            unknown.update(dict.fromkeys(t for t in record.cashtags if t not in catalog))

    if keep_unknown and unknown:
        catalog = catalog.with_registered(unknown)

    index: dict[str, list[int]] = {}
    for pos, record in enumerate(pending):
        for tag in record.cashtags:
            if tag in catalog:
                index.setdefault(tag, []).append(pos)

    dataset = Dataset(tweets=pending, catalog=catalog, index=index)
    dataset.summary = _summarize(dataset, parsed, malformed, filtered)
    return dataset


def _summarize(dataset: Dataset, parsed: int, malformed: int, filtered: int) -> dict:
    tweets = dataset.tweets
    retweets = sum(1 for t in tweets if t.is_retweet)
    users = {t.user_id for t in tweets}
    n = len(tweets)

    per_market: dict[str, dict] = {}
    for market in dataset.catalog.markets():
        caps = dataset.catalog.capitalizations(market)
        per_market[market] = {
            "companies": len(dataset.catalog.records_for_market(market)),
            "median_capitalization": statistics.median(caps) if caps else 0.0,
            "tweets": 0,
            "retweets": 0,
            "users": set(),
        }
    for record in tweets:
        markets = {
            dataset.catalog.market_of(t) for t in record.cashtags if t in dataset.catalog
        }
        for market in markets:
            cell = per_market[market]
            cell["tweets"] += 1
            cell["retweets"] += record.is_retweet
            cell["users"].add(record.user_id)
    for cell in per_market.values():
        cell["users"] = len(cell["users"])
        cell["retweet_fraction"] = (
            cell["retweets"] / cell["tweets"] if cell["tweets"] else 0.0
        )

    summary = {
        "parsed": parsed,
        "malformed": malformed,
        "filtered": filtered,
        "kept": n,
        "retweets": int(retweets),
        "retweet_fraction": retweets / n if n else 0.0,
        "distinct_users": len(users),
        "mean_cashtags_per_tweet": (
            sum(len(t.cashtags) for t in tweets) / n if n else 0.0
        ),
        "per_market": per_market,
    }
    if tweets:
        lo, hi = dataset.span()
        summary["span"] = [lo.isoformat(), hi.isoformat()]
    return summary


def ingest_path(
    tweets_path: str, catalog: CompanyCatalog, *, keep_unknown: bool = False
) -> Dataset:
    """ingest() over a JSONL file on disk."""
    with open(tweets_path, encoding="utf-8") as handle:
        return ingest(handle, catalog, keep_unknown=keep_unknown)
