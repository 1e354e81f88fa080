"""Hand-sized dataset builders shared by the unit tests."""

from __future__ import annotations

import json

from radar.ingest import CompanyCatalog, CompanyRecord, Dataset, ingest


def company(
    ticker: str,
    market: str = "NASDAQ",
    cap: float = 1e9,
    sector: str = "Energy",
) -> CompanyRecord:
    """Catalog record with a full TRBC path under one economic sector.

    Levels below the sector are keyed by ticker so two companies share
    a class at level 5 iff they share ``sector``, and at finer levels
    iff they are the same company.
    """
    trbc = (
        f"{sector}.{ticker}.4",
        f"{sector}.{ticker}.3",
        f"{sector}.{ticker}.2",
        f"{sector}.{ticker}.1",
        sector,
    )
    return CompanyRecord(
        ticker=ticker, market=market, capitalization=float(cap), trbc=trbc
    )


def tweet_line(
    tid: str,
    created: str,
    text: str,
    user: str = "u1",
    retweet_of: str | None = None,
    **extra,
) -> str:
    obj = {"id": tid, "created_at": created, "user_id": user, "text": text}
    if retweet_of is not None:
        obj["retweet_of"] = retweet_of
    obj.update(extra)
    return json.dumps(obj)


def make_dataset(
    lines: list[str], records: list[CompanyRecord], keep_unknown: bool = False
) -> Dataset:
    return ingest(lines, CompanyCatalog(records), keep_unknown=keep_unknown)
