"""Command line interface.

Subcommands: ingest, peaks, graph, detect, synth, evaluate, summary,
export. Exit codes: 0 success, 1 input or usage error, 2 internal
invariant violation. Every seeded subcommand requires an explicit
--seed; there are no clock-derived defaults anywhere.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import traceback

from . import __version__
from .cooccur import build_graph, capitalization_assortativity, filter_by_degree
from .detect import (
    DetectConfig,
    isoformat_z,
    load_detect_config,
    report_to_json,
    run_detection,
)
from .errors import ConfigInvalid, RadarError, TooFewPoints, UnknownTicker
from .ingest import load_company_catalog, ingest_path
from .synth import SynthConfig, evaluate, load_synth_config, write_fixture
from .timeseries import (
    HOUR,
    build_hourly_series,
    collect_peak_tweets,
    detect_peaks,
    peak_count_curve,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2
    for internal failures, so usage problems are rethrown and mapped
    to 1."""

    def error(self, message):
        raise _UsageError(message)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(payload, path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _open_csv(path: str):
    handle = open(path, "w", newline="", encoding="utf-8")
    return handle, csv.writer(handle, lineterminator="\n")


def _parse_ks(raw: str) -> list[float]:
    try:
        if ":" in raw:
            lo, hi = raw.split(":", 1)
            return [float(k) for k in range(int(lo), int(hi) + 1)]
        return [float(part) for part in raw.split(",") if part]
    except ValueError:
        raise ConfigInvalid(f"bad k grid {raw!r}: expected 'lo:hi' or a comma list")


def _load_dataset(args):
    catalog = load_company_catalog(args.companies)
    return ingest_path(
        args.tweets, catalog, keep_unknown=getattr(args, "keep_unknown", False)
    )


# --- subcommands ------------------------------------------------------------


def cmd_ingest(args) -> int:
    dataset = _load_dataset(args)
    _write_json(dataset.summary, args.out)
    return 0


def cmd_summary(args) -> int:
    dataset = _load_dataset(args)
    summary = dataset.summary
    if args.format == "json":
        _write_json(summary, args.out)
        return 0
    lines = [
        f"{'market':<10} {'companies':>9} {'median cap':>14} {'users':>8} "
        f"{'tweets':>8} {'retweets':>8} {'rt %':>6}"
    ]
    for market, cell in summary["per_market"].items():
        lines.append(
            f"{market:<10} {cell['companies']:>9} {cell['median_capitalization']:>14.3e} "
            f"{cell['users']:>8} {cell['tweets']:>8} {cell['retweets']:>8} "
            f"{100 * cell['retweet_fraction']:>6.1f}"
        )
    lines.append(
        f"{'TOTAL':<10} {sum(c['companies'] for c in summary['per_market'].values()):>9} "
        f"{'':>14} {summary['distinct_users']:>8} {summary['kept']:>8} "
        f"{summary['retweets']:>8} {100 * summary['retweet_fraction']:>6.1f}"
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_peaks(args) -> int:
    dataset = _load_dataset(args)
    if args.tickers:
        tickers = [t.strip().upper() for t in args.tickers.split(",") if t.strip()]
        missing = [t for t in tickers if t not in dataset.index]
        if missing:
            raise UnknownTicker(", ".join(missing))
    else:
        tickers = sorted(dataset.index)

    series_list = [build_hourly_series(dataset, t) for t in tickers]
    rows = []
    for series in series_list:
        for peak in detect_peaks(series, args.k):
            tweet_set = collect_peak_tweets(dataset, peak)
            rows.append(
                {
                    "ticker": peak.ticker,
                    "hour_utc": isoformat_z(peak.hour_utc),
                    "volume": peak.volume,
                    "mean": peak.mean,
                    "sigma": peak.sigma,
                    "threshold": peak.threshold,
                    "k": peak.k,
                    "retweet_fraction": tweet_set.retweet_fraction,
                    "mean_cashtags_per_tweet": tweet_set.mean_cashtags_per_tweet,
                }
            )
    rows.sort(key=lambda r: (r["hour_utc"], r["ticker"]))
    _write_json(rows, args.out)

    if args.curve:
        curve = peak_count_curve(series_list, _parse_ks(args.curve_ks))
        handle, writer = _open_csv(args.curve)
        with handle:
            writer.writerow(["k", "peaks"])
            writer.writerows(curve)
    return 0


def _peak_positions(dataset, peaks_path: str) -> list[int]:
    """Union of tweet positions behind the peaks listed in a peaks.json."""
    with open(peaks_path, encoding="utf-8") as handle:
        rows = json.load(handle)
    positions: set[int] = set()
    from datetime import datetime, timezone

    for row in rows:
        ticker = row["ticker"]
        if ticker not in dataset.index:
            raise UnknownTicker(f"{ticker} from {peaks_path} is not in the dataset")
        stamp = row["hour_utc"]
        lo = datetime.fromisoformat(
            stamp[:-1] + "+00:00" if stamp.endswith("Z") else stamp
        ).astimezone(timezone.utc)
        hi = lo + HOUR
        for pos in dataset.index[ticker]:
            if lo <= dataset.tweets[pos].created_at < hi:
                positions.add(pos)
    return sorted(positions)


def cmd_graph(args) -> int:
    dataset = _load_dataset(args)
    positions = _peak_positions(dataset, args.peaks) if args.peaks else None
    graph = build_graph(dataset, positions)
    if args.min_degree > 1:
        graph = filter_by_degree(graph, args.min_degree)

    handle, writer = _open_csv(args.out)
    with handle:
        writer.writerow(["src", "dst", "weight"])
        for (src, dst), weight in sorted(graph.weights.items()):
            writer.writerow([src, dst, weight])

    stem, ext = os.path.splitext(args.out)
    nodes_path = f"{stem}.nodes{ext or '.csv'}"
    handle, writer = _open_csv(nodes_path)
    with handle:
        writer.writerow(["ticker", "market", "capitalization", "degree"])
        for ticker in graph.nodes():
            writer.writerow(
                [
                    ticker,
                    graph.node_market[ticker],
                    graph.node_cap[ticker],
                    graph.degree(ticker),
                ]
            )

    if args.assortativity:
        markets = [None] + [
            m for m in dataset.catalog.markets() if m != "OTHERS"
        ]
        fits = []
        for market in markets:
            try:
                fits.append(capitalization_assortativity(graph, market))
            except TooFewPoints:
                continue
        handle, writer = _open_csv(args.assortativity)
        with handle:
            writer.writerow(["market", "ticker", "log10_cap", "log10_neighbor_cap"])
            for fit in fits:
                label = fit.market or "ALL"
                for ticker, x, y in zip(fit.tickers, fit.x, fit.y):
                    writer.writerow([label, ticker, float(x), float(y)])
        stem, ext = os.path.splitext(args.assortativity)
        fits_path = f"{stem}.fits{ext or '.csv'}"
        handle, writer = _open_csv(fits_path)
        with handle:
            writer.writerow(["market", "slope", "intercept", "n_points", "excluded"])
            for fit in fits:
                writer.writerow(
                    [fit.market or "ALL", fit.slope, fit.intercept, fit.n_points, fit.excluded]
                )
    return 0


def cmd_detect(args) -> int:
    config = load_detect_config(args.config) if args.config else DetectConfig()
    if args.k is not None:
        config.k = args.k
    dataset = _load_dataset(args)
    inputs = {
        "tweets": args.tweets,
        "companies": args.companies,
        "tweets_sha256": _sha256(args.tweets),
        "companies_sha256": _sha256(args.companies),
    }
    report = run_detection(dataset, seed=args.seed, config=config, inputs=inputs)
    text = report_to_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    config = load_synth_config(args.config) if args.config else SynthConfig()
    truth = write_fixture(
        config, args.seed, args.out_tweets, args.out_companies, args.out_truth
    )
    _write_json(
        {
            "tweets": truth["counts"]["tweets"],
            "background_tweets": truth["counts"]["background_tweets"],
            "campaign_tweets": truth["counts"]["campaign_tweets"],
            "companies": truth["counts"]["companies"],
            "campaigns": len(truth["campaigns"]),
            "expected_peaks": sum(len(c["expected_peaks"]) for c in truth["campaigns"]),
        },
        None,
    )
    return 0


def cmd_evaluate(args) -> int:
    with open(args.report, encoding="utf-8") as handle:
        report = json.load(handle)
    with open(args.truth, encoding="utf-8") as handle:
        truth = json.load(handle)
    _write_json(evaluate(report, truth), args.out)
    return 0


# --- export -----------------------------------------------------------------


def export_plot_data(report: dict, out_dir: str, figures: bool = True) -> list[str]:
    """Write the plot-ready CSV bundle (and figures) for a report."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def path_of(name: str) -> str:
        written.append(os.path.join(out_dir, name))
        return written[-1]

    handle, writer = _open_csv(path_of("volume_profile.csv"))
    with handle:
        writer.writerow(["hour_of_day", "mean_tweets"])
        for hour, value in enumerate(report["baselines"]["volume_by_hour_of_day"]):
            writer.writerow([hour, value])

    handle, writer = _open_csv(path_of("peak_count_vs_k.csv"))
    with handle:
        writer.writerow(["k", "peaks"])
        for row in report["peak_count_curve"]:
            writer.writerow([row["k"], row["peaks"]])

    handle, writer = _open_csv(path_of("entropy_by_level.csv"))
    with handle:
        writer.writerow(["level", "scope", "bin_left", "bin_right", "count"])
        hists = report["baselines"]["entropy_histograms"]
        for level in sorted(hists, key=int):
            cell = hists[level]
            edges = cell["bin_edges"]
            for scope in ("all", "peaks"):
                for left, right, count in zip(edges, edges[1:], cell[scope]):
                    writer.writerow([level, scope, left, right, count])

    handle, writer = _open_csv(path_of("cap_spread_vs_x.csv"))
    with handle:
        writer.writerow(
            ["x", "bootstrap_mean_std", "bootstrap_std_of_stds",
             "observed_mean_std", "observed_tweets"]
        )
        bootstrap = report["baselines"]["bootstrap"]
        observed = report["baselines"]["observed_spread_by_x"]
        for x in sorted(bootstrap, key=int):
            obs = observed.get(x, {})
            writer.writerow(
                [
                    x,
                    bootstrap[x]["mean_std"],
                    bootstrap[x]["std_of_stds"],
                    obs.get("mean_std"),
                    obs.get("tweets", 0),
                ]
            )

    handle, writer = _open_csv(path_of("rank_correlations.csv"))
    with handle:
        writer.writerow(["market", "scope", "rho", "tau", "n"])
        for market, cells in sorted(report["rank_correlations"].items()):
            for scope in ("all", "peaks"):
                cell = cells[scope]
                writer.writerow([market, scope, cell["rho"], cell["tau"], cell["n"]])

    handle, writer = _open_csv(path_of("assortativity_points.csv"))
    with handle:
        writer.writerow(["market", "ticker", "log10_cap", "log10_neighbor_cap"])
        for market, cell in sorted(report.get("assortativity", {}).items()):
            for point in cell.get("points", []):
                writer.writerow(
                    [market, point["ticker"], point["log10_cap"], point["log10_neighbor_cap"]]
                )
    handle, writer = _open_csv(path_of("assortativity_fits.csv"))
    with handle:
        writer.writerow(["market", "slope", "intercept", "n_points", "excluded"])
        for market, cell in sorted(report.get("assortativity", {}).items()):
            if "slope" in cell:
                writer.writerow(
                    [market, cell["slope"], cell["intercept"], cell["n_points"], cell["excluded"]]
                )

    handle, writer = _open_csv(path_of("social_financial.csv"))
    with handle:
        writer.writerow(
            ["ticker", "market", "capitalization", "social_importance",
             "peaks_seen", "sector"]
        )
        for row in report["social_financial"]["table"]:
            writer.writerow(
                [row["ticker"], row["market"], row["capitalization"],
                 row["social_importance"], row["peaks_seen"], row["sector"]]
            )

    handle, writer = _open_csv(path_of("sector_summary.csv"))
    with handle:
        writer.writerow(["market", "A", "B", "C", "D"])
        for market, tally in sorted(report["social_financial"]["sectors"].items()):
            writer.writerow([market, tally["A"], tally["B"], tally["C"], tally["D"]])
        splits = report["social_financial"]["splits"]
        if splits:
            writer.writerow(["SPLIT_FINANCIAL", splits["financial"], "", "", ""])
            writer.writerow(["SPLIT_SOCIAL", splits["social"], "", "", ""])

    for market, cell in sorted(report["social_financial"].get("kde", {}).items()):
        if "density" not in cell:
            continue
        handle, writer = _open_csv(path_of(f"kde_{market}.csv"))
        with handle:
            writer.writerow(["log10_capitalization", "log10_social", "density"])
            xs = cell["x_log10_capitalization"]
            ys = cell["y_log10_social"]
            for i, x in enumerate(xs):
                for j, y in enumerate(ys):
                    writer.writerow([x, y, cell["density"][i][j]])

    handle, writer = _open_csv(path_of("peaks.csv"))
    with handle:
        level = str(report["meta"]["entropy_level"])
        writer.writerow(
            ["ticker", "hour_utc", "volume", "mean", "sigma", "threshold", "k",
             "n_tweets", "retweet_fraction", "mean_cashtags_per_tweet",
             f"entropy_mean_l{level}", f"entropy_ks_p_l{level}",
             "cap_spread_mean", "cap_spread_excess", "score", "flagged"]
        )
        for peak in report["peaks"]:
            writer.writerow(
                [peak["ticker"], peak["hour_utc"], peak["volume"], peak["mean"],
                 peak["sigma"], peak["threshold"], peak["k"], peak["n_tweets"],
                 peak["retweet_fraction"], peak["mean_cashtags_per_tweet"],
                 peak["entropy_mean_by_level"][level], peak["entropy_ks_p"][level],
                 peak["cap_spread_mean"], peak["cap_spread_excess"],
                 peak["score"], peak["flagged"]]
            )

    handle, writer = _open_csv(path_of("flags.csv"))
    with handle:
        writer.writerow(["ticker", "hour_utc", "score"])
        for flag in report["flags"]:
            writer.writerow([flag["ticker"], flag["hour_utc"], flag["score"]])

    if figures:
        from .plotting import render_all

        written.extend(render_all(report, out_dir))
    return written


def cmd_export(args) -> int:
    with open(args.report, encoding="utf-8") as handle:
        report = json.load(handle)
    written = export_plot_data(report, args.out_dir, figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radar", description=__doc__)
    parser.add_argument("--version", action="version", version=f"radar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_inputs(p):
        p.add_argument("--tweets", required=True, help="tweet stream (JSONL)")
        p.add_argument("--companies", required=True, help="company catalog (CSV)")

    p = sub.add_parser("ingest", help="parse a stream and print ingest counters")
    add_inputs(p)
    p.add_argument("--keep-unknown", action="store_true",
                   help="register unknown tickers under market OTHERS")
    p.add_argument("--out", help="write the summary JSON here (default stdout)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("summary", help="per-market dataset table")
    add_inputs(p)
    p.add_argument("--keep-unknown", action="store_true")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("peaks", help="detect hourly volume peaks")
    add_inputs(p)
    p.add_argument("--k", type=float, default=10.0, help="sensitivity (default 10)")
    p.add_argument("--tickers", help="comma-separated subset (default: all mentioned)")
    p.add_argument("--out", required=True, help="peaks JSON path")
    p.add_argument("--curve", help="also write a peak-count-vs-k CSV here")
    p.add_argument("--curve-ks", default="2:12",
                   help="k grid for --curve: 'lo:hi' or comma list (default 2:12)")
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("graph", help="export the co-occurrence graph")
    add_inputs(p)
    p.add_argument("--peaks", help="restrict to tweets behind these peaks (peaks.json)")
    p.add_argument("--min-degree", type=int, default=1,
                   help="drop nodes below this degree (measured pre-filter)")
    p.add_argument("--out", required=True, help="edges CSV path (nodes sidecar derived)")
    p.add_argument("--assortativity", help="also write assortativity points CSV here")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("detect", help="full detection pass, writes report.json")
    add_inputs(p)
    p.add_argument("--k", type=float, default=None,
                   help="peak sensitivity (overrides config; default 10)")
    p.add_argument("--seed", type=int, required=True, help="bootstrap RNG seed")
    p.add_argument("--config", help="detect TOML (optional)")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="generate a synthetic labeled stream")
    p.add_argument("--config", help="synth TOML (optional, defaults built in)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-tweets", required=True)
    p.add_argument("--out-companies", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="score a report against ground truth")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", help="write the evaluation JSON here (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="write plot-ready CSVs and figures from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true", help="CSVs only")
    p.set_defaults(func=cmd_export)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (RadarError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
