"""Detection scoring, baselines, and the report document."""

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from helpers import company, make_dataset, tweet_line
from radar.detect import (
    DEFAULT_SCALES,
    DEFAULT_THRESHOLD,
    DEFAULT_WEIGHTS,
    Baselines,
    DetectConfig,
    PeakAnalysis,
    analyze_peak,
    check_weights,
    compute_baselines,
    config_digest,
    isoformat_z,
    load_detect_config,
    report_to_json,
    run_detection,
    score_peak,
)
from radar.errors import BadWeights, ConfigInvalid, MissingBaseline
from radar.timeseries import Peak, build_hourly_series, detect_peaks

T0 = datetime(2017, 5, 1, tzinfo=timezone.utc)


# --- config ------------------------------------------------------------------


def test_default_config_is_valid():
    config = DetectConfig()
    config.validate()
    assert config.k == 10.0
    assert config.weights == DEFAULT_WEIGHTS
    assert config.scales == DEFAULT_SCALES
    assert config.threshold == DEFAULT_THRESHOLD
    assert config.entropy_level == 5


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: setattr(c, "k", 0.0),
        lambda c: setattr(c, "k", -3.0),
        lambda c: setattr(c, "entropy_level", 0),
        lambda c: setattr(c, "entropy_level", 6),
        lambda c: setattr(c, "bootstrap_samples", 0),
        lambda c: setattr(c, "bootstrap_x_max", 1),
        lambda c: setattr(c, "threshold", 1.5),
        lambda c: setattr(c, "scales", {"retweet": 1.0}),
        lambda c: setattr(c, "scales", dict(DEFAULT_SCALES, retweet=0.0)),
    ],
)
def test_config_validation_rejects(mutate):
    config = DetectConfig()
    mutate(config)
    with pytest.raises((ConfigInvalid, BadWeights)):
        config.validate()


def test_check_weights():
    check_weights(dict(DEFAULT_WEIGHTS))
    with pytest.raises(BadWeights):
        check_weights({"retweet": 1.0})  # missing keys
    with pytest.raises(BadWeights):
        check_weights(dict(DEFAULT_WEIGHTS, retweet=0.5))  # sum != 1
    bad = dict(DEFAULT_WEIGHTS, retweet=-0.25, cashtags=0.75)
    with pytest.raises(BadWeights):
        check_weights(bad)


def test_load_detect_config_overrides_and_merges(tmp_path):
    path = tmp_path / "detect.toml"
    path.write_text(
        'k = 8\nthreshold = 0.7\n[scales]\nretweet = 0.5\n'
    )
    config = load_detect_config(str(path))
    assert config.k == 8.0
    assert config.threshold == 0.7
    assert config.scales["retweet"] == 0.5
    assert config.scales["cashtags"] == DEFAULT_SCALES["cashtags"]  # merged
    assert config.weights == DEFAULT_WEIGHTS


def test_load_detect_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "detect.toml"
    path.write_text("verbosity = 3\n")
    with pytest.raises(ConfigInvalid):
        load_detect_config(str(path))
    path.write_text("[scales]\nwhatever = 1.0\n")
    with pytest.raises(ConfigInvalid):
        load_detect_config(str(path))


def test_load_detect_config_rejects_bad_weight_sum(tmp_path):
    path = tmp_path / "detect.toml"
    path.write_text("[weights]\nretweet = 0.5\n")
    with pytest.raises(BadWeights):
        load_detect_config(str(path))


def test_shipped_detect_config_matches_defaults():
    path = Path(__file__).resolve().parents[1] / "configs" / "detect.toml"
    assert load_detect_config(str(path)) == DetectConfig()


def test_config_digest_tracks_content():
    a = config_digest(DetectConfig(), 42)
    assert a == config_digest(DetectConfig(), 42)
    assert a != config_digest(DetectConfig(k=9.0), 42)
    assert a != config_digest(DetectConfig(), 43)


def test_isoformat_z():
    assert isoformat_z(datetime(2017, 5, 5, 4, tzinfo=timezone.utc)) == (
        "2017-05-05T04:00:00Z"
    )


# --- scoring ----------------------------------------------------------------


def stub_baselines(rf=0.2, tags=1.5, entropy5=0.3) -> Baselines:
    return Baselines(
        retweet_fraction=rf,
        mean_cashtags_per_tweet=tags,
        entropy=np.empty((0, 5)),
        cap_count=np.zeros(0, dtype=np.int64),
        cap_spread=np.empty(0),
        entropy_sorted={},
        entropy_mean_by_level={level: entropy5 for level in range(1, 6)},
        bootstrap={},
        observed_spread_by_x={},
        volume_by_hour_of_day=[0.0] * 24,
        seed=0,
        samples=1,
    )


def stub_analysis(rf=0.0, tags=1.0, entropy5=None, spread_excess=0.0) -> PeakAnalysis:
    peak = Peak(
        ticker="A", index=0, hour_utc=T0, volume=1, mean=0.0, sigma=0.0,
        threshold=0.0, k=10.0,
    )
    return PeakAnalysis(
        peak=peak,
        positions=(0,),
        n_tweets=1,
        retweet_fraction=rf,
        mean_cashtags_per_tweet=tags,
        entropy_mean_by_level={level: entropy5 for level in range(1, 6)},
        entropy_n=1,
        entropy_ks={level: None for level in range(1, 6)},
        cap_spread_mean=None,
        cap_spread_excess=spread_excess,
        market_mix={},
    )


def test_score_peak_terms_clamp_to_unit_interval():
    blatant = stub_analysis(rf=1.0, tags=9.0, entropy5=1.0, spread_excess=5.0)
    scored = score_peak(blatant, stub_baselines(), DetectConfig())
    assert scored.terms == {
        "retweet": 1.0, "cashtags": 1.0, "entropy": 1.0, "cap_spread": 1.0,
    }
    assert scored.score == 1.0
    assert scored.flagged is True

    quiet = stub_analysis(rf=0.0, tags=1.0, entropy5=0.0, spread_excess=-2.0)
    scored = score_peak(quiet, stub_baselines(), DetectConfig())
    assert scored.terms == {
        "retweet": 0.0, "cashtags": 0.0, "entropy": 0.0, "cap_spread": 0.0,
    }
    assert scored.score == 0.0
    assert scored.flagged is False


def test_score_peak_hand_values():
    # Excesses of half a scale each give terms of 0.5.
    analysis = stub_analysis(
        rf=0.2 + 0.15, tags=1.5 + 1.5, entropy5=0.3 + 0.125, spread_excess=0.5
    )
    scored = score_peak(analysis, stub_baselines(), DetectConfig())
    for term in scored.terms.values():
        assert term == pytest.approx(0.5)
    assert scored.score == pytest.approx(0.5)
    assert scored.flagged is False  # 0.5 < 0.65


def test_score_peak_threshold_boundary_flags():
    config = DetectConfig(threshold=0.5)
    analysis = stub_analysis(rf=1.0, tags=9.0)  # two saturated terms, two zero
    scored = score_peak(analysis, stub_baselines(entropy5=0.0), config)
    assert scored.score == 0.5
    assert scored.flagged is True  # >= is inclusive


def test_score_peak_missing_entropy_contributes_zero():
    analysis = stub_analysis(entropy5=None)
    scored = score_peak(analysis, stub_baselines(), DetectConfig())
    assert scored.terms["entropy"] == 0.0


def test_score_peak_monotone_in_every_signal():
    rng = np.random.default_rng(41)
    config = DetectConfig()
    base = stub_baselines()
    for _ in range(200):
        rf = float(rng.uniform(0, 1))
        tags = float(rng.uniform(1, 8))
        ent = float(rng.uniform(0, 1))
        spread = float(rng.uniform(-1, 3))
        score = score_peak(
            stub_analysis(rf, tags, ent, spread), base, config
        ).score
        bumped = [
            stub_analysis(min(1.0, rf + 0.1), tags, ent, spread),
            stub_analysis(rf, tags + 0.5, ent, spread),
            stub_analysis(rf, tags, min(1.0, ent + 0.1), spread),
            stub_analysis(rf, tags, ent, spread + 0.2),
        ]
        for analysis in bumped:
            assert score_peak(analysis, base, config).score >= score - 1e-12


# --- baselines and peak analysis ----------------------------------------------


def small_catalog():
    return [
        company("CARA", "NASDAQ", 1e9, sector="Tech"),
        company("CARB", "NASDAQ", 2e9, sector="Tech"),
        company("NYA", "NYSE", 5e8, sector="Fin"),
        company("NYB", "NYSE", 6e8, sector="Fin"),
        company("TGA", "OTCMKTS", 1e4, sector="Energy"),
        company("TGB", "OTCMKTS", 2e4, sector="Health"),
        company("TGC", "OTCMKTS", 3e4, sector="Mining"),
    ]


def campaign_stream() -> list[str]:
    """10 days of steady single-tag chatter plus one burst at hour 100.

    Background: carriers hourly, NYSE every 2 hours, targets every 4,
    all originals. Burst: 30 tweets tagging both carriers and all three
    targets, all but the first retweets of the first.
    """
    lines = []
    n = 0
    for hour in range(240):
        created = (T0 + timedelta(hours=hour)).isoformat()
        for ticker, period in [
            ("CARA", 1), ("CARB", 1), ("NYA", 2), ("NYB", 2),
            ("TGA", 4), ("TGB", 4), ("TGC", 4),
        ]:
            if hour % period == 0:
                n += 1
                lines.append(
                    tweet_line(
                        f"b{n:05d}",
                        created,
                        f"watching ${ticker} today",
                        user=f"u{n % 60}",
                    )
                )
    burst_time = (T0 + timedelta(hours=100)).isoformat()
    text = "pump $CARA $CARB $TGA $TGB $TGC now"
    lines.append(tweet_line("c00", burst_time, text, user="bot0"))
    for i in range(1, 30):
        lines.append(
            tweet_line(
                f"c{i:02d}", burst_time, "RT @bot0: " + text,
                user=f"bot{i}", retweet_of="c00",
            )
        )
    return lines


@pytest.fixture(scope="module")
def campaign_dataset():
    return make_dataset(campaign_stream(), small_catalog())


def test_compute_baselines_per_tweet_arrays(campaign_dataset):
    config = DetectConfig(bootstrap_samples=500)
    baselines = compute_baselines(campaign_dataset, config, seed=1)
    n = len(campaign_dataset.tweets)
    assert baselines.entropy.shape == (n, 5)
    # Single-tag background tweet: entropy 0 at every level, no spread.
    assert baselines.entropy[0].tolist() == [0.0] * 5
    assert np.isnan(baselines.cap_spread[0])
    assert baselines.cap_count[0] == 1
    # Burst tweet: 5 companies, 4 distinct sectors at level 5.
    burst_pos = n - 1
    assert baselines.cap_count[burst_pos] == 5
    assert baselines.cap_spread[burst_pos] > 0
    expected_l5 = (
        -(0.4 * np.log2(0.4) + 3 * 0.2 * np.log2(0.2)) / np.log2(5)
    )
    assert baselines.entropy[burst_pos, 4] == pytest.approx(expected_l5)
    # All five companies are distinct at the finest level.
    assert baselines.entropy[burst_pos, 0] == pytest.approx(1.0)
    # Bootstrap covers x = 2..7 on a 7-company catalog.
    assert sorted(baselines.bootstrap) == list(range(2, 8))
    assert baselines.observed_spread_by_x[5]["tweets"] == 30
    # Volume profile is per-day rates over a 10-day span.
    assert len(baselines.volume_by_hour_of_day) == 24
    total = sum(baselines.volume_by_hour_of_day)
    assert total == pytest.approx(n / ((239 * 3600) / 86400.0))


def test_compute_baselines_needs_bootstrappable_catalog():
    ds = make_dataset(
        [tweet_line("t1", "2017-05-01T00:00:00Z", "$A")], [company("A")]
    )
    with pytest.raises(MissingBaseline):
        compute_baselines(ds, DetectConfig(), seed=1)


def test_analyze_peak_slices_the_burst(campaign_dataset):
    config = DetectConfig(bootstrap_samples=500)
    baselines = compute_baselines(campaign_dataset, config, seed=1)
    series = build_hourly_series(campaign_dataset, "TGA")
    peaks = detect_peaks(series, config.k)
    assert len(peaks) == 1
    analysis = analyze_peak(campaign_dataset, baselines, peaks[0])
    assert analysis.n_tweets == 31  # 30 burst + 1 scheduled background
    assert analysis.retweet_fraction == pytest.approx(29 / 31)
    assert analysis.mean_cashtags_per_tweet == pytest.approx((30 * 5 + 1) / 31)
    assert analysis.entropy_n == 31
    # Burst tweets span 1e4..2e9 caps, wider than random quintets from
    # this catalog (which usually hold both billion-cap carriers).
    assert analysis.cap_spread_excess > 0.1
    assert set(analysis.market_mix) == {"NASDAQ", "OTCMKTS"}
    assert sum(analysis.market_mix.values()) == pytest.approx(1.0)


# --- full report ---------------------------------------------------------------


@pytest.fixture(scope="module")
def report(campaign_dataset):
    config = DetectConfig(bootstrap_samples=500)
    inputs = {"tweets_path": "stream.jsonl", "tweets_sha256": "f" * 64}
    return run_detection(campaign_dataset, seed=42, config=config, inputs=inputs)


def test_report_top_level_shape(report):
    assert set(report) == {
        "meta", "baselines", "peaks", "peak_count_curve",
        "rank_correlations", "social_financial", "assortativity", "flags",
    }
    meta = report["meta"]
    assert meta["tool"] == "radar"
    assert meta["k"] == 10.0 and meta["seed"] == 42
    assert meta["rng"] == "numpy-pcg64"
    assert meta["inputs"]["tweets_sha256"] == "f" * 64
    assert len(meta["config_hash"]) == 64
    # 900 scheduled background tweets plus the 30-tweet burst.
    assert report["baselines"]["tweets"] == 930


def test_report_peaks_and_flags(report):
    peaks = report["peaks"]
    assert peaks, "crafted burst must produce peaks"
    burst_hour = "2017-05-05T04:00:00Z"
    assert {p["hour_utc"] for p in peaks} == {burst_hour}
    assert {p["ticker"] for p in peaks} == {"CARA", "CARB", "TGA", "TGB", "TGC"}
    for row in peaks:
        assert set(row["entropy_mean_by_level"]) == {"1", "2", "3", "4", "5"}
        assert set(row["entropy_ks_p"]) == {"1", "2", "3", "4", "5"}
        assert 0.0 <= row["score"] <= 1.0
        assert row["flagged"] is True  # the burst saturates every term
    flags = report["flags"]
    assert [(f["ticker"], f["hour_utc"]) for f in flags] == [
        (p["ticker"], p["hour_utc"]) for p in peaks
    ]
    for f in flags:
        assert f["score"] >= DEFAULT_THRESHOLD


def test_report_baselines_section(report):
    baselines = report["baselines"]
    assert set(baselines["entropy_mean_by_level"]) == {"1", "2", "3", "4", "5"}
    assert sorted(baselines["bootstrap"]) == ["2", "3", "4", "5", "6", "7"]
    for cell in baselines["bootstrap"].values():
        assert cell["rng"] == "numpy-pcg64" and cell["seed"] == 42
    hist = baselines["entropy_histograms"]["5"]
    assert len(hist["bin_edges"]) == 21
    assert sum(hist["all"]) == baselines["tweets"]  # every tweet classified here
    assert sum(hist["peaks"]) > 0
    assert baselines["stocks_mentioned"] == 7


def test_report_curve_and_correlations(report):
    curve = report["peak_count_curve"]
    assert [c["k"] for c in curve] == [float(k) for k in range(2, 13)]
    counts = [c["peaks"] for c in curve]
    assert counts == sorted(counts, reverse=True)
    cells = report["rank_correlations"]
    assert set(cells) == {"NASDAQ", "NYSE", "OTCMKTS"}
    for market in cells.values():
        assert set(market) == {"all", "peaks"}
        for cell in market.values():
            assert set(cell) == {"rho", "tau", "n", "degenerate"}


def test_report_social_financial_section(report):
    social = report["social_financial"]
    table = {row["ticker"]: row for row in social["table"]}
    # Only stocks appearing in peaks are plotted; NYSE never peaks.
    assert set(table) == {"CARA", "CARB", "TGA", "TGB", "TGC"}
    for row in table.values():
        assert row["sector"] in "ABCD"
        assert row["peaks_seen"] >= 1
    # Median mention count over appearing peaks only: every peak set
    # contains the 30 burst tweets, so social importance is >= 30.
    assert all(row["social_importance"] >= 30 for row in table.values())
    assert set(social["splits"]) == {"financial", "social"}
    assert social["kde"]["NYSE"] == {"skipped": "0 plottable stocks"}


def test_report_is_byte_stable(campaign_dataset, report):
    config = DetectConfig(bootstrap_samples=500)
    inputs = {"tweets_path": "stream.jsonl", "tweets_sha256": "f" * 64}
    again = run_detection(campaign_dataset, seed=42, config=config, inputs=inputs)
    assert report_to_json(again) == report_to_json(report)
    other_seed = run_detection(campaign_dataset, seed=7, config=config)
    assert report_to_json(other_seed) != report_to_json(report)


def test_report_to_json_canonical():
    text = report_to_json({"b": 1, "a": [1.5, None]})
    assert text == '{\n  "a": [\n    1.5,\n    null\n  ],\n  "b": 1\n}\n'
    assert json.loads(text) == {"b": 1, "a": [1.5, None]}
    with pytest.raises(ValueError):
        report_to_json({"bad": float("nan")})
