"""Exception types shared across the radar pipeline.

Every error raised on bad input or a violated contract derives from
RadarError so callers (and the CLI) can separate input problems from
genuine bugs.
"""

from __future__ import annotations


class RadarError(Exception):
    """Base class for all pipeline errors."""


# --- ingest ---------------------------------------------------------------

class MalformedRecord(RadarError):
    """A tweet line is not valid JSON or violates the record schema."""


class MalformedRow(RadarError):
    """A company CSV row violates the catalog schema."""


class DuplicateTicker(RadarError):
    """The same ticker appears twice in a company catalog."""


class MissingCapitalization(RadarError):
    """A catalog row has neither capitalization nor price and share count."""


# --- timeseries -----------------------------------------------------------

class UnknownTicker(RadarError):
    """Requested ticker is absent from the dataset index."""


class EmptySpan(RadarError):
    """A time span covers less than one full hour."""


class NonPositiveK(RadarError):
    """Peak detection called with k <= 0."""


class StalePeak(RadarError):
    """A Peak does not match the dataset it is being resolved against."""


# --- stats ----------------------------------------------------------------

class EmptyVector(RadarError):
    """Entropy requested for an empty class vector."""


class EmptySample(RadarError):
    """A two-sample test received an empty sample."""


class EmptyList(RadarError):
    """A spread statistic received an empty capitalization list."""


class GroupTooLarge(RadarError):
    """Bootstrap group size exceeds the catalog size."""


class LengthMismatch(RadarError):
    """Paired vectors differ in length."""


class ZeroVariance(RadarError):
    """A correlation input is constant, the coefficient is undefined."""


class DegeneratePoints(RadarError):
    """A 2-d density cannot be estimated because points have no spread."""


class TooFewPoints(RadarError):
    """Not enough points for a fit or a density estimate."""


# --- detect ---------------------------------------------------------------

class MissingBaseline(RadarError):
    """Peak scoring requires a baseline that was not computed."""


class BadWeights(RadarError):
    """Score weights are negative or do not sum to one."""


class NoPeaks(RadarError):
    """An analysis step requires at least one peak."""


# --- synth / evaluate -----------------------------------------------------

class ConfigInvalid(RadarError):
    """A generator or detector config value is out of range.

    The message names the offending field path.
    """


class StreamMismatch(RadarError):
    """A report and a ground truth refer to different tweet streams."""
