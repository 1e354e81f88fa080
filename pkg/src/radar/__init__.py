"""Radar: a detection pipeline for cashtag piggybacking campaigns.

Promoted low-cap stocks ride the visibility of high-cap ones by being
co-mentioned in the same tweets. The pipeline ingests a tweet stream
plus a company catalog, finds hourly volume peaks per stock, and scores
each peak on retweet share, cashtag density, industry-class entropy,
and capitalization spread against dataset-wide baselines.
"""

__version__ = "0.1.0"

from .errors import RadarError

__all__ = ["RadarError", "__version__"]
