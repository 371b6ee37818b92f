"""Distribution distances and per-image harmonization reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyForeground
from .histogram import Histogram, NormalizedCdf


@dataclass(frozen=True)
class HarmonizeReport:
    """What one harmonization run did to one image."""

    foreground_count: int
    dropped_zero_valued: int
    zeroed_outside_mask: int
    pre_distance: float
    post_distance: float
    rebin_applied: bool

    def __post_init__(self):
        if min(self.foreground_count, self.dropped_zero_valued, self.zeroed_outside_mask) < 0:
            raise ValueError("counts must be non-negative")
        if self.pre_distance < 0 or self.post_distance < 0:
            raise ValueError("distances must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def cdf_l1(a: NormalizedCdf, b: NormalizedCdf) -> float:
    """L1 gap between two CDFs over the normalized intensity axis.

    Equals the 1-Wasserstein distance between the underlying intensity
    distributions, with intensities rescaled to [0, 1].
    """
    if a.bit_depth != b.bit_depth:
        raise DimensionMismatch(f"bit depths differ: {a.bit_depth} vs {b.bit_depth}")
    return float(np.abs(a.values - b.values).sum() / ((1 << a.bit_depth) - 1))


def _smoothed_freq(freq: np.ndarray, epsilon: float) -> np.ndarray:
    sm = freq + epsilon
    return sm / sm.sum()


def _kl_from_freq(p: np.ndarray, q: np.ndarray, epsilon: float) -> float:
    sp = _smoothed_freq(p, epsilon)
    sq = _smoothed_freq(q, epsilon)
    return float(np.sum(sp * np.log(sp / sq)))


def kl_divergence(p: Histogram, q: Histogram, epsilon: float = 1e-9) -> float:
    """KL divergence between foreground frequency distributions.

    Frequencies are epsilon-smoothed and renormalized so disjoint supports
    stay finite and comparable across images.
    """
    if p.bit_depth != q.bit_depth:
        raise DimensionMismatch(f"bit depths differ: {p.bit_depth} vs {q.bit_depth}")
    if p.total == 0 or q.total == 0:
        raise EmptyForeground("KL divergence needs non-empty histograms")
    return _kl_from_freq(p.counts[1:] / p.total, q.counts[1:] / q.total, epsilon)


def cdf_freq(cdf: NormalizedCdf) -> np.ndarray:
    """Per-bin frequencies over bins >= 1, recovered from the cumulative form."""
    return np.diff(cdf.values)


@dataclass(frozen=True)
class GapReport:
    """Within/cross-group CDF distances for two groups against a reference."""

    group_a_size: int
    group_b_size: int
    within_a_mean: float
    within_a_max: float
    within_b_mean: float
    within_b_max: float
    cross_mean: float
    cross_max: float
    to_ref_a_mean: float
    to_ref_a_max: float
    to_ref_b_mean: float
    to_ref_b_max: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pairwise(group: list[NormalizedCdf]) -> list[float]:
    return [
        cdf_l1(group[i], group[j])
        for i in range(len(group))
        for j in range(i + 1, len(group))
    ]


def _mean_max(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    return float(np.mean(values)), float(max(values))


def gap_report(
    group_a: list[NormalizedCdf],
    group_b: list[NormalizedCdf],
    ref: NormalizedCdf,
) -> GapReport:
    """Aggregate cdf_l1 distances within, across, and toward the reference."""
    if not group_a or not group_b:
        raise ValueError("both groups must be non-empty")
    cross = [cdf_l1(a, b) for a in group_a for b in group_b]
    wa_mean, wa_max = _mean_max(_pairwise(group_a))
    wb_mean, wb_max = _mean_max(_pairwise(group_b))
    cr_mean, cr_max = _mean_max(cross)
    ra_mean, ra_max = _mean_max([cdf_l1(a, ref) for a in group_a])
    rb_mean, rb_max = _mean_max([cdf_l1(b, ref) for b in group_b])
    return GapReport(
        group_a_size=len(group_a),
        group_b_size=len(group_b),
        within_a_mean=wa_mean,
        within_a_max=wa_max,
        within_b_mean=wb_mean,
        within_b_max=wb_max,
        cross_mean=cr_mean,
        cross_max=cr_max,
        to_ref_a_mean=ra_mean,
        to_ref_a_max=ra_max,
        to_ref_b_mean=rb_mean,
        to_ref_b_max=rb_max,
    )
