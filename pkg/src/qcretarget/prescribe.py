"""Prescribed dilatation fields for the three distortion-distribution modes.

All modes squeeze the width by ratio w (after axis normalization) and emit a
real, piecewise-constant field: zero on protected faces, the dilatation of an
axis scaling elsewhere.  A horizontal scaling by t has dilatation
(t - 1) / (t + 1), so every prescription is built from that closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beltrami import BeltramiField
from .errors import ExtremalRequiredError, InputError
from .geometry import RegionModel, object_span

CHOICES = ("even", "weak", "strong")


@dataclass(frozen=True)
class RetargetConfig:
    """Requested resize: target width = width_ratio * source width.

    Ratios above 1 are handled upstream by rotating the problem 90 degrees, so
    the working ratio here is always in (0, 1].
    """

    width_ratio: float
    choice: str = "even"
    chessboard: bool = False
    squeeze_axis: str = "horizontal"

    def __post_init__(self):
        if not (self.width_ratio > 0):
            raise InputError("width ratio must be positive", ratio=self.width_ratio)
        if self.choice not in CHOICES:
            raise InputError("unknown choice", choice=self.choice, allowed=CHOICES)
        if self.squeeze_axis not in ("horizontal", "vertical"):
            raise InputError("unknown squeeze axis", axis=self.squeeze_axis)


@dataclass(frozen=True)
class ExtremalParams:
    """Rescaled ratios when the target cannot hold the objects at full size.

    beta is the percentage of the target width the objects should occupy.
    """

    beta: float
    total_width: float
    total_height: float
    w_prime: float
    h: float


def scaling_mu(t: float) -> float:
    """Dilatation of the map (x, y) -> (t*x, y)."""
    return (t - 1.0) / (t + 1.0)


def _protected(regions: RegionModel) -> set[int]:
    return set(regions.objects_union | regions.lines_union)


def _field(n_faces: int, default: float, zones: list[tuple[set[int], float]]) -> BeltramiField:
    values = np.full(n_faces, default, dtype=np.complex128)
    for faces, value in zones:
        if faces:
            values[np.fromiter(faces, dtype=np.int64)] = value
    return BeltramiField(values)


def prescribe_even(config: RetargetConfig, regions: RegionModel) -> BeltramiField:
    """Zero on protected faces, the plain scaling value everywhere else."""
    w = config.width_ratio
    return _field(regions.n_faces, scaling_mu(w), [(_protected(regions), 0.0)])


def _stripe_sets(regions: RegionModel) -> tuple[set[int], set[int], set[int]]:
    mh = set(regions.stripe_h)
    mv = set(regions.stripe_v)
    return mh, mv, mh & mv


def prescribe_weak(config: RetargetConfig, regions: RegionModel, source_width: float) -> BeltramiField:
    """Stronger squeeze inside the horizontal stripe so object sizes survive.

    The stripe left and right of the objects absorbs the width the objects
    keep: its ratio is w' = w - W/m.  w' only needs to be admissible when
    some face actually receives it.
    """
    w = config.width_ratio
    total_w, _ = object_span(regions)
    w_prime = w - total_w / source_width
    mh, mv, both = _stripe_sets(regions)
    if w_prime <= 0 and (mh - mv):
        raise ExtremalRequiredError(
            "target width cannot hold the objects at full size; use extremal mode",
            ratio=w,
            object_width=total_w,
            source_width=source_width,
        )
    return _field(
        regions.n_faces,
        scaling_mu(w),
        [
            (mh - mv, scaling_mu(w_prime) if w_prime > 0 else 0.0),
            (both, 0.0),
            (_protected(regions), 0.0),
        ],
    )


def prescribe_strong(config: RetargetConfig, regions: RegionModel, source_width: float) -> BeltramiField:
    """The stronger squeeze covers everything off the vertical stripe."""
    w = config.width_ratio
    total_w, _ = object_span(regions)
    w_prime = w - total_w / source_width
    mh, mv, _ = _stripe_sets(regions)
    outside = set(range(regions.n_faces)) - mv
    if w_prime <= 0 and outside:
        raise ExtremalRequiredError(
            "target width cannot hold the objects at full size; use extremal mode",
            ratio=w,
            object_width=total_w,
            source_width=source_width,
        )
    return _field(
        regions.n_faces,
        scaling_mu(w_prime) if w_prime > 0 else 0.0,
        [
            (mv, 0.0),
            (_protected(regions), 0.0),
        ],
    )


def extremal_params(
    w: float,
    beta: float,
    total_width: float,
    total_height: float,
    source_height: float,
) -> ExtremalParams:
    """Rescaled ratios for targets narrower than the objects themselves.

    beta percent of the target width goes to the objects; the leftover drives
    the stripe ratio w' = w * (1 - beta/100) / 200, and the object height then
    rescales by h = (n - H*w') / (n - H).
    """
    if not (0.0 < beta < 100.0):
        raise InputError("beta must be a percentage in (0, 100)", beta=beta)
    if total_height >= source_height:
        raise InputError(
            "objects taller than the image cannot be retargeted",
            object_height=total_height,
            image_height=source_height,
        )
    w_prime = w * (1.0 - beta / 100.0) / 200.0
    h = (source_height - total_height * w_prime) / (source_height - total_height)
    return ExtremalParams(
        beta=beta,
        total_width=total_width,
        total_height=total_height,
        w_prime=w_prime,
        h=h,
    )


def prescribe_extremal(
    config: RetargetConfig, regions: RegionModel, params: ExtremalParams
) -> BeltramiField:
    """Extremal-regime field: the scaling values pick up the height rescale h.

    The weak layout follows the stated substitution; even and strong reuse
    their layouts with the same substituted values.
    """
    w = config.width_ratio
    wp, h = params.w_prime, params.h
    stripe_value = (wp - h) / (wp + h)
    outer_value = (w - h) / (w + h)
    mh, mv, both = _stripe_sets(regions)
    if config.choice == "even":
        field = _field(regions.n_faces, outer_value, [(_protected(regions), 0.0)])
    elif config.choice == "weak":
        field = _field(
            regions.n_faces,
            outer_value,
            [
                (mh - mv, stripe_value),
                (both, 0.0),
                (_protected(regions), 0.0),
            ],
        )
    else:
        field = _field(
            regions.n_faces,
            stripe_value,
            [
                (mv, 0.0),
                (_protected(regions), 0.0),
            ],
        )
    return field.clamped()


def needs_extremal(w: float, regions: RegionModel, source_width: float) -> bool:
    """True when the requested width cannot hold the objects at full size."""
    total_w, _ = object_span(regions)
    return w * source_width <= total_w and total_w > 0


def prescribe(
    config: RetargetConfig,
    regions: RegionModel,
    source_width: float,
) -> BeltramiField:
    """Dispatch on the configured choice (non-extremal regime)."""
    if config.choice == "even":
        return prescribe_even(config, regions)
    if config.choice == "weak":
        return prescribe_weak(config, regions, source_width)
    return prescribe_strong(config, regions, source_width)
