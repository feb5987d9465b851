"""Directional-antenna cone geometry and dB link-budget arithmetic.

Positions are 3-vectors in metres, powers and losses in dB. Every antenna
illuminates a right circular cone (height ``effective_range_m``, opening
angle ``opening_angle_rad``) steered along an aim vector; a receiver outside
the cone picks up no power at all, which the optional-returning helpers
represent as ``None`` (and the broadcasting helper as NaN).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AntennaParams:
    """Conic transmit lobe: height and full opening angle."""

    effective_range_m: float
    opening_angle_rad: float

    def __post_init__(self):
        if not self.effective_range_m > 0:
            raise ValueError("effective_range_m must be > 0")
        if not 0.0 < self.opening_angle_rad < math.pi:
            raise ValueError("opening_angle_rad must lie in (0, pi)")


@dataclass(frozen=True)
class RfParams:
    """Log-distance path-loss constants plus the discrete transmit levels.

    ``power_levels_db[0]`` is the distinguished "off" level (stored as None);
    the remaining entries are transmit powers in dB, strictly increasing.
    """

    near_field_loss_db: float
    path_loss_exponent: float
    attenuation_db: float
    power_levels_db: tuple
    interference_threshold_db: float

    def __post_init__(self):
        if not self.path_loss_exponent > 0:
            raise ValueError("path_loss_exponent must be > 0")
        levels = tuple(self.power_levels_db)
        if len(levels) < 1 or levels[0] is not None:
            raise ValueError("power_levels_db must start with the 'off' entry")
        on = [float(v) for v in levels[1:]]
        if any(b <= a for a, b in zip(on, on[1:])):
            raise ValueError("transmit power levels must be strictly increasing")
        object.__setattr__(self, "power_levels_db", (None, *on))

    def level_db(self, index: int):
        """Power of level ``index`` in dB, or None for the off level."""
        return self.power_levels_db[index]


def _distance(a, b):
    delta = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return np.sqrt((delta * delta).sum(axis=-1))


def path_loss_db(tx_pos, rx_pos, rf: RfParams):
    """Log-distance path loss in dB between two points.

    Broadcasts over a trailing (..., 3) axis on either endpoint. Raises on
    coincident endpoints, where the log-distance model is singular.
    """
    dist = _distance(tx_pos, rx_pos)
    if np.any(dist == 0.0):
        raise ValueError("coincident endpoints: path loss undefined at zero distance")
    loss = rf.near_field_loss_db + 10.0 * rf.path_loss_exponent * np.log10(dist) + rf.attenuation_db
    return float(loss) if np.ndim(loss) == 0 else loss


def _cone_mask(apex, axis_target, ant: AntennaParams, point):
    """(inside, degenerate) masks; degenerate axes never contain anything."""
    apex = np.asarray(apex, dtype=float)
    axis = np.asarray(axis_target, dtype=float) - apex
    axis_norm = np.sqrt((axis * axis).sum(axis=-1))
    degenerate = axis_norm == 0.0
    safe_norm = np.where(degenerate, 1.0, axis_norm)
    unit = axis / (safe_norm[..., None] if np.ndim(safe_norm) else safe_norm)
    v = np.asarray(point, dtype=float) - apex
    along = (v * unit).sum(axis=-1)
    vnorm = np.sqrt((v * v).sum(axis=-1))
    cos_half = math.cos(ant.opening_angle_rad / 2.0)
    inside = (
        (vnorm > 0.0)
        & (along <= ant.effective_range_m)
        & (along >= vnorm * cos_half)
        & ~degenerate
    )
    return inside, degenerate


def cone_contains(apex, axis_target, ant: AntennaParams, point):
    """True where ``point`` lies inside the cone aimed from apex at axis_target.

    Membership requires the angle off the axis to be at most half the opening
    angle and the axial projection to fall within [0, effective_range_m]. The
    apex itself is excluded. Broadcasts over (..., 3) on any argument.
    """
    inside, degenerate = _cone_mask(apex, axis_target, ant, point)
    if np.any(degenerate):
        raise ValueError("cone axis undefined: axis_target coincides with apex")
    return bool(inside) if np.ndim(inside) == 0 else inside


def received_power_map(tx_power_db: float, tx_pos, tx_aim, ant: AntennaParams, rf: RfParams, rx_pos):
    """Received power in dB with cone gating; NaN where the receiver is uncovered.

    Vectorized workhorse behind :func:`received_power_db`; broadcasts over a
    trailing (..., 3) axis on transmitter or receiver positions. An antenna
    whose aim coincides with its own position covers nothing.
    """
    inside, _ = _cone_mask(tx_pos, tx_aim, ant, rx_pos)
    delta = np.asarray(rx_pos, dtype=float) - np.asarray(tx_pos, dtype=float)
    dist = np.sqrt((delta * delta).sum(axis=-1))
    safe = np.where(dist > 0.0, dist, 1.0)
    loss = rf.near_field_loss_db + 10.0 * rf.path_loss_exponent * np.log10(safe) + rf.attenuation_db
    return np.where(inside, tx_power_db - loss, np.nan)


def received_power_db(tx_power_db, tx_pos, tx_aim, ant: AntennaParams, rf: RfParams, rx_pos):
    """Power in dB delivered to ``rx_pos``; None when off or outside the cone."""
    if tx_power_db is None:
        return None
    value = received_power_map(float(tx_power_db), tx_pos, tx_aim, ant, rf, rx_pos)
    if np.ndim(value) != 0:
        raise ValueError("received_power_db expects scalar endpoints")
    return None if np.isnan(value) else float(value)


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def aggregate_power_db(contributions_db):
    """Sum dB contributions in the linear power domain; None for no input."""
    vals = list(contributions_db)
    if not vals:
        return None
    total = db_to_linear(np.asarray(vals, dtype=float)).sum()
    return float(linear_to_db(total))
