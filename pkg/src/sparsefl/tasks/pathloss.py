"""Log-distance path-loss capacity model for heterogeneous uplinks.

PL(d) = A + 10 * exponent * log10(d / d0) + Z, with intercept
A = 20 log10(4 pi d0 f_c / c) and dB-domain Gaussian shadowing Z.  The SNR
of a device is a fixed transmit scale minus its path loss; the per-round
bit budget follows the Shannon rate over the uplink slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PathLossModel:
    carrier_hz: float = 2.4e9
    exponent: float = 4.0
    d0_m: float = 100.0
    sigma_db: float = math.sqrt(8.7)
    scale_db: float = 0.0  # transmit power scale P_S; see calibrate_scale_db
    bandwidth_hz: float = 1e6
    uplink_time_s: float = 1e-3

    @property
    def intercept_db(self) -> float:
        return 20.0 * math.log10(4.0 * math.pi * self.d0_m * self.carrier_hz / SPEED_OF_LIGHT)

    def pathloss_db(self, distance_m: float, shadow_db: float = 0.0) -> float:
        if distance_m < self.d0_m:
            raise ValueError(f"distance {distance_m} m below reference {self.d0_m} m")
        return (
            self.intercept_db
            + 10.0 * self.exponent * math.log10(distance_m / self.d0_m)
            + shadow_db
        )

    def snr_db(self, distance_m: float, shadow_db: float = 0.0) -> float:
        return self.scale_db - self.pathloss_db(distance_m, shadow_db)

    def capacity_bits(self, distance_m: float, shadow_db: float = 0.0) -> int:
        snr_lin = 10.0 ** (self.snr_db(distance_m, shadow_db) / 10.0)
        return int(self.bandwidth_hz * self.uplink_time_s * math.log2(1.0 + snr_lin))


def mean_log10_distance_ratio(d_min: float, d_max: float, d0: float) -> float:
    """E[log10(d / d0)] for d uniform on [d_min, d_max], in closed form."""
    if not d0 <= d_min < d_max:
        raise ValueError("need d0 <= d_min < d_max")

    def antideriv(x: float) -> float:
        return x * (math.log(x / d0) - 1.0)

    return (antideriv(d_max) - antideriv(d_min)) / ((d_max - d_min) * math.log(10.0))


def calibrate_scale_db(
    d_min: float = 100.0,
    d_max: float = 1000.0,
    target_mean_snr_db: float = 10.0,
    model: PathLossModel | None = None,
) -> float:
    """Transmit scale that puts the population-average SNR at the target.

    Uses the closed-form mean path loss over uniformly placed devices; the
    zero-mean shadowing drops out of the average.
    """
    base = model if model is not None else PathLossModel()
    mean_pl = base.intercept_db + 10.0 * base.exponent * mean_log10_distance_ratio(
        d_min, d_max, base.d0_m
    )
    return target_mean_snr_db + mean_pl


def capacity_from_pathloss(
    distance_m: float,
    rng: np.random.Generator,
    model: PathLossModel | None = None,
) -> int:
    """Per-round uplink bit budget for one device; shadowing drawn from rng."""
    if model is None:
        model = PathLossModel(scale_db=calibrate_scale_db())
    shadow = float(rng.normal(0.0, model.sigma_db))
    return model.capacity_bits(distance_m, shadow)
