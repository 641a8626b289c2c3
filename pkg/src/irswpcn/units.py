"""Unit conversions. All internal computation uses Watts/Joules/seconds;
dB/dBm values appear only at the config boundary."""

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError(f"cannot express non-positive power {watts} W in dBm")
    return 10.0 * np.log10(watts) + 30.0


def db_to_linear_power(db: float) -> float:
    """Power ratio from dB (e.g. path-loss reference gain)."""
    return 10.0 ** (db / 10.0)


def db_to_linear_amplitude(db: float) -> float:
    """Amplitude ratio from dB (e.g. the reflection amplitude cap)."""
    return 10.0 ** (db / 20.0)
