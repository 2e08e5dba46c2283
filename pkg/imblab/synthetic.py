"""
Seeded generator of realistic balancing datasets.

Every series draws from its own random stream, keyed by the seed and the
series name, so adding a series never changes the others. The generated
ACE, aFRR, BM and TERRE series satisfy the relation between ACE, open-loop
ACE and system imbalance by construction.
"""

from __future__ import annotations

import logging
import zlib
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import signal

from imblab.timeseries import FIVE_MINUTES, HALF_HOUR, BalancingDataset, TimeSeries, as_utc, write_manifest

logger = logging.getLogger(__name__)

MINUTE = 60
MINUTES_PER_DAY = 1440


class SyntheticConfig(BaseModel):
    """
    Parameters of a synthetic balancing dataset.

    :param phi:
        autocorrelation of the latent imbalance between consecutive 5-minute steps

    :param innovation_df:
        degrees of freedom of the Student-t shocks driving the latent
        imbalance; None for Gaussian shocks

    :param ar_sigma:
        standard deviation of the autoregressive part of the latent imbalance, in MW

    :param alpha:
        share of each 5-minute mean imbalance offset by BM and TERRE activations

    :param beta:
        weight of the one-hour forecast errors in the latent imbalance

    :param gamma:
        share of open-loop ACE offset by aFRR

    :param ramp_limit:
        largest change of BM plus TERRE activations between 5-minute steps, in MW
    """

    seed: int = 0
    days: int = Field(default=450, gt=0)
    start: datetime = datetime.fromisoformat("2022-05-01T00:00:00+00:00")
    pv_capacity: float = Field(default=16000.0, gt=0)
    wind_capacity: float = Field(default=21000.0, gt=0)
    load_min: float = Field(default=30000.0, ge=0)
    load_max: float = 85000.0
    phi: float = 0.85
    innovation_df: Optional[float] = 3.0
    ar_sigma: float = Field(default=500.0, ge=0)
    daily_amplitude: float = Field(default=600.0, ge=0)
    semi_daily_amplitude: float = Field(default=200.0, ge=0)
    white_noise: float = Field(default=60.0, ge=0)
    forecast_sigma_1h: float = Field(default=300.0, ge=0)
    forecast_sigma_da: float = Field(default=900.0, ge=0)
    alpha: float = Field(default=0.6, ge=0, le=1)
    beta: float = Field(default=0.1, ge=0)
    gamma: float = Field(default=0.3, ge=0, le=1)
    bm_share: float = Field(default=0.7, ge=0, le=1)
    ramp_limit: float = Field(default=1500.0, gt=0)

    @field_validator("start", mode="before")
    @classmethod
    def start_in_utc(cls, value: Union[str, datetime]) -> datetime:
        """Store the start as a UTC datetime."""
        return as_utc(value)

    @field_validator("start", mode="after")
    @classmethod
    def start_at_midnight(cls, value: datetime) -> datetime:
        """Verify the dataset starts at the beginning of a day."""
        if (value.hour, value.minute, value.second, value.microsecond) != (0, 0, 0, 0):
            raise ValueError("Synthetic data must start at midnight UTC.")
        return value

    @field_validator("phi", mode="after")
    @classmethod
    def phi_stationary(cls, value: float) -> float:
        """Verify 0 <= phi < 1."""
        if not 0 <= value < 1:
            raise ValueError("phi must be in [0, 1).")
        return value

    @field_validator("innovation_df", mode="after")
    @classmethod
    def finite_variance(cls, value: Optional[float]) -> Optional[float]:
        """Verify Student-t shocks have a finite variance."""
        if value is not None and value <= 2:
            raise ValueError("innovation_df must exceed 2.")
        return value

    @model_validator(mode="after")
    def load_range(self) -> SyntheticConfig:
        """Verify load_min < load_max."""
        if self.load_min >= self.load_max:
            raise ValueError("load_min must be below load_max.")
        return self


def stream(seed: int, name: str) -> np.random.Generator:
    """Get the random generator of one named series."""
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


def ar1(rng: np.random.Generator, n: int, phi: float, sigma: float,
        df: Optional[float] = None) -> np.ndarray:
    """
    Draw a stationary AR(1) process with standard deviation ``sigma``.

    Shocks are Gaussian, or Student-t with ``df`` degrees of freedom scaled
    to the same variance.
    """
    if df is None:
        shocks = rng.standard_normal(n)
    else:
        shocks = rng.standard_t(df, n) * np.sqrt((df - 2) / df)
    shocks *= sigma * np.sqrt(1 - phi**2)
    first = sigma * rng.standard_normal()
    return signal.lfilter([1.0], [1.0, -phi], shocks, zi=[phi * first])[0]


def _clock(n: int, step: int) -> Tuple[np.ndarray, np.ndarray]:
    """Get the hour of day and the days since the start of ``n`` readings."""
    seconds = np.arange(n) * step
    hours = (seconds % 86400) / 3600
    days = seconds / 86400
    return hours, days


def _day_of_year(cfg: SyntheticConfig, days: np.ndarray) -> np.ndarray:
    return (cfg.start.timetuple().tm_yday - 1 + days) % 365.25


def _load(cfg: SyntheticConfig, n: int) -> np.ndarray:
    hours, days = _clock(n, HALF_HOUR)
    weekday = (cfg.start.weekday() + np.floor(days)) % 7
    diurnal = 0.5 * (1 - np.cos(2 * np.pi * (hours - 4) / 24))
    weekly = np.where(weekday >= 5, 0.8, 1.0)
    seasonal = 0.5 * (1 + np.cos(2 * np.pi * (_day_of_year(cfg, days) - 15) / 365.25))
    noise = ar1(stream(cfg.seed, "load_obs"), n, 0.95, 0.03)
    shape = 0.1 + 0.4 * seasonal + 0.4 * diurnal * weekly + noise
    level = cfg.load_min + (cfg.load_max - cfg.load_min) * shape
    return np.clip(level, cfg.load_min, cfg.load_max)


def _pv(cfg: SyntheticConfig, n: int) -> np.ndarray:
    hours, days = _clock(n, HALF_HOUR)
    summer = np.cos(2 * np.pi * (_day_of_year(cfg, days) - 172) / 365.25)
    daylight = 12 + 4 * summer
    sunrise = 12 - daylight / 2
    elevation = np.sin(np.pi * (hours - sunrise) / daylight)
    envelope = np.where((hours > sunrise) & (hours < sunrise + daylight), elevation, 0.0)
    clouds = np.clip(0.75 + ar1(stream(cfg.seed, "pv_obs"), n, 0.9, 0.2), 0.1, 1.0)
    return cfg.pv_capacity * np.clip(envelope, 0, 1) * (0.6 + 0.2 * summer) * clouds


def _wind(cfg: SyntheticConfig, n: int) -> np.ndarray:
    weather = ar1(stream(cfg.seed, "wind_obs"), n, 0.98, 1.0)
    return cfg.wind_capacity * 0.9 / (1 + np.exp(-(1.2 * weather - 1.0)))


def _forecast(cfg: SyntheticConfig, name: str, observed: np.ndarray, sigma: float,
              ceiling: Optional[float] = None, scale: Optional[np.ndarray] = None) -> np.ndarray:
    error = ar1(stream(cfg.seed, name), len(observed), 0.8, sigma)
    if scale is not None:
        error = error * scale
    return np.clip(observed + error, 0, ceiling)


def _activations(cfg: SyntheticConfig, block_means: np.ndarray) -> np.ndarray:
    """Offset a share of each 5-minute mean imbalance, within the ramp limit."""
    wanted = -cfg.alpha * block_means
    result = np.empty_like(wanted)
    previous = 0.0
    for i, target in enumerate(wanted):
        previous = min(max(target, previous - cfg.ramp_limit), previous + cfg.ramp_limit)
        result[i] = previous
    return result


def generate(cfg: SyntheticConfig) -> BalancingDataset:
    """
    Generate a balancing dataset.

    Observations and forecasts are half-hourly, BM and TERRE activations
    5-minutely, ACE and aFRR minutely. The latent imbalance is an AR(1)
    process plus daily and half-daily cycles, white noise and a share of
    the one-hour forecast errors. BM and TERRE offset a share ``alpha`` of
    each 5-minute mean; the rest is open-loop ACE, of which aFRR offsets a
    share ``gamma``.
    """
    n_half_hours = cfg.days * 48
    n_blocks = cfg.days * 288
    n_minutes = cfg.days * MINUTES_PER_DAY

    def half_hourly(values: np.ndarray, label: str) -> TimeSeries:
        return TimeSeries(start=cfg.start, step=HALF_HOUR, values=values, label=label)

    pv = _pv(cfg, n_half_hours)
    wind = _wind(cfg, n_half_hours)
    load = _load(cfg, n_half_hours)
    daylight = (pv > 0).astype(np.float64)
    forecasts = {}
    for horizon, sigma in (("1h", cfg.forecast_sigma_1h), ("da", cfg.forecast_sigma_da)):
        forecasts[f"pv_fc_{horizon}"] = _forecast(
            cfg, f"pv_fc_{horizon}", pv, sigma, cfg.pv_capacity, scale=daylight
        )
        forecasts[f"wind_fc_{horizon}"] = _forecast(
            cfg, f"wind_fc_{horizon}", wind, sigma, cfg.wind_capacity
        )
        forecasts[f"load_fc_{horizon}"] = _forecast(cfg, f"load_fc_{horizon}", load, sigma)

    # surplus when consumption falls short of its forecast or production exceeds it
    coupling = (
        (forecasts["load_fc_1h"] - load)
        - (forecasts["pv_fc_1h"] - pv)
        - (forecasts["wind_fc_1h"] - wind)
    )
    minute_of_day = np.arange(n_minutes) % MINUTES_PER_DAY
    cycle = 2 * np.pi * minute_of_day / MINUTES_PER_DAY
    latent = (
        ar1(
            stream(cfg.seed, "imbalance"),
            n_minutes,
            cfg.phi ** (1 / 5),
            cfg.ar_sigma,
            cfg.innovation_df,
        )
        + cfg.daily_amplitude * np.cos(cycle - 0.75 * np.pi)
        + cfg.semi_daily_amplitude * np.cos(2 * cycle + 0.25 * np.pi)
        + cfg.white_noise * stream(cfg.seed, "imbalance_noise").standard_normal(n_minutes)
        + cfg.beta * np.repeat(coupling, 30)
    )

    manual = _activations(cfg, latent.reshape(n_blocks, 5).mean(axis=1))
    bm = cfg.bm_share * manual
    terre = manual - bm
    ol_ace = latent + np.repeat(manual, 5)
    afrr = -cfg.gamma * ol_ace
    ace = ol_ace + afrr

    def minutely(values: np.ndarray, label: str) -> TimeSeries:
        return TimeSeries(start=cfg.start, step=MINUTE, values=values, label=label)

    def five_minutely(values: np.ndarray, label: str) -> TimeSeries:
        return TimeSeries(start=cfg.start, step=FIVE_MINUTES, values=values, label=label)

    dataset = BalancingDataset(
        ace=minutely(ace, "ace"),
        afrr=minutely(afrr, "afrr"),
        bm=five_minutely(bm, "bm"),
        terre=five_minutely(terre, "terre"),
        pv_obs=half_hourly(pv, "pv_obs"),
        wind_obs=half_hourly(wind, "wind_obs"),
        load_obs=half_hourly(load, "load_obs"),
        **{name: half_hourly(values, name) for name, values in forecasts.items()},
        pv_capacity=cfg.pv_capacity,
        wind_capacity=cfg.wind_capacity,
    )
    logger.info("Generated %d days of synthetic data with seed %d", cfg.days, cfg.seed)
    return dataset


def write_dataset(dataset: BalancingDataset, directory: Union[str, Path]) -> Path:
    """
    Write a dataset as CSV files and a manifest.

    :returns:
        path of the manifest
    """
    path = write_manifest(dataset, directory)
    logger.info("Wrote dataset manifest %s", path)
    return path
