"""Imblab analyzes and forecasts power-system imbalance and sizes balancing reserves."""

from imblab.timeseries import TimeSeries, TimeWindow, BalancingDataset
from imblab.distributions import BinSpec, BinnedDistributionReport
from imblab.autocorr import AcfResult
from imblab.hgbr import FeatureMatrix, GbtConfig, GbtModel, QuantileSuite
from imblab.evaluation import CvReport, FeatureSetSpec
from imblab.reserves import DiscreteDistribution, ReserveRequirement
from imblab.synthetic import SyntheticConfig

__version__ = "0.1.0"
