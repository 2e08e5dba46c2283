"""
Histogram-based gradient-boosted regression trees.

Features are binned once before training; each tree is then grown
best-first from per-bin sums of the loss gradients. Squared loss gives a
model of the mean, pinball loss at level ``tau`` a model of the
``tau``-quantile.
"""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from imblab.distributions import quantile
from imblab.errors import BoostingError
from imblab.timeseries import SCHEMA_VERSION

logger = logging.getLogger(__name__)

LossKind = Literal["squared", "pinball"]

DEFAULT_TAUS = (0.01, 0.5, 0.99)


def quantile_name(tau: float) -> str:
    """
    Name a quantile level by its percentage.

    >>> quantile_name(0.01), quantile_name(0.5), quantile_name(0.999)
    ('q01', 'q50', 'q99.9')
    """
    percent = round(tau * 100, 6)
    if percent == int(percent):
        return f"q{int(percent):02d}"
    return f"q{percent:g}"


class GbtConfig(BaseModel):
    """
    Hyperparameters of a boosted tree model.

    :param loss:
        ``"squared"`` to model the mean, ``"pinball"`` to model the ``tau``-quantile

    :param max_bins:
        the most bins per feature, not counting the bin for missing values

    :param seed:
        recorded with the model; training draws no random numbers, so equal
        inputs always give equal models
    """

    loss: LossKind = "squared"
    tau: Optional[float] = None
    learning_rate: float = 0.1
    max_iterations: int = 200
    max_bins: int = 255
    max_leaf_nodes: int = 31
    min_samples_leaf: int = 20
    l2_regularization: float = 0.0
    seed: int = 0

    @field_validator("learning_rate", mode="after")
    @classmethod
    def learning_rate_in_range(cls, value: float) -> float:
        """Verify 0 < learning_rate <= 1."""
        if not 0 < value <= 1:
            raise ValueError("learning_rate must be in (0, 1].")
        return value

    @field_validator("max_bins", mode="after")
    @classmethod
    def max_bins_in_range(cls, value: int) -> int:
        """Verify 2 <= max_bins <= 255."""
        if not 2 <= value <= 255:
            raise ValueError("max_bins must be between 2 and 255.")
        return value

    @field_validator("max_iterations", mode="after")
    @classmethod
    def iterations_not_negative(cls, value: int) -> int:
        """Verify the iteration count isn't negative."""
        if value < 0:
            raise ValueError("max_iterations cannot be negative.")
        return value

    @field_validator("max_leaf_nodes", mode="after")
    @classmethod
    def at_least_two_leaves(cls, value: int) -> int:
        """Verify a tree can split at least once."""
        if value < 2:
            raise ValueError("max_leaf_nodes must be at least 2.")
        return value

    @field_validator("min_samples_leaf", mode="after")
    @classmethod
    def leaves_not_empty(cls, value: int) -> int:
        """Verify every leaf holds a sample."""
        if value < 1:
            raise ValueError("min_samples_leaf must be at least 1.")
        return value

    @field_validator("l2_regularization", mode="after")
    @classmethod
    def l2_not_negative(cls, value: float) -> float:
        """Verify the regularization isn't negative."""
        if value < 0:
            raise ValueError("l2_regularization cannot be negative.")
        return value

    @model_validator(mode="after")
    def tau_matches_loss(self) -> GbtConfig:
        """Verify pinball loss has a level in (0, 1) and squared loss has none."""
        if self.loss == "pinball":
            if self.tau is None or not 0 < self.tau < 1:
                raise ValueError("Pinball loss needs tau in (0, 1).")
        elif self.tau is not None:
            raise ValueError("Squared loss takes no tau.")
        return self

    def for_loss(self, loss: LossKind, tau: Optional[float] = None) -> GbtConfig:
        """Copy the hyperparameters with a different loss."""
        return GbtConfig(**{**self.model_dump(), "loss": loss, "tau": tau})

    @property
    def name(self) -> str:
        """Name the modeled statistic: ``mean`` or a quantile name like ``q99``."""
        if self.loss == "squared":
            return "mean"
        return quantile_name(self.tau)


class FeatureMatrix(BaseModel):
    """
    Named feature columns for a set of samples, with NaN for a missing value.

    :param columns:
        unique names of the features

    :param values:
        array of shape ``(rows, len(columns))``

    :param row_timestamps:
        optional UTC timestamp of each row
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    columns: List[str]
    values: np.ndarray
    row_timestamps: Optional[np.ndarray] = None

    @field_validator("values", mode="before")
    @classmethod
    def values_as_array(cls, value: Sequence[Sequence[float]]) -> np.ndarray:
        """Store values as a two-dimensional float array."""
        array = np.array(value, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError("Feature values must form a two-dimensional array.")
        array.flags.writeable = False
        return array

    @model_validator(mode="after")
    def consistent_shape(self) -> FeatureMatrix:
        """Verify column names are unique and match the width of the values."""
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("Feature column names must be unique.")
        if self.values.shape[1] != len(self.columns):
            raise ValueError(
                f"{len(self.columns)} column names given for {self.values.shape[1]} columns."
            )
        if self.row_timestamps is not None and len(self.row_timestamps) != len(self.values):
            raise ValueError("Each row needs exactly one timestamp.")
        return self

    @classmethod
    def from_columns(
        cls, columns: Dict[str, np.ndarray], row_timestamps: Optional[np.ndarray] = None
    ) -> FeatureMatrix:
        """Make a FeatureMatrix from equally long named arrays."""
        names = list(columns)
        if not names:
            raise BoostingError("A feature matrix needs at least one column.")
        return cls(
            columns=names,
            values=np.column_stack([columns[name] for name in names]),
            row_timestamps=row_timestamps,
        )

    @property
    def n_rows(self) -> int:
        """Count the samples."""
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        """Get the values of one feature."""
        return self.values[:, self.columns.index(name)]

    def select(self, columns: Sequence[str]) -> FeatureMatrix:
        """
        Get the given columns, in the given order.

        :raises BoostingError:
            if any column is absent
        """
        absent = [name for name in columns if name not in self.columns]
        if absent:
            raise BoostingError(f"Feature matrix lacks the columns {absent}.")
        positions = [self.columns.index(name) for name in columns]
        return FeatureMatrix(
            columns=list(columns),
            values=self.values[:, positions],
            row_timestamps=self.row_timestamps,
        )

    def take(self, rows: np.ndarray) -> FeatureMatrix:
        """Get a subset of the rows."""
        return FeatureMatrix(
            columns=self.columns,
            values=self.values[rows],
            row_timestamps=None if self.row_timestamps is None else self.row_timestamps[rows],
        )


class BinnedFeatures(NamedTuple):
    """Bin index of every feature value, and the thresholds between bins."""

    codes: np.ndarray
    thresholds: List[np.ndarray]
    missing_bin: int


def _bin_thresholds(values: np.ndarray, max_bins: int) -> np.ndarray:
    distinct = np.unique(values)
    if len(distinct) <= 1:
        return np.empty(0)
    if len(distinct) <= max_bins:
        return (distinct[:-1] + distinct[1:]) / 2
    levels = np.linspace(0, 1, max_bins + 1)[1:-1]
    return np.unique(np.quantile(values, levels, method="midpoint"))


def bin_features(m: FeatureMatrix, max_bins: int) -> BinnedFeatures:
    """
    Replace each feature value with the index of its bin.

    A feature with at most ``max_bins`` distinct values gets one bin per
    value; otherwise bin edges are placed at evenly spaced quantiles. Bin
    ``i`` holds values in ``(thresholds[i - 1], thresholds[i]]``, and missing
    values go to the reserved bin ``max_bins``.

    :raises BoostingError:
        if the matrix has no rows
    """
    if m.n_rows == 0:
        raise BoostingError("Can't bin a feature matrix with no rows.")
    if not 2 <= max_bins <= 255:
        raise BoostingError("max_bins must be between 2 and 255.")
    codes = np.empty(m.values.shape, dtype=np.uint8)
    thresholds = []
    for j in range(m.values.shape[1]):
        column = m.values[:, j]
        present = ~np.isnan(column)
        edges = _bin_thresholds(column[present], max_bins)
        thresholds.append(edges)
        codes[:, j] = np.where(present, np.searchsorted(edges, column, side="left"), max_bins)
    return BinnedFeatures(codes=codes, thresholds=thresholds, missing_bin=max_bins)


class SplitInfo(NamedTuple):
    """The best way found to split the samples of a node in two."""

    feature: int
    bin: int
    gain: float
    missing_goes_left: bool
    gradient_left: float
    count_left: int
    gradient_right: float
    count_right: int


def split_gain(
    gradient_left: np.ndarray,
    hessian_left: np.ndarray,
    gradient_right: np.ndarray,
    hessian_right: np.ndarray,
    l2_regularization: float,
) -> np.ndarray:
    """
    Get the loss reduction from splitting a node into two children.

    ``0.5 * (G_L² / (H_L + λ) + G_R² / (H_R + λ) - G² / (H + λ))``
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        total = gradient_left + gradient_right
        return 0.5 * (
            gradient_left**2 / (hessian_left + l2_regularization)
            + gradient_right**2 / (hessian_right + l2_regularization)
            - total**2 / (hessian_left + hessian_right + l2_regularization)
        )


def build_histograms(
    codes: np.ndarray, gradients: np.ndarray, n_bins: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sum the gradients and count the samples in each bin of each feature.

    :param codes:
        bin indices of the node's samples, shape ``(samples, features)``

    :param n_bins:
        bins per feature, including the missing-value bin

    :returns:
        gradient sums and sample counts, each of shape ``(features, n_bins)``
    """
    n_features = codes.shape[1]
    flat = (codes.astype(np.intp) + np.arange(n_features) * n_bins).ravel()
    size = n_features * n_bins
    sums = np.bincount(flat, weights=np.repeat(gradients, n_features), minlength=size)
    counts = np.bincount(flat, minlength=size).astype(np.float64)
    return sums.reshape(n_features, n_bins), counts.reshape(n_features, n_bins)


def find_best_split(
    gradient_hist: np.ndarray,
    count_hist: np.ndarray,
    gradient_total: float,
    count_total: int,
    thresholds: List[np.ndarray],
    missing_bin: int,
    l2_regularization: float,
    min_samples_leaf: int,
) -> Optional[SplitInfo]:
    """
    Find the split with the largest positive gain from a node's histograms.

    Samples go left when their bin is at most the split bin. Missing values
    go to whichever side gives the larger gain, the left on a tie. Among
    equal gains, the lowest feature index and then the lowest bin wins.

    :returns:
        the best split, or None if no split both has positive gain and leaves
        ``min_samples_leaf`` samples on each side
    """
    best: Optional[SplitInfo] = None
    best_gain = 0.0
    for feature, edges in enumerate(thresholds):
        n_edges = len(edges)
        if not n_edges:
            continue
        left_g = np.cumsum(gradient_hist[feature, :missing_bin])[:n_edges]
        left_c = np.cumsum(count_hist[feature, :missing_bin])[:n_edges]
        missing_g = gradient_hist[feature, missing_bin]
        missing_c = count_hist[feature, missing_bin]

        choices = []
        for goes_left in (True, False):
            g_left = left_g + missing_g if goes_left else left_g
            c_left = left_c + missing_c if goes_left else left_c
            g_right = gradient_total - g_left
            c_right = count_total - c_left
            gain = split_gain(g_left, c_left, g_right, c_right, l2_regularization)
            allowed = (c_left >= min_samples_leaf) & (c_right >= min_samples_leaf)
            choices.append((np.where(allowed, gain, -np.inf), g_left, c_left, g_right, c_right))
            if not missing_c:
                break

        gain_left = choices[0][0]
        gain_right = choices[-1][0]
        use_left = gain_left >= gain_right
        combined = np.where(use_left, gain_left, gain_right)
        position = int(np.argmax(combined))
        if combined[position] > best_gain:
            chosen = choices[0] if use_left[position] else choices[-1]
            best_gain = float(combined[position])
            best = SplitInfo(
                feature=feature,
                bin=position,
                gain=best_gain,
                missing_goes_left=bool(use_left[position]),
                gradient_left=float(chosen[1][position]),
                count_left=int(chosen[2][position]),
                gradient_right=float(chosen[3][position]),
                count_right=int(chosen[4][position]),
            )
    return best


class TreeNode(BaseModel):
    """
    One node of a regression tree.

    Internal nodes send a sample left when its feature value is at most
    ``threshold``; leaves carry a ``value``.
    """

    feature: Optional[int] = None
    threshold: Optional[float] = None
    bin: Optional[int] = None
    missing_goes_left: bool = True
    gain: Optional[float] = None
    left: Optional[int] = None
    right: Optional[int] = None
    value: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        """Test if the node has no children."""
        return self.left is None


class Tree(BaseModel):
    """A binary regression tree, stored as a list of nodes with the root first."""

    nodes: List[TreeNode]

    @model_validator(mode="after")
    def nodes_are_linked(self) -> Tree:
        """Verify every internal node has two children and every leaf a finite value."""
        for node in self.nodes:
            if node.is_leaf:
                if node.value is None or not np.isfinite(node.value):
                    raise ValueError("Every leaf needs a finite value.")
            elif node.right is None or max(node.left, node.right) >= len(self.nodes):
                raise ValueError("Every internal node needs two existing children.")
        return self

    @property
    def n_leaves(self) -> int:
        """Count the leaves."""
        return sum(node.is_leaf for node in self.nodes)

    def predict(self, values: np.ndarray) -> np.ndarray:
        """Get the leaf value reached by each row of a raw feature array."""
        left = np.array([-1 if n.left is None else n.left for n in self.nodes], dtype=np.intp)
        right = np.array([-1 if n.right is None else n.right for n in self.nodes], dtype=np.intp)
        feature = np.array([0 if n.feature is None else n.feature for n in self.nodes], dtype=np.intp)
        threshold = np.array([np.nan if n.threshold is None else n.threshold for n in self.nodes])
        missing_left = np.array([n.missing_goes_left for n in self.nodes])
        leaf_value = np.array([0.0 if n.value is None else n.value for n in self.nodes])

        position = np.zeros(len(values), dtype=np.intp)
        active = np.flatnonzero(left[position] >= 0)
        while len(active):
            current = position[active]
            x = values[active, feature[current]]
            goes_left = np.where(np.isnan(x), missing_left[current], x <= threshold[current])
            position[active] = np.where(goes_left, left[current], right[current])
            active = active[left[position[active]] >= 0]
        return leaf_value[position]


class _GrowingNode:
    """A node under construction, with the samples and histograms it holds."""

    def __init__(
        self,
        node_id: int,
        samples: np.ndarray,
        gradient_sum: float,
        histograms: Tuple[np.ndarray, np.ndarray],
    ) -> None:
        self.node_id = node_id
        self.samples = samples
        self.gradient_sum = gradient_sum
        self.histograms = histograms
        self.split: Optional[SplitInfo] = None


class _TreeGrower:
    """Grow one tree best-first: always split the leaf with the largest gain."""

    def __init__(
        self,
        binned: BinnedFeatures,
        gradients: np.ndarray,
        config: GbtConfig,
        leaf_value: Callable[[np.ndarray, float, int], float],
    ) -> None:
        self.binned = binned
        self.gradients = gradients
        self.config = config
        self.leaf_value = leaf_value
        self.n_bins = binned.missing_bin + 1
        self.nodes: List[TreeNode] = []

    def _new_node(self, samples: np.ndarray, histograms: Tuple[np.ndarray, np.ndarray]) -> _GrowingNode:
        node = _GrowingNode(
            node_id=len(self.nodes),
            samples=samples,
            gradient_sum=float(self.gradients[samples].sum()),
            histograms=histograms,
        )
        self.nodes.append(TreeNode())
        if len(samples) >= 2 * self.config.min_samples_leaf:
            node.split = find_best_split(
                histograms[0],
                histograms[1],
                node.gradient_sum,
                len(samples),
                self.binned.thresholds,
                self.binned.missing_bin,
                self.config.l2_regularization,
                self.config.min_samples_leaf,
            )
        return node

    def _histograms(self, samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return build_histograms(self.binned.codes[samples], self.gradients[samples], self.n_bins)

    def _split(self, node: _GrowingNode) -> Tuple[_GrowingNode, _GrowingNode]:
        split = node.split
        column = self.binned.codes[node.samples, split.feature]
        goes_left = column <= split.bin
        if split.missing_goes_left:
            goes_left |= column == self.binned.missing_bin
        left_samples = node.samples[goes_left]
        right_samples = node.samples[~goes_left]

        # the larger child's histograms come from subtracting the smaller's
        if len(left_samples) <= len(right_samples):
            left_hist = self._histograms(left_samples)
            right_hist = (node.histograms[0] - left_hist[0], node.histograms[1] - left_hist[1])
        else:
            right_hist = self._histograms(right_samples)
            left_hist = (node.histograms[0] - right_hist[0], node.histograms[1] - right_hist[1])

        left = self._new_node(left_samples, left_hist)
        right = self._new_node(right_samples, right_hist)
        self.nodes[node.node_id] = TreeNode(
            feature=split.feature,
            threshold=float(self.binned.thresholds[split.feature][split.bin]),
            bin=split.bin,
            missing_goes_left=split.missing_goes_left,
            gain=split.gain,
            left=left.node_id,
            right=right.node_id,
        )
        node.histograms = None
        return left, right

    def grow(self) -> Tuple[Tree, List[Tuple[np.ndarray, float]]]:
        """
        Grow the tree.

        :returns:
            the tree, and the samples and value of each leaf
        """
        samples = np.arange(len(self.gradients))
        root = self._new_node(samples, self._histograms(samples))
        leaves = [root]
        heap: List[Tuple[float, int, _GrowingNode]] = []
        if root.split is not None:
            heapq.heappush(heap, (-root.split.gain, root.node_id, root))
        while heap and len(leaves) < self.config.max_leaf_nodes:
            _, _, node = heapq.heappop(heap)
            left, right = self._split(node)
            leaves.remove(node)
            for child in (left, right):
                leaves.append(child)
                if child.split is not None:
                    heapq.heappush(heap, (-child.split.gain, child.node_id, child))

        assignments = []
        for leaf in leaves:
            value = self.leaf_value(leaf.samples, leaf.gradient_sum, len(leaf.samples))
            self.nodes[leaf.node_id] = TreeNode(value=value)
            assignments.append((leaf.samples, value))
        return Tree(nodes=self.nodes), assignments


class GbtModel(BaseModel):
    """
    A fitted ensemble of regression trees.

    Predictions are ``baseline + learning_rate * sum(tree outputs)``.

    :param bin_thresholds:
        the bin edges learned for each feature during training

    :param training_loss_curve:
        training loss before the first tree and after each tree
    """

    schema_version: str = SCHEMA_VERSION
    feature_names: List[str]
    bin_thresholds: List[List[float]]
    baseline: float
    trees: List[Tree]
    config: GbtConfig
    training_loss_curve: List[float]

    @model_validator(mode="after")
    def splits_use_known_features(self) -> GbtModel:
        """Verify every split refers to a training column."""
        for tree in self.trees:
            for node in tree.nodes:
                if node.feature is not None and node.feature >= len(self.feature_names):
                    raise ValueError(f"Split on unknown feature index {node.feature}.")
        return self

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        """
        Predict the modeled statistic for each row.

        Columns are matched by name; extra columns are ignored.

        :raises BoostingError:
            if a training column is absent
        """
        values = m.select(self.feature_names).values
        raw = np.full(m.n_rows, self.baseline)
        for tree in self.trees:
            raw += self.config.learning_rate * tree.predict(values)
        return raw

    def feature_importance(self) -> Dict[str, float]:
        """Get each feature's share of the total split gain."""
        totals = np.zeros(len(self.feature_names))
        for tree in self.trees:
            for node in tree.nodes:
                if node.feature is not None:
                    totals[node.feature] += node.gain or 0.0
        if totals.sum() > 0:
            totals = totals / totals.sum()
        return dict(zip(self.feature_names, totals.tolist()))


def _training_loss(y: np.ndarray, raw: np.ndarray, config: GbtConfig) -> float:
    residual = y - raw
    if config.loss == "squared":
        return float(np.mean(residual**2))
    return float(np.mean(np.where(residual >= 0, config.tau * residual, (config.tau - 1) * residual)))


def _gradients(y: np.ndarray, raw: np.ndarray, config: GbtConfig) -> np.ndarray:
    if config.loss == "squared":
        return raw - y
    return np.where(y > raw, -config.tau, 1 - config.tau)


def fit(m: FeatureMatrix, target: Sequence[float], cfg: GbtConfig) -> GbtModel:
    """
    Fit a boosted tree model.

    The baseline is the mean of the target for squared loss and its
    ``tau``-quantile for pinball loss. Each iteration grows one tree on the
    loss gradients (hessians are taken as 1). Squared-loss leaves hold
    ``-G / (H + λ)``; pinball leaves hold the ``tau``-quantile of the
    residuals of their samples.

    :raises BoostingError:
        if the target is non-finite, its length differs from the number of
        rows, or there are fewer than ``2 * min_samples_leaf`` rows
    """
    y = np.asarray(target, dtype=np.float64)
    if len(y) != m.n_rows:
        raise BoostingError(f"Target has {len(y)} values for {m.n_rows} rows.")
    if not np.isfinite(y).all():
        raise BoostingError("Target values must be finite.")
    if len(y) < 2 * cfg.min_samples_leaf:
        raise BoostingError(
            f"{len(y)} rows are too few for min_samples_leaf={cfg.min_samples_leaf}."
        )

    binned = bin_features(m, cfg.max_bins)
    if cfg.loss == "squared":
        # shifted so a constant target gives an exact baseline
        baseline = float(y[0] + np.mean(y - y[0]))
    else:
        baseline = quantile(y, cfg.tau)
    raw = np.full(len(y), baseline)

    def leaf_value(samples: np.ndarray, gradient_sum: float, count: int) -> float:
        if cfg.loss == "squared":
            return -gradient_sum / (count + cfg.l2_regularization)
        return quantile(y[samples] - raw[samples], cfg.tau)

    losses = [_training_loss(y, raw, cfg)]
    trees = []
    for iteration in range(cfg.max_iterations):
        gradients = _gradients(y, raw, cfg)
        tree, leaves = _TreeGrower(binned, gradients, cfg, leaf_value).grow()
        for samples, value in leaves:
            raw[samples] += cfg.learning_rate * value
        trees.append(tree)
        losses.append(_training_loss(y, raw, cfg))
        logger.debug(
            "%s iteration %d: %d leaves, training loss %.6g",
            cfg.name,
            iteration + 1,
            tree.n_leaves,
            losses[-1],
        )

    return GbtModel(
        feature_names=list(m.columns),
        bin_thresholds=[edges.tolist() for edges in binned.thresholds],
        baseline=baseline,
        trees=trees,
        config=cfg,
        training_loss_curve=losses,
    )


def predict(model: GbtModel, m: FeatureMatrix) -> np.ndarray:
    """Predict with a fitted model; see :meth:`GbtModel.predict`."""
    return model.predict(m)


class QuantileSuite(BaseModel):
    """
    A mean model and one model per quantile level, all with the same hyperparameters.

    :param quantiles:
        the quantile models, in increasing order of ``tau``
    """

    schema_version: str = SCHEMA_VERSION
    mean: GbtModel
    quantiles: List[GbtModel]

    @property
    def taus(self) -> List[float]:
        """List the quantile levels."""
        return [model.config.tau for model in self.quantiles]

    def model_for(self, tau: float) -> GbtModel:
        """Get the model of the ``tau``-quantile."""
        for model in self.quantiles:
            if np.isclose(model.config.tau, tau):
                return model
        raise BoostingError(f"Suite has no model for quantile level {tau}.")

    def models(self) -> Dict[str, GbtModel]:
        """Get every model, keyed by the statistic it models."""
        return {"mean": self.mean, **{model.config.name: model for model in self.quantiles}}

    def predict(self, m: FeatureMatrix) -> Dict[str, np.ndarray]:
        """Predict with every model, keyed like :meth:`models`."""
        return {name: model.predict(m) for name, model in self.models().items()}

    def crossing_rate(self, m: FeatureMatrix) -> float:
        """Get the share of rows where the lowest quantile is predicted above the highest."""
        low = self.quantiles[0].predict(m)
        high = self.quantiles[-1].predict(m)
        return float(np.mean(low > high))


def fit_quantile_suite(
    m: FeatureMatrix,
    target: Sequence[float],
    cfg: GbtConfig,
    taus: Sequence[float] = DEFAULT_TAUS,
    threads: int = 1,
) -> QuantileSuite:
    """
    Fit a mean model plus one pinball model per quantile level.

    The fits are independent, so quantile predictions can cross; see
    :meth:`QuantileSuite.crossing_rate`.

    :param threads:
        models fitted at the same time; the suite doesn't depend on it
    """
    if not taus:
        raise BoostingError("A quantile suite needs at least one quantile level.")
    configs = [cfg.for_loss("squared")] + [cfg.for_loss("pinball", tau) for tau in sorted(taus)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        models = list(executor.map(lambda config: fit(m, target, config), configs))
    suite = QuantileSuite(mean=models[0], quantiles=models[1:])
    logger.info("Fitted %s on %d rows", list(suite.models()), m.n_rows)
    return suite
