"""Scikit-learn style front door for the trainable core.

``LopFieldEstimator.fit`` trains the implicit field on a feature point
cloud (or an LOPF file path); ``transform`` maps points to concatenated
embedding rows and ``predict`` classifies points against a label bank. The
surrounding machinery (scene synthesis, topometric mapping, planning) is
not estimator-shaped and lives in its own modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .embed.cloud import FeaturePointCloud, load_cloud
from .errors import InvalidInput
from .field.checkpoint import load_checkpoint, save_checkpoint
from .field.loss import LossConfig
from .field.train import TrainConfig, train
from .hashgrid import HashGridConfig
from .query import DEFAULT_VS_WEIGHT, LabelBank, infer_attribute_batch
from .validation import as_points


class LopFieldEstimator(BaseEstimator):
    """Fit/transform/predict wrapper around field training and inference.

    Parameters mirror the hash-grid and training configs; ``label_bank``
    (a :class:`~lopfield.query.LabelBank`) enables ``predict`` and
    ``score``. All hyperparameters are plain constructor attributes so
    ``get_params``/``set_params``/``clone`` work as usual.
    """

    def __init__(
        self,
        levels: int = 18,
        features_per_level: int = 8,
        log2_table_size: int = 16,
        base_resolution: int = 16,
        finest_resolution: int = 512,
        batch_size: int = 512,
        epochs: int = 20,
        samples_per_epoch: int = 50_000,
        learning_rate: float = 1e-4,
        lr_decay: float = 3e-3,
        weight_v: float = 1.0,
        weight_s: float = 1.0,
        vs_weight: float = DEFAULT_VS_WEIGHT,
        label_bank: LabelBank | None = None,
        seed: int = 0,
    ):
        self.levels = levels
        self.features_per_level = features_per_level
        self.log2_table_size = log2_table_size
        self.base_resolution = base_resolution
        self.finest_resolution = finest_resolution
        self.batch_size = batch_size
        self.epochs = epochs
        self.samples_per_epoch = samples_per_epoch
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.weight_v = weight_v
        self.weight_s = weight_s
        self.vs_weight = vs_weight
        self.label_bank = label_bank
        self.seed = seed

    def _as_cloud(self, X) -> FeaturePointCloud:
        if isinstance(X, FeaturePointCloud):
            return X
        if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            return load_cloud(X)
        raise InvalidInput("fit expects a FeaturePointCloud or an LOPF file path")

    def fit(self, X, y=None):
        """Train the field on a feature cloud; ``y`` is ignored."""
        cloud = self._as_cloud(X)
        grid_config = HashGridConfig(
            levels=self.levels,
            features_per_level=self.features_per_level,
            log2_table_size=self.log2_table_size,
            base_resolution=self.base_resolution,
            finest_resolution=self.finest_resolution,
        ).with_bounds(*cloud.bounds())
        result = train(
            cloud,
            grid_config=grid_config,
            train_config=TrainConfig(
                batch_size=self.batch_size,
                epochs=self.epochs,
                samples_per_epoch=self.samples_per_epoch,
                learning_rate=self.learning_rate,
                lr_decay=self.lr_decay,
                seed=self.seed,
            ),
            loss_config=LossConfig(weight_v=self.weight_v, weight_s=self.weight_s),
        )
        self.field_ = result.field
        self.epoch_losses_ = result.epoch_losses
        self.dims_ = cloud.dims
        return self

    def _check_fitted(self):
        if not hasattr(self, "field_"):
            raise InvalidInput("estimator is not fitted; call fit first")

    def transform(self, X) -> np.ndarray:
        """Points (N, 3) to concatenated [F_v | F_s] rows."""
        self._check_fitted()
        pts = as_points(X, "X")
        f_v, f_s = self.field_.forward(pts)
        return np.concatenate([f_v, f_s], axis=1)

    def fit_transform(self, X, y=None, points=None):
        self.fit(X)
        target = points if points is not None else self._as_cloud(X).positions
        return self.transform(target)

    def predict(self, X) -> np.ndarray:
        """Label of each point under the configured label bank."""
        self._check_fitted()
        if self.label_bank is None:
            raise InvalidInput("predict needs a label_bank")
        labels, _ = infer_attribute_batch(
            self.field_, as_points(X, "X"), self.label_bank, self.vs_weight
        )
        return np.asarray(labels, dtype=object)

    def score(self, X, y) -> float:
        """Mean accuracy of :meth:`predict` against labels ``y``."""
        pred = self.predict(X)
        truth = np.asarray(list(y), dtype=object)
        if len(pred) != len(truth):
            raise InvalidInput("X and y lengths differ")
        return float(np.mean(pred == truth))

    def save(self, path) -> None:
        self._check_fitted()
        save_checkpoint(self.field_, path)

    @classmethod
    def from_checkpoint(cls, path, label_bank: LabelBank | None = None,
                        **params) -> "LopFieldEstimator":
        est = cls(label_bank=label_bank, **params)
        est.field_ = load_checkpoint(path)
        est.dims_ = est.field_.dims[1:]
        return est
