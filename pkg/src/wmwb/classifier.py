"""sklearn-style prediction surface over a weighted network graph."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import GraphError, ShapeMismatchError
from .netgraph import NetGraph, load_model
from .ops import forward


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """Predicts species for feature images using fixed weights.

    Weights come from a model file, not from fit: fit only validates the
    graph and freezes the class labels, keeping the estimator usable in
    sklearn pipelines and meta-estimators.
    """

    def __init__(self, graph: NetGraph | None = None, class_names: list[str] | None = None):
        self.graph = graph
        self.class_names = class_names

    @classmethod
    def from_file(cls, path, class_names: list[str] | None = None) -> "NetworkClassifier":
        return cls(graph=load_model(path), class_names=class_names).fit()

    def fit(self, X=None, y=None):
        if self.graph is None:
            raise GraphError("no graph attached; load a model file first")
        if not self.graph.is_weighted():
            raise GraphError("graph has no weights; fit requires a weighted model")
        if self.class_names is not None:
            if len(self.class_names) != self.graph.n_classes:
                raise ShapeMismatchError(
                    f"{len(self.class_names)} class names for a "
                    f"{self.graph.n_classes}-way model"
                )
            self.classes_ = np.asarray(self.class_names)
        else:
            self.classes_ = np.arange(self.graph.n_classes)
        return self

    def _validate_images(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        want = tuple(self.graph.input_shape)
        if X.ndim == 3:
            X = X[None]
        if X.ndim != 4 or X.shape[1:] != want:
            raise ShapeMismatchError(f"expected (n, {want[0]}, {want[1]}, {want[2]}), got {X.shape}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        X = self._validate_images(X)
        return np.stack([forward(self.graph, img).probs for img in X])

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
