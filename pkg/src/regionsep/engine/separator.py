"""Estimator wrapper around the inference engine."""

from sklearn.base import BaseEstimator, TransformerMixin

from .model import CausalDemucs
from .stream import DemucsStreamer
from .weights import WeightStore, load_weights

__all__ = ["DemucsSeparator"]


class DemucsSeparator(TransformerMixin, BaseEstimator):
    """Pretrained causal separator with a transform interface.

    Parameters
    ----------
    weights : str | WeightStore
        Path to an SDWX weight file, or an in-memory store.
    normalize : None | "global" | "running" | False
        Input normalization override; None follows the stored config
        (whole-signal std offline, causal running std when streaming).
    """

    def __init__(self, weights=None, normalize=None):
        self.weights = weights
        self.normalize = normalize

    def fit(self, X=None, y=None):
        """Load and validate the weights; the model itself is pretrained."""
        if self.weights is None:
            raise ValueError("DemucsSeparator requires weights")
        store = (
            self.weights
            if isinstance(self.weights, WeightStore)
            else load_weights(self.weights)
        )
        self.model_ = CausalDemucs(store)
        self.config_ = store.config
        return self

    def _model(self):
        if not hasattr(self, "model_"):
            self.fit()
        return self.model_

    def transform(self, X):
        """Offline separation of a (channels, samples) mixture."""
        return self._model().forward(X, normalize=self.normalize)

    def stream(self, normalize=None):
        """New streaming session (single-owner state, shared weights)."""
        return DemucsStreamer(
            self._model(),
            normalize=self.normalize if normalize is None else normalize,
        )
