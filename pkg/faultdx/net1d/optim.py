import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from faultdx.net1d.layers import ModelWeights

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: ModelWeights
    v: ModelWeights
    t: int = 0

    @classmethod
    def like(cls, weights: ModelWeights) -> "AdamState":
        def zeros() -> ModelWeights:
            return ModelWeights(**{name: np.zeros_like(t) for name, t in weights.as_dict().items()})

        return cls(m=zeros(), v=zeros())

    def copy(self) -> "AdamState":
        return AdamState(m=self.m.copy(), v=self.v.copy(), t=self.t)


def adam_update(
        weights: ModelWeights,
        gradients: ModelWeights,
        moments: AdamState,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
):
    """
    One Adam update with bias correction, applied in place to weights and moments.

    m(t) = b1 m(t-1) + (1 - b1) g
    v(t) = b2 v(t-1) + (1 - b2) g^2
    theta(t) = theta(t-1) - lr * m(t)/(1 - b1^t) / (sqrt(v(t)/(1 - b2^t)) + eps)
    """

    moments.t += 1
    t = moments.t
    step = learning_rate / (1 - beta1 ** t)
    v_correction = math.sqrt(1 - beta2 ** t)

    for name in ModelWeights.names():
        g = getattr(gradients, name)
        m = getattr(moments.m, name)
        v = getattr(moments.v, name)
        w = getattr(weights, name)
        scratch = np.empty_like(w)

        m *= beta1
        np.multiply(g, 1 - beta1, out=scratch)
        m += scratch

        v *= beta2
        np.square(g, out=scratch)
        scratch *= 1 - beta2
        v += scratch

        # scratch = lr * m_hat / (sqrt(v_hat) + eps)
        np.sqrt(v, out=scratch)
        scratch /= v_correction
        scratch += epsilon
        np.divide(m, scratch, out=scratch)
        scratch *= step
        w -= scratch


def adam_step(
        weights: ModelWeights,
        gradients: ModelWeights,
        moments: AdamState,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
) -> tuple[ModelWeights, AdamState]:
    """Adam update that leaves its inputs untouched, returns (new weights, new moments)"""

    weights, moments = weights.copy(), moments.copy()
    adam_update(weights, gradients, moments, learning_rate, beta1, beta2, epsilon)
    return weights, moments


class EarlyStopping:
    """
    Stops training when a maximised metric (validation accuracy) has not improved by more
    than min_delta over the best value for `patience` consecutive epochs.

    The first observed value always counts as an improvement.
    """

    def __init__(self, patience: int = 8, min_delta: float = 0.001):
        self.patience = patience
        self.min_delta = min_delta

        self.counter = 0
        self.best_score: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.early_stop = False

    def __call__(self, score: float, epoch: int) -> bool:
        """Records the epoch's score, returns True when it is the new best"""

        if self.best_score is None or score - self.best_score > self.min_delta:
            self.best_score = score
            self.best_epoch = epoch
            self.counter = 0
            return True

        self.counter += 1
        log.debug(f"Early stopping counter {self.counter} of {self.patience}")
        if self.counter >= self.patience:
            self.early_stop = True
        return False
