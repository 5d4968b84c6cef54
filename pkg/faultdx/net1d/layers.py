#
# Forward and backward passes of the 1D CNN
#
# Layer stack: valid conv (stride 1) -> ReLU -> inverted dropout -> max-pool ->
# flatten -> dense + ReLU -> dense -> softmax. Activations are laid out as
# (batch, position, filter); the flattened vector is position-major.
#
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from faultdx.core import SignalException
from faultdx.models.network import Architecture

LOG_EPSILON = 1e-12


@dataclass
class ModelWeights:
    conv_w: np.ndarray  # (filters, kernel)
    conv_b: np.ndarray  # (filters,)
    hidden_w: np.ndarray  # (flat_len, dense_units)
    hidden_b: np.ndarray  # (dense_units,)
    out_w: np.ndarray  # (dense_units, n_classes)
    out_b: np.ndarray  # (n_classes,)

    @staticmethod
    def names() -> list[str]:
        return [f.name for f in fields(ModelWeights)]

    @staticmethod
    def shapes(arch: Architecture) -> dict[str, tuple[int, ...]]:
        return {
            "conv_w": (arch.conv_filters, arch.kernel_size),
            "conv_b": (arch.conv_filters,),
            "hidden_w": (arch.flat_len, arch.dense_units),
            "hidden_b": (arch.dense_units,),
            "out_w": (arch.dense_units, arch.n_classes),
            "out_b": (arch.n_classes,),
        }

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in self.names()]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names()}

    def copy(self) -> "ModelWeights":
        return ModelWeights(**{name: np.array(t) for name, t in self.as_dict().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors())

    def check(self, arch: Architecture):
        for name, shape in self.shapes(arch).items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise SignalException(f"Weight {name} has shape {actual}, expected {shape}")

    @classmethod
    def zeros(cls, arch: Architecture) -> "ModelWeights":
        return cls(**{name: np.zeros(shape) for name, shape in cls.shapes(arch).items()})


def init_weights(arch: Architecture, rng: np.random.Generator) -> ModelWeights:
    """He-uniform kernels (limit sqrt(6 / fan_in)), zero biases"""

    def he(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    return ModelWeights(
        conv_w=he((arch.conv_filters, arch.kernel_size), arch.kernel_size),
        conv_b=np.zeros(arch.conv_filters),
        hidden_w=he((arch.flat_len, arch.dense_units), arch.flat_len),
        hidden_b=np.zeros(arch.dense_units),
        out_w=he((arch.dense_units, arch.n_classes), arch.dense_units),
        out_b=np.zeros(arch.n_classes),
    )


@dataclass
class Cache:
    windows: np.ndarray  # (B, L_conv, K) copy of the input windows
    z_conv: np.ndarray  # (B, L_conv, F) pre-activation
    a_conv: np.ndarray  # (B, L_conv, F) rectified feature maps
    dropout_mask: Optional[np.ndarray]  # (B, L_conv, F), already scaled by 1/(1-p)
    pool_index: np.ndarray  # (B, P, F) argmax offset inside each pool window
    flat: np.ndarray  # (B, P*F)
    z_hidden: np.ndarray
    a_hidden: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(x: np.ndarray, arch: Architecture) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.input_len:
        raise SignalException(
            f"Input of shape {x.shape} does not match the model input length ({arch.input_len})"
        )
    return x


def conv1d(x: np.ndarray, kernels: np.ndarray, biases: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Valid cross-correlation of (B, L) with (F, K) kernels -> (windows, (B, L-K+1, F))"""

    # Contiguous windows turn the forward and weight-gradient products into plain matmuls
    windows = np.ascontiguousarray(sliding_window_view(x, kernels.shape[1], axis=1))
    batch, conv_len, kernel = windows.shape
    z = windows.reshape(-1, kernel) @ kernels.T + biases
    return windows, z.reshape(batch, conv_len, -1)


def forward(
        weights: ModelWeights,
        x: np.ndarray,
        arch: Architecture,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, Cache]:
    """Class probabilities for a spectrum (L,) or a batch (B, L)"""

    x = _as_batch(x, arch)
    batch = x.shape[0]

    windows, z_conv = conv1d(x, weights.conv_w, weights.conv_b)
    a_conv = np.maximum(z_conv, 0.0)

    mask = None
    dropped = a_conv
    if training and arch.dropout_rate > 0:
        if rng is None:
            raise ValueError("Training-mode forward with dropout needs an rng")
        keep = 1.0 - arch.dropout_rate
        mask = (rng.random(a_conv.shape) < keep) / keep
        dropped = a_conv * mask

    pooled_len, pool = arch.pooled_len, arch.pool_size
    grouped = dropped[:, : pooled_len * pool, :].reshape(batch, pooled_len, pool, -1)
    pool_index = np.argmax(grouped, axis=2)
    pooled = np.max(grouped, axis=2)

    flat = pooled.reshape(batch, -1)
    z_hidden = flat @ weights.hidden_w + weights.hidden_b
    a_hidden = np.maximum(z_hidden, 0.0)
    logits = a_hidden @ weights.out_w + weights.out_b
    probs = softmax(logits)

    cache = Cache(
        windows=windows,
        z_conv=z_conv,
        a_conv=a_conv,
        dropout_mask=mask,
        pool_index=pool_index,
        flat=flat,
        z_hidden=z_hidden,
        a_hidden=a_hidden,
        logits=logits,
        probs=probs,
    )
    return probs, cache


def loss(probs: np.ndarray, onehot: np.ndarray) -> float:
    """Categorical cross-entropy, averaged over the batch"""
    probs = np.atleast_2d(probs)
    onehot = np.atleast_2d(onehot)
    return float(-np.sum(onehot * np.log(probs + LOG_EPSILON)) / probs.shape[0])


def backward_from_logits(
        weights: ModelWeights, cache: Cache, d_logits: np.ndarray, arch: Architecture
) -> tuple[ModelWeights, np.ndarray]:
    """Gradients of every weight plus the gradient w.r.t. the rectified conv maps"""

    batch = d_logits.shape[0]

    d_out_w = cache.a_hidden.T @ d_logits
    d_out_b = d_logits.sum(axis=0)

    d_z_hidden = (d_logits @ weights.out_w.T) * (cache.z_hidden > 0)
    d_hidden_w = cache.flat.T @ d_z_hidden
    d_hidden_b = d_z_hidden.sum(axis=0)

    pooled_len, pool = arch.pooled_len, arch.pool_size
    d_pooled = (d_z_hidden @ weights.hidden_w.T).reshape(batch, pooled_len, arch.conv_filters)

    # Each pooled value routes its gradient to the (first) argmax of its window
    d_grouped = np.zeros((batch, pooled_len, pool, arch.conv_filters))
    np.put_along_axis(d_grouped, cache.pool_index[:, :, None, :], d_pooled[:, :, None, :], axis=2)
    d_dropped = np.zeros_like(cache.a_conv)
    d_dropped[:, : pooled_len * pool, :] = d_grouped.reshape(batch, pooled_len * pool, -1)

    d_a_conv = d_dropped if cache.dropout_mask is None else d_dropped * cache.dropout_mask
    d_z_conv = d_a_conv * (cache.z_conv > 0)

    kernel = cache.windows.shape[-1]
    d_conv_w = d_z_conv.reshape(-1, arch.conv_filters).T @ cache.windows.reshape(-1, kernel)
    d_conv_b = d_z_conv.sum(axis=(0, 1))

    grads = ModelWeights(
        conv_w=d_conv_w,
        conv_b=d_conv_b,
        hidden_w=d_hidden_w,
        hidden_b=d_hidden_b,
        out_w=d_out_w,
        out_b=d_out_b,
    )
    return grads, d_a_conv


def backward(weights: ModelWeights, cache: Cache, onehot: np.ndarray,
             arch: Architecture) -> ModelWeights:
    """Gradients of the batch-mean cross-entropy; d loss / d logits = (probs - onehot) / B"""

    onehot = np.atleast_2d(onehot)
    d_logits = (cache.probs - onehot) / cache.probs.shape[0]
    grads, _ = backward_from_logits(weights, cache, d_logits, arch)
    return grads
