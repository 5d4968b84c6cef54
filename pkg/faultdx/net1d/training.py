import logging
from dataclasses import dataclass, field

import numpy as np

from faultdx.core import (
    FaultDxException,
    FaultLabel,
    LabeledDataset,
    SignalException,
    Spectrum,
)
from faultdx.models.network import Architecture, TrainConfig
from faultdx.net1d.layers import ModelWeights, backward, forward, init_weights, loss
from faultdx.net1d.optim import AdamState, EarlyStopping, adam_update

log = logging.getLogger(__name__)

PREDICT_CHUNK = 64


class TrainingException(FaultDxException):
    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    val_accuracy: float


@dataclass
class TrainedModel:
    architecture: Architecture
    weights: ModelWeights
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    label_order: tuple[FaultLabel, ...] = tuple(FaultLabel)

    @property
    def stop_epoch(self) -> int:
        return self.history[-1].epoch if self.history else 0


def predict_proba(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Inference-mode probabilities for a batch (B, L), evaluated in chunks"""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    chunks = [
        forward(model.weights, x[i: i + PREDICT_CHUNK], model.architecture)[0]
        for i in range(0, x.shape[0], PREDICT_CHUNK)
    ]
    return np.concatenate(chunks, axis=0)


def predict(model: TrainedModel, spectrum: Spectrum) -> tuple[FaultLabel, np.ndarray]:
    probs, _ = forward(model.weights, spectrum.magnitudes, model.architecture)
    probs = probs[0]
    # argmax keeps the lowest index on ties
    return model.label_order[int(np.argmax(probs))], probs


def accuracy(model: TrainedModel, x: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(np.argmax(predict_proba(model, x), axis=1) == y))


def _onehot(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[y]


def train(dataset: LabeledDataset, arch: Architecture, cfg: TrainConfig) -> TrainedModel:
    """Mini-batch Adam with early stopping on validation accuracy; best weights restored"""

    train_set = dataset.subset("train")
    validation_set = dataset.subset("validation")
    if len(train_set) == 0 or len(validation_set) == 0:
        raise SignalException(
            f"Training needs both splits, got {len(train_set)} train / "
            f"{len(validation_set)} validation samples"
        )

    x_train, y_train = train_set.matrix()
    x_val, y_val = validation_set.matrix()
    if x_train.shape[1] != arch.input_len:
        raise SignalException(
            f"Spectra have {x_train.shape[1]} bins, architecture expects {arch.input_len}"
        )

    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(arch, rng)
    moments = AdamState.like(weights)

    model = TrainedModel(architecture=arch, weights=weights)
    best_weights = weights.copy()
    stopper = EarlyStopping(patience=cfg.patience, min_delta=cfg.min_delta)
    targets = _onehot(y_train, arch.n_classes)
    n = x_train.shape[0]

    log.info(
        f"Training on {n} spectra ({len(y_val)} validation), {arch.input_len} bins, "
        f"batch {cfg.batch_size}, max {cfg.max_epochs} epochs"
    )

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0

        for batch, start in enumerate(range(0, n, cfg.batch_size)):
            index = order[start: start + cfg.batch_size]
            probs, cache = forward(model.weights, x_train[index], arch, training=True, rng=rng)

            batch_loss = loss(probs, targets[index])
            if not np.isfinite(batch_loss):
                raise TrainingException(f"Non-finite loss ({batch_loss})", epoch, batch)
            epoch_loss += batch_loss * len(index)

            grads = backward(model.weights, cache, targets[index], arch)
            adam_update(
                model.weights,
                grads,
                moments,
                learning_rate=cfg.learning_rate,
                beta1=cfg.beta1,
                beta2=cfg.beta2,
                epsilon=cfg.epsilon,
            )

        if not model.weights.is_finite():
            raise TrainingException("Weights became non-finite", epoch, batch)

        val_accuracy = accuracy(model, x_val, y_val)
        model.history.append(EpochRecord(epoch, epoch_loss / n, val_accuracy))
        log.info(f"Epoch {epoch}: loss {epoch_loss / n:.4f}, validation accuracy {val_accuracy:.4f}")

        if stopper(val_accuracy, epoch):
            best_weights = model.weights.copy()

        if stopper.early_stop:
            log.info(f"Early stop at epoch {epoch}, best epoch {stopper.best_epoch}")
            break

    model.weights = best_weights
    model.best_epoch = stopper.best_epoch or 0
    return model


def evaluate(model: TrainedModel, dataset: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """(true labels, predicted labels) over every sample of a dataset"""
    x, y = dataset.matrix()
    if x.shape[1] != model.architecture.input_len:
        raise SignalException(
            f"Test spectra have {x.shape[1]} bins, model expects {model.architecture.input_len}"
        )
    return y, np.argmax(predict_proba(model, x), axis=1)
