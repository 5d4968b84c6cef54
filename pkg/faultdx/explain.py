#
# Grad-CAM over frequency bins
#
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from faultdx.core import FaultLabel, LabeledDataset, SignalException, Spectrum
from faultdx.net1d import TrainedModel, backward_from_logits, forward, predict

log = logging.getLogger(__name__)

TOP_FREQUENCY_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class Heatmap:
    relevance: np.ndarray  # peak-normalized when the raw peak is positive
    raw: np.ndarray
    target_class: FaultLabel
    df_hz: float
    f_start_hz: float = 0.0

    @property
    def normalized_peak(self) -> bool:
        return bool(self.raw.max() > 0)

    def __len__(self) -> int:
        return self.relevance.size

    def frequencies(self) -> np.ndarray:
        return self.f_start_hz + np.arange(len(self)) * self.df_hz


def _peak_normalized(raw: np.ndarray) -> np.ndarray:
    peak = raw.max()
    return raw / peak if peak > 0 else raw.copy()


def upsample(cam: np.ndarray, input_len: int, kernel_size: int) -> np.ndarray:
    """Linear interpolation from conv positions (window centres) onto the input bins"""
    centres = np.arange(cam.size) + (kernel_size - 1) / 2
    return np.interp(np.arange(input_len, dtype=np.float64), centres, cam)


def gradcam(model: TrainedModel, spectrum: Spectrum, target: FaultLabel) -> Heatmap:
    arch = model.architecture
    if len(spectrum) != arch.input_len:
        raise SignalException(
            f"Spectrum has {len(spectrum)} bins, model expects {arch.input_len}"
        )

    _, cache = forward(model.weights, spectrum.magnitudes, arch)

    # Only the target logit receives gradient 1, every other class 0
    d_logits = np.zeros((1, arch.n_classes))
    d_logits[0, int(target)] = 1.0
    _, d_maps = backward_from_logits(model.weights, cache, d_logits, arch)

    filter_weights = d_maps[0].mean(axis=0)
    cam = np.maximum(cache.a_conv[0] @ filter_weights, 0.0)
    raw = upsample(cam, arch.input_len, arch.kernel_size)

    return Heatmap(
        relevance=_peak_normalized(raw),
        raw=raw,
        target_class=target,
        df_hz=spectrum.df_hz,
        f_start_hz=spectrum.f_start_hz,
    )


def top_frequencies(heatmap: Heatmap,
                    threshold: float = TOP_FREQUENCY_THRESHOLD) -> list[tuple[float, float]]:
    """Local maxima at or above threshold x peak, by relevance then ascending frequency"""

    h = heatmap.relevance
    if h.size == 0 or h.max() <= 0:
        return []

    padded = np.concatenate(([-np.inf], h, [-np.inf]))
    # Strict rise from the left, non-strict fall to the right: first bin of a plateau
    is_peak = (h > padded[:-2]) & (h >= padded[2:]) & (h >= threshold * h.max())

    frequencies = heatmap.frequencies()
    peaks = [(float(frequencies[i]), float(h[i])) for i in np.flatnonzero(is_peak)]
    return sorted(peaks, key=lambda p: (-p[1], p[0]))


def explain_prediction(
        model: TrainedModel, spectrum: Spectrum
) -> tuple[FaultLabel, Heatmap, list[tuple[float, float]]]:
    label, _ = predict(model, spectrum)
    heatmap = gradcam(model, spectrum, label)
    return label, heatmap, top_frequencies(heatmap)


def class_mean_heatmaps(model: TrainedModel,
                        dataset: LabeledDataset) -> dict[FaultLabel, Heatmap]:
    """Mean raw Grad-CAM per predicted class, re-normalized to its own peak"""

    sums: dict[FaultLabel, np.ndarray] = {}
    counts: dict[FaultLabel, int] = {}
    reference: Optional[Spectrum] = None

    for sample in dataset.samples:
        label, heatmap, _ = explain_prediction(model, sample.spectrum)
        sums[label] = sums.get(label, 0) + heatmap.raw
        counts[label] = counts.get(label, 0) + 1
        reference = sample.spectrum

    if reference is None:
        return {}

    log.info(f"Averaged heatmaps over {len(dataset)} samples: "
             f"{ {label.name: n for label, n in counts.items()} }")

    means = {}
    for label in FaultLabel:
        if label not in sums:
            continue
        raw = sums[label] / counts[label]
        means[label] = Heatmap(
            relevance=_peak_normalized(raw),
            raw=raw,
            target_class=label,
            df_hz=reference.df_hz,
            f_start_hz=reference.f_start_hz,
        )
    return means
