#
# Augmentation operators and training-pool assembly
#
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from faultdx.core import (
    FaultDxException,
    FaultLabel,
    LabeledDataset,
    LabeledSample,
    Provenance,
    TimeSeries,
)
from faultdx.models.augment import N_CONDITIONS, N_OPERATORS, AugmentParams, BuildPlan
from faultdx.models.machine import AmplitudeRule, MachineSpec
from faultdx.models.spectral import SpectralConfig
from faultdx.spectral import preprocess
from faultdx.synthgen import gen_all_conditions

log = logging.getLogger(__name__)

SAMPLES_PER_BASELINE = N_CONDITIONS * N_OPERATORS


class AugmentException(FaultDxException):
    pass


class Augmented(NamedTuple):
    series: TimeSeries
    op: str
    parameter: float


def gaussian_noise(x: TimeSeries, alpha: float, rng: np.random.Generator) -> TimeSeries:
    if alpha < 0:
        raise AugmentException(f"Gaussian noise coefficient must be >= 0, got {alpha}")
    return x.with_samples(x.samples + alpha * rng.standard_normal(len(x)))


def mask_count(n: int, alpha_mask: float) -> int:
    # Half-up rounding, 0.5 * 1000 -> 500 and 0.5 * 3 -> 2
    return int(math.floor(alpha_mask * n + 0.5))


def masking_noise(x: TimeSeries, alpha_mask: float, rng: np.random.Generator) -> TimeSeries:
    if not 0 <= alpha_mask <= 1:
        raise AugmentException(f"Mask fraction must lie within [0, 1], got {alpha_mask}")

    samples = np.array(x.samples)
    positions = rng.choice(len(x), size=mask_count(len(x), alpha_mask), replace=False)
    samples[positions] = 0.0
    return x.with_samples(samples)


def signal_translation(x: TimeSeries, shift: int,
                       rng: Optional[np.random.Generator] = None) -> TimeSeries:
    """Moves samples by shift positions (positive = later), zero-filling the gap"""

    n = len(x)
    if abs(shift) >= n:
        raise AugmentException(f"Shift ({shift}) must be smaller than the signal length ({n})")

    samples = np.zeros(n)
    if shift >= 0:
        samples[shift:] = x.samples[: n - shift]
    else:
        samples[:shift] = x.samples[-shift:]
    return x.with_samples(samples)


def amplitude_shift(x: TimeSeries, alpha_scal: float) -> TimeSeries:
    if alpha_scal <= 0:
        raise AugmentException(f"Scaling factor must be > 0, got {alpha_scal}")
    return x.with_samples(alpha_scal * x.samples)


def time_stretch(x: TimeSeries, alpha_stre: float) -> TimeSeries:
    """
    Stretches the signal about its centre by alpha_stre (> 1 slows it down).

    Output sample i reads the input at c + (i - c) / alpha_stre with c the window centre,
    by linear interpolation. Positions falling outside the input are zero.
    """

    if alpha_stre <= 0:
        raise AugmentException(f"Stretch factor must be > 0, got {alpha_stre}")

    n = len(x)
    grid = np.arange(n, dtype=np.float64)
    centre = (n - 1) / 2
    positions = centre + (grid - centre) / alpha_stre
    return x.with_samples(np.interp(positions, grid, x.samples, left=0.0, right=0.0))


def _draw(rng: np.random.Generator, low: float, high: float) -> float:
    return float(rng.uniform(low, high))


def _draw_shift(x: TimeSeries, params: AugmentParams, rng: np.random.Generator) -> int:
    n = len(x)
    if params.shift_samples is not None:
        shift = int(rng.integers(int(params.shift_samples.min), int(params.shift_samples.max) + 1))
    else:
        shift = int(round(_draw(rng, params.shift_fraction.min, params.shift_fraction.max) * n))
    return max(min(shift, n - 1), -(n - 1))


def augment_five(x: TimeSeries, params: AugmentParams,
                 rng: np.random.Generator) -> list[Augmented]:
    """One variant per operator, each with its parameter drawn from its range"""

    alpha_gauss = _draw(rng, params.alpha_gauss.min, params.alpha_gauss.max)
    if params.gauss_relative:
        alpha_gauss *= float(np.std(x.samples))
    alpha_mask = _draw(rng, params.alpha_mask.min, params.alpha_mask.max)
    shift = _draw_shift(x, params, rng)
    alpha_scal = _draw(rng, params.alpha_scal.min, params.alpha_scal.max)
    alpha_stre = _draw(rng, params.alpha_stre.min, params.alpha_stre.max)

    return [
        Augmented(gaussian_noise(x, alpha_gauss, rng), "gaussian_noise", alpha_gauss),
        Augmented(masking_noise(x, alpha_mask, rng), "masking_noise", alpha_mask),
        Augmented(signal_translation(x, shift, rng), "signal_translation", float(shift)),
        Augmented(amplitude_shift(x, alpha_scal), "amplitude_shift", alpha_scal),
        Augmented(time_stretch(x, alpha_stre), "time_stretch", alpha_stre),
    ]


def compute_q_aug(n_total: int, n_r: int) -> int:
    if n_total < 1 or n_r < 1:
        raise AugmentException(f"n_total ({n_total}) and n_r ({n_r}) must both be >= 1")
    return BuildPlan(n_total=n_total, n_r=n_r).q_aug


def task_seed(root: int, baseline_index: int, repetition: int, salt: int = 0) -> int:
    """Seed of one (baseline, repetition) task, independent of scheduling"""
    sequence = np.random.SeedSequence([root, salt, baseline_index, repetition])
    state = sequence.generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class _Task:
    baseline: TimeSeries
    baseline_id: str
    repetition: int
    seed: int
    spec: MachineSpec
    rule: AmplitudeRule
    params: AugmentParams
    spectral: SpectralConfig


def _run_task(task: _Task) -> list[LabeledSample]:
    rng = np.random.default_rng(task.seed)
    samples = []

    for signal, label in gen_all_conditions(task.baseline, task.spec, task.rule, rng):
        for variant in augment_five(signal, task.params, rng):
            samples.append(
                LabeledSample(
                    spectrum=preprocess(variant.series, task.spectral),
                    label=label,
                    provenance=Provenance(
                        origin_signal_id=task.baseline_id,
                        condition=label,
                        augmentation_op=variant.op,
                        parameter=variant.parameter,
                        repetition=task.repetition,
                        rng_seed=task.seed,
                    ),
                )
            )

    return samples


def _discard_excess(samples: list[LabeledSample], n_excess: int,
                    rng: np.random.Generator) -> list[LabeledSample]:
    """Randomly drops n_excess samples, spread evenly over the classes"""

    if n_excess <= 0:
        return samples

    by_class: dict[FaultLabel, list[int]] = {label: [] for label in FaultLabel}
    for i, sample in enumerate(samples):
        by_class[sample.label].append(i)

    quota = {label: n_excess // N_CONDITIONS for label in FaultLabel}
    for label in rng.choice(list(FaultLabel), size=n_excess % N_CONDITIONS, replace=False):
        quota[FaultLabel(int(label))] += 1

    dropped: set[int] = set()
    for label, indices in by_class.items():
        if quota[label]:
            dropped.update(int(i) for i in rng.choice(indices, size=quota[label], replace=False))

    return [sample for i, sample in enumerate(samples) if i not in dropped]


def split_train_validation(n: int, validation_fraction: float,
                           rng: np.random.Generator) -> list[str]:
    n_validation = int(round(validation_fraction * n))
    splits = ["train"] * n
    for i in rng.permutation(n)[:n_validation]:
        splits[int(i)] = "validation"
    return splits


def build_training_pool(
        baselines: Sequence[TimeSeries],
        spec: MachineSpec,
        rule: AmplitudeRule,
        params: AugmentParams,
        n_total: int,
        rng: np.random.Generator,
        spectral: SpectralConfig = SpectralConfig(),
        validation_fraction: float = 0.1,
        baseline_ids: Optional[Sequence[str]] = None,
        workers: int = 1,
) -> LabeledDataset:
    if not baselines:
        raise AugmentException("At least one baseline signal is needed")
    if n_total < SAMPLES_PER_BASELINE:
        raise AugmentException(
            f"n_total ({n_total}) must be >= {SAMPLES_PER_BASELINE} (one full pass of one baseline)"
        )

    if baseline_ids is None:
        baseline_ids = [f"baseline-{i}" for i in range(len(baselines))]

    plan = BuildPlan(n_total=n_total, n_r=len(baselines))
    root = int(rng.integers(0, 2 ** 63))

    tasks = [
        _Task(
            baseline=baseline,
            baseline_id=baseline_ids[b],
            repetition=r,
            seed=task_seed(root, b, r, params.seed),
            spec=spec,
            rule=rule,
            params=params,
            spectral=spectral,
        )
        for r in range(plan.q_aug)
        for b, baseline in enumerate(baselines)
    ]

    log.info(
        f"Building pool of {n_total} samples from {plan.n_r} baselines, q_aug={plan.q_aug}, "
        f"{plan.n_excess} to discard"
    )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_task, tasks))
    else:
        results = [_run_task(task) for task in tasks]

    samples = [sample for task_samples in results for sample in task_samples]
    samples = _discard_excess(samples, plan.n_excess, rng)

    return LabeledDataset(
        samples=samples,
        splits=split_train_validation(len(samples), validation_fraction, rng),
    )
