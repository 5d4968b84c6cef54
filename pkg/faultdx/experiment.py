#
# Repeated train/evaluate protocols
#
# A run draws its own seed from the master seed, synthesizes a fresh training
# pool, trains and scores the model on a fixed test set. Runs are aggregated in
# run-index order, so reports do not depend on how the runs were scheduled.
#
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix

from faultdx.augment import build_training_pool
from faultdx.core import (
    N_CLASSES,
    FaultLabel,
    LabeledDataset,
    LabeledSample,
    Provenance,
    TimeSeries,
)
from faultdx.models.experiment import ExperimentConfig, ExperimentException
from faultdx.net1d import TrainedModel, train
from faultdx.net1d import evaluate as predict_labels
from faultdx.spectral import preprocess
from faultdx.storage import load_labeled_directory, load_signals_dir
from faultdx.synthgen import gen_all_conditions, gen_baseline_surrogate

log = logging.getLogger(__name__)

# Independent random streams derived from the master seed
STREAM_CANDIDATES = 0
STREAM_TEST = 1
STREAM_RUNS = 2
STREAM_TEST_FAULTS = 3


class ExperimentAborted(ExperimentException):
    """A run failed; `report` holds every run completed before it"""

    def __init__(self, report: "EvalReport", cause: Exception):
        super().__init__(f"Run {len(report.runs) + 1} failed after {len(report.runs)} "
                         f"completed runs: {cause}")
        self.report = report
        self.cause = cause
        # Set when the run belonged to a sweep
        self.sweep: Optional["SweepTable"] = None


def derived_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _fmt(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True, eq=False)
class RunResult:
    run: int
    seed: int
    accuracy: float
    confusion: np.ndarray
    best_epoch: int
    stop_epoch: int
    wall_clock_s: float


@dataclass(eq=False)
class EvalReport:
    name: str
    test_size: int
    runs: list[RunResult] = field(default_factory=list)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.runs], dtype=np.float64)

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean()) if self.runs else 0.0

    @property
    def std_accuracy(self) -> float:
        # Population std: a single run reports 0
        return float(self.accuracies.std()) if self.runs else 0.0

    def _stacked(self) -> np.ndarray:
        if not self.runs:
            return np.zeros((1, N_CLASSES, N_CLASSES))
        return np.stack([r.confusion for r in self.runs]).astype(np.float64)

    @property
    def confusion_mean(self) -> np.ndarray:
        return self._stacked().mean(axis=0)

    @property
    def confusion_std(self) -> np.ndarray:
        return self._stacked().std(axis=0)

    def _ratio(self, axis: int) -> np.ndarray:
        total = self._stacked().sum(axis=0)
        support = total.sum(axis=axis)
        return np.divide(np.diag(total), support, out=np.zeros(N_CLASSES), where=support > 0)

    @property
    def recall(self) -> np.ndarray:
        return self._ratio(axis=1)

    @property
    def precision(self) -> np.ndarray:
        return self._ratio(axis=0)

    def timings(self) -> list[tuple[int, float]]:
        return [(r.run, r.wall_clock_s) for r in self.runs]

    def table(self) -> str:
        names = [label.name for label in FaultLabel]
        width = max(len(n) for n in names) + 2

        lines = [
            f"Experiment: {self.name}",
            f"Runs: {len(self.runs)}    Test samples: {self.test_size}",
            f"Accuracy: {100 * self.mean_accuracy:.2f}% ({100 * self.std_accuracy:.2f}%)",
            "Per run: " + ", ".join(f"{100 * a:.2f}%" for a in self.accuracies),
            "",
            "Confusion matrix, mean count (std) over runs; rows true, columns predicted",
            " " * width + "".join(f"{n:>18}" for n in names),
        ]
        mean, std = self.confusion_mean, self.confusion_std
        for i, name in enumerate(names):
            cells = "".join(
                f"{mean[i, j]:.1f} ({std[i, j]:.1f})".rjust(18) for j in range(N_CLASSES)
            )
            lines.append(f"{name:<{width}}{cells}")

        lines += ["", f"{'Class':<{width}}{'Recall':>10}{'Precision':>12}"]
        for i, name in enumerate(names):
            lines.append(f"{name:<{width}}{self.recall[i]:>10.4f}{self.precision[i]:>12.4f}")

        return "\n".join(lines) + "\n"

    def csv_header(self) -> list[str]:
        cells = [f"c_{i}_{j}" for i in range(N_CLASSES) for j in range(N_CLASSES)]
        return ["run", "seed", "accuracy", "best_epoch", "stop_epoch"] + cells

    def csv_rows(self) -> list[list]:
        return [
            [r.run, r.seed, _fmt(r.accuracy), r.best_epoch, r.stop_epoch]
            + [int(c) for c in r.confusion.reshape(-1)]
            for r in self.runs
        ]


@dataclass(frozen=True, eq=False)
class SweepRow:
    value: int
    report: EvalReport

    @property
    def mean_accuracy(self) -> float:
        return self.report.mean_accuracy

    @property
    def std_accuracy(self) -> float:
        return self.report.std_accuracy


@dataclass(eq=False)
class SweepTable:
    name: str
    parameter: str
    rows: list[SweepRow] = field(default_factory=list)

    def table(self) -> str:
        lines = [f"Sweep: {self.name}", f"{self.parameter:>10}{'mean acc':>12}{'std':>10}{'runs':>6}"]
        for row in self.rows:
            lines.append(
                f"{row.value:>10}{100 * row.mean_accuracy:>11.2f}%{100 * row.std_accuracy:>9.2f}%"
                f"{len(row.report.runs):>6}"
            )
        return "\n".join(lines) + "\n"

    def csv_header(self) -> list[str]:
        runs = max((len(row.report.runs) for row in self.rows), default=0)
        return [self.parameter, "mean_accuracy", "std_accuracy"] + [f"run_{i}" for i in range(runs)]

    def csv_rows(self) -> list[list]:
        return [
            [row.value, _fmt(row.mean_accuracy), _fmt(row.std_accuracy)]
            + [_fmt(a) for a in row.report.accuracies]
            for row in self.rows
        ]

    def timings(self) -> list[tuple[str, float]]:
        return [
            (f"{self.parameter}={row.value}/run {run}", seconds)
            for row in self.rows
            for run, seconds in row.report.timings()
        ]


def evaluate(model: TrainedModel, dataset: LabeledDataset) -> tuple[float, np.ndarray]:
    """(accuracy, 7x7 confusion counts with rows true and columns predicted)"""
    y_true, y_pred = predict_labels(model, dataset)
    confusion = confusion_matrix(y_true, y_pred, labels=list(range(N_CLASSES)))
    return float(np.trace(confusion) / confusion.sum()), confusion.astype(np.int64)


#
# Baselines and test sets
#


def _file_baselines(cfg: ExperimentConfig) -> tuple[list[tuple[str, TimeSeries]],
                                                     list[tuple[str, TimeSeries]]]:
    """(synthesis candidates, held-out) from the signals directory; held-out are the last files"""

    signals = load_signals_dir(cfg.paths.signals_dir)
    n_held_out = 0 if cfg.paths.test_dir is not None else cfg.test.n_baselines
    if len(signals) <= n_held_out:
        raise ExperimentException(
            f"{cfg.paths.signals_dir} holds {len(signals)} signals, need more than "
            f"{n_held_out} held-out test baselines"
        )
    split = len(signals) - n_held_out
    return signals[:split], signals[split:]


def _surrogates(cfg: ExperimentConfig, count: int, stream: int,
                prefix: str) -> list[tuple[str, TimeSeries]]:
    rng = _stream(cfg.seed, stream)
    return [
        (f"{prefix}-{i}", gen_baseline_surrogate(cfg.machine, cfg.surrogate.sample_rate_hz,
                                                 cfg.surrogate.n_samples, rng, cfg.surrogate))
        for i in range(count)
    ]


def load_baselines(cfg: ExperimentConfig, minimum: int = 0) -> list[tuple[str, TimeSeries]]:
    """Candidate baselines for training-pool synthesis, at least `minimum` of them"""

    if cfg.baselines.source == "files":
        candidates, _ = _file_baselines(cfg)
        if len(candidates) < minimum:
            raise ExperimentException(
                f"Need {minimum} baseline signals, only {len(candidates)} available in "
                f"{cfg.paths.signals_dir}"
            )
        return candidates

    # Generated in sequence, so a larger count extends a smaller one
    return _surrogates(cfg, max(cfg.baselines.count, minimum), STREAM_CANDIDATES, "surrogate")


def build_test_set(cfg: ExperimentConfig) -> LabeledDataset:
    """
    Labeled directory when paths.test_dir is set, otherwise every condition
    injected into held-out baselines that never feed the training pool
    """

    if cfg.paths.test_dir is not None:
        return load_labeled_directory(cfg.paths.test_dir, cfg.spectral)

    if cfg.baselines.source == "files":
        _, held_out = _file_baselines(cfg)
    else:
        held_out = _surrogates(cfg, cfg.test.n_baselines, STREAM_TEST, "held-out")

    rng = _stream(cfg.seed, STREAM_TEST_FAULTS)
    samples = []
    for baseline_id, baseline in held_out:
        for signal, label in gen_all_conditions(baseline, cfg.machine, cfg.amplitude, rng):
            samples.append(
                LabeledSample(
                    spectrum=preprocess(signal, cfg.spectral),
                    label=label,
                    provenance=Provenance(origin_signal_id=baseline_id, condition=label),
                )
            )

    log.info(f"Test set: {len(samples)} samples from {len(held_out)} held-out baselines")
    return LabeledDataset(samples=samples, splits=["test"] * len(samples))


#
# Runs
#


@dataclass(frozen=True, eq=False)
class _RunJob:
    run: int
    seed: int
    cfg: ExperimentConfig
    candidates: list[tuple[str, TimeSeries]]
    test_set: LabeledDataset
    pool_workers: int


def build_run_pool(cfg: ExperimentConfig, candidates: Sequence[tuple[str, TimeSeries]],
                   rng: np.random.Generator, workers: int = 1) -> LabeledDataset:
    """Picks n_r baselines at random and builds a training pool from them"""

    if cfg.n_r == 0:
        # Surrogate-only: a single generated baseline stands in for the machine
        picked = [("surrogate-run", gen_baseline_surrogate(
            cfg.machine, cfg.surrogate.sample_rate_hz, cfg.surrogate.n_samples, rng, cfg.surrogate
        ))]
    else:
        if cfg.n_r > len(candidates):
            raise ExperimentException(
                f"n_r ({cfg.n_r}) exceeds the {len(candidates)} available baselines"
            )
        index = np.sort(rng.choice(len(candidates), size=cfg.n_r, replace=False))
        picked = [candidates[int(i)] for i in index]

    return build_training_pool(
        [series for _, series in picked],
        cfg.machine,
        cfg.amplitude,
        cfg.augment,
        cfg.n_total,
        rng,
        spectral=cfg.spectral,
        validation_fraction=cfg.train.validation_fraction,
        baseline_ids=[baseline_id for baseline_id, _ in picked],
        workers=workers,
    )


def train_model(cfg: ExperimentConfig, pool: LabeledDataset,
                rng: np.random.Generator) -> TrainedModel:
    arch = cfg.network.for_input(len(pool.samples[0].spectrum))
    train_cfg = cfg.train.model_copy(update={"seed": int(rng.integers(0, 2 ** 63))})
    return train(pool, arch, train_cfg)


def run_rng(cfg: ExperimentConfig, run: int = 1) -> np.random.Generator:
    return np.random.default_rng(derived_seed(cfg.seed, STREAM_RUNS, run))


def _run_once(job: _RunJob) -> RunResult:
    start = time.perf_counter()
    rng = np.random.default_rng(job.seed)

    pool = build_run_pool(job.cfg, job.candidates, rng, workers=job.pool_workers)
    model = train_model(job.cfg, pool, rng)
    accuracy, confusion = evaluate(model, job.test_set)

    elapsed = time.perf_counter() - start
    log.info(f"Run {job.run}: accuracy {accuracy:.4f}, best epoch {model.best_epoch}, "
             f"{elapsed:.1f} s")
    return RunResult(
        run=job.run,
        seed=job.seed,
        accuracy=accuracy,
        confusion=confusion,
        best_epoch=model.best_epoch,
        stop_epoch=model.stop_epoch,
        wall_clock_s=elapsed,
    )


def run_experiment(cfg: ExperimentConfig, test_set: LabeledDataset,
                   candidates: Optional[Sequence[tuple[str, TimeSeries]]] = None) -> EvalReport:
    if len(test_set) == 0:
        raise ExperimentException("Test set is empty")
    if any(not isinstance(s.label, FaultLabel) for s in test_set.samples):
        raise ExperimentException("Test set labels must come from the fault label vocabulary")

    if candidates is None:
        candidates = load_baselines(cfg, minimum=cfg.n_r)

    jobs = [
        _RunJob(
            run=r,
            seed=derived_seed(cfg.seed, STREAM_RUNS, r),
            cfg=cfg,
            candidates=list(candidates),
            test_set=test_set,
            # Runs and pool tasks do not both fan out
            pool_workers=1 if cfg.repetitions > 1 else cfg.workers,
        )
        for r in range(1, cfg.repetitions + 1)
    ]

    report = EvalReport(name=cfg.name, test_size=len(test_set))
    log.info(f"Experiment {cfg.name}: {cfg.repetitions} runs, n_total={cfg.n_total}, "
             f"n_r={cfg.n_r}, {len(test_set)} test samples")

    try:
        if cfg.workers > 1 and cfg.repetitions > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.repetitions)) as executor:
                # map yields in submission order
                for result in executor.map(_run_once, jobs):
                    report.runs.append(result)
        else:
            for job in jobs:
                report.runs.append(_run_once(job))
    except Exception as e:
        log.error(f"Experiment {cfg.name} aborted after {len(report.runs)} runs")
        raise ExperimentAborted(report, e) from e

    log.info(f"Experiment {cfg.name}: accuracy {report.mean_accuracy:.4f} "
             f"({report.std_accuracy:.4f})")
    return report


#
# Sweeps
#


def _sweep(cfg: ExperimentConfig, parameter: str, values: Sequence[int],
           test_set: Optional[LabeledDataset],
           candidates: Sequence[tuple[str, TimeSeries]]) -> SweepTable:
    if not values:
        raise ExperimentException(f"Sweep over {parameter} needs at least one value")

    test_set = build_test_set(cfg) if test_set is None else test_set
    sweep = SweepTable(name=cfg.name, parameter=parameter)

    for value in values:
        point = cfg.model_copy(update={parameter: value, "name": f"{cfg.name} {parameter}={value}"})
        log.info(f"Sweep point {parameter}={value}")
        try:
            report = run_experiment(point, test_set, candidates)
        except ExperimentAborted as e:
            sweep.rows.append(SweepRow(value=value, report=e.report))
            e.sweep = sweep
            raise
        sweep.rows.append(SweepRow(value=value, report=report))

    return sweep


def sweep_total_size(cfg: ExperimentConfig, sizes: Sequence[int],
                     test_set: Optional[LabeledDataset] = None) -> SweepTable:
    for size in sizes:
        if size < 35:
            raise ExperimentException(f"Pool size ({size}) must be >= 35")
    candidates = load_baselines(cfg, minimum=cfg.n_r)
    return _sweep(cfg, "n_total", sizes, test_set, candidates)


def sweep_real_count(cfg: ExperimentConfig, counts: Sequence[int],
                     test_set: Optional[LabeledDataset] = None) -> SweepTable:
    if any(count < 0 for count in counts):
        raise ExperimentException("Real-signal counts must be >= 0")
    candidates = load_baselines(cfg, minimum=max(counts, default=0))
    return _sweep(cfg, "n_r", counts, test_set, candidates)
