import argparse
import logging
from pathlib import Path

import numpy as np
from slugify import slugify

from faultdx.commands import UsageException
from faultdx.core import FaultLabel, LabeledDataset, Spectrum
from faultdx.explain import class_mean_heatmaps, explain_prediction
from faultdx.experiment import (
    build_run_pool,
    build_test_set,
    evaluate,
    load_baselines,
    run_rng,
    train_model,
)
from faultdx.models.experiment import ExperimentConfig
from faultdx.models.results import (
    ClassHeatmaps,
    Diagnosis,
    Evaluation,
    Explanation,
    TrainingSummary,
)
from faultdx.net1d import load_model, predict, save_model
from faultdx.spectral import preprocess
from faultdx.storage import export_heatmap, load_dataset, load_signal

log = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser):
    train = subparsers.add_parser("train", parents=[common], help="Train and save a model")
    train.add_argument("--dataset", type=Path, help="Pool saved by build-dataset (default: build one)")
    train.add_argument("--model", type=Path, help="Model file (default: <models>/<name>.fdx)")
    train.set_defaults(handler=train_command)

    evaluate_parser = subparsers.add_parser(
        "evaluate", parents=[common], help="Score a model on the configured test set"
    )
    evaluate_parser.add_argument("--model", type=Path, required=True)
    evaluate_parser.set_defaults(handler=evaluate_command)

    diagnose = subparsers.add_parser("diagnose", parents=[common], help="Classify one signal")
    diagnose.add_argument("--model", type=Path, required=True)
    diagnose.add_argument("--signal", type=Path, required=True)
    diagnose.set_defaults(handler=diagnose_command)

    explain = subparsers.add_parser(
        "explain", parents=[common], help="Classify one signal and write its Grad-CAM heatmap"
    )
    explain.add_argument("--model", type=Path, required=True)
    source = explain.add_mutually_exclusive_group(required=True)
    source.add_argument("--signal", type=Path)
    source.add_argument("--class-means", action="store_true",
                        help="Average heatmaps per predicted class over the test set")
    target = explain.add_mutually_exclusive_group()
    target.add_argument("--heatmap", type=Path,
                        help="CSV file for a --signal heatmap (default: <out>/heatmaps/<signal>.csv)")
    target.add_argument("--heatmap-dir", type=Path,
                        help="Directory for the heatmap CSVs (default: <out>/heatmaps)")
    explain.add_argument("--plot", action="store_true", help="Also write an SVG plot")
    explain.set_defaults(handler=explain_command)


def train_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    rng = run_rng(cfg)
    if args.dataset is not None:
        pool = load_dataset(args.dataset)
    else:
        pool = build_run_pool(cfg, load_baselines(cfg, minimum=cfg.n_r), rng, workers=cfg.workers)

    model = train_model(cfg, pool, rng)
    path = args.model or cfg.paths.models / f"{slugify(cfg.name) or 'model'}.fdx"
    save_model(model, path)

    summary = TrainingSummary(
        model=path,
        samples=len(pool),
        best_epoch=model.best_epoch,
        stop_epoch=model.stop_epoch,
        best_val_accuracy=max((r.val_accuracy for r in model.history), default=0.0),
    )
    print(summary.model_dump_json())
    return 0


def evaluate_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    model = load_model(args.model)
    test_set = build_test_set(cfg)
    accuracy, confusion = evaluate(model, test_set)

    result = Evaluation(accuracy=accuracy, test_size=len(test_set), confusion=confusion.tolist())
    print(result.model_dump_json())
    return 0


def diagnose_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    model = load_model(args.model)
    spectrum = preprocess(load_signal(args.signal), cfg.spectral)
    label, probabilities = predict(model, spectrum)

    print(Diagnosis.from_probabilities(label, probabilities).model_dump_json())
    return 0


def explain_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    if args.class_means and args.heatmap is not None:
        raise UsageException("--class-means writes one file per class, use --heatmap-dir")

    model = load_model(args.model)
    directory = args.heatmap_dir or cfg.paths.out_dir / "heatmaps"

    if args.class_means:
        test_set = build_test_set(cfg)
        written = {}
        for label, heatmap in class_mean_heatmaps(model, test_set).items():
            path = directory / f"mean-{slugify(label.name)}.csv"
            export_heatmap(_mean_spectrum(test_set, label), heatmap, path, plot=args.plot)
            written[label.name] = path

        print(ClassHeatmaps(heatmaps=written, samples=len(test_set)).model_dump_json())
        return 0

    spectrum = preprocess(load_signal(args.signal), cfg.spectral)
    label, heatmap, peaks = explain_prediction(model, spectrum)
    _, probabilities = predict(model, spectrum)

    path = args.heatmap or directory / f"{args.signal.stem}.csv"
    export_heatmap(spectrum, heatmap, path, plot=args.plot)

    diagnosis = Diagnosis.from_probabilities(label, probabilities)
    explanation = Explanation(
        **diagnosis.model_dump(),
        top_frequencies=peaks,
        heatmap=path,
        plot=path.with_suffix(".svg") if args.plot else None,
    )
    print(explanation.model_dump_json())
    return 0


def _mean_spectrum(dataset: LabeledDataset, label: FaultLabel) -> Spectrum:
    """Mean spectrum of one class, or of the whole set when the class is absent"""
    chosen = [s.spectrum for s in dataset.samples if s.label == label] or \
        [s.spectrum for s in dataset.samples]
    first = chosen[0]
    return Spectrum(
        np.mean([s.magnitudes for s in chosen], axis=0), first.df_hz, first.f_start_hz,
        first.normalized,
    )
