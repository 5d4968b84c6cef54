import argparse
import logging
from pathlib import Path

import numpy as np

from faultdx.experiment import (
    STREAM_CANDIDATES,
    build_run_pool,
    derived_seed,
    load_baselines,
    run_rng,
)
from faultdx.models.experiment import ExperimentConfig
from faultdx.storage import load_signal, save_dataset, save_signal
from faultdx.synthgen import gen_all_conditions, gen_baseline_surrogate

log = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser):
    gen = subparsers.add_parser(
        "gen",
        parents=[common],
        help="Write the seven synthetic condition signals of one baseline",
    )
    gen.add_argument("--baseline", type=Path, help="Baseline signal file (default: a surrogate)")
    gen.add_argument("--dir", type=Path, help="Output directory (default: <out>/signals)")
    gen.set_defaults(handler=generate_signals)

    build = subparsers.add_parser(
        "build-dataset",
        parents=[common],
        help="Build a training pool and save it as .npz",
    )
    build.add_argument("--output", type=Path, help="Dataset file (default: <out>/dataset.npz)")
    build.set_defaults(handler=build_dataset)


def generate_signals(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    rng = np.random.default_rng(derived_seed(cfg.seed, STREAM_CANDIDATES))

    if args.baseline is not None:
        baseline = load_signal(args.baseline)
        origin = args.baseline.name
    else:
        baseline = gen_baseline_surrogate(cfg.machine, cfg.surrogate.sample_rate_hz,
                                          cfg.surrogate.n_samples, rng, cfg.surrogate)
        origin = f"surrogate baseline, seed {cfg.seed}"

    directory = args.dir or cfg.paths.out_dir / "signals"
    for signal, label in gen_all_conditions(baseline, cfg.machine, cfg.amplitude, rng):
        path = directory / f"{label.name}.txt"
        save_signal(signal, path, comment=f"{label.name} from {origin}")
        print(path)

    return 0


def build_dataset(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    candidates = load_baselines(cfg, minimum=cfg.n_r)
    # Same draws as the first experiment run
    pool = build_run_pool(cfg, candidates, run_rng(cfg), workers=cfg.workers)

    path = args.output or cfg.paths.out_dir / "dataset.npz"
    save_dataset(pool, path)
    log.info(f"Dataset digest {pool.digest()}, splits {pool.split_counts()}")
    print(path)
    return 0
