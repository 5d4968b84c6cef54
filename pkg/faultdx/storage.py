#
# File of all disk accesses
#
# Signals are UTF-8 text (`fs <rate>` header, one sample per line), heatmaps are
# CSV, datasets are compressed npz archives and reports are a text table with a
# CSV sidecar. Model files live in faultdx.net1d.model_file.
#
import csv
import logging
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np
from slugify import slugify

from faultdx.config_parser import ParserException
from faultdx.core import (
    FaultLabel,
    LabeledDataset,
    LabeledSample,
    Provenance,
    SignalException,
    Spectrum,
    TimeSeries,
)
from faultdx.explain import Heatmap
from faultdx.models.spectral import SpectralConfig
from faultdx.spectral import preprocess

log = logging.getLogger(__name__)

SIGNAL_SUFFIX = ".txt"
HEATMAP_HEADER = ["frequency_hz", "magnitude", "relevance"]

PathLike = Union[str, Path]


def _full(value: float) -> str:
    """Shortest decimal text that round-trips a float64"""
    return repr(float(value))


#
# Signals
#


def load_signal(path: PathLike) -> TimeSeries:
    path = Path(path)
    source = str(path)

    sample_rate: Optional[float] = None
    samples: list[float] = []

    with path.open(encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue

            if sample_rate is None:
                parts = stripped.split()
                if len(parts) != 2 or parts[0] != "fs":
                    raise ParserException("Missing 'fs <rate>' header", number, source)
                try:
                    sample_rate = float(parts[1])
                except ValueError:
                    raise ParserException(f"Sample rate ({parts[1]}) is not a number", number, source)
                if not np.isfinite(sample_rate) or sample_rate <= 0:
                    raise ParserException(f"Sample rate must be positive, got {parts[1]}", number,
                                          source)
                continue

            try:
                samples.append(float(stripped))
            except ValueError:
                raise ParserException(f"Sample ({stripped}) is not a number", number, source)

    if sample_rate is None:
        raise ParserException("Missing 'fs <rate>' header", None, source)
    if not samples:
        raise ParserException("Signal has no samples", None, source)

    try:
        return TimeSeries(samples=samples, sample_rate_hz=sample_rate)
    except SignalException as e:
        raise ParserException(str(e), None, source)


def save_signal(series: TimeSeries, path: PathLike, comment: Optional[str] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(f"fs {_full(series.sample_rate_hz)}\n")
        f.writelines(f"{_full(v)}\n" for v in series.samples)


def load_signals_dir(directory: PathLike) -> list[tuple[str, TimeSeries]]:
    """Every signal file of a directory as (file stem, series), sorted by name"""
    paths = sorted(Path(directory).glob(f"*{SIGNAL_SUFFIX}"))
    return [(p.stem, load_signal(p)) for p in paths]


def load_labeled_directory(directory: PathLike, spectral: SpectralConfig) -> LabeledDataset:
    """
    Test set from one subdirectory per condition, named after the label
    (e.g. Unbalance/, BPFO/). Unknown subdirectories are skipped with a warning.
    """

    samples = []
    for sub in sorted(p for p in Path(directory).iterdir() if p.is_dir()):
        try:
            label = FaultLabel.from_name(sub.name)
        except SignalException:
            log.warning(f"Skipping {sub}, not a condition name")
            continue

        for signal_id, series in load_signals_dir(sub):
            samples.append(
                LabeledSample(
                    spectrum=preprocess(series, spectral),
                    label=label,
                    provenance=Provenance(origin_signal_id=f"{sub.name}/{signal_id}",
                                          condition=label),
                )
            )

    if not samples:
        raise SignalException(f"No labeled signals found under {directory}")

    log.info(f"Loaded {len(samples)} labeled test signals from {directory}")
    return LabeledDataset(samples=samples, splits=["test"] * len(samples))


#
# Datasets
#


def save_dataset(dataset: LabeledDataset, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    x, y = dataset.matrix()
    first = dataset.samples[0].spectrum
    provenance = [s.provenance for s in dataset.samples]

    np.savez_compressed(
        path,
        spectra=x,
        labels=y,
        splits=np.array(dataset.splits),
        df_hz=first.df_hz,
        f_start_hz=first.f_start_hz,
        normalized=first.normalized,
        origin=np.array([p.origin_signal_id for p in provenance]),
        condition=np.array([int(p.condition) for p in provenance]),
        op=np.array([p.augmentation_op for p in provenance]),
        parameter=np.array([np.nan if p.parameter is None else p.parameter for p in provenance]),
        repetition=np.array([p.repetition for p in provenance]),
        rng_seed=np.array([p.rng_seed for p in provenance], dtype=np.uint64),
    )
    log.info(f"Saved {len(dataset)} samples to {path}")


def load_dataset(path: PathLike) -> LabeledDataset:
    with np.load(Path(path), allow_pickle=False) as archive:
        df_hz = float(archive["df_hz"])
        f_start_hz = float(archive["f_start_hz"])
        normalized = bool(archive["normalized"])

        samples = []
        for i, magnitudes in enumerate(archive["spectra"]):
            parameter = float(archive["parameter"][i])
            samples.append(
                LabeledSample(
                    spectrum=Spectrum(magnitudes, df_hz, f_start_hz, normalized),
                    label=FaultLabel(int(archive["labels"][i])),
                    provenance=Provenance(
                        origin_signal_id=str(archive["origin"][i]),
                        condition=FaultLabel(int(archive["condition"][i])),
                        augmentation_op=str(archive["op"][i]),
                        parameter=None if np.isnan(parameter) else parameter,
                        repetition=int(archive["repetition"][i]),
                        rng_seed=int(archive["rng_seed"][i]),
                    ),
                )
            )

        return LabeledDataset(samples=samples, splits=[str(s) for s in archive["splits"]])


#
# Heatmaps
#


def export_heatmap(spectrum: Spectrum, heatmap: Heatmap, path: PathLike, plot: bool = False):
    if len(spectrum) != len(heatmap):
        raise SignalException(
            f"Heatmap ({len(heatmap)} bins) is not aligned with the spectrum ({len(spectrum)} bins)"
        )

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(HEATMAP_HEADER)
        for frequency, magnitude, relevance in zip(
                spectrum.frequencies(), spectrum.magnitudes, heatmap.relevance
        ):
            writer.writerow([_full(frequency), _full(magnitude), _full(relevance)])

    if plot:
        plot_heatmap_svg(spectrum, heatmap, path.with_suffix(".svg"))


def import_heatmap_csv(path: PathLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(frequencies, magnitudes, relevance) as written by export_heatmap"""

    with Path(path).open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != HEATMAP_HEADER:
            raise ParserException(f"Unexpected heatmap header {header}", 1, str(path))
        rows = [[float(v) for v in row] for row in reader if row]

    table = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return table[:, 0], table[:, 1], table[:, 2]


def plot_heatmap_svg(spectrum: Spectrum, heatmap: Heatmap, path: PathLike):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    frequencies = spectrum.frequencies()
    fig, ax = plt.subplots(figsize=(10, 4))

    low, high = float(spectrum.magnitudes.min()), float(spectrum.magnitudes.max())
    ax.imshow(
        heatmap.relevance[None, :],
        extent=(frequencies[0], frequencies[-1], low, high),
        aspect="auto",
        cmap="jet",
        alpha=0.45,
        vmin=0.0,
        vmax=1.0,
        origin="lower",
    )
    ax.plot(frequencies, spectrum.magnitudes, color="black", linewidth=0.7)
    ax.set_xlabel("Frequency [Hz]")
    ax.set_ylabel("Magnitude (z-score)" if spectrum.normalized else "Magnitude")
    ax.set_title(f"Grad-CAM relevance, {heatmap.target_class.name}")

    fig.tight_layout()
    fig.savefig(Path(path), format="svg", metadata={"Date": None})
    plt.close(fig)


#
# Reports
#


def report_paths(directory: PathLike, name: str) -> tuple[Path, Path]:
    stem = slugify(name) or "report"
    directory = Path(directory)
    return directory / f"{stem}.txt", directory / f"{stem}.csv"


class Report(Protocol):
    def table(self) -> str: ...

    def csv_header(self) -> list[str]: ...

    def csv_rows(self) -> list[list]: ...


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_report(report: Report, directory: PathLike, name: str) -> tuple[Path, Path]:
    """Writes the text table and its machine-readable CSV sidecar"""

    text_path, csv_path = report_paths(directory, name)
    text_path.parent.mkdir(parents=True, exist_ok=True)

    text_path.write_text(report.table(), encoding="utf-8")
    _write_csv(csv_path, report.csv_header(), report.csv_rows())

    log.info(f"Wrote report {text_path} and {csv_path}")
    return text_path, csv_path


def write_timings(timings: Sequence[tuple], directory: PathLike, name: str) -> Path:
    """Wall-clock seconds per run, kept apart from the reproducible report files"""

    path = Path(directory) / f"{slugify(name) or 'report'}-timings.csv"
    _write_csv(path, ["run", "seconds"], [(run, f"{seconds:.3f}") for run, seconds in timings])
    return path
