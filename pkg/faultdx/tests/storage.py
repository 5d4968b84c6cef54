import numpy as np
import pytest

from faultdx.config_parser import ParserException
from faultdx.core import FaultLabel, LabeledDataset, LabeledSample, Provenance, SignalException, Spectrum, TimeSeries
from faultdx.explain import Heatmap
from faultdx.models.spectral import SpectralConfig
from faultdx.storage import (
    export_heatmap,
    import_heatmap_csv,
    load_dataset,
    load_labeled_directory,
    load_signal,
    load_signals_dir,
    report_paths,
    save_dataset,
    save_signal,
    write_report,
    write_timings,
)

from .main import FS, N, baseline, rng


class _Report:

    def table(self) -> str:
        return "accuracy 1.0\n"

    def csv_header(self) -> list[str]:
        return ["run", "accuracy"]

    def csv_rows(self) -> list[list]:
        return [[1, 1.0], [2, 0.5]]


def _write(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


class TestSignalFiles:

    def test_minimal_file(self, tmp_path):
        series = load_signal(_write(tmp_path / "x.txt", "fs 1000\n0.0\n1.0\n"))

        assert series.sample_rate_hz == 1000.0
        assert series.samples.tolist() == [0.0, 1.0]

    def test_comments_and_blank_lines(self, tmp_path):
        text = "# recorded on bench 2\n\nfs 25000\n# first sample\n-0.5\n\n1e-3\n"
        series = load_signal(_write(tmp_path / "x.txt", text))

        assert series.samples.tolist() == [-0.5, 0.001]

    @pytest.mark.parametrize("text, line", [
        ("0.0\n1.0\n", 1),
        ("fs 1000\n0.0\nabc\n", 3),
        ("fs 0\n1.0\n", 1),
        ("fs fast\n1.0\n", 1),
        ("fs 1000\n", None),
        ("", None),
        ("fs 1000\nnan\n", None),
    ])
    def test_malformed(self, tmp_path, text, line):
        with pytest.raises(ParserException) as e:
            load_signal(_write(tmp_path / "bad.txt", text))
        assert e.value.line == line

    def test_save_load(self, tmp_path, baseline):
        path = tmp_path / "nested" / "baseline.txt"
        save_signal(baseline, path, comment="surrogate")

        assert path.read_text(encoding="utf-8").startswith("# surrogate\nfs 1000.0\n")
        loaded = load_signal(path)
        assert np.array_equal(loaded.samples, baseline.samples)
        assert loaded.sample_rate_hz == baseline.sample_rate_hz

    def test_directory_is_sorted(self, tmp_path):
        _write(tmp_path / "b.txt", "fs 10\n2.0\n")
        _write(tmp_path / "a.txt", "fs 10\n1.0\n")
        _write(tmp_path / "notes.md", "not a signal")

        assert [name for name, _ in load_signals_dir(tmp_path)] == ["a", "b"]


class TestLabeledDirectory:

    def test_loads_condition_folders(self, tmp_path, baseline):
        save_signal(baseline, tmp_path / "BPFO" / "run1.txt")
        save_signal(baseline, tmp_path / "normal" / "run1.txt")
        save_signal(baseline, tmp_path / "notes" / "run1.txt")

        dataset = load_labeled_directory(tmp_path, SpectralConfig(f_max_hz=400))

        assert [s.label for s in dataset.samples] == [FaultLabel.BPFO, FaultLabel.Normal]
        assert dataset.splits == ["test", "test"]
        assert dataset.samples[0].provenance.origin_signal_id == "BPFO/run1"
        assert len(dataset.samples[0].spectrum) == 401

    def test_empty(self, tmp_path):
        (tmp_path / "Unbalance").mkdir()
        with pytest.raises(SignalException):
            load_labeled_directory(tmp_path, SpectralConfig(f_max_hz=400))


class TestDatasets:

    def test_save_load(self, tmp_path, rng):
        samples = [
            LabeledSample(
                spectrum=Spectrum(rng.standard_normal(8), df_hz=0.5, f_start_hz=1.0, normalized=True),
                label=label,
                provenance=Provenance(
                    origin_signal_id=f"baseline-{i}",
                    condition=label,
                    augmentation_op="time_stretch" if i else "none",
                    parameter=1.01 if i else None,
                    repetition=i,
                    rng_seed=2 ** 63 + i,
                ),
            )
            for i, label in enumerate([FaultLabel.Looseness, FaultLabel.GearFault])
        ]
        dataset = LabeledDataset(samples=samples, splits=["train", "validation"])

        path = tmp_path / "pool.npz"
        save_dataset(dataset, path)
        loaded = load_dataset(path)

        assert loaded.digest() == dataset.digest()
        assert loaded.samples[1].spectrum.df_hz == 0.5
        assert loaded.samples[1].spectrum.f_start_hz == 1.0
        assert [s.provenance for s in loaded.samples] == [s.provenance for s in samples]


class TestHeatmapFiles:

    def _pair(self):
        spectrum = Spectrum(np.array([0.1, 2.0, 0.3]), df_hz=2.5)
        heatmap = Heatmap(relevance=np.array([0.0, 1.0, 1 / 3]), raw=np.array([0.0, 3.0, 1.0]),
                          target_class=FaultLabel.Unbalance, df_hz=2.5)
        return spectrum, heatmap

    def test_csv(self, tmp_path):
        spectrum, heatmap = self._pair()
        path = tmp_path / "heatmaps" / "x.csv"
        export_heatmap(spectrum, heatmap, path)

        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4
        assert lines[0] == "frequency_hz,magnitude,relevance"

        frequencies, magnitudes, relevance = import_heatmap_csv(path)
        assert frequencies.tolist() == [0.0, 2.5, 5.0]
        assert np.array_equal(magnitudes, spectrum.magnitudes)
        assert np.array_equal(relevance, heatmap.relevance)
        assert not path.with_suffix(".svg").exists()

    def test_plot(self, tmp_path):
        spectrum, heatmap = self._pair()
        path = tmp_path / "x.csv"
        export_heatmap(spectrum, heatmap, path, plot=True)

        svg = path.with_suffix(".svg").read_text(encoding="utf-8")
        assert "<svg" in svg

    def test_misaligned(self, tmp_path):
        spectrum, _ = self._pair()
        heatmap = Heatmap(relevance=np.zeros(4), raw=np.zeros(4), target_class=FaultLabel.Normal, df_hz=2.5)
        with pytest.raises(SignalException):
            export_heatmap(spectrum, heatmap, tmp_path / "x.csv")

    def test_bad_header(self, tmp_path):
        with pytest.raises(ParserException):
            import_heatmap_csv(_write(tmp_path / "x.csv", "f,m,r\n1,2,3\n"))


class TestReports:

    def test_slug_names(self, tmp_path):
        assert report_paths(tmp_path, "Desk run: total size") == (
            tmp_path / "desk-run-total-size.txt", tmp_path / "desk-run-total-size.csv"
        )
        assert report_paths(tmp_path, "???")[0] == tmp_path / "report.txt"

    def test_write_report(self, tmp_path):
        text, csv = write_report(_Report(), tmp_path / "reports", "Small run")

        assert text.read_text(encoding="utf-8") == "accuracy 1.0\n"
        assert csv.read_text(encoding="utf-8").splitlines() == ["run,accuracy", "1,1.0", "2,0.5"]

    def test_write_timings(self, tmp_path):
        path = write_timings([(1, 0.12345), (2, 2.0)], tmp_path, "Small run")

        assert path.name == "small-run-timings.csv"
        assert path.read_text(encoding="utf-8").splitlines() == ["run,seconds", "1,0.123", "2,2.000"]
