"""
Full-size checks. The experiment-scale ones are marked slow and only run with

    pytest -m slow
"""
import time
from pathlib import Path

import numpy as np
import pytest

from faultdx.app import cli_main
from faultdx.augment import augment_five, masking_noise, mask_count
from faultdx.core import FaultLabel, TimeSeries
from faultdx.experiment import build_run_pool, build_test_set, load_baselines, run_experiment, run_rng, train_model
from faultdx.explain import gradcam
from faultdx.models.augment import AugmentParams
from faultdx.models.experiment import load_experiment_config
from faultdx.models.machine import AmplitudeRule, MachineSpec, SurrogateConfig
from faultdx.models.network import Architecture
from faultdx.net1d import ModelWeights, backward, forward, init_weights, loss, predict
from faultdx.spectral import fft_magnitude
from faultdx.synthgen import (
    gear_frequencies,
    gen_baseline_surrogate,
    gen_gear_fault,
    gen_looseness,
    gen_misalignment,
    gen_unbalance,
    looseness_frequencies,
)

DESK_CONFIG = Path(__file__).parents[2] / "configs" / "desk.conf"


@pytest.fixture(scope="module")
def desk_config():
    return load_experiment_config(DESK_CONFIG)


class TestSpectralOracle:

    @pytest.mark.slow
    def test_fft_matches_naive_dft(self):
        rng = np.random.default_rng(50)
        for _ in range(50):
            n = int(rng.integers(2, 2049))
            x = rng.standard_normal(n)
            spectrum = fft_magnitude(TimeSeries(samples=x, sample_rate_hz=float(n)))

            k = np.arange(n // 2 + 1)[:, None]
            naive = 2.0 / n * np.abs(np.exp(-2j * np.pi * k * np.arange(n) / n) @ x)
            naive[0] /= 2
            if n % 2 == 0:
                naive[-1] /= 2

            assert np.max(np.abs(spectrum.magnitudes - naive)) < 1e-9


class TestAugmentationInvariants:

    def test_random_inputs(self):
        rng = np.random.default_rng(6)
        params = AugmentParams()
        identity = AugmentParams.identity()

        for _ in range(1000):
            n = int(rng.integers(16, 512))
            x = TimeSeries(samples=rng.standard_normal(n), sample_rate_hz=float(rng.uniform(100, 5000)))

            for variant in augment_five(x, params, rng):
                assert len(variant.series) == n
                assert variant.series.sample_rate_hz == x.sample_rate_hz

            variants = augment_five(x, identity, rng)
            for variant in variants[:4]:
                assert np.array_equal(variant.series.samples, x.samples)
            assert np.max(np.abs(variants[4].series.samples - x.samples)) <= 1e-12

            alpha = float(rng.uniform(0, 1))
            masked = masking_noise(x, alpha, rng)
            assert int(np.sum(masked.samples == 0.0)) == mask_count(n, alpha)


class TestThreeDbFloor:

    def test_random_triples(self):
        rng = np.random.default_rng(200)
        fs, n = 1000.0, 1000

        for _ in range(200):
            # Even rotation speeds keep every harmonic and sub-harmonic on a 1 Hz bin
            rotation = float(2 * rng.integers(3, 8))
            highest_mesh = int((499 / rotation - 1) // 3)
            gmf = float(rng.integers(3, highest_mesh + 1)) * rotation
            spec = MachineSpec(rotation_hz=rotation, gmf_hz=gmf)
            surrogate = SurrogateConfig(sample_rate_hz=fs, n_samples=n, n_random_tones=5)
            base = gen_baseline_surrogate(spec, fs, n, rng, surrogate)
            before = fft_magnitude(base).magnitudes

            mains, sidebands = gear_frequencies(spec.gmf_hz, rotation)
            generator, frequencies = [
                (gen_unbalance, [rotation]),
                (gen_misalignment, [rotation, 2 * rotation, 3 * rotation]),
                (gen_looseness, looseness_frequencies(rotation, spec.looseness_harmonic_count)),
                (gen_gear_fault, mains + sidebands),
            ][int(rng.integers(0, 4))]

            after = fft_magnitude(generator(base, spec, AmplitudeRule(), rng)).magnitudes
            for f in frequencies:
                k = int(round(f * n / fs))
                assert 20 * np.log10(after[k] / max(before[k], 1e-300)) >= 3.0 - 1e-9


class TestGradients:

    @pytest.mark.slow
    def test_random_architectures(self):
        rng = np.random.default_rng(100)
        h = 1e-5

        for trial in range(100):
            arch = Architecture(
                input_len=int(rng.integers(32, 129)),
                conv_filters=int(rng.integers(2, 9)),
                kernel_size=int(rng.choice([3, 5, 7])),
                pool_size=int(rng.choice([1, 2, 4])),
                dropout_rate=0.0,
                dense_units=int(rng.integers(4, 17)),
            )
            weights = init_weights(arch, rng)
            weights.conv_b[:] = 0.05
            weights.hidden_b[:] = 0.05
            x = rng.standard_normal((2, arch.input_len))
            onehot = np.eye(7)[rng.integers(0, 7, size=2)]

            _, cache = forward(weights, x, arch)
            grads = backward(weights, cache, onehot, arch)

            for name in ModelWeights.names():
                tensor, analytic = getattr(weights, name), getattr(grads, name)
                flat_indices = rng.choice(tensor.size, size=min(10, tensor.size), replace=False)
                for flat in flat_indices:
                    index = np.unravel_index(flat, tensor.shape)
                    original = tensor[index]
                    tensor[index] = original + h
                    up = loss(forward(weights, x, arch)[0], onehot)
                    tensor[index] = original - h
                    down = loss(forward(weights, x, arch)[0], onehot)
                    tensor[index] = original

                    numeric = (up - down) / (2 * h)
                    scale = max(abs(numeric), abs(analytic[index]), 1e-3)
                    assert abs(numeric - analytic[index]) / scale < 1e-4, (trial, name, index)


@pytest.mark.slow
class TestDeskTransfer:

    def test_accuracy(self, desk_config):
        start = time.perf_counter()
        report = run_experiment(desk_config, build_test_set(desk_config))
        elapsed = time.perf_counter() - start

        assert len(report.runs) == 3
        assert report.mean_accuracy >= 0.90
        # Three runs within 15 minutes on a 4-core desktop
        assert elapsed <= 900, f"{elapsed:.0f} s"

    def test_gradcam_localization(self, desk_config):
        candidates = load_baselines(desk_config, minimum=desk_config.n_r)
        rng = run_rng(desk_config)
        model = train_model(desk_config, build_run_pool(desk_config, candidates, rng), rng)

        test_set = build_test_set(desk_config)
        rotation = desk_config.machine.rotation_hz
        hits = {FaultLabel.Unbalance: [], FaultLabel.Misalignment: []}

        for sample in test_set.samples:
            if sample.label not in hits or predict(model, sample.spectrum)[0] is not sample.label:
                continue
            heatmap = gradcam(model, sample.spectrum, sample.label)
            peak = int(np.argmax(heatmap.relevance))
            harmonics = [1] if sample.label is FaultLabel.Unbalance else [1, 2, 3]
            hits[sample.label].append(
                any(abs(peak - sample.spectrum.bin_of(m * rotation)) <= 2 for m in harmonics)
            )

        for label, found in hits.items():
            assert found, label
            assert np.mean(found) >= 0.8, label

    def test_reports_and_models_are_reproducible(self, tmp_path):
        for out in ("a", "b"):
            common = ["--config", str(DESK_CONFIG), "--out", str(tmp_path / out), "--set", "repetitions=1"]
            assert cli_main(["run", *common]) == 0
            assert cli_main(["train", *common]) == 0

        for relative in ("reports/desk-transfer.txt", "reports/desk-transfer.csv",
                         "models/desk-transfer.fdx"):
            assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()
