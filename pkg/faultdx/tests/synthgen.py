import numpy as np
import pytest

from faultdx.core import FaultLabel, Spectrum, TimeSeries
from faultdx.models.machine import AmplitudeRule, MachineSpec, SurrogateConfig
from faultdx.spectral import fft_magnitude
from faultdx.synthgen import (
    SineComponent,
    SynthesisException,
    gear_frequencies,
    gen_all_conditions,
    gen_baseline_surrogate,
    gen_bearing_fault,
    gen_gear_fault,
    gen_looseness,
    gen_misalignment,
    gen_normal,
    gen_unbalance,
    gmf,
    impact_burst,
    impact_train,
    looseness_frequencies,
    sample_fault_amplitude,
    sine,
)

from .main import FS, N, TEST_MACHINE, baseline, rng, zero_baseline


def _gain_db(after: Spectrum, before: Spectrum, f: float) -> float:
    k = after.bin_of(f)
    return 20 * np.log10(after.magnitudes[k] / before.magnitudes[k])


def _peaks(x: TimeSeries, threshold: float = 1e-6) -> list[float]:
    spectrum = fft_magnitude(x)
    return spectrum.frequencies()[spectrum.magnitudes > threshold].tolist()


def _fixed_rule(gain_db: float, **kwargs) -> AmplitudeRule:
    return AmplitudeRule(min_gain_db=gain_db, max_gain_db=gain_db, **kwargs)


class TestSine:

    def test_zero_amplitude(self):
        assert np.all(sine(SineComponent(0.0, 50.0), 100, FS).samples == 0)

    def test_quarter_rate_cycle(self):
        x = sine(SineComponent(1.0, FS / 4), 8, FS)
        assert np.allclose(x.samples, [0, 1, 0, -1, 0, 1, 0, -1], atol=1e-12)

    def test_spectrum_peak(self):
        spectrum = fft_magnitude(sine(SineComponent(2.0, 50.0), 1000, 1000.0))

        assert spectrum.magnitudes[50] == pytest.approx(2.0, abs=1e-9)
        others = np.delete(spectrum.magnitudes, 50)
        assert np.all(others < 1e-9)

    def test_rejects_nyquist(self):
        with pytest.raises(SynthesisException):
            sine(SineComponent(1.0, 500.0), 100, 1000.0)

    def test_rejects_negative_amplitude(self):
        with pytest.raises(SynthesisException):
            SineComponent(-1.0, 10.0)

    def test_gmf(self):
        assert gmf(10, 10.0) == 100.0
        assert gmf(1, 20.6) == 20.6
        with pytest.raises(SynthesisException):
            gmf(0, 10.0)


class TestFaultAmplitude:

    unit = Spectrum(np.ones(100), df_hz=1.0)

    def test_three_db(self, rng):
        a = sample_fault_amplitude(self.unit, 20.0, _fixed_rule(3.0), rng)
        assert a == pytest.approx(1.4125, abs=1e-4)

    def test_twenty_db(self, rng):
        a = sample_fault_amplitude(self.unit, 20.0, _fixed_rule(20.0), rng)
        assert a == pytest.approx(10.0)

    def test_identity_gain(self, rng):
        a = sample_fault_amplitude(self.unit, 20.0, _fixed_rule(0.0), rng)
        assert a == pytest.approx(1.0)

    def test_gain_within_range(self, rng):
        rule = AmplitudeRule()
        gains = [20 * np.log10(sample_fault_amplitude(self.unit, 10.0, rule, rng))
                 for _ in range(500)]
        assert min(gains) >= 3.0 - 1e-9
        assert max(gains) <= 20.0 + 1e-9

    def test_median_guards_silent_bin(self, rng):
        magnitudes = np.full(101, 2.0)
        magnitudes[30] = 0.0
        spectrum = Spectrum(magnitudes, df_hz=1.0)

        a = sample_fault_amplitude(spectrum, 30.0, _fixed_rule(0.0), rng)
        assert a == pytest.approx(2.0)

    def test_silent_baseline_uses_unit_reference(self, rng):
        silent = Spectrum(np.zeros(100), df_hz=1.0)
        a = sample_fault_amplitude(silent, 20.0, _fixed_rule(6.0), rng)
        assert a == pytest.approx(10 ** (6 / 20))

    def test_outside_spectrum(self, rng):
        with pytest.raises(SynthesisException):
            sample_fault_amplitude(self.unit, 500.0, AmplitudeRule(), rng)


class TestSinusoidalFaults:

    def test_normal_is_identity(self, baseline):
        assert np.array_equal(gen_normal(baseline).samples, baseline.samples)

    def test_unbalance_on_zero_baseline(self, zero_baseline, rng):
        out = gen_unbalance(zero_baseline, TEST_MACHINE, AmplitudeRule(), rng)
        spectrum = fft_magnitude(out)

        assert spectrum.frequencies()[np.argmax(spectrum.magnitudes)] == 20.0
        assert _peaks(out) == [20.0]

    def test_unbalance_leaves_other_bins(self, baseline, rng):
        out = gen_unbalance(baseline, TEST_MACHINE, AmplitudeRule(), rng)
        before, after = fft_magnitude(baseline), fft_magnitude(out)

        changed = np.flatnonzero(np.abs(after.magnitudes - before.magnitudes) > 1e-9)
        assert changed.tolist() == [20]

    def test_additivity(self, baseline, rng):
        out = gen_misalignment(baseline, TEST_MACHINE, AmplitudeRule(), rng)
        injected = out.samples - baseline.samples

        assert _peaks(TimeSeries(injected, FS)) == [20.0, 40.0, 60.0]

    def test_misalignment_tones(self, zero_baseline, rng):
        out = gen_misalignment(zero_baseline, TEST_MACHINE, AmplitudeRule(), rng)
        assert _peaks(out) == [20.0, 40.0, 60.0]

    def test_misalignment_second_harmonic_dominates(self, zero_baseline):
        for seed in range(50):
            out = gen_misalignment(zero_baseline, TEST_MACHINE, AmplitudeRule(),
                                   np.random.default_rng(seed))
            spectrum = fft_magnitude(out)
            assert spectrum.magnitudes[40] >= spectrum.magnitudes[20] - 1e-9

    def test_misalignment_over_strong_rotation_tone(self, baseline):
        before = fft_magnitude(baseline)
        assert before.magnitudes[20] > 0.5

        for seed in range(30):
            out = gen_misalignment(baseline, TEST_MACHINE, AmplitudeRule(),
                                   np.random.default_rng(seed))
            after = fft_magnitude(out)

            for f in (20.0, 40.0, 60.0):
                assert _gain_db(after, before, f) >= 3.0 - 1e-9, (seed, f)
            assert after.magnitudes[40] >= after.magnitudes[20] * (1 - 1e-9)

    def test_misalignment_keeps_gain_range_when_feasible(self):
        # Equal 1x and 2x baseline tones leave room for 1x below the 2x draw
        tones = [sine(SineComponent(1.0, f), N, FS).samples for f in (20.0, 40.0)]
        base = TimeSeries(tones[0] + tones[1], FS)
        before = fft_magnitude(base)

        for seed in range(30):
            after = fft_magnitude(gen_misalignment(base, TEST_MACHINE, AmplitudeRule(),
                                                   np.random.default_rng(seed)))
            for f in (20.0, 40.0):
                assert 3.0 - 1e-9 <= _gain_db(after, before, f) <= 20.0 + 1e-9, (seed, f)
            assert after.magnitudes[40] >= after.magnitudes[20] * (1 - 1e-9)

    def test_looseness_frequencies(self):
        assert looseness_frequencies(20.0, 4) == [10, 20, 30, 40, 50, 60, 70, 80]
        assert looseness_frequencies(20.0, 1) == [10, 20]

    def test_looseness_tones(self, zero_baseline, rng):
        out = gen_looseness(zero_baseline, TEST_MACHINE, AmplitudeRule(), rng)
        assert _peaks(out) == [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0]

    def test_gear_frequencies(self):
        mains, sidebands = gear_frequencies(711.0, 20.0)

        assert mains == [711.0, 1422.0, 2133.0]
        assert sidebands == [691.0, 731.0, 1402.0, 1442.0, 2113.0, 2153.0]

    def test_gear_fault_nine_peaks(self, zero_baseline, rng):
        out = gen_gear_fault(zero_baseline, TEST_MACHINE, AmplitudeRule(), rng)
        assert _peaks(out) == [100.0, 120.0, 140.0, 220.0, 240.0, 260.0, 340.0, 360.0, 380.0]

    def test_gear_needs_gmf(self, zero_baseline, rng):
        spec = MachineSpec(rotation_hz=20.0)
        with pytest.raises(SynthesisException):
            gen_gear_fault(zero_baseline, spec, AmplitudeRule(), rng)

    def test_misalignment_above_nyquist(self, zero_baseline, rng):
        spec = MachineSpec(rotation_hz=200.0)
        with pytest.raises(SynthesisException):
            gen_misalignment(zero_baseline, spec, AmplitudeRule(), rng)


class TestThreeDbFloor:

    @pytest.mark.parametrize("seed", range(10))
    def test_every_injected_bin(self, seed):
        rng = np.random.default_rng(seed)
        base = gen_baseline_surrogate(TEST_MACHINE, FS, N, rng, SurrogateConfig(
            sample_rate_hz=FS, n_samples=N, noise_std=0.1, n_random_tones=5))
        before = fft_magnitude(base)
        mains, sidebands = gear_frequencies(TEST_MACHINE.gmf_hz, TEST_MACHINE.rotation_hz)

        cases = [
            (gen_unbalance, [20.0]),
            (gen_misalignment, [20.0, 40.0, 60.0]),
            (gen_looseness, looseness_frequencies(20.0, 4)),
            (gen_gear_fault, mains + sidebands),
        ]
        for generator, frequencies in cases:
            after = fft_magnitude(generator(base, TEST_MACHINE, AmplitudeRule(), rng))
            for f in frequencies:
                assert _gain_db(after, before, f) >= 3.0 - 1e-9, (generator.__name__, f)

    def test_compensation_against_in_phase_baseline(self, rng):
        # Baseline already holds a unit tone at fr, in phase with the injected one
        base = sine(SineComponent(1.0, 20.0), N, FS)

        compensated = gen_unbalance(base, TEST_MACHINE, _fixed_rule(6.0), rng)
        plain = gen_unbalance(base, TEST_MACHINE, _fixed_rule(6.0, phase_compensated=False), rng)

        target = 10 ** (6 / 20)
        assert fft_magnitude(compensated).magnitudes[20] == pytest.approx(target, rel=1e-9)
        assert fft_magnitude(plain).magnitudes[20] == pytest.approx(1 + target, rel=1e-9)

    def test_random_phase_keeps_magnitude(self, zero_baseline):
        spec = TEST_MACHINE.model_copy(update={"random_phase": True})
        out = gen_unbalance(zero_baseline, spec, _fixed_rule(0.0), np.random.default_rng(3))
        fixed = gen_unbalance(zero_baseline, TEST_MACHINE, _fixed_rule(0.0),
                              np.random.default_rng(3))

        assert fft_magnitude(out).magnitudes[20] == pytest.approx(1.0)
        assert not np.allclose(out.samples, fixed.samples)


class TestBearingFaults:

    def test_default_resonance(self):
        assert TEST_MACHINE.resonance_for(FS) == FS / 8
        assert TEST_MACHINE.model_copy(update={"impact_resonance_hz": 90.0}).resonance_for(FS) == 90

    def test_burst_shape(self):
        burst = impact_burst(2.0, 125.0, FS)
        tau = 5 / 125.0

        # Window of 5 decay constants
        assert burst.size == int(np.ceil(5 * tau * FS))
        assert burst[0] == 0.0
        assert np.max(np.abs(burst)) <= 2.0

    def test_train_starts_with_burst(self):
        # 100 Hz impacts land every 10 samples
        train = impact_train(N, FS, 100.0, 1.0, 125.0)
        burst = impact_burst(1.0, 125.0, FS)

        assert np.allclose(train[:10], burst[:10], atol=1e-12)
        assert train.size == N

    def test_comb_line_at_resonance(self, zero_baseline, rng):
        out = gen_bearing_fault(zero_baseline, TEST_MACHINE, TEST_MACHINE.bpfo_hz,
                                AmplitudeRule(), rng)
        spectrum = fft_magnitude(out)

        # Strongest line is the BPFO harmonic nearest the 125 Hz resonance
        assert spectrum.frequencies()[np.argmax(spectrum.magnitudes)] == 126.0

    def test_train_superposes_bursts(self):
        train = impact_train(N, FS, 100.0, 1.0, 125.0)
        burst = impact_burst(1.0, 125.0, FS)

        assert np.allclose(train[10:20], burst[10:20] + burst[:10], atol=1e-12)

    def test_missing_fault_frequency(self, zero_baseline, rng):
        with pytest.raises(SynthesisException):
            gen_bearing_fault(zero_baseline, TEST_MACHINE, None, AmplitudeRule(), rng)

    def test_resonance_above_nyquist(self, zero_baseline, rng):
        spec = TEST_MACHINE.model_copy(update={"impact_resonance_hz": 600.0})
        with pytest.raises(SynthesisException):
            gen_bearing_fault(zero_baseline, spec, spec.bpfi_hz, AmplitudeRule(), rng)


class TestSurrogate:

    def test_pure_tone(self, rng):
        cfg = SurrogateConfig(sample_rate_hz=FS, n_samples=N, noise_std=0.0, n_random_tones=0)
        x = gen_baseline_surrogate(TEST_MACHINE, FS, N, rng, cfg)

        expected = np.sin(2 * np.pi * 20.0 * np.arange(N) / FS)
        assert np.allclose(x.samples, expected, atol=1e-12)

    def test_seeded(self):
        a = gen_baseline_surrogate(TEST_MACHINE, FS, N, np.random.default_rng(9))
        b = gen_baseline_surrogate(TEST_MACHINE, FS, N, np.random.default_rng(9))
        assert np.array_equal(a.samples, b.samples)

    def test_rotation_dominates(self, baseline):
        spectrum = fft_magnitude(baseline)
        assert spectrum.frequencies()[np.argmax(spectrum.magnitudes)] == 20.0


class TestAllConditions:

    def test_one_per_label(self, baseline, rng):
        outputs = gen_all_conditions(baseline, TEST_MACHINE, AmplitudeRule(), rng)

        assert len(outputs) == 7
        assert [label for _, label in outputs] == list(FaultLabel)
        assert all(len(x) == len(baseline) for x, _ in outputs)

    def test_deterministic(self, baseline):
        a = gen_all_conditions(baseline, TEST_MACHINE, AmplitudeRule(), np.random.default_rng(8))
        b = gen_all_conditions(baseline, TEST_MACHINE, AmplitudeRule(), np.random.default_rng(8))

        for (x, _), (y, _) in zip(a, b):
            assert np.array_equal(x.samples, y.samples)

    def test_missing_bearing_frequency(self, baseline, rng):
        spec = MachineSpec(rotation_hz=20.0, gmf_hz=120.0)
        with pytest.raises(SynthesisException):
            gen_all_conditions(baseline, spec, AmplitudeRule(), rng)
