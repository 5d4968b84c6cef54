#
# Synthetic fault signatures
#
# Every generator adds a deterministic fault component to a baseline signal, so
# output - baseline is exactly the injected component. Tone amplitudes are set
# relative to the baseline spectrum at the fault frequency (gain in dB).
#
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from faultdx.core import FaultDxException, FaultLabel, Spectrum, TimeSeries
from faultdx.models.machine import AmplitudeRule, MachineSpec, SurrogateConfig
from faultdx.spectral import fft_magnitude

log = logging.getLogger(__name__)

# Impact burst rings for about this many carrier cycles
BURST_DECAY_CYCLES = 5.0
# Burst window length in decay constants, exp(-5) ~ 0.7% of the peak
BURST_WINDOW_TAUS = 5.0


class SynthesisException(FaultDxException):
    pass


@dataclass(frozen=True)
class SineComponent:
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise SynthesisException(f"Amplitude must be >= 0, got {self.amplitude}")
        if self.frequency <= 0:
            raise SynthesisException(f"Frequency must be > 0, got {self.frequency}")


def _check_below_nyquist(frequency_hz: float, sample_rate_hz: float, what: str):
    if frequency_hz >= sample_rate_hz / 2:
        raise SynthesisException(
            f"{what} ({frequency_hz:g} Hz) is at or above the Nyquist frequency "
            f"({sample_rate_hz / 2:g} Hz)"
        )


def _sine_samples(component: SineComponent, n: int, fs: float) -> np.ndarray:
    i = np.arange(n)
    return component.amplitude * np.sin(2 * np.pi * component.frequency * i / fs + component.phase)


def sine(component: SineComponent, n: int, fs: float) -> TimeSeries:
    if n < 1:
        raise SynthesisException(f"Sample count must be >= 1, got {n}")
    _check_below_nyquist(component.frequency, fs, "Sine frequency")
    return TimeSeries(samples=_sine_samples(component, n, fs), sample_rate_hz=fs)


def gmf(n_teeth: int, shaft_hz: float) -> float:
    if n_teeth < 1 or shaft_hz <= 0:
        raise SynthesisException("Tooth count and shaft speed must be positive")
    return n_teeth * shaft_hz


def _reference_magnitude(baseline: Spectrum, f: float) -> float:
    if not baseline.f_start_hz <= f <= baseline.frequencies()[-1] + baseline.df_hz / 2:
        raise SynthesisException(f"Frequency {f:g} Hz lies outside the baseline spectrum")

    magnitude = float(baseline.magnitudes[baseline.bin_of(f)])
    floor = float(np.median(baseline.magnitudes))
    reference = max(magnitude, floor)

    # Silent baseline: gains are taken relative to unit amplitude
    if reference <= 1e-300:
        return 1.0
    return reference


def sample_fault_amplitude(
        baseline: Spectrum, f: float, rule: AmplitudeRule, rng: np.random.Generator
) -> float:
    """Peak amplitude whose gain over the baseline bin at f is uniform in the rule's dB range"""

    gain_db = rng.uniform(rule.min_gain_db, rule.max_gain_db)
    return _reference_magnitude(baseline, f) * 10 ** (gain_db / 20)


def _bin_coefficient(samples: np.ndarray, fs: float, f: float) -> complex:
    """Single-sided DFT coefficient (2/N scaling) at the bin nearest f"""
    n = samples.size
    k = int(round(f * n / fs))
    kernel = np.exp(-2j * np.pi * k * np.arange(n) / n)
    return complex(2.0 / n * np.dot(samples, kernel))


def _compensated_amplitude(current: np.ndarray, unit: np.ndarray, fs: float, f: float,
                           target: float) -> float:
    """Amplitude A of the unit tone so that |b + A*u| equals the target at f's bin"""

    b = _bin_coefficient(current, fs, f)
    u = _bin_coefficient(unit, fs, f)
    uu = abs(u) ** 2
    if uu < 1e-12:
        return target

    p = (b * u.conjugate()).real
    discriminant = p ** 2 - uu * (abs(b) ** 2 - target ** 2)
    if discriminant < 0:
        return target

    return max((-p + math.sqrt(discriminant)) / uu, 0.0)


def _phase(spec: MachineSpec, rng: np.random.Generator) -> float:
    return float(rng.uniform(0, 2 * np.pi)) if spec.random_phase else 0.0


def _inject_tones(
        baseline: TimeSeries,
        tones: list[tuple[float, float]],
        spec: MachineSpec,
        rule: AmplitudeRule,
        rng: np.random.Generator,
) -> TimeSeries:
    """Adds one sine per (frequency, target magnitude) pair"""

    fs = baseline.sample_rate_hz
    n = len(baseline)
    out = np.array(baseline.samples)

    for f, target in tones:
        _check_below_nyquist(f, fs, "Fault frequency")
        unit = _sine_samples(SineComponent(1.0, f, _phase(spec, rng)), n, fs)

        amplitude = target
        if rule.phase_compensated:
            amplitude = _compensated_amplitude(out, unit, fs, f, target)

        log.debug(f"Injecting {f:.3f} Hz tone, target {target:.4g}, amplitude {amplitude:.4g}")
        out += amplitude * unit

    return baseline.with_samples(out)


def _draw_target(base_spectrum: Spectrum, f: float, rule: AmplitudeRule,
                 rng: np.random.Generator, scale: float = 1.0) -> float:
    target = sample_fault_amplitude(base_spectrum, f, rule, rng)
    if scale == 1.0:
        return target

    floor = _reference_magnitude(base_spectrum, f) * 10 ** (rule.min_gain_db / 20)
    return max(scale * target, floor)


def gen_normal(baseline: TimeSeries, rng: Optional[np.random.Generator] = None) -> TimeSeries:
    return baseline.with_samples(baseline.samples)


def gen_unbalance(baseline: TimeSeries, spec: MachineSpec, rule: AmplitudeRule,
                  rng: np.random.Generator) -> TimeSeries:
    fr = spec.rotation_hz
    _check_below_nyquist(fr, baseline.sample_rate_hz, "Rotation frequency")

    base_spectrum = fft_magnitude(baseline)
    tones = [(fr, _draw_target(base_spectrum, fr, rule, rng))]
    return _inject_tones(baseline, tones, spec, rule, rng)


def _second_harmonic_led_targets(base_spectrum: Spectrum, fr: float, rule: AmplitudeRule,
                                 rng: np.random.Generator) -> tuple[float, float]:
    """Targets at 1x and 2x fr with the 2x level at or above the 1x level"""

    second = _draw_target(base_spectrum, 2 * fr, rule, rng)
    reference = _reference_magnitude(base_spectrum, fr)

    # Highest 1x gain that stays at or below the 2x level
    ceiling_db = 20 * math.log10(second / reference)
    if ceiling_db >= rule.min_gain_db:
        gain_db = rng.uniform(rule.min_gain_db, min(rule.max_gain_db, ceiling_db))
        return reference * 10 ** (gain_db / 20), second

    # Strong 1x baseline tone, 2x is raised to the 1x level
    first = sample_fault_amplitude(base_spectrum, fr, rule, rng)
    return first, max(second, first)


def gen_misalignment(baseline: TimeSeries, spec: MachineSpec, rule: AmplitudeRule,
                     rng: np.random.Generator) -> TimeSeries:
    fr = spec.rotation_hz
    _check_below_nyquist(3 * fr, baseline.sample_rate_hz, "3x rotation frequency")

    base_spectrum = fft_magnitude(baseline)
    first, second = _second_harmonic_led_targets(base_spectrum, fr, rule, rng)
    third = _draw_target(base_spectrum, 3 * fr, rule, rng)

    tones = [(fr, first), (2 * fr, second), (3 * fr, third)]
    return _inject_tones(baseline, tones, spec, rule, rng)


def looseness_frequencies(rotation_hz: float, n_harmonics: int) -> list[float]:
    """Harmonics 1..N and sub-harmonics 0.5..N-0.5 of the rotation frequency, ascending"""
    return [rotation_hz * k / 2 for k in range(1, 2 * n_harmonics + 1)]


def gen_looseness(baseline: TimeSeries, spec: MachineSpec, rule: AmplitudeRule,
                  rng: np.random.Generator) -> TimeSeries:
    frequencies = looseness_frequencies(spec.rotation_hz, spec.looseness_harmonic_count)
    _check_below_nyquist(frequencies[-1], baseline.sample_rate_hz, "Highest looseness harmonic")

    base_spectrum = fft_magnitude(baseline)
    tones = [(f, _draw_target(base_spectrum, f, rule, rng)) for f in frequencies]
    return _inject_tones(baseline, tones, spec, rule, rng)


def gear_frequencies(gmf_hz: float, rotation_hz: float) -> tuple[list[float], list[float]]:
    """(mesh harmonics 1..3 x GMF, sidebands k x GMF +/- fr)"""
    mains = [k * gmf_hz for k in (1, 2, 3)]
    sidebands = [f for main in mains for f in (main - rotation_hz, main + rotation_hz)]
    return mains, sidebands


def gen_gear_fault(baseline: TimeSeries, spec: MachineSpec, rule: AmplitudeRule,
                   rng: np.random.Generator) -> TimeSeries:
    if spec.gmf_hz is None:
        raise SynthesisException("Gear fault synthesis needs gmf_hz in the machine spec")

    fr = spec.rotation_hz
    mains, sidebands = gear_frequencies(spec.gmf_hz, fr)
    _check_below_nyquist(sidebands[-1], baseline.sample_rate_hz, "Highest gear sideband")
    if sidebands[0] <= 0:
        raise SynthesisException(
            f"GMF ({spec.gmf_hz:g} Hz) must exceed the rotation frequency ({fr:g} Hz)"
        )

    base_spectrum = fft_magnitude(baseline)
    tones = [(f, _draw_target(base_spectrum, f, rule, rng)) for f in mains]
    tones += [
        (f, _draw_target(base_spectrum, f, rule, rng, scale=rule.sideband_scale))
        for f in sidebands
    ]
    return _inject_tones(baseline, tones, spec, rule, rng)


def impact_burst(amplitude: float, resonance_hz: float, fs: float) -> np.ndarray:
    """One decaying resonance ring sampled from t = 0"""
    tau = BURST_DECAY_CYCLES / resonance_hz
    n = max(int(math.ceil(BURST_WINDOW_TAUS * tau * fs)), 1)
    t = np.arange(n) / fs
    return amplitude * np.sin(2 * np.pi * resonance_hz * t) * np.exp(-t / tau)


def impact_train(n: int, fs: float, fault_hz: float, amplitude: float,
                 resonance_hz: float) -> np.ndarray:
    """
    The burst convolved with a unit Dirac comb of period 1/fault_hz.

    Impact times k/fault_hz are generally not on the sample grid, so every burst is
    evaluated at its exact sub-sample offset instead of being snapped to a sample.
    """

    tau = BURST_DECAY_CYCLES / resonance_hz
    width = max(int(math.ceil(BURST_WINDOW_TAUS * tau * fs)), 1)

    impacts = np.arange(0, int(math.ceil(n / fs * fault_hz))) / fault_hz
    starts = np.ceil(impacts * fs - 1e-9).astype(np.int64)

    idx = starts[:, None] + np.arange(width)[None, :]
    t = idx / fs - impacts[:, None]
    values = amplitude * np.sin(2 * np.pi * resonance_hz * t) * np.exp(-t / tau)

    inside = idx < n
    out = np.zeros(n)
    np.add.at(out, idx[inside], values[inside])
    return out


def gen_bearing_fault(baseline: TimeSeries, spec: MachineSpec, fault_hz: Optional[float],
                      rule: AmplitudeRule, rng: np.random.Generator) -> TimeSeries:
    if fault_hz is None:
        raise SynthesisException("Bearing fault synthesis needs bpfo_hz/bpfi_hz in the machine spec")

    fs = baseline.sample_rate_hz
    resonance = spec.resonance_for(fs)
    _check_below_nyquist(resonance, fs, "Impact resonance")
    _check_below_nyquist(fault_hz, fs, "Bearing fault frequency")

    amplitude = sample_fault_amplitude(fft_magnitude(baseline), resonance, rule, rng)
    train = impact_train(len(baseline), fs, fault_hz, amplitude, resonance)
    return baseline.with_samples(baseline.samples + train)


def gen_baseline_surrogate(spec: MachineSpec, fs: float, n: int, rng: np.random.Generator,
                           surrogate: SurrogateConfig = SurrogateConfig()) -> TimeSeries:
    """Rotation tone plus white noise plus a few random tones near the noise level"""

    _check_below_nyquist(spec.rotation_hz, fs, "Rotation frequency")

    out = _sine_samples(SineComponent(surrogate.rotation_amplitude, spec.rotation_hz), n, fs)
    if surrogate.noise_std > 0:
        out = out + rng.normal(0.0, surrogate.noise_std, n)

    level = surrogate.random_tone_level * surrogate.noise_std
    for _ in range(surrogate.n_random_tones):
        f = rng.uniform(fs / n, fs / 2 - fs / n)
        amplitude = level * rng.uniform(0.5, 1.5)
        out = out + _sine_samples(SineComponent(amplitude, f, rng.uniform(0, 2 * np.pi)), n, fs)

    return TimeSeries(samples=out, sample_rate_hz=fs)


Generator = Callable[[TimeSeries, MachineSpec, AmplitudeRule, np.random.Generator], TimeSeries]

GENERATORS: dict[FaultLabel, Generator] = {
    FaultLabel.Normal: lambda x, spec, rule, rng: gen_normal(x, rng),
    FaultLabel.BPFO: lambda x, spec, rule, rng: gen_bearing_fault(x, spec, spec.bpfo_hz, rule, rng),
    FaultLabel.BPFI: lambda x, spec, rule, rng: gen_bearing_fault(x, spec, spec.bpfi_hz, rule, rng),
    FaultLabel.Unbalance: gen_unbalance,
    FaultLabel.Misalignment: gen_misalignment,
    FaultLabel.Looseness: gen_looseness,
    FaultLabel.GearFault: gen_gear_fault,
}


def gen_all_conditions(baseline: TimeSeries, spec: MachineSpec, rule: AmplitudeRule,
                       rng: np.random.Generator) -> list[tuple[TimeSeries, FaultLabel]]:
    """One synthetic signal per condition, in label-encoding order"""
    return [(GENERATORS[label](baseline, spec, rule, rng), label) for label in FaultLabel]
