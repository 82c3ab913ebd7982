"""Griffiths-Jim beamformer for a broadside target.

Fixed path sums the channels, the blocking path differences them (a
broadside target cancels exactly), and a frequency-domain adaptive filter
(overlap-save block LMS) estimates the interference left in the fixed path
from the blocking-path reference. Output z = fixed - adapted estimate.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .blockthresh import residual_variance
from .dsp import AudioBuffer, Spectrogram, StftParams, stft

SINR_CAP = 1e6
SINR_FLOOR_FACTOR = 1e-12


@dataclass(frozen=True)
class GjbfConfig:
    """Adaptive-path configuration.

    block_size defaults to filter_length and alignment_delay to
    filter_length // 2 (fixed path is delayed by that much so the causal
    filter can model the interference path; the output is advanced back).
    normalized=False freezes the step size (plain block LMS), which is the
    mode matched by the time-domain reference implementation.
    """

    filter_length: int = 250
    step_size: float = 0.05
    block_size: int | None = None
    leak: float = 0.0
    alignment_delay: int | None = None
    normalized: bool = True
    constrain_gradient: bool = True
    power_smoothing: float = 0.9
    divergence_limit: float = 1e6

    def __post_init__(self):
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        if not 0.0 < self.step_size < 2.0:
            raise ValueError("step_size must be in (0, 2)")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError("leak must be in [0, 1]")
        if self.alignment_delay is not None and self.alignment_delay < 0:
            raise ValueError("alignment_delay must be nonnegative")
        if not 0.0 <= self.power_smoothing < 1.0:
            raise ValueError("power_smoothing must be in [0, 1)")

    @property
    def block(self) -> int:
        return self.filter_length if self.block_size is None else self.block_size

    @property
    def delay(self) -> int:
        return self.filter_length // 2 if self.alignment_delay is None else self.alignment_delay


@dataclass
class AdaptiveFilterState:
    """Adaptive filter snapshot: taps, their transform, and the input tail."""

    taps: np.ndarray
    frequency_state: np.ndarray
    input_history: np.ndarray


def _paired_mono(ch1: AudioBuffer, ch2: AudioBuffer) -> tuple:
    if ch1.channel_count != 1 or ch2.channel_count != 1:
        raise ValueError("expected single-channel buffers")
    if ch1.sample_rate != ch2.sample_rate:
        raise ValueError("sample rates must match")
    if ch1.length != ch2.length:
        raise ValueError("channel lengths must match")
    return ch1.samples[0], ch2.samples[0]


def fixed_path(ch1: AudioBuffer, ch2: AudioBuffer) -> AudioBuffer:
    """Target-preserving path: per-sample channel mean."""
    x1, x2 = _paired_mono(ch1, ch2)
    return AudioBuffer(0.5 * (x1 + x2), ch1.sample_rate)


def blocking_path(ch1: AudioBuffer, ch2: AudioBuffer) -> AudioBuffer:
    """Target-rejecting path: channel difference (zero for equal-delay arrivals)."""
    x1, x2 = _paired_mono(ch1, ch2)
    return AudioBuffer(x1 - x2, ch1.sample_rate)


def fdaf_gjbf(ch1: AudioBuffer, ch2: AudioBuffer, config: GjbfConfig = GjbfConfig()) -> tuple:
    """Run the adaptive beamformer over a two-channel recording.

    Returns (z, y_b, state): the enhanced output and the adapted
    interference estimate, both re-aligned to the input timebase, plus the
    final filter state.
    """
    x1, x2 = _paired_mono(ch1, ch2)
    n_samples = x1.size
    L = config.filter_length
    if n_samples <= 2 * L:
        raise ValueError("signals must be longer than twice the filter length")
    B = config.block
    delay = config.delay
    nfft = L + B

    fixed = 0.5 * (x1 + x2)
    reference = x1 - x2

    total = n_samples + delay
    n_blocks = -(-total // B)
    padded = n_blocks * B
    ref_pad = np.zeros(padded)
    ref_pad[:n_samples] = reference
    desired = np.zeros(padded)
    desired[delay : delay + n_samples] = fixed

    weights = np.zeros(nfft, dtype=np.complex128)
    power = np.zeros(nfft)
    history = np.zeros(L)
    estimate = np.zeros(padded)
    gamma = config.power_smoothing
    # Scale-invariant floor: keeps near-silent blocks (or bins) from blowing
    # up the normalized step while vanishing identically for a zero reference.
    power_floor = 1e-4 * nfft * float(np.mean(reference**2))

    for k in range(n_blocks):
        blk = ref_pad[k * B : (k + 1) * B]
        frame = np.concatenate([history, blk])
        spectrum = np.fft.fft(frame)
        # Overlap-save: only the last B output samples of the circular product are valid.
        block_out = np.fft.ifft(spectrum * weights).real[L:]
        err = desired[k * B : (k + 1) * B] - block_out
        estimate[k * B : (k + 1) * B] = block_out

        err_spectrum = np.fft.fft(np.concatenate([np.zeros(L), err]))
        grad = np.conj(spectrum) * err_spectrum
        if config.normalized:
            block_power = np.abs(spectrum) ** 2
            power = block_power if k == 0 else gamma * power + (1.0 - gamma) * block_power
            grad = grad / (power + power_floor + 1e-300)
        if config.constrain_gradient:
            # Project out the circular-correlation wraparound before updating.
            grad_time = np.fft.ifft(grad).real
            grad_time[L:] = 0.0
            grad = np.fft.fft(grad_time)
        weights = (1.0 - config.leak) * weights + config.step_size * grad
        history = frame[B:]

        taps = np.fft.ifft(weights).real[:L]
        if not np.all(np.isfinite(taps)) or np.abs(taps).max() > config.divergence_limit:
            raise RuntimeError("step size too large")

    z = desired - estimate
    state = AdaptiveFilterState(
        taps=np.fft.ifft(weights).real[:L],
        frequency_state=weights,
        input_history=history.copy(),
    )
    rate = ch1.sample_rate
    return (
        AudioBuffer(z[delay : delay + n_samples], rate),
        AudioBuffer(estimate[delay : delay + n_samples], rate),
        state,
    )


def sinr_map(z: Spectrogram | np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Per-cell SINR estimate (|Z|^2 - sigma^2) / sigma^2, floored at 0.

    Cells whose variance sits below 1e-12 of the mean output power get the
    SINR_CAP sentinel; everything is clipped to [0, SINR_CAP].
    """
    coeffs = z.coefficients if isinstance(z, Spectrogram) else np.asarray(z)
    power = np.abs(coeffs) ** 2 if np.iscomplexobj(coeffs) else coeffs.astype(np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if power.shape != sigma2.shape:
        raise ValueError("dimensions must match")
    if np.any(sigma2 < 0):
        raise ValueError("variance map must be nonnegative")
    floor = max(SINR_FLOOR_FACTOR * float(power.mean()), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.clip((power - sigma2) / sigma2, 0.0, SINR_CAP)
    return np.where(sigma2 < floor, SINR_CAP, ratio)


def _sinr_floor_mask(z_power: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    floor = max(SINR_FLOOR_FACTOR * float(z_power.mean()), 1e-300)
    return sigma2 >= floor


def mean_sinr_db(z: Spectrogram, sigma2: np.ndarray) -> float:
    """Scalar SINR score: mean over valid cells of 10*log10(1 + SINR)."""
    power = np.abs(z.coefficients) ** 2
    valid = _sinr_floor_mask(power, sigma2)
    if not valid.any():
        return float(10.0 * np.log10(1.0 + SINR_CAP))
    ratio = sinr_map(z, sigma2)
    return float(np.mean(10.0 * np.log10(1.0 + ratio[valid])))


def select_filter_length(
    ch1: AudioBuffer,
    ch2: AudioBuffer,
    candidates,
    config: GjbfConfig = GjbfConfig(),
    stft_params: StftParams = StftParams(),
) -> tuple:
    """Sweep candidate filter lengths and keep the one with the best output SINR.

    Each candidate is run with block size and alignment derived from its own
    length; the score is mean_sinr_db of the output against the residual
    variance estimated from that output. Returns (best_length, curve) where
    curve lists (length, sinr_db) per candidate in input order; ties go to
    the smaller length.
    """
    candidates = [int(c) for c in candidates]
    if len(candidates) < 2:
        raise ValueError("need at least two candidate lengths")

    y1 = stft(ch1, stft_params)
    y2 = stft(ch2, stft_params)

    def run(length: int) -> float:
        trial = replace(config, filter_length=length, block_size=None, alignment_delay=None)
        z, _, _ = fdaf_gjbf(ch1, ch2, trial)
        z_spec = stft(z, stft_params)
        sigma2 = residual_variance(y1, y2, z_spec)
        return mean_sinr_db(z_spec, sigma2)

    curve = []
    failures = []
    with ThreadPoolExecutor(max_workers=min(4, len(candidates))) as pool:
        futures = [pool.submit(run, length) for length in candidates]
        for length, future in zip(candidates, futures):
            try:
                curve.append((length, future.result()))
            except Exception as exc:  # noqa: BLE001 - per-candidate isolation
                failures.append((length, exc))
    if not curve:
        raise RuntimeError(f"all candidate lengths failed: {failures[0][1]}") from failures[0][1]
    for length, exc in failures:
        warnings.warn(f"filter length {length} skipped: {exc}", stacklevel=2)
    best = min(curve, key=lambda item: (-item[1], item[0]))[0]
    return best, curve
