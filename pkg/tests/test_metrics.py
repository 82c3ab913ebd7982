"""Tests for the evaluation metrics and decompositions."""

import numpy as np
import pytest
from helpers import FS, default_scene

from audiozoom.dsp import AudioBuffer, StftParams, stft
from audiozoom.gjbf import GjbfConfig, fdaf_gjbf
from audiozoom.metrics import (
    EvalReport,
    align_delay_and_scale,
    build_report,
    decompose_linear,
    mse_db,
    osinr_db,
    project_onto_reference,
    shadow_gain_decompose,
    signal_power,
)
from audiozoom.mpdr import apply_mpdr, design_mpdr
from audiozoom.pipeline import frozen_stage, run_zoom, PipelineConfig


class TestOsinr:
    def test_equal_power_is_zero_db(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(1000)
        y = rng.permutation(x)
        assert osinr_db(x, y) == pytest.approx(0.0, abs=1e-12)

    def test_amplitude_scaling_shifts_twenty_db(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(1000)
        y = rng.standard_normal(1000)
        base = osinr_db(x, y)
        assert osinr_db(x, 0.1 * y) == pytest.approx(base + 20.0, abs=1e-9)

    def test_antisymmetry(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(500)
        y = rng.standard_normal(500)
        assert abs(osinr_db(x, y) + osinr_db(y, x)) <= 1e-9

    def test_zero_residual_capped(self):
        assert osinr_db(np.ones(10), np.zeros(10)) == 200.0

    def test_works_on_buffers_and_spectrograms(self):
        buf = AudioBuffer(np.ones(100), FS)
        assert signal_power(buf) == pytest.approx(100.0)
        spec = stft(AudioBuffer(np.random.default_rng(3).standard_normal(2048), FS))
        assert signal_power(spec) > 0


class TestMseDb:
    def test_identical_signals_hit_cap(self):
        rng = np.random.default_rng(4)
        x = AudioBuffer(rng.standard_normal(4000), FS)
        assert mse_db(x, x) == -200.0

    def test_zero_estimate_is_zero_db(self):
        rng = np.random.default_rng(5)
        ref = AudioBuffer(rng.standard_normal(4000), FS)
        est = AudioBuffer(np.zeros(4000), FS)
        assert mse_db(est, ref) == pytest.approx(0.0, abs=1e-12)

    def test_delay_and_scale_recovered(self):
        rng = np.random.default_rng(6)
        ref = rng.standard_normal(8000)
        est = np.zeros(8000)
        est[7:] = 0.5 * ref[:-7]
        got = mse_db(AudioBuffer(est, FS), AudioBuffer(ref, FS))
        assert got <= -100.0

    def test_invariant_to_positive_scaling(self):
        rng = np.random.default_rng(7)
        ref = AudioBuffer(rng.standard_normal(4000), FS)
        est = rng.standard_normal(4000)
        a = mse_db(AudioBuffer(est, FS), ref)
        b = mse_db(AudioBuffer(3.7 * est, FS), ref)
        assert a == pytest.approx(b, abs=1e-9)

    def test_silent_reference_rejected(self):
        with pytest.raises(ValueError, match="silent"):
            mse_db(AudioBuffer(np.ones(10), FS), AudioBuffer(np.zeros(10), FS))

    def test_alignment_helper_finds_shift_and_gain(self):
        rng = np.random.default_rng(8)
        ref = rng.standard_normal(2000)
        est = np.zeros(2000)
        est[5:] = 2.0 * ref[:-5]
        aligned, shift, gain = align_delay_and_scale(est, ref, max_shift=64)
        assert shift == 5
        assert gain == pytest.approx(0.5, rel=1e-6)
        assert np.abs(aligned[:-5] - ref[:-5]).max() <= 1e-9


class TestDecomposeLinear:
    def test_identity_stage(self):
        rng = np.random.default_rng(9)
        t = AudioBuffer(rng.standard_normal((2, 1000)), FS)
        r = AudioBuffer(rng.standard_normal((2, 1000)), FS)
        t_out, r_out = decompose_linear(lambda b: b, t, r)
        assert t_out is t and r_out is r

    def test_mpdr_weights_superpose_exactly(self):
        scene = default_scene(seed=10, duration_s=1.0)
        params = StftParams()
        y1 = stft(scene.mixture.channel(0), params)
        y2 = stft(scene.mixture.channel(1), params)
        weights = design_mpdr(y1, y2)

        def stage(buf):
            return apply_mpdr(
                stft(buf.channel(0), params), stft(buf.channel(1), params), weights
            )

        mix_out = stage(scene.mixture)
        t_out, r_out = decompose_linear(
            stage, scene.target_image, scene.interference_plus_noise, mixture_output=mix_out,
            rtol=1e-9,
        )
        total = t_out.coefficients + r_out.coefficients
        assert np.abs(total - mix_out.coefficients).max() <= 1e-9 * np.abs(
            mix_out.coefficients
        ).max()

    def test_frozen_gjbf_superposes(self):
        scene = default_scene(seed=11, duration_s=1.0)
        config = PipelineConfig(beamformer="gjbf", gjbf=GjbfConfig(filter_length=128), bt_enabled=False)
        result = run_zoom(scene.mixture, config)
        stage = frozen_stage(result)
        mix_out = stage(scene.mixture)
        t_out, r_out = decompose_linear(
            stage, scene.target_image, scene.interference_plus_noise, mixture_output=mix_out
        )
        gap = np.abs(t_out.samples + r_out.samples - mix_out.samples).max()
        assert gap <= 1e-6 * np.abs(mix_out.samples).max()

    def test_nonlinear_stage_rejected(self):
        rng = np.random.default_rng(12)
        t = AudioBuffer(rng.standard_normal((2, 100)), FS)
        r = AudioBuffer(rng.standard_normal((2, 100)), FS)

        def clipping_stage(buf):
            return AudioBuffer(np.tanh(3.0 * buf.samples), FS)

        with pytest.raises(RuntimeError, match="not frozen/linear"):
            decompose_linear(clipping_stage, t, r, mixture_output=clipping_stage(
                AudioBuffer(t.samples + r.samples, FS)
            ))


class TestShadowGains:
    def _pair(self, seed=13):
        rng = np.random.default_rng(seed)
        shape = (257, 10)
        params = StftParams()
        mk = lambda: rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        from audiozoom.dsp import Spectrogram

        return Spectrogram(mk(), params, FS), Spectrogram(mk(), params, FS)

    def test_unity_gains_no_change(self):
        t, r = self._pair()
        gains = np.ones(t.coefficients.shape)
        t2, r2 = shadow_gain_decompose(gains, t, r)
        assert np.array_equal(t2.coefficients, t.coefficients)
        assert np.array_equal(r2.coefficients, r.coefficients)

    def test_zero_gains_zero_components(self):
        t, r = self._pair(seed=14)
        gains = np.zeros(t.coefficients.shape)
        t2, r2 = shadow_gain_decompose(gains, t, r)
        assert np.all(t2.coefficients == 0) and np.all(r2.coefficients == 0)

    def test_components_reconstruct_gained_mixture(self):
        t, r = self._pair(seed=15)
        rng = np.random.default_rng(16)
        gains = rng.uniform(0, 1, t.coefficients.shape)
        t2, r2 = shadow_gain_decompose(gains, t, r)
        mix = gains * (t.coefficients + r.coefficients)
        assert np.abs(t2.coefficients + r2.coefficients - mix).max() <= 1e-12 * max(
            1.0, np.abs(mix).max()
        )

    def test_out_of_range_gains_rejected(self):
        t, r = self._pair(seed=17)
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            shadow_gain_decompose(np.full(t.coefficients.shape, 1.5), t, r)


class TestEvalReport:
    def test_gain_field_consistency(self):
        report = build_report(1.0, 7.5, -20.0)
        assert report.sinr_gain_db == pytest.approx(report.osinr_db - report.input_sinr_db, abs=1e-9)

    def test_csv_round_trip_fields(self):
        report = build_report(0.0, 10.0, -15.0, osinr_beamformer_db=5.0, mse_beamformer_db=-9.0)
        header = EvalReport.csv_header().split(",")
        row = report.to_csv_row().split(",")
        assert len(header) == len(row) == 6
        assert header[0] == "input_sinr_db"
        assert float(row[1]) == pytest.approx(10.0)

    def test_text_format_mentions_every_field(self):
        report = build_report(0.0, 10.0, -15.0)
        text = report.format_text()
        for name in ("input_sinr_db", "osinr_db", "sinr_gain_db", "mse_db"):
            assert name in text


class TestProjection:
    def test_mixture_channel_projects_to_input_sinr(self):
        scene = default_scene(seed=18, duration_s=2.0)
        est = scene.mixture.channel(0)
        reference = AudioBuffer(scene.target_image.samples.mean(axis=0), FS)
        fitted, residual = project_onto_reference(est, reference)
        got = osinr_db(fitted, residual)
        assert got == pytest.approx(0.0, abs=0.5)
