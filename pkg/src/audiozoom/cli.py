"""Command-line interface: simulate, zoom, eval, sweep.

Exit codes: 0 success, 1 usage error, 2 data error. CSV dumps use '.' as the
decimal mark, ',' as the separator, and carry a header row.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .blockthresh import BlockThresholdParams
from .dsp import AudioBuffer, StftParams
from .gjbf import GjbfConfig, select_filter_length
from .metrics import EvalReport, build_report, mse_db, osinr_db, project_onto_reference
from .pipeline import DEFAULT_SWEEP_LENGTHS, PipelineConfig, normalize_peak, run_zoom
from .simulate import (
    MixtureSpec,
    SourceSpec,
    echo_taps_for_t60,
    parse_scenario,
    synthesize_mixture,
    two_mic_array,
)
from .wav import read_wav, write_wav


class DataError(Exception):
    """Bad input data (files, formats, scenario contents)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _parse_macro(text: str) -> tuple:
    try:
        frames, bins = text.lower().split("x", 1)
        return int(frames), int(bins)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected PxQ (frames x bins), got {text!r}") from exc


def _parse_lengths(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


_CONFIG_CASTS = {
    "beamformer": str,
    "stft_frame": int,
    "stft_hop": int,
    "stft_window": str,
    "mpdr_alpha": float,
    "gjbf_length": str,
    "gjbf_mu": float,
    "gjbf_block": int,
    "gjbf_leak": float,
    "gjbf_sweep": str,
    "bt_enabled": _parse_bool,
    "bt_macro": _parse_macro,
    "bt_h": int,
    "bt_threshold": float,
    "seed": int,
}


def _read_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_CASTS:
                raise DataError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_CASTS[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return values


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--beamformer", choices=("mpdr", "gjbf"))
    parser.add_argument("--stft-frame", type=int, dest="stft_frame")
    parser.add_argument("--stft-hop", type=int, dest="stft_hop")
    parser.add_argument("--stft-window", choices=("hann", "sqrt_hann", "rect"), dest="stft_window")
    parser.add_argument("--mpdr-alpha", type=float, dest="mpdr_alpha",
                        help="fixed diagonal loading (default: scaled per bin)")
    parser.add_argument("--gjbf-length", dest="gjbf_length",
                        help="adaptive filter length in taps, or 'auto'")
    parser.add_argument("--gjbf-mu", type=float, dest="gjbf_mu")
    parser.add_argument("--gjbf-block", type=int, dest="gjbf_block")
    parser.add_argument("--gjbf-leak", type=float, dest="gjbf_leak")
    parser.add_argument("--gjbf-sweep", dest="gjbf_sweep",
                        help="comma-separated candidate lengths for 'auto'")
    parser.add_argument("--bt-enabled", type=_parse_bool, dest="bt_enabled")
    parser.add_argument("--bt-macro", type=_parse_macro, dest="bt_macro",
                        help="macro-block size as PxQ (frames x bins)")
    parser.add_argument("--bt-H", type=int, dest="bt_h",
                        help="log2 of the sub-block cell count")
    parser.add_argument("--bt-threshold", type=float, dest="bt_threshold")
    parser.add_argument("--seed", type=int)


_DEFAULTS = {
    "beamformer": "mpdr",
    "stft_frame": 512,
    "stft_hop": 256,
    "stft_window": "sqrt_hann",
    "mpdr_alpha": None,
    "gjbf_length": "250",
    "gjbf_mu": 0.05,
    "gjbf_block": None,
    "gjbf_leak": 0.0,
    "gjbf_sweep": ",".join(str(l) for l in DEFAULT_SWEEP_LENGTHS),
    "bt_enabled": True,
    "bt_macro": (8, 16),
    "bt_h": 4,
    "bt_threshold": 1.0,
    "seed": 0,
}


def _effective_settings(args) -> dict:
    settings = dict(_DEFAULTS)
    if getattr(args, "config", None):
        settings.update(_read_config_file(args.config))
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def _settings_to_config(settings: dict) -> PipelineConfig:
    stft_params = StftParams(
        frame_length=settings["stft_frame"],
        hop_length=settings["stft_hop"],
        window=settings["stft_window"],
    )
    macro_frames, macro_bins = settings["bt_macro"]
    bt = BlockThresholdParams(
        macro_frames=macro_frames,
        macro_bins=macro_bins,
        levels=settings["bt_h"],
        snr_threshold=settings["bt_threshold"],
    )
    length_text = str(settings["gjbf_length"]).strip().lower()
    auto_lengths = None
    if length_text == "auto":
        auto_lengths = _parse_lengths(str(settings["gjbf_sweep"]))
        filter_length = auto_lengths[0]
    else:
        filter_length = int(length_text)
    gjbf = GjbfConfig(
        filter_length=filter_length,
        step_size=settings["gjbf_mu"],
        block_size=settings["gjbf_block"],
        leak=settings["gjbf_leak"],
    )
    return PipelineConfig(
        beamformer=settings["beamformer"],
        stft=stft_params,
        mpdr_alpha=settings["mpdr_alpha"],
        gjbf=gjbf,
        gjbf_auto_lengths=auto_lengths,
        bt=bt,
        bt_enabled=settings["bt_enabled"],
        seed=settings["seed"],
    )


def _echo_settings(settings: dict) -> None:
    for key in sorted(settings):
        value = settings[key]
        if key == "bt_macro":
            value = f"{value[0]}x{value[1]}"
        print(f"config {key}={value}")


def _write_matrix_csv(path, matrix: np.ndarray, fmt: str = "{:.6e}") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        frames = matrix.shape[1]
        handle.write("bin," + ",".join(f"frame_{t}" for t in range(frames)) + "\n")
        for b in range(matrix.shape[0]):
            row = ",".join(fmt.format(v) for v in matrix[b])
            handle.write(f"{b},{row}\n")


def _load_stereo(path) -> AudioBuffer:
    buffer = read_wav(path)
    if buffer.channel_count != 2:
        raise DataError(f"{path}: two channels required")
    return buffer


def _load_mono(path) -> AudioBuffer:
    buffer = read_wav(path)
    if buffer.channel_count != 1:
        raise DataError(f"{path}: expected a mono file")
    return buffer


def cmd_simulate(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    try:
        target = SourceSpec(scenario.target_azimuth, _load_mono(scenario.target_path), "target")
        interferers = tuple(
            SourceSpec(azimuth, _load_mono(path), "interference")
            for path, azimuth in scenario.interferers
        )
    except OSError as exc:
        raise DataError(str(exc)) from exc
    echo_taps = ()
    if scenario.echo_t60_ms is not None:
        echo_taps = echo_taps_for_t60(scenario.echo_t60_ms / 1000.0)
    spec = MixtureSpec(
        target=target,
        interferers=interferers,
        sir_db=scenario.sir_db,
        sensor_noise_snr_db=scenario.sensor_noise_snr_db,
        echo_taps=echo_taps,
    )
    geometry = two_mic_array(scenario.spacing_m, scenario.sound_speed)
    result = synthesize_mixture(spec, geometry, seed=scenario.seed)

    prefix = args.out_prefix
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    outputs = {
        "mixture.wav": result.mixture,
        "target_img.wav": result.target_image,
        "interf_img.wav": result.interference_plus_noise,
    }
    for name, buffer in outputs.items():
        write_wav(prefix + name, buffer)
        print(f"wrote {prefix + name}")
    realized = osinr_db(result.target_image, result.interference_image)
    print(f"realized_sir_db={realized:.4f}")
    return 0


def cmd_zoom(args) -> int:
    settings = _effective_settings(args)
    config = _settings_to_config(settings)
    mixture = _load_stereo(args.input)
    _echo_settings(settings)

    result = run_zoom(mixture, config)
    if result.sweep_curve is not None:
        print(f"chosen_length={result.gjbf_config_used.filter_length}")
    normalized, gain = normalize_peak(result.output)
    print(f"normalization_gain={gain!r}")
    write_wav(args.output, normalized)
    print(f"wrote {args.output}")

    if args.dump:
        parent = os.path.dirname(args.dump)
        if parent:
            os.makedirs(parent, exist_ok=True)
        _write_matrix_csv(args.dump + "beamformed_mag.csv", np.abs(result.beamformed_spec.coefficients))
        if result.postfilter_spec is not None:
            _write_matrix_csv(args.dump + "output_mag.csv", np.abs(result.postfilter_spec.coefficients))
            _write_matrix_csv(args.dump + "bt_gains.csv", result.block_grid.gains)
            blocks_path = args.dump + "bt_blocks.csv"
            with open(blocks_path, "w", encoding="utf-8") as handle:
                handle.write("bin_start,frame_start,bins,frames,levels,v\n")
                for c in result.block_grid.choices:
                    handle.write(f"{c.bin_start},{c.frame_start},{c.bins},{c.frames},{c.levels},{c.v}\n")
        print(f"wrote dumps with prefix {args.dump}")
    return 0


def _append_report(path, report: EvalReport) -> None:
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as handle:
        if need_header:
            handle.write(EvalReport.csv_header() + "\n")
        handle.write(report.to_csv_row() + "\n")


def cmd_eval(args) -> int:
    estimate = _load_mono(args.estimate)
    target_image = _load_stereo(args.target_image)
    interference_image = _load_stereo(args.interference_image)
    lengths = {target_image.length, interference_image.length}
    if len(lengths) != 1:
        raise DataError("image lengths must match")
    if abs(estimate.length - target_image.length) > args.max_shift:
        raise DataError(
            f"length mismatch beyond alignment bound: estimate {estimate.length}, "
            f"images {target_image.length}"
        )
    n = min(estimate.length, target_image.length)
    est = AudioBuffer(estimate.samples[:, :n], estimate.sample_rate)
    reference = AudioBuffer(target_image.samples[:, :n].mean(axis=0), target_image.sample_rate)

    input_sinr = osinr_db(target_image, interference_image)
    fitted, residual = project_onto_reference(est, reference, args.max_shift)
    final_osinr = osinr_db(fitted, residual)
    final_mse = mse_db(est, reference, args.max_shift)
    report = build_report(input_sinr, final_osinr, final_mse)

    print(report.format_text())
    if args.report:
        _append_report(args.report, report)
        print(f"appended {args.report}")
    return 0


def cmd_sweep(args) -> int:
    settings = _effective_settings(args)
    config = _settings_to_config(settings)
    lengths = _parse_lengths(args.lengths)
    if len(lengths) < 2:
        raise DataError("need at least two candidate lengths")
    mixture = _load_stereo(args.input)
    best, curve = select_filter_length(
        mixture.channel(0), mixture.channel(1), lengths, config.gjbf, config.stft
    )
    out_path = args.out or "sweep.csv"
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write("length,mean_sinr_db\n")
        for length, value in curve:
            handle.write(f"{length},{value:.6f}\n")
    print(f"wrote {out_path}")
    print(f"chosen_length={best}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="audiozoom", description="Two-microphone audio zooming toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a scenario file into mixture + image WAVs")
    sim.add_argument("scenario", help="key=value scenario file")
    sim.add_argument("out_prefix", help="output path prefix (e.g. out/ or out/run1_)")
    sim.set_defaults(func=cmd_simulate)

    zoom = sub.add_parser("zoom", help="enhance a 2-channel WAV")
    zoom.add_argument("input", help="2-channel WAV")
    zoom.add_argument("output", help="mono output WAV")
    zoom.add_argument("--dump", help="prefix for per-stage CSV dumps")
    _add_pipeline_flags(zoom)
    zoom.set_defaults(func=cmd_zoom)

    evalp = sub.add_parser("eval", help="score an enhanced WAV against scene images")
    evalp.add_argument("estimate", help="mono enhanced WAV")
    evalp.add_argument("target_image", help="2-channel target image WAV")
    evalp.add_argument("interference_image", help="2-channel interference(+noise) image WAV")
    evalp.add_argument("--report", help="append a CSV row to this file")
    evalp.add_argument("--max-shift", type=int, default=512, dest="max_shift")
    evalp.set_defaults(func=cmd_eval)

    sweep = sub.add_parser("sweep", help="sweep adaptive filter lengths")
    sweep.add_argument("input", help="2-channel WAV")
    sweep.add_argument("--lengths", required=True, help="comma-separated candidate lengths")
    sweep.add_argument("--out", help="CSV output path (default sweep.csv)")
    _add_pipeline_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"audiozoom: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"audiozoom: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
