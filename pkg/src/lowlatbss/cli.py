"""Command-line surface: simulate | separate | evaluate | bench.

Exit codes: 0 ok, 2 configuration error, 3 numerical divergence,
4 I/O error.  Reports are CSV plus a JSON summary; figures are rendered
alongside them unless --no-figures is given.
"""

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import plotting
from .config import RunConfig, dump_config, load_config, reference_config
from .engine import Engine, preset
from .errors import (
    ConfigError,
    DegenerateDirectionError,
    IoError,
    NumericalDivergenceError,
)
from .metrics import bss_eval, improvement, mixture_baseline
from .rirsim import RoomSpec, SceneSpec
from .wavio import read_wav, write_wav

CORPUS_ENV = "LOWLATBSS_CORPUS"


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    if getattr(args, "preset", None):
        cfg = replace(cfg, engine=preset(args.preset), preset_name=args.preset)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "synthetic_sources", False):
        cfg = replace(cfg, io=replace(cfg.io, synthetic_sources=True))
    return cfg


def _corpus_sources(root: str, num_samples: int, sample_rate: int, rng):
    """Pick two corpus WAVs, resample-free; concatenate/trim to length."""
    paths = sorted(Path(root).rglob("*.wav"))
    if len(paths) < 2:
        raise IoError(f"corpus root {root!r} holds fewer than two WAV files")
    picks = rng.choice(len(paths), size=2, replace=False)
    out = []
    for k in picks:
        data, fs = read_wav(paths[int(k)])
        if fs != sample_rate:
            raise IoError(f"{paths[int(k)]}: sample rate {fs} != {sample_rate}")
        if data.ndim > 1:
            data = data[:, 0]
        reps = int(np.ceil(num_samples / len(data)))
        out.append(np.tile(data, reps)[:num_samples])
    return out


def _trial_sources(cfg: RunConfig, rng):
    fs = cfg.room.sample_rate
    num_samples = int(round(cfg.io.duration_seconds * fs))
    corpus = cfg.io.corpus_root or os.environ.get(CORPUS_ENV, "")
    if cfg.io.synthetic_sources or not corpus:
        from .rirsim import speech_shaped_noise

        return [speech_shaped_noise(num_samples, fs, rng) for _ in range(2)]
    return _corpus_sources(corpus, num_samples, fs, rng)


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    out_dir = Path(args.out or cfg.io.output_dir)
    rng = np.random.default_rng(cfg.seed)
    sources = _trial_sources(cfg, rng)
    trial = bench_mod.synthesize_trial(
        cfg.scene.source_angles,
        cfg.seed,
        room=cfg.room,
        scene=cfg.scene,
        duration_seconds=cfg.io.duration_seconds,
        sources=sources,
    )
    fs = trial.sample_rate
    write_wav(out_dir / "mixture.wav", trial.mixture, fs)
    for n in range(trial.images.shape[0]):
        write_wav(out_dir / f"image_{n + 1}.wav", trial.images[n], fs)
    manifest = {
        "seed": cfg.seed,
        "sample_rate": fs,
        "duration_seconds": cfg.io.duration_seconds,
        "synthetic_sources": cfg.io.synthetic_sources,
        "scene": {
            "source_angles": list(cfg.scene.source_angles),
            "source_distance": cfg.scene.source_distance,
            "mic_spacing": cfg.scene.mic_spacing,
            "array_center": list(cfg.scene.array_center),
            "mic_positions": cfg.scene.mic_positions().tolist(),
            "source_positions": cfg.scene.source_positions().tolist(),
        },
        "room": {
            "dimensions": list(cfg.room.dimensions),
            "t60": cfg.room.t60,
            "absorption": cfg.room.absorption(),
        },
        "files": {
            "mixture": "mixture.wav",
            "images": [f"image_{n + 1}.wav" for n in range(trial.images.shape[0])],
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote mixture + {trial.images.shape[0]} images to {out_dir}")
    return 0


def cmd_separate(args) -> int:
    cfg = _load_run_config(args)
    mixture, fs = read_wav(args.mixture)
    if fs != cfg.engine.sample_rate:
        raise ConfigError(
            f"input sample rate {fs} != configured {cfg.engine.sample_rate} "
            "(no resampling)"
        )
    if mixture.ndim != 2 or mixture.shape[1] != cfg.engine.channels:
        raise ConfigError(f"expected a {cfg.engine.channels}-channel mixture")
    engine_cfg = cfg.engine
    if args.freeze_updates:
        engine_cfg = replace(engine_cfg, freeze_updates=True)
    engine = Engine(engine_cfg)
    started = time.perf_counter()
    out = engine.run(mixture, chunk_size=args.chunk_size)
    elapsed = time.perf_counter() - started
    out_dir = Path(args.out or cfg.io.output_dir)
    for n in range(out.shape[1]):
        write_wav(out_dir / f"source_{n + 1}.wav", out[:, n], fs)
    ledger = engine_cfg.delay_ledger
    report = {
        "preset": cfg.preset_name or None,
        "mode": engine_cfg.mode.value,
        "frame_len": engine_cfg.frame_len,
        "shift": engine_cfg.shift,
        "truncated": engine_cfg.truncated,
        "algorithmic_delay_samples": ledger.algorithmic_delay,
        "algorithmic_delay_ms": 1000.0 * ledger.delay_seconds(fs),
        "chunk_size": args.chunk_size,
        "samples": int(mixture.shape[0]),
        "elapsed_seconds": elapsed,
        "real_time_factor": elapsed / (mixture.shape[0] / fs),
    }
    (out_dir / "separate_report.json").write_text(json.dumps(report, indent=2))
    print(
        f"separated {mixture.shape[0]} samples; delay "
        f"{report['algorithmic_delay_ms']:.1f} ms; RTF {report['real_time_factor']:.2f}"
    )
    return 0


def _write_curve_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    discard = args.discard_seconds if args.discard_seconds is not None else cfg.eval.discard_seconds
    estimates = []
    for path in args.estimates:
        data, fs_e = read_wav(path)
        estimates.append(data if data.ndim == 1 else data[:, 0])
    references = []
    for path in args.references:
        data, fs_r = read_wav(path)
        references.append(data if data.ndim == 1 else data[:, 0])
    mixture, fs = read_wav(args.mixture)
    mix_ref = mixture[:, 0] if mixture.ndim == 2 else mixture
    lengths = {len(s) for s in estimates + references + [mix_ref]}
    if len(lengths) != 1:
        raise ConfigError("estimates, references and mixture lengths differ")

    from .bench import Trial, evaluate_separation

    trial = Trial(
        angles=(),
        seed=cfg.seed,
        mixture=mix_ref[:, None].repeat(2, axis=1) if mixture.ndim == 1 else mixture,
        images=np.stack(references),
        sample_rate=fs,
    )
    report = evaluate_separation(
        trial,
        np.stack(estimates, axis=1),
        discard_seconds=discard,
        window_seconds=cfg.eval.window_seconds,
        hop_seconds=cfg.eval.hop_seconds,
        proj_len=cfg.eval.proj_len,
    )
    out_dir = Path(args.out or cfg.io.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        (f"{t:.3f}", f"{report.curve_dsdr[j]:.4f}", f"{report.curve_dsir[j]:.4f}", f"{report.curve_dsar[j]:.4f}")
        for j, t in enumerate(report.curve_times)
    ]
    _write_curve_csv(
        out_dir / "sliding_metrics.csv",
        rows,
        ["window_start_s", "dsdr_db", "dsir_db", "dsar_db"],
    )
    summary = {
        "discard_seconds": discard,
        "post_convergence": {
            "dsdr_db": report.post_convergence.delta_sdr.tolist(),
            "dsir_db": report.post_convergence.delta_sir.tolist(),
            "dsar_db": report.post_convergence.delta_sar.tolist(),
        },
    }
    (out_dir / "evaluate_summary.json").write_text(json.dumps(summary, indent=2))
    if not args.no_figures:
        plotting.plot_convergence(
            {"estimate": (report.curve_times, report.curve_dsdr)},
            out_dir / "sliding_metrics.png",
        )
    print(f"wrote evaluation to {out_dir}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_run_config(args)
    out_dir = Path(args.out or cfg.io.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(name, angles, t):
        print(f"[bench] {name} angles={angles} trial={t}", flush=True)

    result = bench_mod.run_benchmark(
        trials_per_pair=args.trials,
        room=cfg.room,
        scene=cfg.scene,
        duration_seconds=cfg.io.duration_seconds,
        discard_seconds=cfg.eval.discard_seconds,
        window_seconds=cfg.eval.window_seconds,
        hop_seconds=cfg.eval.hop_seconds,
        proj_len=cfg.eval.proj_len,
        chunk_size=args.chunk_size,
        base_seed=cfg.seed,
        progress=progress,
    )
    rows = []
    aggregates = {}
    for name in bench_mod.DEFAULT_PRESETS:
        delay_ms = 1000.0 * preset(name).delay_ledger.algorithmic_delay / preset(name).sample_rate
        aggregates[name] = {
            "dsdr": result.mean_post(name, "delta_sdr"),
            "dsir": result.mean_post(name, "delta_sir"),
            "dsar": result.mean_post(name, "delta_sar"),
        }
        rows.append(
            (
                name,
                f"{delay_ms:.1f}",
                f"{aggregates[name]['dsdr']:.3f}",
                f"{aggregates[name]['dsir']:.3f}",
                f"{aggregates[name]['dsar']:.3f}",
            )
        )
    _write_curve_csv(
        out_dir / "bench_summary.csv",
        rows,
        ["preset", "delay_ms", "mean_dsdr_db", "mean_dsir_db", "mean_dsar_db"],
    )
    curve_rows = []
    curves = {}
    for name in bench_mod.DEFAULT_PRESETS:
        times, dsdr = result.mean_curve(name)
        curves[name] = (times, dsdr)
        curve_rows.extend(
            (name, f"{t:.3f}", f"{v:.4f}") for t, v in zip(times, dsdr)
        )
    _write_curve_csv(
        out_dir / "bench_curves.csv",
        curve_rows,
        ["preset", "window_start_s", "mean_dsdr_db"],
    )
    (out_dir / "bench_summary.json").write_text(json.dumps(aggregates, indent=2))
    if not args.no_figures:
        plotting.plot_convergence(curves, out_dir / "bench_curves.png")
        plotting.plot_summary(aggregates, out_dir / "bench_summary.png")
    print(f"wrote benchmark reports to {out_dir}")
    return 0


def cmd_config(args) -> int:
    if args.config:
        print(dump_config(load_config(args.config)), end="")
    else:
        print(reference_config(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowlatbss",
        description="Low-latency streaming blind source separation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_flag=True):
        p.add_argument("--config", help="YAML run configuration")
        if preset_flag:
            p.add_argument("--preset", help="engine preset name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", help="render a two-source mixture scene")
    common(p)
    p.add_argument("--synthetic-sources", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("separate", help="run the separation engine on a mixture WAV")
    common(p)
    p.add_argument("mixture", help="2-channel input WAV")
    p.add_argument("--chunk-size", type=int, default=4096)
    p.add_argument("--freeze-updates", action="store_true")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("evaluate", help="score estimates against reference images")
    common(p, preset_flag=False)
    p.add_argument("mixture")
    p.add_argument("--estimates", nargs=2, required=True)
    p.add_argument("--references", nargs=2, required=True)
    p.add_argument("--discard-seconds", type=float, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="preset x angle-pair x trial comparison matrix")
    common(p, preset_flag=False)
    p.add_argument("--trials", type=int, default=12)
    p.add_argument("--chunk-size", type=int, default=4096)
    p.add_argument("--synthetic-sources", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("config", help="print the (reference) configuration")
    p.add_argument("--config", help="YAML file to normalize and echo")
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalDivergenceError, DegenerateDirectionError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3
    except (IoError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
