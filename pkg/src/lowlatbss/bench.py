"""Benchmark harness: scene synthesis, engine runs and aggregate metrics.

The CLI `bench` subcommand and the acceptance suite both drive these
helpers so results are produced by exactly one code path.
"""

from dataclasses import dataclass, field

import numpy as np

from .engine import Engine, preset
from .metrics import (
    Improvement,
    bss_eval,
    improvement,
    mixture_baseline,
    sliding_eval,
)
from .rirsim import RoomSpec, SceneSpec, make_mixture, speech_shaped_noise

DEFAULT_PRESETS = ("TD-IVA-32ms", "FD-CBF-4ms", "TD-CBF-32ms", "TD-CBF-4ms")
DEFAULT_ANGLE_PAIRS = ((30.0, 90.0), (30.0, 150.0))


@dataclass(frozen=True)
class Trial:
    """One simulated scene: mixture plus reference images at mic 1."""

    angles: tuple
    seed: int
    mixture: np.ndarray  # (T, M)
    images: np.ndarray  # (N, T)
    sample_rate: int


def synthesize_trial(
    angles,
    seed: int,
    room: RoomSpec | None = None,
    scene: SceneSpec | None = None,
    duration_seconds: float = 20.0,
    sources=None,
) -> Trial:
    """Simulate one two-source mixture with synthetic speech-shaped sources."""
    room = room or RoomSpec()
    scene = scene or SceneSpec()
    scene = SceneSpec(
        source_angles=tuple(angles),
        source_distance=scene.source_distance,
        mic_spacing=scene.mic_spacing,
        array_center=scene.array_center,
        array_axis=scene.array_axis,
    )
    fs = room.sample_rate
    num_samples = int(round(duration_seconds * fs))
    if sources is None:
        rng = np.random.default_rng(seed)
        sources = [
            speech_shaped_noise(num_samples, fs, rng) for _ in scene.source_angles
        ]
    mixture, images = make_mixture(scene, room, sources)
    peak = np.max(np.abs(mixture))
    if peak > 0:
        mixture = mixture / (4.0 * peak)
        images = images / (4.0 * peak)
    return Trial(tuple(angles), seed, mixture, images, fs)


def separate_trial(trial: Trial, preset_name: str, chunk_size: int = 4096) -> np.ndarray:
    """Run one preset engine over the trial mixture; returns (T, N)."""
    engine = Engine(preset(preset_name))
    return engine.run(trial.mixture, chunk_size=chunk_size)


@dataclass
class TrialReport:
    preset_name: str
    trial: Trial
    post_convergence: Improvement
    curve_times: np.ndarray  # window start seconds
    curve_dsdr: np.ndarray  # mean over sources per window
    curve_dsir: np.ndarray
    curve_dsar: np.ndarray


def evaluate_separation(
    trial: Trial,
    estimates: np.ndarray,
    preset_name: str = "",
    discard_seconds: float = 10.0,
    window_seconds: float = 2.0,
    hop_seconds: float = 0.5,
    proj_len: int = 512,
) -> TrialReport:
    """Sliding improvement curves plus post-convergence aggregates."""
    fs = trial.sample_rate
    est = [estimates[:, n] for n in range(estimates.shape[1])]
    refs = [trial.images[n] for n in range(trial.images.shape[0])]
    mix_ref = trial.mixture[:, 0]

    start = int(round(discard_seconds * fs))
    tail = slice(start, None)
    perm = bss_eval(est, refs, proj_len=proj_len).permutation
    post = bss_eval([e[tail] for e in est], [r[tail] for r in refs], proj_len=proj_len, permutation=perm)
    post_base = mixture_baseline(mix_ref[tail], [r[tail] for r in refs], proj_len=proj_len)
    post_improvement = improvement(post, post_base)

    windows = sliding_eval(est, refs, fs, window_seconds, hop_seconds, proj_len=proj_len)
    times = np.array([w.window_start for w in windows])
    dsdr = np.empty(len(windows))
    dsir = np.empty(len(windows))
    dsar = np.empty(len(windows))
    for j, w in enumerate(windows):
        a = int(round(w.window_start * fs))
        sl = slice(a, a + int(round(window_seconds * fs)))
        base = mixture_baseline(mix_ref[sl], [r[sl] for r in refs], proj_len=proj_len)
        imp = improvement(w, base)
        dsdr[j] = np.mean(imp.delta_sdr)
        dsir[j] = np.mean(imp.delta_sir)
        dsar[j] = np.mean(imp.delta_sar)
    return TrialReport(
        preset_name=preset_name,
        trial=trial,
        post_convergence=post_improvement,
        curve_times=times,
        curve_dsdr=dsdr,
        curve_dsir=dsir,
        curve_dsar=dsar,
    )


@dataclass
class BenchmarkResult:
    reports: list = field(default_factory=list)

    def mean_post(self, preset_name: str, key: str = "delta_sdr") -> float:
        vals = [
            np.mean(getattr(r.post_convergence, key))
            for r in self.reports
            if r.preset_name == preset_name
        ]
        return float(np.mean(vals))

    def mean_curve(self, preset_name: str):
        """Average dSDR curve over all trials of one preset."""
        sel = [r for r in self.reports if r.preset_name == preset_name]
        times = sel[0].curve_times
        return times, np.mean([r.curve_dsdr for r in sel], axis=0)


def run_benchmark(
    presets=DEFAULT_PRESETS,
    angle_pairs=DEFAULT_ANGLE_PAIRS,
    trials_per_pair: int = 12,
    room: RoomSpec | None = None,
    scene: SceneSpec | None = None,
    duration_seconds: float = 20.0,
    discard_seconds: float = 10.0,
    window_seconds: float = 2.0,
    hop_seconds: float = 0.5,
    proj_len: int = 512,
    chunk_size: int = 4096,
    base_seed: int = 0,
    progress=None,
) -> BenchmarkResult:
    """Run the preset x angle-pair x trial matrix; scenes are shared by presets."""
    result = BenchmarkResult()
    for pair_idx, angles in enumerate(angle_pairs):
        for t in range(trials_per_pair):
            seed = base_seed + 1000 * pair_idx + t
            trial = synthesize_trial(
                angles, seed, room=room, scene=scene, duration_seconds=duration_seconds
            )
            for name in presets:
                if progress is not None:
                    progress(name, angles, t)
                est = separate_trial(trial, name, chunk_size=chunk_size)
                result.reports.append(
                    evaluate_separation(
                        trial,
                        est,
                        preset_name=name,
                        discard_seconds=discard_seconds,
                        window_seconds=window_seconds,
                        hop_seconds=hop_seconds,
                        proj_len=proj_len,
                    )
                )
    return result
