"""Scaling and head-rotation benchmarks.

Four suites regenerate the shapes of the published timing tables:

========== ======================================================
SH_ORDER   BRIR time vs SH order (ISM order 5)
ISM_ORDER  BRIR time vs reflection order (N = 3)
SOURCES    BRIR time vs number of simultaneous sources (N = 3)
ROTATION   head-rotation cost over a frame sweep (N = 3)
========== ======================================================

Timed regions cover BRIR/ARIR computation only; dry-signal convolution is
excluded.  Every cell runs once untimed, then ``trials`` timed repetitions
reported as mean and standard deviation.  Counts (images, channels,
sources) are exact and reproducible; timings are hardware dependent.
"""
from __future__ import annotations

import csv
import io
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .evaluation import nn_baseline_render, render_brir, sh_interp_render
from .hrtf import HrtfSet, magls, project_ls
from .ism import RoomSpec, lattice_indices
from .processors import BinauralDecoder
from .room import Scene, compute_arir
from .sh import apply_rotation, head_rotation, n_coeffs, rotation_matrix_zyz

__all__ = ["SUITES", "BenchConfig", "BenchResult", "run_bench", "format_table", "to_csv",
           "hardware_metadata", "time_call"]

SUITES = ("SH_ORDER", "ISM_ORDER", "SOURCES", "ROTATION")


@dataclass
class BenchConfig:
    dimensions: tuple = (6.0, 5.0, 3.0)
    absorption: float = 0.4
    fs: float = 48000.0
    source: tuple = (4.0, 4.0, 1.5)
    receiver: tuple = (2.0, 2.0, 1.5)
    sh_orders: tuple = (1, 3, 5, 7, 9, 12)
    ism_orders: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    source_counts: tuple = (1, 2, 4, 8)
    ism_order: int = 5
    sh_order: int = 3
    n_frames: int = 600
    trials: int = 10
    seed: int = 0
    full_euler: bool = False
    magls: bool = True

    def room(self, max_ism_order=None) -> RoomSpec:
        order = self.ism_order if max_ism_order is None else max_ism_order
        return RoomSpec(tuple(self.dimensions), self.absorption, order, self.fs)

    def extra_sources(self, k: int) -> list:
        """``k`` source positions: the configured one plus seeded random ones."""
        rng = np.random.default_rng(self.seed)
        L = np.asarray(self.dimensions)
        out = [np.asarray(self.source, float)]
        while len(out) < k:
            out.append(rng.uniform(0.1 * L, 0.9 * L))
        return out


@dataclass
class BenchResult:
    suite: str
    scenario: str
    counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)      # name -> (mean s, std s)
    ratios: dict = field(default_factory=dict)
    medians: dict = field(default_factory=dict)      # name -> median s, where recorded

    def mean(self, name):
        return self.timings[name][0]


def time_call(fn, trials: int, warmup: int = 1):
    """(mean, std) seconds of ``fn()`` over ``trials`` runs after ``warmup``."""
    for _ in range(warmup):
        fn()
    ts = np.empty(trials)
    for i in range(trials):
        t0 = time.perf_counter()
        fn()
        ts[i] = time.perf_counter() - t0
    return float(ts.mean()), float(ts.std())


def hardware_metadata() -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "system": platform.system(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }


def _scene(cfg: BenchConfig, sources, max_ism_order=None) -> Scene:
    sc = Scene(cfg.room(max_ism_order), np.asarray(cfg.receiver, float))
    for s in sources:
        sc.add_source(s)
    return sc


def _sh_hrtf(hrtf, order, use_magls):
    return magls(hrtf, order) if use_magls else project_ls(hrtf, order)


def time_interleaved(fns, trials: int, warmup: int = 1):
    """Like :func:`time_call` for several callables, timed round-robin.

    Interleaving spreads clock and thermal drift evenly over the callables,
    so their means can be compared with each other.
    """
    for _ in range(warmup):
        for fn in fns:
            fn()
    ts = np.empty((len(fns), trials))
    for i in range(trials):
        for j, fn in enumerate(fns):
            t0 = time.perf_counter()
            fn()
            ts[j, i] = time.perf_counter() - t0
    return ([(float(m), float(s)) for m, s in zip(ts.mean(axis=1), ts.std(axis=1))],
            [float(m) for m in np.median(ts, axis=1)])


_STAGES = ("arir", "decode", "sh_path", "sh_interp", "nn")


def _brir_cells(cfg, hrtf, cells, suite):
    """Time every pipeline stage for each (scene, order, scenario, counts) cell."""
    jobs = []
    for scene, order, scenario, counts in cells:
        sh = _sh_hrtf(hrtf, order, cfg.magls)
        dec = BinauralDecoder(sh)
        arir = compute_arir(scene, sh_order=order, mixed=True)
        jobs.append((BenchResult(suite, scenario, counts), {
            "arir": lambda s=scene, n=order: compute_arir(s, sh_order=n, mixed=True),
            "decode": lambda d=dec, a=arir: d.process(a),
            "sh_path": lambda s=scene, d=dec: render_brir(s, d),
            "sh_interp": lambda s=scene, h=sh: sh_interp_render(s, h),
            "nn": lambda s=scene: nn_baseline_render(s, hrtf),
        }))
    for stage in _STAGES:
        timed, medians = time_interleaved([fns[stage] for _, fns in jobs], cfg.trials)
        for (res, _), t, med in zip(jobs, timed, medians):
            res.timings[stage] = t
            res.medians[stage] = med
    for res, _ in jobs:
        res.ratios["sh_path/nn"] = res.mean("sh_path") / res.mean("nn")
    return [res for res, _ in jobs]


def _suite_sh_order(cfg, hrtf):
    scene = _scene(cfg, [cfg.source])
    n_img = len(lattice_indices(cfg.ism_order))
    cells = [(scene, N, f"N={N}", {"N": N, "channels": n_coeffs(N), "images": n_img})
             for N in cfg.sh_orders]
    return _brir_cells(cfg, hrtf, cells, "SH_ORDER")


def _suite_ism_order(cfg, hrtf):
    cells = [(_scene(cfg, [cfg.source], R), cfg.sh_order, f"R={R}",
              {"order": R, "images": len(lattice_indices(R)), "channels": n_coeffs(cfg.sh_order)})
             for R in cfg.ism_orders]
    return _brir_cells(cfg, hrtf, cells, "ISM_ORDER")


def _suite_sources(cfg, hrtf):
    cells = [(_scene(cfg, cfg.extra_sources(K)), cfg.sh_order, f"K={K}",
              {"K": K, "images": K * len(lattice_indices(cfg.ism_order)),
               "channels": n_coeffs(cfg.sh_order)})
             for K in cfg.source_counts]
    out = _brir_cells(cfg, hrtf, cells, "SOURCES")
    # medians: one preempted trial should not decide a cross-cell comparison
    k1 = out[0].medians["sh_path"]
    dec = [r.medians["decode"] for r in out]
    for r in out:
        r.ratios["sh_path/K1"] = r.medians["sh_path"] / k1
        r.ratios["decode_spread"] = (max(dec) - min(dec)) / min(dec)
    return out


def frame_angles(cfg: BenchConfig):
    """Per-frame Euler angles: a full yaw turn, plus pitch/roll with ``full_euler``."""
    a = np.linspace(0, 2 * np.pi, cfg.n_frames, endpoint=False)
    if cfg.full_euler:
        return np.stack([a, 0.3 * np.sin(a), 0.2 * np.cos(a)], axis=1)
    return np.stack([a, np.zeros_like(a), np.zeros_like(a)], axis=1)


def _suite_rotation(cfg, hrtf):
    N, t = cfg.sh_order, cfg.trials
    scene = _scene(cfg, [cfg.source])
    angles = frame_angles(cfg)
    sh = _sh_hrtf(hrtf, N, cfg.magls)

    def init():
        return compute_arir(scene, sh_order=N)

    arir = init()
    D0 = head_rotation(N, *angles[1])
    state = {"i": 0}

    def next_angles():
        state["i"] = (state["i"] + 1) % len(angles)
        return angles[state["i"]]

    # apply = rotated copy of the ARIR coefficients, ready for decoding
    def build_apply():
        return apply_rotation(head_rotation(N, *next_angles()), arir.data)

    def apply_cached():
        return apply_rotation(D0, arir.data)

    def sweep(cached):
        if cached:
            for D in [D0] * len(angles):
                apply_rotation(D, arir.data)
        else:
            for ang in angles:
                apply_rotation(head_rotation(N, *ang), arir.data)

    sweep_trials = max(1, min(t, 3))
    sh_row = BenchResult("ROTATION", f"SH path N={N}", {"N": N, "frames": cfg.n_frames,
                                                       "channels": n_coeffs(N)})
    sh_row.timings["init"] = time_call(init, t)
    sh_row.timings["frame_build_apply"] = time_call(build_apply, t * 10)
    sh_row.timings["frame_apply"] = time_call(apply_cached, t * 10)
    sh_row.timings["sweep_build_apply"] = time_call(lambda: sweep(False), sweep_trials)
    sh_row.timings["sweep_cached"] = time_call(lambda: sweep(True), sweep_trials)
    sh_row.ratios["apply/build_apply"] = (sh_row.mean("frame_apply")
                                          / sh_row.mean("frame_build_apply"))

    rows = [sh_row]
    for name, render, key in (
            (f"NN baseline (ISM {cfg.ism_order})", lambda R: nn_baseline_render(scene, hrtf, R), "nn"),
            (f"SH-interp N={N} (ISM {cfg.ism_order})", lambda R: sh_interp_render(scene, sh, R),
             "sh_interp")):
        row = BenchResult("ROTATION", name, {"N": N, "frames": cfg.n_frames})
        row.timings["init"] = time_call(lambda: render(None), t)

        def frame(render=render):
            return render(rotation_matrix_zyz(*next_angles()))

        row.timings["frame_build_apply"] = time_call(frame, t)
        n_sweep = min(cfg.n_frames, 600)

        def sweep_baseline(render=render):
            for ang in angles[:n_sweep]:
                render(rotation_matrix_zyz(*ang))

        row.timings["sweep_build_apply"] = time_call(sweep_baseline, 1, warmup=0)
        rows.append(row)
    return rows


_RUNNERS = {"SH_ORDER": _suite_sh_order, "ISM_ORDER": _suite_ism_order,
            "SOURCES": _suite_sources, "ROTATION": _suite_rotation}


def run_bench(suite: str, config: BenchConfig | None = None,
              hrtf: HrtfSet | None = None) -> list:
    """Run one suite; ``hrtf`` defaults to the synthetic rigid-sphere set."""
    suite = suite.upper()
    if suite not in _RUNNERS:
        raise ConfigError(f"unknown suite {suite!r}; choose from {SUITES}")
    cfg = config or BenchConfig()
    if hrtf is None:
        from .synthetic import generate_synthetic_hrtf
        hrtf = generate_synthetic_hrtf(fs=cfg.fs)
    return _RUNNERS[suite](cfg, hrtf)


# ---------------------------------------------------------------------------
# reporting

def _ms(t):
    return f"{t[0]:.3f} ± {t[1]:.3f}"


def table_rows(suite: str, results) -> tuple:
    """(header, rows) mirroring the published table for ``suite``."""
    suite = suite.upper()
    if suite == "SH_ORDER":
        header = ["N", "Channels", "ARIR (s)", "Decode (s)", "SH path (s)", "SH-interp (s)",
                  "vs NN baseline"]
        rows = [[r.counts["N"], r.counts["channels"], f"{r.mean('arir'):.3f}",
                 f"{r.mean('decode'):.3f}", _ms(r.timings["sh_path"]), _ms(r.timings["sh_interp"]),
                 f"×{r.ratios['sh_path/nn']:.1f}"] for r in results]
    elif suite == "ISM_ORDER":
        header = ["Order", "Images", "SH path N=3 (s)", "SH-interp N=3 (s)", "NN baseline (s)",
                  "SH path / NN"]
        rows = [[r.counts["order"], r.counts["images"], _ms(r.timings["sh_path"]),
                 _ms(r.timings["sh_interp"]), _ms(r.timings["nn"]),
                 f"×{r.ratios['sh_path/nn']:.1f}"] for r in results]
    elif suite == "SOURCES":
        header = ["K sources", "SH path N=3 (s)", "SH-interp N=3 (s)", "NN baseline (s)",
                  "SH path / NN"]
        rows = [[r.counts["K"], _ms(r.timings["sh_path"]), _ms(r.timings["sh_interp"]),
                 _ms(r.timings["nn"]), f"×{r.ratios['sh_path/nn']:.1f}"] for r in results]
    elif suite == "ROTATION":
        header = ["Method", "Init (ms)", "Per-frame build+apply (ms)", "Per-frame apply only (ms)",
                  "Frames build+apply (s)", "Frames cached (s)"]
        rows = []
        for r in results:
            tm = r.timings
            rows.append([r.scenario, f"{tm['init'][0] * 1e3:.2f}",
                         f"{tm['frame_build_apply'][0] * 1e3:.3f}",
                         f"{tm['frame_apply'][0] * 1e3:.3f}" if "frame_apply" in tm else "n/a",
                         f"{tm['sweep_build_apply'][0]:.3f}",
                         f"{tm['sweep_cached'][0]:.3f}" if "sweep_cached" in tm else "n/a"])
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    return header, rows


def format_table(suite: str, results) -> str:
    header, rows = table_rows(suite, results)
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = [" | ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def to_csv(suite: str, results, metadata: dict | None = None) -> str:
    """CSV text: the mirrored table columns, preceded by ``# key: value`` metadata."""
    header, rows = table_rows(suite, results)
    buf = io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
