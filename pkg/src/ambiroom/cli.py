"""Command-line front end.

Subcommands: simulate, render, rotate, eval, bench.  Every WAV is written
spatial-major as 32-bit float with a JSON sidecar (``<name>.json``) that
records the SH conventions and the scenario.  Exit codes: 0 success,
2 configuration, 3 geometry, 4 format, 5 numerical.  Failures print one
JSON object to stderr with the error category.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .array import SphericalArray
from .config import ScenarioConfig, load_config
from .errors import AmbiroomError, ConfigError, DimensionError, FormatError
from .evaluation import lsd, nn_baseline_render, render_brir, sh_interp_render
from .hrtf import HrtfSet, load_file, magls, project_ls, resample_hrtf
from .ism import RoomSpec
from .processors import ArrayDecoder, ASM, BSM, BinauralDecoder, ProcessorChain
from .room import KERNEL_LENGTH, Scene, compute_amb, compute_arir
from .sh import head_rotation, n_coeffs, rotate_sh
from .signal import Domain, SpatialSignal, read_wav, write_wav

__all__ = ["main", "build_parser", "CONVENTIONS"]

CONVENTIONS = {
    "sh_basis": "real",
    "sh_ordering": "ACN",
    "sh_normalization": "N3D",
    "condon_shortley_phase": False,
    "angles": "azimuth from +x towards +y, elevation above the horizontal plane, radians",
    "euler": "z-y-z, radians; rotation angles describe the listener's head",
    "ears": "left = +y",
    "fractional_delay": f"Hann-windowed sinc, {KERNEL_LENGTH} taps, unit DC gain",
    "wav_layout": "spatial-major: file channel = spatial index * n_channels + channel",
    "sample_format": "float32",
}

_CATEGORIES = {2: "config", 3: "geometry", 4: "format", 5: "numerical"}


# ---------------------------------------------------------------------------
# helpers

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (np.integer, np.floating)):
        return _jsonable(obj.item())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_output(out_dir: Path, name: str, sig: SpatialSignal, kind: str, cfg: ScenarioConfig,
                 **extra) -> Path:
    """Write ``name``.wav plus its ``name``.json sidecar."""
    out_dir.mkdir(parents=True, exist_ok=True)
    wav = out_dir / f"{name}.wav"
    write_wav(wav, sig)
    meta = {
        "kind": kind,
        "space_domain": sig.space_domain.value,
        "sh_order": sig.sh_order,
        "n_channels": sig.n_channels,
        "n_spatial": sig.n_spatial,
        "n_samples": sig.n_frames,
        "fs": sig.fs,
        "conventions": CONVENTIONS,
        "scenario": cfg.as_dict(),
        "version": __version__,
        **extra,
    }
    (out_dir / f"{name}.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True)
                                          + "\n")
    return wav


def _room_spec(cfg: ScenarioConfig) -> RoomSpec:
    r = cfg.room
    return RoomSpec(r.dimensions, r.absorption, r.max_ism_order, r.fs, r.c)


def _load_dry(cfg: ScenarioConfig, path: str) -> np.ndarray:
    p = cfg.resolve(path)
    if not p.exists():
        raise ConfigError(f"dry signal {p} not found")
    sig = read_wav(p)
    if sig.fs != cfg.room.fs:
        raise ConfigError(f"{p.name} is at {sig.fs:g} Hz, room at {cfg.room.fs:g} Hz")
    return sig.data[0, 0]


def build_scene(cfg: ScenarioConfig, with_signals: bool = True) -> Scene:
    cfg.require_scene()
    scene = Scene(_room_spec(cfg), np.asarray(cfg.receiver.position), sh_order=cfg.room.sh_order)
    for src in cfg.sources:
        dry = _load_dry(cfg, src.signal) if with_signals and src.signal else None
        scene.add_source(src.position, dry)
    return scene


def _has_signals(cfg: ScenarioConfig) -> bool:
    given = [s.signal is not None for s in cfg.sources]
    if any(given) and not all(given):
        raise ConfigError("either every source has a signal or none has")
    return bool(given) and all(given)


def load_hrtf(cfg: ScenarioConfig) -> HrtfSet:
    """The configured HRTF set at the room's sample rate."""
    if cfg.hrtf is None:
        raise ConfigError("this command needs an [hrtf] section")
    if cfg.hrtf.path == "synthetic":
        from .synthetic import generate_synthetic_hrtf
        return generate_synthetic_hrtf(fs=cfg.room.fs)
    path = cfg.resolve(cfg.hrtf.path)
    if not path.exists():
        raise ConfigError(f"HRTF container {path} not found")
    hrtf = load_file(path)
    if hrtf.fs != cfg.room.fs:
        if not cfg.hrtf.resample:
            raise ConfigError(f"HRTF at {hrtf.fs:g} Hz, room at {cfg.room.fs:g} Hz "
                              "(set hrtf.resample = true to convert)")
        hrtf = resample_hrtf(hrtf, cfg.room.fs)
    return hrtf


def sh_hrtf(cfg: ScenarioConfig, hrtf: HrtfSet, order: int, mode: str | None = None):
    mode = mode or cfg.hrtf.mode
    if mode == "magls":
        return magls(hrtf, order, cfg.hrtf.fc)
    return project_ls(hrtf, order)


def _array(cfg: ScenarioConfig):
    if cfg.array is None:
        raise ConfigError("the encoder needs an [array] section")
    a = cfg.array
    return SphericalArray(n_mics=a.n_mics, sh_order=cfg.room.sh_order, radius=a.radius,
                          fs=cfg.room.fs, sphere=a.sphere, source_model=a.source_model,
                          sm_order=a.sm_order, source_distance=a.source_distance,
                          c=cfg.room.c, mask=a.mask)


def _field(cfg: ScenarioConfig, scene: Scene, order: int) -> SpatialSignal:
    """Mixed ARIR, or the Ambisonic scene when every source has a signal."""
    if not _has_signals(cfg):
        return compute_arir(scene, sh_order=order, mixed=True)
    per_source = compute_arir(scene, sh_order=order)
    return compute_amb(scene, order, per_source)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: ScenarioConfig, args) -> list:
    signals = _has_signals(cfg)
    scene = build_scene(cfg)
    out = Path(args.out_dir)
    written = []
    if args.per_source:
        per = compute_arir(scene)
        for k in range(per.n_channels):
            one = SpatialSignal(per.data[k:k + 1], per.fs, Domain.TIME, Domain.SH,
                                sh_order=per.sh_order)
            written.append(write_output(out, f"arir_source{k}", one, "arir", cfg, source=k))
    if signals:
        written.append(write_output(out, "amb", compute_amb(scene), "ambisonic", cfg))
    else:
        written.append(write_output(out, "arir", compute_arir(scene, mixed=True), "arir", cfg))
    return written


def cmd_render(cfg: ScenarioConfig, args) -> list:
    hrtf = load_hrtf(cfg)           # fs checks happen before any simulation
    scene = build_scene(cfg)
    N = cfg.room.sh_order
    extra = {"hrtf": {"mode": cfg.hrtf.mode, "fc": cfg.hrtf.fc, "n_dirs": hrtf.n_dirs,
                      "taps": hrtf.taps}}
    if cfg.encoder is None:
        dec = BinauralDecoder(sh_hrtf(cfg, hrtf, N))
        if cfg.hrtf.mode == "magls":
            extra["hrtf"]["fc"] = dec.hrtf.fc
        sig = _field(cfg, scene, N)
        if cfg.rotation is not None:
            rotate_sh(sig, head_rotation(N, *cfg.rotation.euler))
        binaural = dec.process(sig)
    else:
        array = _array(cfg)
        enc = cfg.encoder
        capture = ArrayDecoder(array, array.sm_order)
        if enc.type == "asm":
            procs = [capture, ASM(array, N, enc.eps, enc.lam),
                     BinauralDecoder(sh_hrtf(cfg, hrtf, N))]
        else:
            procs = [capture, BSM(array, hrtf, enc.eps, enc.magls_pre, enc.fc, enc.lam)]
        sig = _field(cfg, scene, array.sm_order)
        if cfg.rotation is not None:
            rotate_sh(sig, head_rotation(array.sm_order, *cfg.rotation.euler))
        binaural = ProcessorChain(procs).process(sig)
        extra["encoder"] = {"type": enc.type, "eps": enc.eps, "lam": enc.lam,
                            "eps_rule": "eps = lam * trace(Gram) / M" if enc.eps is None
                            else "fixed", "magls_pre": enc.magls_pre,
                            "sm_order": array.sm_order, "n_mics": array.n_mics}
    name = "binaural" if _has_signals(cfg) else "brir"
    return [write_output(Path(args.out_dir), name, binaural, "binaural", cfg, **extra)]


def _read_sh_input(path: Path) -> SpatialSignal:
    side = path.with_suffix(".json")
    if not side.exists():
        raise FormatError(f"{path.name} has no metadata sidecar; the SH order is unknown")
    try:
        meta = json.loads(side.read_text())
        order, n_ch = int(meta["sh_order"]), int(meta.get("n_channels", 1))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{side.name}: unreadable sidecar ({exc})") from exc
    sig = read_wav(path, n_channels=n_ch, space_domain=Domain.SH, sh_order=order)
    if sig.n_spatial != n_coeffs(order):
        raise FormatError(f"{path.name}: {sig.n_spatial} channels for order {order}")
    return sig


def frame_orientations(euler, frames: int, sweep: bool) -> np.ndarray:
    """Per-frame head orientations; a sweep ramps linearly up to ``euler``."""
    euler = np.asarray(euler, float)
    if not sweep:
        return np.broadcast_to(euler, (frames, 3))
    return euler * (np.arange(1, frames + 1) / frames)[:, None]


def cmd_rotate(cfg: ScenarioConfig, args) -> list:
    rot = cfg.rotation
    euler = tuple(args.angles) if args.angles is not None else (rot.euler if rot else None)
    if euler is None:
        raise ConfigError("give --angles or a [rotation] section")
    frames = rot.frames if rot else 1
    sweep = rot.sweep if rot else False
    step = math.radians(rot.cache_step_deg if rot else 1.0)
    if args.input:
        sig = _read_sh_input(Path(args.input))
    else:
        sig = compute_arir(build_scene(cfg, with_signals=False), mixed=True)
    N = sig.sh_order
    if args.order is not None and args.order != N:
        raise DimensionError(f"rotation order {args.order} does not match the order-{N} signal")
    hrtf = load_hrtf(cfg) if cfg.hrtf is not None else None
    dec = BinauralDecoder(sh_hrtf(cfg, hrtf, N)) if hrtf is not None else None

    # with --cache-d, orientations snap to a grid of ``step`` radians and each
    # grid point's matrix is built once
    cache, builds = {}, 0
    t0 = time.perf_counter()
    for angles in frame_orientations(euler, frames, sweep):
        if args.cache_d:
            key = tuple(int(k) for k in np.round(angles / step))
            if key not in cache:
                cache[key] = head_rotation(N, *(np.array(key) * step))
                builds += 1
            D = cache[key]
        else:
            D = head_rotation(N, *angles)
            builds += 1
        out = rotate_sh(sig.copy(), D)
    elapsed = time.perf_counter() - t0
    applied = [-a for a in D.euler[::-1]]
    extra = {"rotation": {"euler_requested": list(angles), "euler_applied": applied,
                          "frames": frames, "sweep": sweep, "cache_d": bool(args.cache_d),
                          "cache_step_deg": math.degrees(step) if args.cache_d else None,
                          "d_builds": builds},
             "timing_s": elapsed}
    written = [write_output(Path(args.out_dir), "arir_rotated", out, "arir", cfg, **extra)]
    if dec is not None:
        written.append(write_output(Path(args.out_dir), "brir_rotated", dec.process(out),
                                    "binaural", cfg, **extra))
    return written


_EVAL_HEADER = ["Method", "Channels", "LSD L (dB)", "LSD R (dB)", "LSD avg (dB)"]


def eval_rows(cfg: ScenarioConfig) -> list:
    """Rows of the LSD table: SH-interp, LS/MagLS per order, then the reference."""
    ev = cfg.eval
    hrtf = load_hrtf(cfg)
    scene = build_scene(cfg, with_signals=False)
    ref_order = ev.reference_order
    ref = render_brir(scene, BinauralDecoder(project_ls(hrtf, ref_order)))

    def score(name, order, brir):
        r = lsd(brir, ref, cfg.room.fs, ev.f_lo, ev.f_hi, ev.smoothing)
        return [name, n_coeffs(order) if order is not None else "", f"{r.lsd_left:.2f}",
                f"{r.lsd_right:.2f}", f"{r.lsd_avg:.2f}"]

    rows = [score("SH-interp N=3", 3, sh_interp_render(scene, project_ls(hrtf, 3)))]
    label = {"ls": "LS", "magls": "MagLS"}
    for mode in ev.modes:
        for N in ev.orders:
            dec = BinauralDecoder(sh_hrtf(cfg, hrtf, N, mode))
            rows.append(score(f"{label[mode]} N={N}", N, render_brir(scene, dec)))
    rows.append(score("NN baseline", None, nn_baseline_render(scene, hrtf)))
    rows.append(score(f"LS N={ref_order} (reference)", ref_order, ref))
    return rows


def cmd_eval(cfg: ScenarioConfig, args) -> list:
    ev = cfg.eval
    if ev is None:
        raise ConfigError("eval needs an [eval] section with a reference render spec")
    meta = {"reference": f"LS N={ev.reference_order}" if ev.reference_order is not None
            else ev.reference, "band_hz": f"{ev.f_lo:g}-{ev.f_hi:g}",
            "smoothing": f"1/{1 / ev.smoothing:g} octave",
            "method": "smooth each spectrum, then difference", "magnitude_floor": 1e-12}
    if ev.reference_order is None:
        paths = [cfg.resolve(ev.candidate), cfg.resolve(ev.reference)]
        for p in paths:
            if not p.exists():
                raise ConfigError(f"eval input {p} not found")
        a, b = (read_wav(p) for p in paths)
        r = lsd(a, b, a.fs, ev.f_lo, ev.f_hi, ev.smoothing)
        rows = [[Path(ev.candidate).name, 2, f"{r.lsd_left:.2f}", f"{r.lsd_right:.2f}",
                 f"{r.lsd_avg:.2f}"]]
    else:
        if cfg.hrtf is None:
            raise ConfigError("a reference render needs an [hrtf] section")
        rows = eval_rows(cfg)
    text = _csv_text(_EVAL_HEADER, rows, meta)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "lsd.csv"
    path.write_text(text)
    print(_plain_table(_EVAL_HEADER, rows))
    return [path]


def _csv_text(header, rows, meta) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _plain_table(header, rows) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def bench_config(cfg: ScenarioConfig, args):
    from .bench import BenchConfig

    kw = {"dimensions": cfg.room.dimensions, "absorption": cfg.room.absorption,
          "fs": cfg.room.fs, "ism_order": cfg.room.max_ism_order, "sh_order": cfg.room.sh_order,
          "seed": args.seed}
    if cfg.sources:
        kw["source"] = cfg.sources[0].position
    if cfg.receiver is not None:
        kw["receiver"] = cfg.receiver.position
    if cfg.hrtf is not None:
        kw["magls"] = cfg.hrtf.mode == "magls"
    b = cfg.bench
    if b is not None:
        kw.update(sh_orders=b.sh_orders, ism_orders=b.ism_orders, source_counts=b.source_counts,
                  n_frames=b.n_frames, trials=b.trials, full_euler=b.full_euler)
    if args.trials is not None:
        kw["trials"] = args.trials
    return BenchConfig(**kw)


def cmd_bench(cfg: ScenarioConfig, args) -> list:
    from .bench import format_table, hardware_metadata, run_bench, to_csv

    bc = bench_config(cfg, args)
    suites = args.suite or (cfg.bench.suites if cfg.bench else ("SH_ORDER", "ISM_ORDER",
                                                                "SOURCES", "ROTATION"))
    hrtf = load_hrtf(cfg) if cfg.hrtf is not None else None
    meta = {**hardware_metadata(), "threads": args.threads or "default", "trials": bc.trials,
            "seed": bc.seed, "timed_region": "BRIR/ARIR computation only"}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for suite in suites:
        results = run_bench(suite, bc, hrtf)
        path = out / f"bench_{suite.lower()}.csv"
        path.write_text(to_csv(suite, results, meta))
        print(f"[{suite}]")
        print(format_table(suite, results))
        written.append(path)
    return written


_COMMANDS = {"simulate": cmd_simulate, "render": cmd_render, "rotate": cmd_rotate,
             "eval": cmd_eval, "bench": cmd_bench}


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario TOML file")
    common.add_argument("--out-dir", default=".", help="directory for WAV/CSV outputs")
    common.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/FFT worker threads")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised placements")

    p = argparse.ArgumentParser(prog="ambiroom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ambiroom {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="ARIR or Ambisonic scene")
    s.add_argument("--per-source", action="store_true", help="also write one ARIR per source")
    sub.add_parser("render", parents=[common], help="binaural rendering")
    r = sub.add_parser("rotate", parents=[common], help="head rotation in the SH domain")
    r.add_argument("--angles", type=float, nargs=3, metavar=("ALPHA", "BETA", "GAMMA"),
                   help="z-y-z Euler angles in radians (overrides [rotation].euler)")
    r.add_argument("--input", help="SH-domain WAV with sidecar instead of simulating")
    r.add_argument("--order", type=int, help="expected SH order of the input")
    r.add_argument("--cache-d", action="store_true",
                   help="snap orientations to [rotation].cache_step_deg and reuse "
                        "each Wigner-D matrix across the frame sweep")
    sub.add_parser("eval", parents=[common], help="log-spectral distance table")
    b = sub.add_parser("bench", parents=[common], help="timing suites")
    b.add_argument("--trials", type=int, default=None, help="timed repetitions per cell")
    b.add_argument("--suite", action="append", type=str.upper,
                   choices=["SH_ORDER", "ISM_ORDER", "SOURCES", "ROTATION"],
                   help="suite to run (repeatable; default: all or [bench].suites)")
    return p


def _thread_limit(n):
    if n is None:
        return nullcontext()
    if n < 1:
        raise ConfigError("--threads must be positive")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        with _thread_limit(args.threads):
            for path in _COMMANDS[args.command](cfg, args):
                print(path)
    except AmbiroomError as exc:
        code = exc.exit_code
        err = {"error": _CATEGORIES.get(code, "internal"), "type": type(exc).__name__,
               "exit_code": code, "message": str(exc)}
        if getattr(exc, "offset", None) is not None:
            err["offset"] = exc.offset
        print(json.dumps(err), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
