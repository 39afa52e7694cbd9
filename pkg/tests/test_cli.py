import json
import subprocess
import sys

import numpy as np
import pytest

from ambiroom import SpatialSignal, generate_synthetic_hrtf, head_rotation, read_wav, save_file
from ambiroom.cli import main
from ambiroom.signal import Domain, write_wav

ROOM = """[room]
dimensions = [6, 5, 3]
absorption = 0.4
max_ism_order = {ism}
sh_order = {order}
fs = 48000
"""
RECEIVER = "[receiver]\nposition = [2, 2, 1.5]\n"


def source(pos, signal=None):
    line = f"[[sources]]\nposition = {list(pos)}\n"
    return line + (f'signal = "{signal}"\n' if signal else "")


def scenario(tmp_path, *extra, ism=2, order=3, sources=((4, 4, 1.5),), name="scene.toml"):
    text = ROOM.format(ism=ism, order=order) + RECEIVER
    text += "".join(source(p) for p in sources) + "".join(extra)
    p = tmp_path / name
    p.write_text(text)
    return p


def run(cmd, cfg, out, *flags):
    return main([cmd, "--config", str(cfg), "--out-dir", str(out), *flags])


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def sidecar(path):
    return json.loads(path.with_suffix(".json").read_text())


def test_simulate_demo_scene(tmp_path):
    cfg = scenario(tmp_path, ism=5)
    assert run("simulate", cfg, tmp_path / "out") == 0
    wav = tmp_path / "out" / "arir.wav"
    sig = read_wav(wav, space_domain=Domain.SH, sh_order=3)
    assert sig.n_spatial == 16 and sig.fs == 48000
    meta = sidecar(wav)
    assert meta["sh_order"] == 3 and meta["conventions"]["sh_ordering"] == "ACN"
    assert meta["conventions"]["sh_normalization"] == "N3D"
    assert "32 taps" in meta["conventions"]["fractional_delay"]
    # reruns are bit-identical
    assert run("simulate", cfg, tmp_path / "again") == 0
    assert (tmp_path / "again" / "arir.wav").read_bytes() == wav.read_bytes()


def test_per_source_files(tmp_path):
    cfg = scenario(tmp_path, sources=[(4, 4, 1.5), (1, 4, 1.2)])
    out = tmp_path / "out"
    assert run("simulate", cfg, out, "--per-source") == 0
    assert sorted(p.name for p in out.glob("*.wav")) == ["arir.wav", "arir_source0.wav",
                                                        "arir_source1.wav"]
    a0, a1, mixed = (read_wav(out / n, space_domain=Domain.SH, sh_order=3).data[0]
                     for n in ("arir_source0.wav", "arir_source1.wav", "arir.wav"))
    n = max(a0.shape[-1], a1.shape[-1])
    total = np.zeros((16, n))
    total[:, :a0.shape[-1]] += a0
    total[:, :a1.shape[-1]] += a1
    np.testing.assert_allclose(total[:, :mixed.shape[-1]], mixed, atol=1e-6)


def test_ambisonic_scene_with_dry_signals(tmp_path):
    dry = np.random.default_rng(0).standard_normal(2000) * 0.1
    write_wav(tmp_path / "dry.wav", SpatialSignal(dry[None, None], 48000.0, Domain.TIME,
                                                  Domain.SPACE))
    cfg = scenario(tmp_path, sources=())
    cfg.write_text(cfg.read_text() + source((4, 4, 1.5), "dry.wav"))
    assert run("simulate", cfg, tmp_path / "out") == 0
    amb = read_wav(tmp_path / "out" / "amb.wav", space_domain=Domain.SH, sh_order=3)
    assert amb.n_spatial == 16 and amb.n_frames > 2000


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = scenario(tmp_path, sources=())
    assert run("simulate", cfg, out) == 2
    assert error_of(capsys)["error"] == "config"
    assert not out.exists()

    cfg = scenario(tmp_path, "[room2]\n")
    assert run("simulate", cfg, out) == 2
    assert "unknown" in error_of(capsys)["message"]

    cfg = scenario(tmp_path, sources=[(7, 1, 1)])
    assert run("simulate", cfg, out) == 3
    assert error_of(capsys)["error"] == "geometry"

    (tmp_path / "bad.shrm").write_bytes(b"NOPE" + bytes(40))
    cfg = scenario(tmp_path, '[hrtf]\npath = "bad.shrm"\n')
    assert run("render", cfg, out) == 4
    err = error_of(capsys)
    assert err["error"] == "format" and err["offset"] == 0

    cfg = scenario(tmp_path, "[array]\nsm_order = 2\n[encoder]\neps = 0.0\n"
                   '[hrtf]\npath = "synthetic"\nmode = "ls"\n', order=2)
    assert run("render", cfg, out) == 5
    assert error_of(capsys)["error"] == "numerical"
    assert not out.exists()


def test_module_entry_point(tmp_path):
    cfg = scenario(tmp_path, sources=())
    res = subprocess.run([sys.executable, "-m", "ambiroom", "simulate", "--config", str(cfg),
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 2
    assert json.loads(res.stderr)["type"] == "ConfigError"


def test_render_rate_mismatch_before_compute(tmp_path, capsys):
    save_file(tmp_path / "h44.shrm", generate_synthetic_hrtf(fs=44100.0, grid_degree=17, taps=64))
    cfg = scenario(tmp_path, '[hrtf]\npath = "h44.shrm"\n')
    assert run("render", cfg, tmp_path / "out") == 2
    assert "44100" in error_of(capsys)["message"]
    cfg.write_text(cfg.read_text() + "resample = true\n")
    assert run("render", cfg, tmp_path / "out") == 0


@pytest.fixture(scope="module")
def renders(tmp_path_factory):
    """LS N=3, MagLS N=3 and an LS N=30 reference rendered through the CLI."""
    tmp = tmp_path_factory.mktemp("renders")
    out = {}
    for name, mode, order in (("ls3", "ls", 3), ("magls3", "magls", 3), ("ref", "ls", 30)):
        cfg = scenario(tmp, f'[hrtf]\npath = "synthetic"\nmode = "{mode}"\n', order=order,
                       name=f"{name}.toml")
        assert run("render", cfg, tmp / name) == 0
        out[name] = tmp / name / "brir.wav"
    return tmp, out


def test_render_outputs(renders):
    _, out = renders
    assert read_wav(out["magls3"]).n_spatial == 2
    meta = sidecar(out["magls3"])
    assert meta["kind"] == "binaural" and meta["hrtf"]["mode"] == "magls"
    assert meta["hrtf"]["fc"] > 0


def eval_file_pair(tmp, candidate, reference, name):
    cfg = tmp / f"{name}.toml"
    cfg.write_text(ROOM.format(ism=2, order=3) +
                   f'[eval]\ncandidate = "{candidate}"\nreference = "{reference}"\n')
    assert run("eval", cfg, tmp / name) == 0
    lines = [l for l in (tmp / name / "lsd.csv").read_text().splitlines()
             if not l.startswith("#")]
    return float(lines[1].split(",")[-1])


def test_eval_cross_check(renders):
    tmp, out = renders
    assert eval_file_pair(tmp, out["ref"], out["ref"], "self") == 0.0
    ls = eval_file_pair(tmp, out["ls3"], out["ref"], "ls")
    mag = eval_file_pair(tmp, out["magls3"], out["ref"], "mag")
    assert mag < ls


def test_eval_table(tmp_path, capsys):
    cfg = scenario(tmp_path, '[hrtf]\npath = "synthetic"\n'
                   "[eval]\nreference_order = 9\norders = [1, 3]\n", ism=1)
    assert run("eval", cfg, tmp_path / "out") == 0
    text = (tmp_path / "out" / "lsd.csv").read_text()
    meta = [l for l in text.splitlines() if l.startswith("#")]
    assert any("1/6 octave" in l for l in meta)
    rows = [l.split(",") for l in text.splitlines() if not l.startswith("#")]
    names = [r[0] for r in rows[1:]]
    assert names == ["SH-interp N=3", "LS N=1", "LS N=3", "MagLS N=1", "MagLS N=3",
                     "NN baseline", "LS N=9 (reference)"]
    assert rows[-1][-1] == "0.00"
    assert "MagLS N=3" in capsys.readouterr().out


def test_eval_missing_reference(tmp_path, capsys):
    cfg = scenario(tmp_path, "[eval]\norders = [1]\n")
    assert run("eval", cfg, tmp_path / "out") == 2
    assert "reference" in error_of(capsys)["message"]
    cfg = scenario(tmp_path, '[eval]\ncandidate = "a.wav"\nreference = "b.wav"\n')
    assert run("eval", cfg, tmp_path / "out") == 2


def test_rotate_identity_and_parity(tmp_path):
    cfg = scenario(tmp_path)
    assert run("simulate", cfg, tmp_path / "sim") == 0
    arir = tmp_path / "sim" / "arir.wav"
    assert run("rotate", cfg, tmp_path / "id", "--input", str(arir), "--angles", "0", "0",
               "0") == 0
    assert (tmp_path / "id" / "arir_rotated.wav").read_bytes() == arir.read_bytes()

    assert run("rotate", cfg, tmp_path / "yaw", "--input", str(arir), "--angles",
               str(np.pi / 4), "0", "0", "--order", "3") == 0
    got = read_wav(tmp_path / "yaw" / "arir_rotated.wav", space_domain=Domain.SH, sh_order=3)
    src = read_wav(arir, space_domain=Domain.SH, sh_order=3)
    ref = head_rotation(3, np.pi / 4).matrix @ src.data[0]
    np.testing.assert_allclose(got.data[0], ref.astype(np.float32), atol=1e-6)


def test_rotate_order_mismatch(tmp_path, capsys):
    cfg = scenario(tmp_path)
    assert run("simulate", cfg, tmp_path / "sim") == 0
    assert run("rotate", cfg, tmp_path / "r", "--input", str(tmp_path / "sim" / "arir.wav"),
               "--angles", "0.1", "0", "0", "--order", "5") == 2
    assert error_of(capsys)["type"] == "DimensionError"


def test_rotate_cached_sweep(tmp_path):
    cfg = scenario(tmp_path, "[rotation]\neuler = [3.0, 0.5, 0.2]\nframes = 600\nsweep = true\n"
                   '[hrtf]\npath = "synthetic"\n', ism=0, order=5)
    assert run("rotate", cfg, tmp_path / "plain") == 0
    assert run("rotate", cfg, tmp_path / "cached", "--cache-d") == 0
    plain = sidecar(tmp_path / "plain" / "arir_rotated.wav")
    cached = sidecar(tmp_path / "cached" / "arir_rotated.wav")
    assert plain["rotation"]["d_builds"] == 600
    assert cached["rotation"]["d_builds"] < 300      # about one per degree of yaw
    assert cached["timing_s"] < plain["timing_s"]
    assert (tmp_path / "cached" / "brir_rotated.wav").exists()


def test_bench_command(tmp_path, capsys):
    cfg = scenario(tmp_path, '[hrtf]\npath = "synthetic"\nmode = "ls"\n'
                   "[bench]\nsh_orders = [1, 2]\nism_orders = [1]\nsource_counts = [1, 2]\n"
                   "n_frames = 4\n", ism=1, order=2)
    assert run("bench", cfg, tmp_path / "out", "--trials", "1", "--suite", "sh_order",
               "--suite", "sources", "--threads", "1", "--seed", "3") == 0
    files = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert files == ["bench_sh_order.csv", "bench_sources.csv"]
    text = (tmp_path / "out" / "bench_sources.csv").read_text()
    assert "# seed: 3" in text and "# threads: 1" in text and "# machine:" in text
    body = [l for l in text.splitlines() if not l.startswith("#")]
    assert body[0].startswith("K sources") and len(body) == 3
