import re
from pathlib import Path

import numpy as np
import pytest

DOCS = Path(__file__).resolve().parents[1] / "docs"


def test_quickstart_runs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    blocks = re.findall(r"```python\n(.*?)```", (DOCS / "quickstart.md").read_text(), re.S)
    assert len(blocks) == 4
    ns = {}
    for block in blocks:
        exec(compile(block, "quickstart.md", "exec"), ns)
    assert ns["binaural"].data.shape[:2] == (1, 2)
    assert ns["re_encoded"].data.shape[:2] == (1, 16)
    # the einsum spelling and the head-rotation helper agree up to direction
    D = ns["head_rotation"](3, -np.pi / 4)
    expected = ns["apply_rotation"](D, ns["room"].compute_arir().data)
    assert np.allclose(ns["arir"].data, expected, atol=1e-9)


def test_sofa_recipe(tmp_path, small_hrtf):
    h5py = pytest.importorskip("h5py")
    from ambiroom import load_file, sh_matrix

    src = tmp_path / "set.sofa"
    with h5py.File(src, "w") as f:
        f["Data.IR"] = small_hrtf.irs
        f["Data.SamplingRate"] = [small_hrtf.fs]
        f["SourcePosition"] = np.stack([np.degrees(small_hrtf.grid.azimuths),
                                        np.degrees(small_hrtf.grid.elevations),
                                        np.full(small_hrtf.n_dirs, 1.5)], axis=1)
    block = re.search(r"```python\n(.*?)```", (DOCS / "hrtf-container.md").read_text(), re.S)
    ns = {}
    exec(compile(block.group(1), "hrtf-container.md", "exec"), ns)
    ns["sofa_to_shrm"](src, tmp_path / "set.shrm")
    back = load_file(tmp_path / "set.shrm")
    assert back.fs == small_hrtf.fs
    assert np.allclose(back.irs, small_hrtf.irs, atol=1e-6)          # float32 storage
    assert np.allclose(back.grid.azimuths, small_hrtf.grid.azimuths)
    # Voronoi areas are a usable low-order quadrature on a dense grid
    g = back.grid
    Y = sh_matrix(4, g.azimuths, g.elevations)
    assert np.abs(Y.T @ (g.weights[:, None] * Y) - np.eye(25)).max() < 0.05
