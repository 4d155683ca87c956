"""Secondary acceptance: every figure renders from a golden fixture
manifest, sidecars copy the source values exactly, and vector output is
byte-identical across renders."""

from __future__ import annotations

import json
import math
import subprocess
import sys

import pandas as pd
import pytest

from ofi_plots.cli import main
from ofi_plots.figures import FIGURES, render

GOLDEN_CONFIG = {
    "mode": "synth",
    "n_levels": 3,
    "session": [36000.0, 39600.0],
    "day_bounds": [34200.0, 41400.0],
    "bucket_seconds": 10.0,
    "window_minutes": 30.0,
    "cadence_minutes": 30.0,
    "forward_bucket_seconds": 60.0,
    "models": ["pi1", "pi2", "ci", "ci_int", "pi_int"],
    "forward_models": ["f_pi", "f_ci"],
    "horizon_max": 10,
    "network_models": ["ci"],
    "lasso": {"n_lambdas": 15, "folds": 4},
    "synth": {"n_stocks": 4, "depth": 100, "n_days": 2, "bucket_seconds": 10.0,
              "events_per_second": 1.0, "move_std": 1.0, "noise_std": 0.4,
              "deep_flow_std": 40.0,
              "cross_links": [{"source": 0, "target": 1, "level": 2,
                               "strength": 0.6, "lag": 0}]},
    "seed": 77,
    "out_dir": "out",
    "threads": 1,
}

ALL_FIGURE_IDS = sorted(FIGURES) + ["network_ci"]


@pytest.fixture(scope="module")
def golden_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("golden")
    config = root / "config.json"
    config.write_text(json.dumps(GOLDEN_CONFIG))
    out = root / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "ofi_lab.cli", "all",
         "--config", str(config), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr[-2000:]
    return out / "manifest.json"


@pytest.mark.parametrize("figure_id", ALL_FIGURE_IDS)
def test_every_figure_renders(golden_manifest, tmp_path, figure_id):
    out = render(figure_id, golden_manifest, tmp_path / f"{figure_id}.svg")
    assert out.exists() and out.stat().st_size > 0
    sidecar = out.with_suffix(out.suffix + ".values.json")
    assert sidecar.exists()


@pytest.mark.parametrize("figure_id", sorted(FIGURES))
def test_sidecar_equals_source_csv(golden_manifest, tmp_path, figure_id):
    artifact, _ = FIGURES[figure_id]
    out = render(figure_id, golden_manifest, tmp_path / f"{figure_id}.svg")
    sidecar = json.loads(out.with_suffix(out.suffix + ".values.json").read_text())
    source = pd.read_csv(golden_manifest.parent / artifact)
    assert set(sidecar) == set(source.columns)
    for col in source.columns:
        got = sidecar[col]
        want = source[col].tolist()
        assert len(got) == len(want)
        for g, w in zip(got, want):
            if isinstance(w, float) and math.isnan(w):
                assert g is None or math.isnan(g)
            else:
                assert g == w


def test_network_sidecar_equals_source_json(golden_manifest, tmp_path):
    out = render("network_ci", golden_manifest, tmp_path / "net.svg")
    sidecar = json.loads(out.with_suffix(out.suffix + ".values.json").read_text())
    source = json.loads((golden_manifest.parent / "network_ci.json").read_text())
    assert sidecar == source


@pytest.mark.parametrize("figure_id", ["pc1_weights", "network_ci", "horizon_pnl"])
def test_vector_rerender_byte_identical(golden_manifest, tmp_path, figure_id):
    a = render(figure_id, golden_manifest, tmp_path / "a.svg")
    b = render(figure_id, golden_manifest, tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()


def test_missing_artifact_errors(golden_manifest, tmp_path, capsys):
    manifest = json.loads(golden_manifest.read_text())
    manifest["outputs"].pop("horizon_pnl.csv")
    trimmed = tmp_path / "manifest.json"
    trimmed.write_text(json.dumps(manifest))
    rc = main(["render", "--manifest", str(trimmed),
               "--figure", "horizon_pnl", "--out", str(tmp_path / "x.svg")])
    assert rc == 1
    assert "horizon_pnl" in capsys.readouterr().err


def test_schema_mismatch_names_column(golden_manifest, tmp_path, capsys):
    out_dir = golden_manifest.parent
    broken_dir = tmp_path / "broken"
    broken_dir.mkdir()
    frame = pd.read_csv(out_dir / "horizon_pnl.csv").rename(
        columns={"pnl_bps": "oops"})
    frame.to_csv(broken_dir / "horizon_pnl.csv", index=False)
    manifest = json.loads(golden_manifest.read_text())
    (broken_dir / "manifest.json").write_text(json.dumps(manifest))
    rc = main(["render", "--manifest", str(broken_dir / "manifest.json"),
               "--figure", "horizon_pnl", "--out", str(tmp_path / "x.svg")])
    assert rc == 1
    assert "pnl_bps" in capsys.readouterr().err


def test_unknown_figure_id(golden_manifest, tmp_path, capsys):
    rc = main(["render", "--manifest", str(golden_manifest),
               "--figure", "not_a_figure", "--out", str(tmp_path / "x.svg")])
    assert rc == 1
