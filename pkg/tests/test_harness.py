import csv
import json
import os
import struct
import time

import numpy as np
import pytest

from dwrom import eim, rom
from dwrom.errors import ConfigurationError, FormatError, IntegrityError
from dwrom.harness import cli, persist, pipeline
from dwrom.harness.catalog import catalog_entry, preset_overrides
from dwrom.harness.config import RunConfig, load_config
from dwrom.timing import CategoryTimer

SMALL_BBM = {"nh": 200, "t_end": 4.0}


def small_config(tmp_path=None, **kw):
    doc = dict(model="bbm", benchmark="monochromatic", overrides=dict(SMALL_BBM), reduction="pdrom",
               n_rb=12, snapshots={"n_snapshots": 41, "n_draws": 2}, n_out=5, seed=7)
    doc.update(kw)
    if tmp_path is not None:
        doc["out"] = str(tmp_path)
    return RunConfig(**doc)


# --- persistence -------------------------------------------------------------------
def test_array_round_trip_is_bit_exact(tmp_path):
    a = np.random.default_rng(0).standard_normal((13, 5))
    path = str(tmp_path / "a.dwrom")
    persist.write_array(path, a, {"seed": 3, "draws": [{"h0": 0.9}]})
    b, meta = persist.read_array(path)
    assert b.tobytes() == a.tobytes()
    assert meta == {"seed": 3, "draws": [{"h0": 0.9}]}
    with open(path, "rb") as fh:
        head = fh.read(16 + 16)
    assert head[:8] == b"DWROM001"
    assert struct.unpack("<II", head[8:16]) == (1, 2)
    assert struct.unpack("<QQ", head[16:32]) == (13, 5)


def test_corrupt_and_truncated_files(tmp_path):
    path = str(tmp_path / "a.dwrom")
    persist.write_array(path, np.ones(4))
    blob = open(path, "rb").read()
    bad = tmp_path / "bad.dwrom"
    bad.write_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(FormatError):
        persist.read_array(str(bad))
    bad.write_bytes(blob[:8] + struct.pack("<I", 9) + blob[12:])
    with pytest.raises(FormatError):
        persist.read_array(str(bad))
    bad.write_bytes(blob[:-3])
    with pytest.raises(IntegrityError):
        persist.read_array(str(bad))
    bad.write_bytes(blob[:30])
    with pytest.raises(IntegrityError):
        persist.read_array(str(bad))
    bad.write_bytes(blob + b"\0")
    with pytest.raises(IntegrityError):
        persist.read_array(str(bad))


def test_basis_snapshot_and_eim_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    s = rom.SnapshotSet(rng.standard_normal((20, 6)), {"flux": rng.standard_normal((20, 6))},
                        [{"t": float(k), "run": 0, "params": {}} for k in range(6)])
    persist.save_snapshots(str(tmp_path), s, {"seed": 5})
    s2, meta = persist.load_snapshots(str(tmp_path))
    assert np.array_equal(s2.states, s.states) and np.array_equal(s2.fluxes["flux"], s.fluxes["flux"])
    assert meta["seed"] == 5 and s2.meta == s.meta
    b = rom.pod_basis(s, n_rb=3)
    persist.save_basis(str(tmp_path / "b.dwrom"), b)
    b2, _ = persist.load_basis(str(tmp_path / "b.dwrom"))
    assert np.array_equal(b2.v, b.v) and np.array_equal(b2.sigma, b.sigma)
    sp = eim.eim_greedy(s.fluxes["flux"], n_max=4)
    persist.save_eim(str(tmp_path / "e.dwrom"), sp)
    sp2, _ = persist.load_eim(str(tmp_path / "e.dwrom"))
    assert np.array_equal(sp2.z, sp.z) and np.array_equal(sp2.psi, sp.psi)


# --- configuration ------------------------------------------------------------------------
def test_load_config_with_flags(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "bbm", "benchmark": "undular_bore", "reduction": "eimrom",
                                "snapshots": {"n_snapshots": 10}, "tol_pod": 1e-3,
                                "tol_eim": 1e-4}))
    cfg = load_config(str(path), cli={"seed": 11, "nrb": 9, "neim": 20, "tol_pod": 1e-5})
    assert (cfg.seed, cfg.n_rb, cfg.n_eim, cfg.tol_pod) == (11, 9, 20, 1e-5)
    assert cfg.mode == "energy"


@pytest.mark.parametrize("doc", [
    {"model": "swe"},
    {"benchmark": "tsunami"},
    {"reduction": "pdrom"},
    {"reduction": "pdrom", "snapshots": {"n_snapshots": 5}},
    {"reduction": "eimrom", "snapshots": {"n_snapshots": 5}, "n_rb": 3},
    {"model": "eb", "benchmark": "solitary_bar", "reduction": "phi_only", "artifacts": "x", "n_rb": 2},
    {"tol_pod": 2.0},
    {"colour": "blue"},
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigurationError):
        load_config(text=json.dumps(doc))


def test_config_rejects_malformed_json():
    with pytest.raises(ConfigurationError):
        load_config(text="{not json")
    with pytest.raises(ConfigurationError):
        load_config(path="/nonexistent/config.json")


def test_catalog_presets():
    assert catalog_entry("eb", "solitary_bar")["training"] == {"h0": (0.8, 1.2), "a0": (0.16, 0.24)}
    assert catalog_entry("bbm", "monochromatic")["online_t_end"] == 250.0
    assert catalog_entry("bbm", "undular_bore")["online_t_end"] == 15.0
    assert preset_overrides("bbm", "monochromatic", "out_of_training")["h0"] == 0.63
    assert preset_overrides("bbm", "monochromatic", "in_training") == {}
    with pytest.raises(ConfigurationError):
        preset_overrides("bbm", "monochromatic", "sideways")


# --- offline / online -----------------------------------------------------------------------
def test_draws_are_deterministic():
    a = pipeline.draw_parameters({"h0": (0.7, 1.3)}, 10, seed=4)
    assert a == pipeline.draw_parameters({"h0": (0.7, 1.3)}, 10, seed=4)
    assert len(a) == 10 and all(0.7 <= d["h0"] <= 1.3 for d in a)
    assert a != pipeline.draw_parameters({"h0": (0.7, 1.3)}, 10, seed=5)


def test_offline_is_deterministic_and_persisted(tmp_path):
    cfg = small_config(tmp_path, reduction="eimrom", n_eim=30)
    res = pipeline.offline(cfg)
    again = pipeline.offline(small_config(reduction="eimrom", n_eim=30))
    assert res.snapshots["all"].states.shape == (200, 82)
    assert np.array_equal(res.bases["eta"].v, again.bases["eta"].v)
    assert np.array_equal(res.eim["flux"].z, again.eim["flux"].z)
    loaded = pipeline.load_offline(str(tmp_path / "offline"))
    assert loaded.draws == res.draws and loaded.seed == 7
    assert np.array_equal(loaded.bases["eta"].v, res.bases["eta"].v)


def test_run_pdrom_report_fields(tmp_path):
    cfg = small_config(tmp_path)
    rep, tr = pipeline.run(cfg)
    assert rep.status == "ok"
    assert rep.errors["l2_final"] < 1e-2
    assert "time_ratio" in rep.ratios and rep.dims["n_rb_eta"] == 12
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["errors"]["l2_final"] == rep.errors["l2_final"]
    with open(tmp_path / "profiles_pdrom.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "value"] and len(rows) == 1 + 5 * 200


def test_run_is_reproducible():
    a, _ = pipeline.run(small_config())
    b, _ = pipeline.run(small_config())
    assert a.errors == b.errors


def test_eimrom_instability_is_reported_not_raised():
    cfg = small_config(reduction="eimrom", n_eim=2, n_rb=20,
                       overrides={"nh": 200, "t_end": 20.0})
    rep, tr = pipeline.run(cfg)
    assert rep.status in ("ok", "aborted")
    if rep.status == "aborted":
        assert rep.failure["reason"] == "EIM instability"
        assert tr is None
    else:
        assert np.isfinite(rep.errors["l2_final"])


def test_eb_pipeline_both_variants():
    doc = dict(model="eb", benchmark="solitary_bar", reduction="pdrom", n_rb=15,
               overrides={"nh": 600, "t_end": 2.0, "x0": -10.0},
               snapshots={"n_snapshots": 41}, n_out=3)
    for variant in ("psi", "fused"):
        rep, _ = pipeline.run(RunConfig(variant=variant, **doc))
        assert rep.status == "ok" and rep.errors["l2_final"] < 1e-2


def test_timing_categories_cover_wall_time():
    setup = pipeline.make_setup("bbm", "monochromatic", {"nh": 400, "t_end": 5.0})
    pipeline.warm_up()
    timer = CategoryTimer()
    t0 = time.perf_counter()
    setup.simulate(timer=timer)
    wall = time.perf_counter() - t0
    d = timer.as_dict()
    assert d["total"] >= 0.95 * wall
    assert d["total"] == pytest.approx(sum(d[k] for k in ("linear_solves", "flux_assembly", "other")))
    assert d["linear_solves"] > 0 and d["flux_assembly"] > 0


def test_sweep_records_and_center_consistency(tmp_path):
    cfg = small_config(reduction="eimrom", n_eim=60, snapshots={"n_snapshots": 41})
    off = pipeline.offline(cfg)
    recs = pipeline.sweep_map(cfg, off, [0.03, 0.04], [0.9, 1.0])
    assert len(recs) == 4
    assert set(recs[0]) == set(pipeline.SWEEP_FIELDS)
    center = [r for r in recs if r["a0"] == 0.04 and r["h0"] == 1.0][0]
    single, _, _ = pipeline.online(cfg, off, setup=pipeline.make_setup(
        "bbm", "monochromatic", dict(SMALL_BBM, a0=0.04, h0=1.0)), reduction="pdrom")
    assert center["error_pdrom"] == pytest.approx(single.errors["l2_final"], rel=1e-12, abs=1e-300)
    path = tmp_path / "sweep.csv"
    pipeline.write_sweep_csv(str(path), recs)
    assert path.read_text().splitlines()[0] == "a0,h0,eps,mu,error_pdrom,error_eimrom"


def test_compare_rows(tmp_path):
    cfg = small_config(reduction="eimrom", n_eim=40, snapshots={"n_snapshots": 41},
                       study={"n_rb": [4, 8], "n_eim": [20, 40]})
    off = pipeline.offline(cfg)
    rows = pipeline.compare(cfg, off, [4, 8], [20, 40])
    assert len(rows) == 2 * (1 + 2)
    pd = [r["error"] for r in rows if r["method"] == "pdrom"]
    assert pd[1] < pd[0]
    pipeline.write_study_csv(str(tmp_path / "s.csv"), rows)
    assert (tmp_path / "s.csv").read_text().startswith("method,n_rb,n_eim,error,time_ratio")


# --- command line -----------------------------------------------------------------------------
def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"model": "bbm", "benchmark": "monochromatic",
                                "overrides": {"nh": 100, "t_end": 1.0}}))
    assert cli.main(["fom", "--config", str(good), "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    assert (tmp_path / "o" / "report.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": "bbm", "benchmark": "nowhere"}))
    assert cli.main(["fom", "--config", str(bad)]) == cli.EXIT_CONFIG
    blow = tmp_path / "blow.json"
    blow.write_text(json.dumps({"model": "eb", "benchmark": "solitary_bar",
                                "overrides": {"nh": 200, "a0": 0.6, "t_end": 5.0}}))
    assert cli.main(["fom", "--config", str(blow)]) == cli.EXIT_ABORT
    capsys.readouterr()


def test_cli_offline_then_online(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "bbm", "benchmark": "monochromatic",
                                "overrides": SMALL_BBM, "reduction": "pdrom",
                                "snapshots": {"n_snapshots": 41}, "n_out": 3}))
    out = str(tmp_path / "run")
    assert cli.main(["offline", "--config", str(path), "--out", out, "--nrb", "10"]) == 0
    assert os.path.exists(os.path.join(out, "offline", "basis_eta.dwrom"))
    assert cli.main(["online", "--config", str(path), "--out", out, "--nrb", "10"]) == 0
    rep = json.loads(open(os.path.join(out, "report.json")).read())
    assert rep["dims"]["n_rb_eta"] == 10
    assert cli.main(["compare", "--config", str(path), "--out", out, "--nrb", "10"]) == cli.EXIT_CONFIG
    capsys.readouterr()
