import math

import pytest

import mfstune


def test_presets_round_trip():
    desk = mfstune.preset("desk")
    paper = mfstune.preset("paper")
    assert desk["mfs"]["n_colloc"] == 150
    assert paper["mfs"]["n_colloc"] == 300
    assert paper["tuner"]["j_max"] == 800
    with pytest.raises(mfstune.ConfigError):
        mfstune.preset("huge")


def test_spiral_points_lie_on_the_sphere():
    pts = mfstune.spiral_points(50, 0.1)
    assert len(pts) == 50
    for p in pts:
        assert math.isclose(math.sqrt(sum(c * c for c in p)), 0.1, rel_tol=1e-12)


def test_oracle_matches_homogeneous_sphere():
    cfg = mfstune.preset("desk")
    pts = mfstune.spiral_points(40, 0.1)
    v = mfstune.oracle_potential((0.0, 0.0, 0.04), (0.0, 0.0, 1.0), pts, cfg)
    assert len(v) == 40
    # Zero mean over a near-uniform spiral, up to quadrature error.
    assert abs(sum(v)) / sum(abs(x) for x in v) < 0.05


def test_oracle_checks_pass():
    checks = mfstune.oracle_checks()
    assert checks and all(c["passed"] for c in checks)


def test_forward_reports_a_score():
    r = mfstune.forward((1.3, 0.7, 1.3, 0.6, 1.1))
    assert not r["rank_failure"]
    assert r["rank"] == r["columns"] == 540
    assert math.isfinite(r["q"])
    with pytest.raises(mfstune.ConfigError):
        mfstune.forward((9.0, 0.7, 1.3, 0.6, 1.1))


def test_statistics():
    assert math.isclose(mfstune.expected_improvement(0.7, 1.0, 0.7), 0.398942, abs_tol=1e-6)
    r = mfstune.mann_whitney_u([1.0, 2.0], [3.0, 4.0])
    assert r["u_a"] + r["u_b"] == 4
    assert r["exact"]
    assert math.isclose(r["p_value"], 1.0 / 3.0, rel_tol=1e-12)


def synthetic(seed=3):
    cfg = mfstune.preset("desk")
    cfg["seed"] = seed
    cfg["objective"]["kind"] = "synthetic"
    return cfg


def test_tune_is_deterministic_and_resumes(tmp_path):
    cfg = synthetic()
    a = mfstune.tune(tmp_path / "a.ndjson", cfg)
    b = mfstune.tune(tmp_path / "b.ndjson", cfg)
    assert a["best_theta"] == b["best_theta"]
    assert (tmp_path / "a.ndjson").read_bytes() == (tmp_path / "b.ndjson").read_bytes()
    again = mfstune.tune(tmp_path / "a.ndjson", cfg, resume=True)
    assert again["resumed"]
    assert again["best_theta"] == a["best_theta"]


def test_compare_and_report(tmp_path):
    cfg = synthetic()
    cfg["repetitions"] = 3
    cfg["tuner"]["gp_restarts"] = 2
    rows = mfstune.compare(tmp_path, cfg, threads=1)["rows"]
    assert len(rows) == 2
    assert mfstune.report(tmp_path)["rows"] == rows
