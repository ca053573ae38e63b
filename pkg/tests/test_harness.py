import json
import math

import numpy as np
import pytest

from ftlpde import harness
from ftlpde.cli import main
from ftlpde.density import read_density_csv


def _cfg(tmp_path, **kw):
    kw.setdefault("out", str(tmp_path / "out"))
    return harness.ExperimentConfig(**kw)


def _table_model(tmp_path):
    # v = (1 - rho)^3: decreasing (V1) but rho v' is not monotone (V2 fails)
    rho = np.linspace(0, 1, 41)
    p = tmp_path / "cubic.csv"
    p.write_text("rho,v\n" + "".join(f"{float(r)!r},{float((1 - r) ** 3)!r}\n" for r in rho))
    return f"table:{p}"


def _rough_datum(tmp_path, cells=40, seed=0):
    rng = np.random.default_rng(seed)
    p = tmp_path / "rough.csv"
    edges = np.linspace(-1, 1, cells + 1)
    vals = rng.uniform(0.1, 0.9, cells)
    p.write_text("x_left,x_right,value\n" + "".join(f"{float(a)!r},{float(b)!r},{float(v)!r}\n" for a, b, v in zip(edges[:-1], edges[1:], vals)))
    return str(p)


def test_minimal_run(tmp_path):
    out = harness.run(_cfg(tmp_path, n=3, t_end=0.2))
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["config"]["n"] == 3
    assert len(diag["snapshots"]) == harness.DEFAULT_SNAPSHOTS
    assert all(math.isfinite(s["tv"]) for s in diag["snapshots"])


def test_run_is_byte_identical(tmp_path):
    a = harness.run(_cfg(tmp_path, n=50, out=str(tmp_path / "a")))
    b = harness.run(_cfg(tmp_path, n=50, out=str(tmp_path / "b")))
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    for f in sorted((a / "densities").iterdir()):
        assert f.read_bytes() == (b / "densities" / f.name).read_bytes()
    da = json.loads((a / "diagnostics.json").read_text())
    db = json.loads((b / "diagnostics.json").read_text())
    da["config"].pop("out")
    db["config"].pop("out")
    assert da == db


def test_ic_paper_profile(tmp_path):
    out = harness.run(_cfg(tmp_path, n=200, snapshots=[0.0, 0.5]))
    d = read_density_csv(out / "densities" / "density_0001.csv")
    lo, hi = d.support()
    assert lo == pytest.approx(-0.7, abs=0.02) and hi == pytest.approx(1.5, abs=1e-9)
    assert d(-0.4) == pytest.approx(0.4, abs=1e-3)
    assert d(0.3) == pytest.approx(0.8, abs=1e-3)
    assert d(1.0) == pytest.approx(0.5, abs=0.02)
    diag = json.loads((out / "diagnostics.json").read_text())
    assert any("lwr" in n for n in diag["notes"])
    assert diag["config"]["rtol"] == 1e-6 and diag["config"]["atol"] == 1e-9


def test_floats_have_17_digits():
    assert harness.dumps({"a": 0.1}) == '{\n  "a": 0.10000000000000001\n}\n'
    assert harness.dumps([math.nan]) == "[null]\n"


def test_config_validation(tmp_path):
    with pytest.raises(harness.ConfigError, match="N must be"):
        _cfg(tmp_path, n=2).validate()
    with pytest.raises(harness.ConfigError, match="t_end"):
        _cfg(tmp_path, t_end=0).validate()
    with pytest.raises(harness.ConfigError, match="not found"):
        _cfg(tmp_path, datum=str(tmp_path / "missing.csv")).validate()
    with pytest.raises(harness.ConfigError, match="mode"):
        _cfg(tmp_path, mode="ghost").validate()
    with pytest.raises(harness.ConfigError, match="unknown config keys"):
        harness.ExperimentConfig.from_dict({"nn": 3})


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    out = tmp_path / "o"
    cfg.write_text(json.dumps({"n": 20, "t_end": 0.3, "mode": "phantom", "out": str(out)}))
    assert main(["run", "--config", str(cfg), "--n", "12"]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["config"]["n"] == 12 and diag["config"]["mode"] == "phantom" and diag["config"]["t_end"] == 0.3
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_converge_duplicates_and_parallel(tmp_path):
    rows, order = harness.converge(_cfg(tmp_path, n_list=[40, 40]))
    assert rows[0].l1_error == rows[1].l1_error and math.isnan(order)
    serial, o1 = harness.converge(_cfg(tmp_path, n_list=[20, 80, 40]))
    par, o2 = harness.converge(_cfg(tmp_path, n_list=[20, 80, 40], jobs=3))
    assert [r.n for r in par] == [20, 80, 40]
    assert [(r.n, r.l1_error, r.accepted_steps) for r in serial] == [(r.n, r.l1_error, r.accepted_steps) for r in par]
    assert o1 == o2 > 0.5
    with pytest.raises(harness.ConfigError):
        harness.converge(_cfg(tmp_path, n_list=[40]))


def test_converge_unsupported_model(tmp_path):
    from ftlpde.reference import UnsupportedModelError

    with pytest.raises(UnsupportedModelError):
        harness.converge(_cfg(tmp_path, n_list=[10, 20], model=_table_model(tmp_path)))


def test_observed_order_of_published_errors():
    ns = [50, 100, 200, 400, 1000]
    errs = [4.8e-2, 2.9e-2, 1.4e-2, 8.2e-3, 3.6e-3]
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert harness.observed_order(ns, errs) == pytest.approx(-slope)
    # least-squares fit; the endpoint slope alone is 0.865
    assert harness.observed_order(ns, errs) == pytest.approx(0.8736, abs=1e-4)


def _by_name(results):
    return {r.name: r for r in results}


def test_check_lwr_rough_datum(tmp_path):
    res = _by_name(harness.check(_cfg(tmp_path, datum=_rough_datum(tmp_path), n=200, t_end=0.5)))
    assert res["oleinik"].status == "pass"
    assert res["max_principle"].status == "pass"
    assert not any(r.hard_failure for r in res.values())


def test_check_v1_only_table(tmp_path):
    cfg = _cfg(tmp_path, model=_table_model(tmp_path), datum=_rough_datum(tmp_path, cells=5), n=60, t_end=0.5)
    res = _by_name(harness.check(cfg))
    assert res["tv_contraction"].status == "pass"
    assert res["oleinik"].status == "n/a"
    assert "V2 unverified" in res["oleinik"].detail


def test_check_corrupted_trajectory(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--n", "10", "--out", str(out)]) == 0
    traj = out / "trajectory.csv"
    lines = traj.read_text().splitlines()
    cols = lines[3].split(",")
    cols[2], cols[3] = cols[3], cols[2]
    lines[3] = ",".join(cols)
    traj.write_text("\n".join(lines) + "\n")
    code = main(["check", "--trajectory", str(traj), "--out", str(tmp_path / "chk")])
    assert code == 1
    assert "integrity" in capsys.readouterr().out
    report = json.loads((tmp_path / "chk" / "check.json").read_text())
    assert report["results"][0]["status"] == "fail"


def test_check_existing_trajectory_passes(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--n", "30", "--out", str(out)]) == 0
    assert main(["check", "--trajectory", str(out / "trajectory.csv"), "--out", str(tmp_path / "c")]) == 0


def test_riemann_cli(capsys):
    assert main(["riemann", "0", "0.4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "shock" and out["speed"] == pytest.approx(0.6, abs=1e-12)
