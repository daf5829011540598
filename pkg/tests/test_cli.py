import json

import pytest

from npcorner.cli import read_sweep_csv, run
from npcorner.exceptions import SchemaError
from npcorner.operators import read_operator


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out.strip().splitlines(), out.err.strip().splitlines()


def _summary(lines):
    return json.loads(lines[-1])


def test_symbol(capsys):
    code, out, _ = _run(capsys, "symbol", "--alpha", "1.5707963", "--z", "0,0")
    assert code == 0
    assert float(out[0]) == pytest.approx(0.5, abs=1e-7)
    assert _summary(out)["status"] == "ok"
    code, out, _ = _run(capsys, "symbol", "--alpha-frac", "1/2", "--z", "0,0")
    assert out[0] == "0.5"


def test_mu(capsys):
    code, out, _ = _run(capsys, "mu", "--alpha", "1.5707963", "--lambda", "0.5,0")
    re_, im_ = map(float, out[0].split(","))
    # 1.5707963 sits 3e-8 below pi/2, so the endpoint moves by ~1e-8 and mu by its square root
    assert abs(re_) < 1e-12 and abs(im_) < 2e-4
    code, out, _ = _run(capsys, "mu", "--alpha-frac", "1/2", "--lambda", "0.5,0")
    assert out[0] == "0,0"


def test_disk_polarizability(capsys):
    code, out, _ = _run(capsys, "polarizability", "--curve", "disk", "--u", "3", "--eps", "0")
    assert code == 0
    re_, im_ = map(float, out[0].split(","))
    assert re_ == pytest.approx(-2 / 3, rel=1e-12) and im_ == 0


def test_exit_codes(capsys):
    assert _run(capsys, "symbol", "--z", "0,0")[0] == 1
    assert _run(capsys, "mu", "--alpha", "1", "--lambda", "0.9,0.5")[0] == 1
    assert _run(capsys, "bogus")[0] == 1
    code, out, _ = _run(capsys, "polarizability", "--curve", "disk", "--levels", "0", "--u", "-1", "--eps", "0")
    assert code == 2
    assert _summary(out)["kind"] == "NearSingular"


def test_thread_cap(capsys, monkeypatch):
    monkeypatch.setenv("NP_CORNER_THREADS", "zero")
    assert _run(capsys, "symbol", "--alpha", "1", "--z", "0")[0] == 1
    monkeypatch.setenv("NP_CORNER_THREADS", "1")
    assert _run(capsys, "symbol", "--alpha", "1", "--z", "0")[0] == 0


def test_sigma_and_mesh_csv(capsys, tmp_path):
    s = tmp_path / "s.csv"
    assert _run(capsys, "sigma", "--alpha-frac", "2/7", "--samples", "32", "--out", str(s))[0] == 0
    lines = s.read_text().splitlines()
    assert lines[0] == "t,re,im" and len(lines) == 33
    assert (tmp_path / "s.config.json").is_file()
    m = tmp_path / "m.csv"
    assert _run(capsys, "mesh", "--curve", "droplet", "--levels", "10", "--order", "16", "--dump", str(m))[0] == 0
    lines = m.read_text().splitlines()
    assert lines[0] == "panel,x,y,nx,ny,kappa,weight,jac,s_corner"
    assert len(lines) == 449
    code, out, err = _run(capsys, "sigma", "--alpha", "1", "--samples", "16")
    assert out[0] == "t,re,im" and json.loads(err[-1])["status"] == "ok"


def test_assemble_and_check(capsys, tmp_path):
    k = tmp_path / "K.bin"
    code, out, _ = _run(capsys, "assemble", "--curve", "droplet", "--levels", "4", "--dump-op", str(k))
    assert code == 0
    kind, entries, mhash = read_operator(k)
    assert kind == "NP_K" and mhash == _summary(out)["mesh_hash"]
    c = tmp_path / "chk.json"
    code, out, _ = _run(capsys, "check", "--plemelj", "--gauss-identity", "--levels", "6", "--out", str(c))
    recs = json.loads(c.read_text())["records"]
    assert {r["metric"] for r in recs} == {"plemelj", "gauss_identity"}
    assert all(set(r) == {"metric", "value", "mesh_params"} for r in recs)
    assert _run(capsys, "check", "--levels", "4")[0] == 1


def test_model_commands(capsys, tmp_path):
    d = tmp_path / "sol.csv"
    assert _run(capsys, "model", "--alpha-frac", "2/7", "--lambda", "0.3,0.05", "--rhs", "gaussian",
                "--dump", str(d))[0] == 0
    lines = d.read_text().splitlines()
    assert lines[0] == "x,s,re,im" and len(lines) == 4097
    f = tmp_path / "fit.json"
    assert _run(capsys, "model-fit", "--alpha-frac", "2/7", "--lambda", "0.3,0.05", "--out", str(f))[0] == 0
    fit = json.loads(f.read_text())
    assert {"mu_fit", "mu_symbol", "c_lambda_re", "c_lambda_im", "relerr"} <= set(fit)
    assert fit["relerr"] < 1e-4


def test_sweep_config_round_trip_and_plot(capsys, tmp_path):
    p = tmp_path / "pol.csv"
    code, out, _ = _run(capsys, "polarizability", "--curve", "droplet", "--component", "11", "--u-min", "-1",
                        "--u-max", "1", "--n", "41", "--eps", "0.08,0.04,0.02,0.01", "--out", str(p))
    assert code == 0
    first = p.read_bytes()
    cfg = tmp_path / "pol.config.json"
    cfg_text = cfg.read_text()
    assert _run(capsys, "--config", str(cfg))[0] == 0
    assert p.read_bytes() == first
    assert cfg.read_text() == cfg_text
    raw, ext = read_sweep_csv(p)
    assert len(raw) == 41 * 4 and 0 < len(ext) < 41

    svg = tmp_path / "pol.svg"
    code, out, _ = _run(capsys, "plot", "--csv", str(p), "--svg", str(svg))
    assert code == 0
    summary = _summary(out)
    assert summary["flag_markers"] == 41 - len(ext)
    assert summary["essential_radius"] == pytest.approx(5 / 7)
    text = svg.read_text()
    assert text.count('id="axes_') == 2 and "<dc:date>" not in text
    again = tmp_path / "again.svg"
    _run(capsys, "plot", "--csv", str(p), "--svg", str(again))
    assert again.read_bytes() == svg.read_bytes()
    assert cfg.read_text() == cfg_text
    plot_cfg = tmp_path / "pol.plot.config.json"
    assert json.loads(plot_cfg.read_text())["args"]["rho"] == pytest.approx(5 / 7)
    assert _run(capsys, "--config", str(plot_cfg))[0] == 0
    assert svg.read_bytes() == again.read_bytes()


def test_plot_schema_and_raw_only(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(SchemaError):
        read_sweep_csv(bad)
    assert _run(capsys, "plot", "--csv", str(bad), "--svg", str(tmp_path / "bad.svg"))[0] == 1
    raw = tmp_path / "raw.csv"
    raw.write_text("u,eps,re,im\n0.1,0.08,1.0,0.5\n0.2,0.08,1.1,0.4\n")
    code, out, _ = _run(capsys, "plot", "--csv", str(raw), "--svg", str(tmp_path / "raw.svg"))
    assert code == 0 and _summary(out)["warnings"]


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "c.config.json"
    cfg.write_text(json.dumps({"command": "symbol", "args": {"alpha": 1.0, "z": "0,0", "colour": 1}}))
    assert _run(capsys, "--config", str(cfg))[0] == 1
    cfg.write_text(json.dumps({"command": "symbol", "args": {"alpha": 1.0, "z": "0,0"}, "extra": 1}))
    assert _run(capsys, "--config", str(cfg))[0] == 1


def test_spectral_commands(capsys, tmp_path):
    d = tmp_path / "d.csv"
    code, out, _ = _run(capsys, "density", "--curve", "droplet", "--n", "21", "--g", "x**2 - y",
                        "--out", str(d))
    assert code == 0 and d.read_text().startswith("u,eps,re,im\n")
    projected = _summary(out)["min_tau_ok"]
    code, out, _ = _run(capsys, "density", "--curve", "droplet", "--n", "21", "--g", "x**2 - y", "--no-project")
    # the constant component leaks the eps tail of the eigenvalue-1 mass into the interval
    assert projected > _summary(out)["min_tau_ok"]
    e = tmp_path / "e.json"
    code, out, _ = _run(capsys, "eigs", "--curve", "droplet", "--level-list", "6,8,10", "--out", str(e))
    rep = json.loads(e.read_text())
    assert any(abs(v - 1) < 1e-8 for v in rep["stable"])
    assert _summary(out)["max_pairing_defect"] < 1e-3
    x = tmp_path / "x.json"
    code, out, _ = _run(capsys, "exponent-fit", "--curve", "droplet", "--u", "0.35", "--eps", "0.04",
                        "--out", str(x))
    fit = json.loads(x.read_text())["fits"][0]
    assert fit["relerr"] < 0.05
    assert _run(capsys, "density", "--curve", "droplet", "--n", "3", "--g", "z + 1")[0] == 1
