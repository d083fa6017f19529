import json
import re

from click.testing import CliRunner

from thinlayer import __version__
from thinlayer.cli import main


def _run(args):
    res = CliRunner().invoke(main, args)
    try:
        text = res.output + res.stderr
    except ValueError:
        text = res.output
    res.all_output = text
    return res


def test_version():
    res = _run(["--version"])
    assert res.exit_code == 0
    assert __version__ in res.all_output


def test_sticky_resolvent_csv(tmp_path):
    out = tmp_path / "res.csv"
    res = _run(["sticky-resolvent", "--r", "0.4", "--lambda", "2.0", "--n", "50", "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "index,coordinate,closed_form,discrete"
    assert len(lines) == 1 + 51 + 1
    footer = lines[-1]
    assert re.fullmatch(rf"# thinlayer {re.escape(__version__)} config-hash=[0-9a-f]{{16}}", footer)
    # floats carry 17 significant digits
    coord = lines[2].split(",")[1]
    assert coord == "0.02" or len(coord) >= 4


def test_seventeen_digit_floats(tmp_path):
    out = tmp_path / "res.csv"
    _run(["sticky-resolvent", "--r", "0.0", "--lambda", "3.0", "--n", "3", "--out", str(out)])
    text = out.read_text()
    assert "0.33333333333333331" in text  # node x = 1/3 printed at full precision


def test_validation_exit_code_names_field(tmp_path):
    res = _run(["sticky-resolvent", "--r", "1.5", "--lambda", "2.0", "--out", str(tmp_path / "x.csv")])
    assert res.exit_code == 2
    assert "r" in res.all_output


def test_config_validation_eps_list(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": 0.5, "q": 0.5, "alpha": 1.0, "beta": 0.5, "t": 0.2, "epsList": [1.5]}))
    res = _run(["membrane-sweep", "--config", str(cfg), "--out", str(tmp_path / "m.csv")])
    assert res.exit_code == 2
    assert "epsList" in res.all_output


def test_bad_json_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    res = _run(["membrane-sweep", "--config", str(cfg), "--out", str(tmp_path / "m.csv")])
    assert res.exit_code == 2


def test_missing_config_is_io_error(tmp_path):
    res = _run(["membrane-sweep", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "m.csv")])
    assert res.exit_code == 4


def test_sticky_decay_monotone_and_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        res = _run(["sticky-decay", "--r", "0.5", "--n", "80", "--tmax", "1.0", "--out", str(out)])
        assert res.exit_code == 0, res.output
    assert a.read_bytes() == b.read_bytes()
    rows = [line.split(",") for line in a.read_text().splitlines()[1:-1]]
    errs = [float(r[1]) for r in rows]
    assert all(x > y for x, y in zip(errs, errs[1:]))


def test_mc_byte_identical_for_same_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"generator": "two-state", "alpha": 2.0, "beta": 1.0, "t": 0.5, "n_paths": 2000}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        res = _run(["mc", "--config", str(cfg), "--out", str(out), "--seed", "7"])
        assert res.exit_code == 0, res.output
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    res = _run(["mc", "--config", str(cfg), "--out", str(c), "--seed", "8"])
    assert res.exit_code == 0
    assert a.read_bytes() != c.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == "quantity,mean,stderr,N,seed"


def test_plot_emits_svg(tmp_path):
    out = tmp_path / "d.csv"
    res = _run(["sticky-decay", "--r", "0.3", "--n", "40", "--tmax", "0.5", "--out", str(out), "--plot"])
    assert res.exit_code == 0, res.output
    svg = (tmp_path / "d.csv.svg").read_text()
    assert svg.startswith("<svg ")
    assert "polyline" in svg


def test_forms_check_report(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 4, "ny": 4, "nz": 8, "alpha": 0.5, "beta": 0.3, "samples": 5}))
    out = tmp_path / "forms.json"
    res = _run(["forms-check", "--config", str(cfg), "--out", str(out), "--seed", "3"])
    assert res.exit_code == 0, res.output
    payload = json.loads(out.read_text())
    assert payload["monotonicity_ok"] is True
    assert set(payload["duality_residuals"]) == {"1.0", "0.5", "0.1"}
    assert payload["version"] == __version__
    assert re.fullmatch(r"[0-9a-f]{16}", payload["config_hash"])


def test_compare_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(
        json.dumps(
            {"nx": 4, "ny": 4, "nz": 10, "alpha": 0.8, "beta": 0.5, "t": 0.2, "dt": 0.01, "epsList": [0.2, 0.1]}
        )
    )
    out = tmp_path / "cmp.csv"
    res = _run(["compare", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "eps,t,sup_gap,l2_gap,runtime_ms"
    assert len(lines) == 4


def test_layer_evolve_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 3, "ny": 3, "nz": 6, "eps": 0.5, "t": 0.05, "dt": 0.01, "alpha": 0.5, "beta": 0.5}))
    out = tmp_path / "u.csv"
    res = _run(["layer-evolve", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "ix,iy,iz,x,y,z,value"
    assert len(lines) == 1 + 4 * 4 * 14 + 1


def test_threads_env_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("THINLAYER_THREADS", "bogus")
    res = _run(["sticky-decay", "--r", "0.5", "--out", str(tmp_path / "x.csv")])
    assert res.exit_code == 2
    assert "THINLAYER_THREADS" in res.all_output
