import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from censored_newsvendor.cli import load_config, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LAM = str(-80 * math.log(0.6))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_risk(capsys):
    code, out, _ = run(capsys, "risk", "--dist", "exponential:80", "--b", "1", "--h", "1",
                       "--lambda", LAM, "--cap", "200")
    assert code == 0
    res = json.loads(out)
    assert res["regime"] == "unidentifiable"
    assert res["delta"] == pytest.approx(26.52232501645345, abs=1e-9)
    code, out, _ = run(capsys, "risk", "--dist", "exponential:80", "--b", "1", "--lambda", "80",
                       "--cap", "200")
    assert json.loads(out)["delta"] == 0
    code, out, _ = run(capsys, "risk", "--dist", "uniform:0:100", "--b", "9", "--lambda", "150",
                       "--cap", "320")
    res = json.loads(out)
    assert res["regime"] == "identifiable" and res["q_delta"] == res["q_star"] == 90


def test_risk_invalid_instance(capsys):
    code, _, err = run(capsys, "risk", "--dist", "exponential:80", "--b", "9", "--lambda", "10",
                       "--cap", "20")
    assert code == 2 and "cap" in err
    code, _, err = run(capsys, "risk", "--dist", "gamma:3", "--b", "9", "--lambda", "10",
                       "--cap", "20")
    assert code == 2


def test_regret_curve(capsys):
    code, out, _ = run(capsys, "regret-curve", "--dist", "exponential:80", "--b", "1",
                       "--lambda", LAM, "--cap", "200", "--grid", "41")
    assert code == 0
    rows = [(float(r["q"]), float(r["regret"])) for r in csv.DictReader(io.StringIO(out))]
    q_dag = 67.38837491773273
    assert any(abs(q - q_dag) < 1e-9 and abs(v - 26.52232501645345) < 1e-9 for q, v in rows)
    left = [v for q, v in rows if q <= q_dag]
    assert all(b <= a + 1e-9 for a, b in zip(left, left[1:]))


def test_regret_curve_identifiable_left_rows(capsys):
    from censored_newsvendor.distributions import Exponential
    from censored_newsvendor.newsvendor import CostParameters, vanilla_regret

    code, out, _ = run(capsys, "regret-curve", "--dist", "exponential:80", "--b", "1",
                       "--lambda", "100", "--cap", "200", "--grid", "21")
    for r in csv.DictReader(io.StringIO(out)):
        q = float(r["q"])
        if q < 100:
            want = vanilla_regret(Exponential(80), CostParameters(1, 1), q)
            assert float(r["regret"]) == pytest.approx(want, abs=1e-9)


def dataset(tmp_path, sales, name="d.json"):
    p = tmp_path / name
    p.write_text(json.dumps({"cost": {"b": 1, "h": 1}, "cap": 100,
                             "groups": [{"order_quantity": 10, "sales": sales}]}))
    return str(p)


@pytest.mark.parametrize("sales,q", [
    ([1, 2, 3, 4, 5, 6, 7, 10], 4),
    ([1, 2, 3, 4, 10, 10, 10, 10], 10),
    ([10] * 8, 55),
])
def test_decide_traces(capsys, tmp_path, sales, q):
    code, out, _ = run(capsys, "decide", dataset(tmp_path, sales))
    assert code == 0
    assert json.loads(out)["q"] == pytest.approx(q)


def test_decide_errors(capsys, tmp_path):
    path = dataset(tmp_path, [1, 2])
    code, _, err = run(capsys, "decide", path, "--policy", "psychic")
    assert code == 2 and "unknown policy" in err
    code, _, err = run(capsys, "decide", path, "--policy", "censored-saa-fan")
    assert code == 2 and "reserved" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "cost": {"b": 1,\n  "h": }\n}')
    code, _, err = run(capsys, "decide", str(bad))
    assert code == 2 and "line 3" in err
    code, _, _ = run(capsys, "decide", str(tmp_path / "missing.json"))
    assert code == 2
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_lower_bound(capsys):
    code, out, _ = run(capsys, "lower-bound", "--regime", "id", "--b", "1", "--lambda", "1",
                       "--cap", "2", "--n", "1")
    assert json.loads(out)["id"] == pytest.approx(0.006701, abs=1e-6)
    code, out, _ = run(capsys, "lower-bound", "--b", "1", "--lambda", "1", "--cap", "2",
                       "--epsilon", "1", "--delta", str(2 / math.e))
    res = json.loads(out)
    assert res["ke"] == 2 * res["id"]
    assert res["sample_complexity"] == 8


def test_oracle_check_small(capsys):
    code, out, _ = run(capsys, "oracle-check", "--count", "10", "--grid", "1000")
    assert code == 0
    assert out.splitlines()[0] == "10/10 instances within tolerance"


def small_config(tmp_path, **over):
    cfg = {"distribution": "uniform:0:100", "b": [9], "h": 1, "lambda": [57.21, 108.07],
           "n": [30], "replications": 3, "cap": 320, "seed": 11}
    cfg.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_simulate(capsys, tmp_path):
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = small_config(tmp_path)
    assert main(["simulate", cfg, "--out", str(out_a)]) == 0
    assert main(["simulate", cfg, "--out", str(out_b), "--jobs", "2"]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(out_a.read_text())))
    assert len(rows) == 2 * 3 * 6
    assert {r["seed"] for r in rows} == {"11"}
    assert main(["simulate", cfg, "--out", str(out_b), "--seed", "12"]) == 0
    assert out_a.read_bytes() != out_b.read_bytes()


def test_config_validation(tmp_path):
    base = {"distribution": "exponential:80", "b": 9, "lambda": 50, "n": 10, "cap": 320}
    cfg = load_config(base)
    assert cfg.replications == 100 and cfg.delta == 0.3 and cfg.b == [9.0]
    frac = load_config({**{k: v for k, v in base.items() if k != "lambda"}, "lambda_fraction": [0.5]})
    assert frac.grid()[0].lam == pytest.approx(0.5 * 80 * math.log(10))
    for bad in ({**base, "colour": "red"}, {k: v for k, v in base.items() if k != "cap"},
                {**base, "lambda_fraction": [1]}, {**base, "policies": ["psychic"]},
                {**base, "delta": 1.5}, {**base, "n": [1.5]}, {**base, "b": [-1]},
                {**base, "second_quantity": "lumpy"}):
        with pytest.raises(ValueError):
            load_config(bad)


def test_shipped_configs_validate():
    for path in CONFIGS.glob("*.json"):
        load_config(json.loads(path.read_text()))


def test_ingest(capsys, tmp_path):
    src = tmp_path / "sales.csv"
    lines = ["order_date,category,quantity"]
    # 40 weekdays of Furniture orders
    import datetime as dt
    day = dt.date(2017, 1, 2)
    k = 0
    while k < 40:
        if day.weekday() < 5:
            lines.append(f"{day.isoformat()},Furniture,{(k * 7) % 23 + 1}")
            k += 1
        day += dt.timedelta(days=1)
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "ds.json"
    code, stdout, err = run(capsys, "ingest", str(src), "--category", "Furniture", "--out", str(out),
                            "--b", "9", "--lambda-fraction", "0.8", "--n", "25")
    assert code == 0, err
    obj = json.loads(out.read_text())
    assert len(obj["groups"]) == 2 and len(obj["uncensored"]) == 2
    code, stdout, _ = run(capsys, "decide", str(out), "--policy", "true-saa")
    assert code == 0
    code, _, err = run(capsys, "ingest", str(src), "--category", "Toys", "--out", str(out),
                       "--b", "9", "--lambda", "5")
    assert code == 2 and "unknown category" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "censored_newsvendor", "lower-bound", "--b", "1",
                          "--lambda", "1", "--cap", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "ke" in json.loads(res.stdout)
