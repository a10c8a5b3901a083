import json
import os
import pathlib
import subprocess

import jsonschema
import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
BIN = os.environ.get("OQS_BIN", str(ROOT / "build" / "oqs"))
SCHEMA = json.loads((ROOT / "schemas" / "report.schema.json").read_text())


def run(*args, env=None):
    e = dict(os.environ)
    e.pop("OQS_SEED", None)
    if env:
        e.update(env)
    return subprocess.run([BIN, *args], capture_output=True, text=True, env=e, timeout=300)


def doc_of(p):
    d = json.loads(p.stdout)
    jsonschema.validate(d, SCHEMA)
    return d


def verdicts(d):
    return {r["criterion"]: r["verdict"] for r in d["reports"]}


def test_eternal_divisibility_and_distinguishability():
    p = run("analyze", "--model", "eternal", "--criteria", "divisibility,distinguishability")
    assert p.returncode == 0, p.stderr
    d = doc_of(p)
    assert verdicts(d) == {"divisibility": "fail", "distinguishability": "pass"}
    assert d["reports"][0]["witnesses"]["min_choi_eig"] <= -0.05


def test_afl_qrf_gqrf_split():
    d = doc_of(run("analyze", "--model", "afl", "--criteria", "qrf,gqrf"))
    assert verdicts(d) == {"qrf": "pass", "gqrf": "fail"}


def test_tam_nib_witness():
    d = doc_of(run("analyze", "--model", "tam", "--criteria", "nib", "--t0", "0", "--t1", "1", "--t2", "2"))
    r = d["reports"][0]
    assert r["verdict"] == "fail"
    assert r["witnesses"]["min_residual"] > 0
    assert "best_sigma_e" in r["witnesses"]


@pytest.mark.parametrize(
    "model,expect",
    [
        ("nqib", {"nqib": "pass", "nib": "fail"}),
        ("static-dephasing", {"gqrf": "fail", "pu": "pass", "dd_echo": "pass"}),
        ("collision", {"fa": "fail", "qrf": "pass", "gqrf": "pass", "composability": "pass", "nib": "pass",
                       "divisibility": "pass", "fdd": "pass", "pu": "pass", "mpu": "pass"}),
    ],
)
def test_hierarchy(model, expect):
    p = run("hierarchy", "--model", model)
    assert p.returncode == 0, p.stderr
    d = doc_of(p)
    assert d["implication_violations"] == []
    for k, v in expect.items():
        assert d["verdict_table"][k] == v


def test_byte_identical_reruns(tmp_path):
    args = ["analyze", "--model", "tam", "--criteria", "nib,distinguishability", "--seed", "3"]
    a, b = run(*args), run(*args)
    assert a.returncode == 0 and a.stdout == b.stdout
    assert doc_of(a)["reports"] == doc_of(run(*args, "--jobs", "3"))["reports"]
    for tag, jobs in (("a", "1"), ("b", "1"), ("c", "4")):
        run("mcwf", "-M", "50", "--seed", "5", "--jobs", jobs, "--out", str(tmp_path / f"{tag}.csv"),
            "--summary", str(tmp_path / f"{tag}.json"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    sa, sc = (json.loads((tmp_path / f"{t}.json").read_text())["summary"] for t in "ac")
    assert sa == sc


def test_seed_env_fallback():
    a = run("analyze", "--model", "tam", "--criteria", "distinguishability", env={"OQS_SEED": "11"})
    assert doc_of(a)["config"]["seed"] == 11
    b = run("analyze", "--model", "tam", "--criteria", "distinguishability", "--seed", "12", env={"OQS_SEED": "11"})
    assert doc_of(b)["config"]["seed"] == 12


def test_csv_format():
    p = run("analyze", "--model", "tam", "--criteria", "composability", "--format", "csv")
    assert p.returncode == 0
    lines = p.stdout.splitlines()
    assert lines[0] == "model,criterion,verdict,tolerance,witness,re,im,text"
    assert all(l.startswith("tam,composability,fail,") for l in lines[1:])


def test_timing_only_on_request():
    assert doc_of(run("analyze", "--model", "eternal", "--criteria", "semigroup"))["timing"] is None
    d = doc_of(run("analyze", "--model", "eternal", "--criteria", "semigroup", "--timing"))
    assert d["timing"]["total_seconds"] >= 0


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "eternal", "criteria": "divisibility", "grid": [0, 1, 2], "seed": 4}))
    d = doc_of(run("analyze", "--config", str(cfg)))
    assert d["config"]["grid"] == [0, 1, 2] and d["config"]["seed"] == 4
    d = doc_of(run("analyze", "--config", str(cfg), "--criteria", "semigroup"))
    assert list(verdicts(d)) == ["semigroup"]


@pytest.mark.parametrize(
    "args,code",
    [
        (["analyze", "--model", "nope", "--criteria", "fa"], 2),
        (["analyze", "--model", "tam", "--criteria", "markov"], 2),
        (["analyze", "--model", "tam"], 2),
        (["analyze", "--criteria", "fa"], 2),
        (["analyze", "--model", "tam", "--criteria", "nib", "--t0", "0", "--t1", "1"], 2),
        (["analyze", "--model", "tam", "--criteria", "nib", "--t0", "0", "--t1", "2", "--t2", "1"], 2),
        (["analyze", "--model", "tam", "--criteria", "divisibility", "--grid", "0,x"], 2),
        (["analyze", "--model", "tam", "--criteria", "divisibility", "--grid", "1,0"], 2),
        (["analyze", "--model", "tam", "--criteria", "fa", "--format", "xml"], 2),
        (["analyze", "--model", "tam", "--criteria", "fa", "--tol", "-1"], 2),
        (["analyze", "--model", "tam", "--criteria", "fa", "--config", "/nonexistent.json"], 2),
        (["frobnicate"], 2),
        ([], 2),
        (["analyze", "--model", "tam", "--criteria", "composability", "--assert-pass"], 1),
        (["analyze", "--model", "eternal", "--criteria", "distinguishability", "--assert-pass"], 0),
        (["analyze", "--model", "tam", "--criteria", "composability"], 0),
        (["mcwf", "--model", "eternal", "-M", "5", "--out", os.devnull], 1),
        (["mcwf", "--model", "nope", "-M", "5"], 2),
        (["mcwf", "-M", "0"], 2),
        (["mcwf", "-M", "5", "--dt", "0.3", "--out", os.devnull], 2),
        (["mcsm", "--process", "poisson", "--lambda", "-1", "--out", os.devnull], 1),
        (["mcsm", "--process", "nope"], 2),
        (["hierarchy", "--model", "nope"], 2),
    ],
)
def test_exit_codes(args, code):
    p = run(*args)
    assert p.returncode == code, p.stderr
    if code != 0:
        assert p.stderr.strip()


def test_negative_rate_message():
    p = run("mcwf", "--model", "eternal", "-M", "5", "--out", os.devnull)
    assert "gamma_2" in p.stderr and "negative" in p.stderr


def test_mcwf_decay_summary(tmp_path):
    s = tmp_path / "s.json"
    p = run("mcwf", "-M", "5000", "--seed", "2", "--out", os.devnull, "--summary", str(s))
    assert p.returncode == 0, p.stderr
    d = json.loads(s.read_text())
    jsonschema.validate(d, SCHEMA)
    assert d["summary"]["within_3sigma"] is True


def test_mcwf_single_trajectory(tmp_path):
    s = tmp_path / "s.json"
    assert run("mcwf", "-M", "1", "--out", os.devnull, "--summary", str(s)).returncode == 0
    d = json.loads(s.read_text())
    jsonschema.validate(d, SCHEMA)
    assert d["summary"]["sigma_defined"] is False
    assert d["summary"]["within_3sigma"] is None
    assert all(r["std_error"] is None for r in d["summary"]["rows"])


def test_mcsm_ou_moments(tmp_path):
    s, c = tmp_path / "s.json", tmp_path / "p.csv"
    assert run("mcsm", "-M", "10000", "--seed", "4", "--out", str(c), "--summary", str(s)).returncode == 0
    d = json.loads(s.read_text())
    jsonschema.validate(d, SCHEMA)
    assert d["summary"]["within_3sigma"] is True
    assert c.read_text().splitlines()[0] == "time,path,x_0"
