import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakyspec import cli
from leakyspec import config as cfgmod


def run_cli(*args, cwd=None, env=None):
    return subprocess.run([sys.executable, "-m", "leakyspec", *args], capture_output=True,
                          text=True, cwd=cwd, env=env)


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


BASE = {"geometry": {"kind": "circle", "R": 1.0}, "interaction": {"kind": "delta", "strength": 2.0},
        "solver": {"N": 64}}

configs = st.fixed_dictionaries(
    {"geometry": st.one_of(
        st.fixed_dictionaries({"kind": st.just("circle"), "R": st.floats(0.1, 5.0)}),
        st.fixed_dictionaries({"kind": st.just("ellipse"), "a": st.floats(0.5, 3.0), "b": st.floats(0.5, 3.0)}),
        st.fixed_dictionaries({"kind": st.just("sphere"), "R": st.floats(0.1, 5.0)})),
     "interaction": st.fixed_dictionaries({"kind": st.just("delta"), "strength": st.floats(-10, 10)}),
     "solver": st.fixed_dictionaries({"N": st.integers(4, 256).map(lambda n: 2 * n),
                                      "tol": st.floats(1e-12, 1e-4)}),
     "seed": st.integers(0, 2**31)})


@settings(max_examples=60, deadline=None)
@given(configs)
def test_config_round_trip(doc):
    cfg = cfgmod.from_dict(doc)
    again = cfgmod.from_dict(json.loads(cfgmod.emit(cfg)))
    assert cfgmod.to_dict(again) == cfgmod.to_dict(cfg)


@pytest.mark.parametrize("doc,match", [
    ({**BASE, "solver": {"N": 63}}, "even"),
    ({**BASE, "extra": 1}, "Additional properties"),
    ({**BASE, "geometry": {"kind": "kite"}, "interaction": {"kind": "delta_prime", "strength": 1.0}},
     "unsupported"),
    ({**BASE, "solver": {"bracket": [-1.0, 0.5]}}, "bracket"),
    ({**BASE, "interaction": {"kind": "delta", "strength": [1.0, 2.0]}}, "N=64"),
    ({**BASE, "interaction": {"kind": "delta_prime", "strength": 0.0}}, "beta"),
    ({**BASE, "geometry": {"kind": "ellipse", "a": 1.0}}, "ellipse"),
    ({**BASE, "schatten": {"lam": 1.0}}, "negative"),
])
def test_config_rejections(doc, match):
    with pytest.raises(cfgmod.ConfigError, match=match):
        cfgmod.from_dict(doc)


def test_overrides():
    doc = cfgmod.apply_overrides({}, alpha=3.0, grid_n=32)
    cfg = cfgmod.from_dict(doc)
    assert cfg.geometry == {"kind": "circle", "R": 1.0} and cfg.solver.N == 32
    assert cfg.make_interaction().strength == 3.0
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.apply_overrides({}, alpha=1.0, beta=1.0)


def test_fmt_is_seventeen_digits():
    assert cli.fmt(1 / 3) == "3.3333333333333331e-01"
    assert float(cli.fmt(0.1)) == 0.1


def test_solve_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, BASE)
    bodies = []
    for name in ("a", "b"):
        r = run_cli("solve", str(cfg), "--out", str(tmp_path / name))
        assert r.returncode == 0, r.stderr
        bodies.append((tmp_path / name / "bound_states.csv").read_bytes())
    assert bodies[0] == bodies[1]
    rows = bodies[0].decode().splitlines()
    assert rows[0] == "lam,multiplicity,residual,mode,backend" and len(rows) == 2
    meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
    assert meta["tasks"]["bound_states"]["status"] == "ok" and "numpy" in meta["versions"]


def test_zero_coupling_writes_header_only(tmp_path):
    r = run_cli("solve", "--alpha", "0", "--grid-n", "32", "--out", str(tmp_path))
    assert r.returncode == 0
    assert (tmp_path / "bound_states.csv").read_text() == "lam,multiplicity,residual,mode,backend\n"


def test_config_errors_exit_2(tmp_path):
    assert run_cli("solve", "--grid-n", "63", "--out", str(tmp_path)).returncode == 2
    bad = write_config(tmp_path, {**BASE, "unknown": True})
    r = run_cli("solve", str(bad))
    assert r.returncode == 2 and "unknown" in r.stderr
    r = run_cli("solve", "--geometry", "kite", "--beta", "1.0", "--out", str(tmp_path))
    assert r.returncode == 2
    assert run_cli("solve", str(tmp_path / "missing.json")).returncode == 2
    env = {"SOLVER_THREADS": "zero", "PATH": ""}
    r = subprocess.run([sys.executable, "-m", "leakyspec", "solve", "--alpha", "1", "--out",
                        str(tmp_path)], capture_output=True, text=True, env=env)
    assert r.returncode == 2


def test_task_failure_writes_marker(tmp_path):
    cfg = write_config(tmp_path, {"geometry": {"kind": "sphere", "R": 1.0},
                                  "interaction": {"kind": "delta", "strength": 2.0}})
    r = run_cli("schatten", str(cfg), "--out", str(tmp_path / "o"))
    assert r.returncode == 1
    assert (tmp_path / "o" / "schatten.FAILED").exists()
    assert json.loads((tmp_path / "o" / "run_meta.json").read_text())["tasks"]["schatten"]["status"] == "failed"


def test_schatten_mode_task(tmp_path):
    doc = {"geometry": {"kind": "circle", "R": 1.0}, "interaction": {"kind": "delta_prime", "strength": 5.0},
           "solver": {"l_max": 64}}
    r = run_cli("schatten", str(write_config(tmp_path, doc)), "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    slopes = json.loads((tmp_path / "slopes.json").read_text())
    assert set(slopes) == {"delta_prime_vs_free_l1", "delta_prime_vs_neumann_l1"}
    assert -2.5 < slopes["delta_prime_vs_free_l1"]["slope"] < -1.8


def test_convergence_task(tmp_path):
    doc = {**BASE, "geometry": {"kind": "ellipse", "a": 1.5, "b": 1.0}}
    r = run_cli("convergence", str(write_config(tmp_path, doc)), "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "convergence.csv").read_text().splitlines()
    assert rows[0] == "N,observable,error_vs_finest,observed_order" and len(rows) == 5


def test_verify_passes(tmp_path):
    r = run_cli("verify", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert all(d["passed"] for d in doc.values()) and len(doc) == 9
