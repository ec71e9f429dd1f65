import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from arithsum import cli, jobs
from arithsum.jobs import Job, JobError

EXACT = {"identity": "poisson_chi", "f": "1", "interval": ["0.25", "5.25"], "chi": [[1, 0]], "truncation": {"N": 10}}
CHARACTER = {"identity": "em_chi", "f": "exp(-x/5)", "interval": ["0.3", "40.3"],
             "chi": [[1, 0], [0, 0], [-1, 0], [0, 0]], "truncation": {"R": 3, "N": 200, "quad_tol": "1e-12"}}


@pytest.fixture
def run(tmp_path, capsys):
    def _run(doc, *args, command="verify"):
        path = tmp_path / "job.json"
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc), encoding="utf-8")
        code = cli.main([command, str(path), *args])
        return code, capsys.readouterr().out

    return _run


def test_verify_exact_job(run):
    code, out = run(EXACT)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert float(rep["residual"]) <= 1e-15
    assert rep["lhs"] == {"re": "5", "im": "0"}


def test_verify_integer_endpoint_guard(run):
    code, out = run(dict(EXACT, f="x", interval=["1.0", "5.5"]))
    assert code == 3
    assert json.loads(out) == {"error": "guard", "guard": "integer psi-argument at endpoint",
                               "detail": json.loads(out)["detail"]}


def test_verify_character_job(run):
    code, out = run(CHARACTER)
    rep = json.loads(out)
    lhs = jobs.parse_complex(rep["lhs"])
    assert code == 0 and float(rep["residual"]) <= 1e-8 * (1 + abs(lhs))
    assert set(rep["terms"]) == {"main-term", "boundary-terms", "remainder-series"}


def test_report_round_trips_exactly(run):
    code, out = run(CHARACTER)
    rep = json.loads(out)
    res = Job.from_doc(CHARACTER).run()
    assert jobs.parse_complex(rep["lhs"]) == res.lhs
    assert jobs.parse_complex(rep["rhs"]) == res.rhs
    assert float(rep["residual"]) == res.residual
    for name, z in res.terms.items():
        assert jobs.parse_complex(rep["terms"][name]) == z


def test_reports_deterministic(run):
    assert run(CHARACTER)[1] == run(CHARACTER)[1]


def test_timing_flag(run):
    assert "wall_ms" not in json.loads(run(EXACT)[1])
    assert float(json.loads(run(EXACT, "--timing")[1])["wall_ms"]) >= 0


def test_tolerance_override_fails_job(run):
    job = dict(EXACT, f="x", interval=["0.25", "3.25"], truncation={"N": 100})
    assert run(job)[0] == 1
    assert run(job, "--tolerance", "1e-2")[0] == 0


@pytest.mark.parametrize("doc,path", [
    (dict(EXACT, extra=1), "$.extra"),
    (dict(EXACT, truncation={"N": 10, "M": 3}), "$.truncation.M"),
    (dict(EXACT, interval=["0.25", "five"]), "$.interval[1]"),
    (dict(EXACT, identity="zeta"), "$.identity"),
    (dict(EXACT, chi=[[1, 0, 0]]), "$.chi[0]"),
    (dict(EXACT, m=3), "$.m"),
    (dict(EXACT, f="log("), "$.f"),
    (dict(EXACT, f="log(x-3)"), "$.f"),
    ({k: v for k, v in EXACT.items() if k != "chi"}, "$"),
    (dict(EXACT, k=2), "$.k"),
])
def test_schema_errors_name_paths(run, doc, path):
    code, out = run(doc)
    err = json.loads(out)
    assert code == 2 and err["error"] == "schema" and err["path"] == path


def test_unreadable_inputs(run, capsys):
    assert run("{not json")[0] == 2
    assert cli.main(["verify", "/nonexistent/job.json"]) == 2
    assert json.loads(capsys.readouterr().out)["error"] == "schema"
    assert cli.main(["frobnicate"]) == 2


def test_sweep_poisson_rate(run):
    job = dict(EXACT, f="x", interval=["0.25", "3.25"])
    code, out = run(job, "--N", "100,1000,10000", command="sweep")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["N", "residual", "tail_estimate", "wall_ms"]
    N = np.array([float(r[0]) for r in rows[1:]])
    res = np.array([float(r[1]) for r in rows[1:]])
    assert np.all(np.diff(res) < 0)
    assert np.polyfit(np.log(N), np.log(res), 1)[0] == pytest.approx(-1, abs=0.1)


def test_sweep_polynomial_floor(run):
    job = {"identity": "em_chi", "f": "x^2-3*x", "interval": ["0.5", "10.5"], "chi": [[1, 0], [-1, 0]],
           "truncation": {"R": 2}}
    code, out = run(job, "--N", "10,100,1000", command="sweep")
    res = [float(r[1]) for r in list(csv.reader(io.StringIO(out)))[1:]]
    assert code == 0 and max(res) <= 1e-12 and len(set(res)) == 1


def test_sweep_list_from_job_and_errors(run):
    code, out = run(dict(EXACT, sweep=[5, 50]), command="sweep")
    assert code == 0 and len(out.strip().splitlines()) == 3
    assert run(EXACT, "--N", "", command="sweep")[0] == 2
    assert run(EXACT, "--N", "100,10", command="sweep")[0] == 2
    assert run(dict(EXACT, sweep=[]), command="sweep")[0] == 2
    assert run(dict(EXACT, sweep=[50, 5]), command="sweep")[0] == 2


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert all(f"PASS {g}" in out for g in ("kernels", "smoothfn", "arith", "collapses", "oracles"))


@pytest.mark.parametrize("mutation", ["psi_sign", "tau_conj", "drop_n0"])
def test_selftest_catches_mutations(capsys, mutation):
    assert cli.main(["selftest", "--mutation", mutation]) != 0
    assert "FAIL" in capsys.readouterr().out


def test_mutations_are_restored():
    from arithsum import arith, formulae, kernels, selftest

    before = (kernels.psi, arith.tau, formulae._poisson_indices)
    for m in selftest.MUTATIONS:
        with selftest.mutation(m):
            pass
    assert (kernels.psi, arith.tau, formulae._poisson_indices) == before


def test_threads_give_identical_reports(run):
    job = {"identity": "poisson_divisor", "f": "sin(pi*(x-0.5)/12)^2", "interval": ["0.5", "12.5"],
           "truncation": {"N": 300}}
    assert run(job, "--threads", "1")[1] == run(job, "--threads", "0")[1] == run(job, "--threads", "3")[1]


def test_module_entry_point(tmp_path):
    path = tmp_path / "job.json"
    path.write_text(json.dumps(EXACT))
    proc = subprocess.run([sys.executable, "-m", "arithsum", "verify", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["pass"]


def test_job_error_type():
    with pytest.raises(JobError):
        Job.from_doc({"identity": "euler", "f": "x", "interval": ["2.5", "0.5"]})


def test_published_schema_matches_package():
    from pathlib import Path

    doc = Path(__file__).resolve().parents[1] / "docs" / "job_schema.json"
    assert json.loads(doc.read_text()) == jobs.load_schema()
