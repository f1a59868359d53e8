"""Acceptance criteria 1-11 at their stated tolerances.

The full suite runs three times (one worker, one worker again, four workers);
every criterion prints one PASS/FAIL line and then asserts its bound directly
from the numbers in its report.
"""

from __future__ import annotations

import pytest

from stochclifford.acceptance import RUNTIME_LIMITS
from stochclifford.cli import DEFAULT_SEED, reproduce_all

RUN_THREADS = (1, 1, 4)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    out = []
    for i, threads in enumerate(RUN_THREADS):
        folder = tmp_path_factory.mktemp(f"reproduce{i}")
        out.append((folder, reproduce_all(DEFAULT_SEED, folder, threads=threads)))
    return out


def _result(runs, number):
    _, summary = runs[0]
    return {r.number: r for r in summary.results}[number]


def _report(capsys, line):
    with capsys.disabled():
        print(f"\n{line}")


def _check_runtime(runs, number):
    runtime = runs[0][1].runtimes[number]
    assert runtime <= RUNTIME_LIMITS[number], f"took {runtime:.1f}s, limit {RUNTIME_LIMITS[number]}s"


def test_criterion_01_algebra(runs, capsys):
    res = _result(runs, 1)
    _report(capsys, res.line())
    d = res.details
    assert d["max_dim"] == 8
    assert d["sign_mismatches"] == []
    assert d["anticommutation_exact"]
    _check_runtime(runs, 1)


def test_criterion_02_fixture_monogenicity(runs, capsys):
    res = _result(runs, 2)
    _report(capsys, res.line())
    bad = [(c["field"], c["n"], c["fd_residual"], c["tol"]) for c in res.details["checks"]
           if not c["fd_residual"] <= c["tol"]]
    _check_runtime(runs, 2)
    assert not bad, f"central-difference residual above tolerance: {bad[:5]}"


def test_criterion_03_bm_diagnostics(runs, capsys):
    res = _result(runs, 3)
    _report(capsys, res.line())
    assert res.details["n_paths"] >= 100_000
    for c in res.details["checks"]:
        assert abs(c["value"] - c["target"]) <= c["band"] * c["stderr"], c["check"]
    _check_runtime(runs, 3)


def test_criterion_04_martingales(runs, capsys):
    res = _result(runs, 4)
    _report(capsys, res.line())
    d = res.details
    _check_runtime(runs, 4)
    assert d["bm"]["passed"], d["bm"]["failures"]
    assert not d["drifted_control"]["passed"]
    assert d["bm_square_minus_t"]["passed"], d["bm_square_minus_t"]["failures"]


def test_criterion_05_ito_identity(runs, capsys):
    res = _result(runs, 5)
    _report(capsys, res.line())
    assert res.details["max_gap"] <= 1e-10
    assert res.details["checks"] >= 40
    _check_runtime(runs, 5)


def test_criterion_06_ito_scaling(runs, capsys):
    res = _result(runs, 6)
    _report(capsys, res.line())
    d = res.details
    assert [r["n_steps"] for r in d["rows"]] == [100, 1000, 10000]
    assert d["n_paths"] >= 1000
    assert 0.35 <= d["slope"] <= 0.65
    assert max(d["reduction_gaps"]) <= 1e-10
    _check_runtime(runs, 6)


def test_criterion_07_second_moment(runs, capsys):
    res = _result(runs, 7)
    _report(capsys, res.line())
    d = res.details
    assert abs(d["estimate"] - d["target"]) <= 3 * d["stderr"]
    _check_runtime(runs, 7)


def test_criterion_08_dirichlet(runs, capsys):
    res = _result(runs, 8)
    _report(capsys, res.line())
    d = res.details
    for row in d["estimates"]:
        for est, se, exact in zip(row["estimate"], row["stderr"], row["exact"]):
            assert abs(est - exact) <= 3 * se, (row["field"], row["point"])
    assert 0.4 <= d["stderr_ratio_quadrupled"] <= 0.6
    shifted = d["shifted_ball"]
    for est, se, exact in zip(shifted["estimate"]["mean"], shifted["estimate"]["stderr"],
                              shifted["target"]):
        assert abs(est - exact) <= 3 * se
    _check_runtime(runs, 8)


def test_criterion_09_cone(runs, capsys):
    res = _result(runs, 9)
    _report(capsys, res.line())
    probs = [e["probability"] for e in res.details["estimates"]]
    assert probs[0] > probs[1] > probs[2]
    assert all(s > 3.0 for s in res.details["separations_sigma"])
    _check_runtime(runs, 9)


def test_criterion_10_liouville(runs, capsys):
    res = _result(runs, 10)
    _report(capsys, res.line())
    rows = res.details["rows"]
    for r in rows:
        assert abs(r["probability"] - r["closed_form"]) <= 3 * r["stderr"], r["t"]
    assert all(b["probability"] < a["probability"] for a, b in zip(rows, rows[1:]))
    _check_runtime(runs, 10)


def test_criterion_11_reproducibility(runs, capsys):
    folders = [folder for folder, _ in runs]
    names = sorted(p.name for p in folders[0].iterdir())
    differing = []
    for folder in folders[1:]:
        assert sorted(p.name for p in folder.iterdir()) == names
        differing += [(folder.name, n) for n in names
                      if (folder / n).read_bytes() != (folders[0] / n).read_bytes()]
    probe_ok = all(s.determinism["passed"] for _, s in runs)
    passed = not differing and probe_ok
    _report(capsys, f"criterion 11 reproducibility: {'PASS' if passed else 'FAIL'}")
    assert not differing, differing
    assert probe_ok


def test_fixture_registry(runs, capsys):
    reg = runs[0][1].registry
    _report(capsys, f"fixture registry: {'PASS' if reg['passed'] else 'FAIL'}")
    assert reg["passed"], reg["failures"]
