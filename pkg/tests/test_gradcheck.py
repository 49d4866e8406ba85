"""The finite-difference harness itself: determinism and bookkeeping."""

import numpy as np

from groundscale import SuiteResult, run_all
from groundscale.gradcheck import check_reg, check_smooth


def test_suite_result_pass_logic():
    ok = SuiteResult("x", 5, 100, 3, 1e-8, 1e-6)
    assert ok.passed
    assert not SuiteResult("x", 5, 100, 3, 1e-5, 1e-6).passed
    assert not SuiteResult("x", 5, 0, 100, 0.0, 1e-6).passed  # nothing checked
    d = ok.to_dict()
    assert d["passed"] and d["max_rel_err"] == 1e-8


def test_suites_deterministic():
    a = check_reg(seed=3, instances=4)
    b = check_reg(seed=3, instances=4)
    assert a == b
    c = check_reg(seed=4, instances=4)
    assert c.max_rel_err != a.max_rel_err or c.checked != a.checked


def test_smooth_suite_small():
    res = check_smooth(seed=0, instances=3)
    assert res.passed
    assert res.checked > 0


def test_run_all_names_and_sizes():
    results = run_all(seed=0, instances=1)
    assert [r.name for r in results] == ["reg", "const", "smooth",
                                         "reproj", "total"]
    assert all(r.instances == 1 for r in results)
    assert all(np.isfinite(r.max_rel_err) for r in results)
