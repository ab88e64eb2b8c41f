import io

import numpy as np
import pytest
import scipy.sparse as sp

from gridrestore.backend import BackendError, HighsBackend, make_backend
from gridrestore.builder import ModelBuilder, ModelError, lp_name, write_lp


def test_min_x_at_least_three():
    sol = HighsBackend().solve_milp([1.0], sp.csr_array([[1.0]]), [3.0], [np.inf], [0.0], [10.0], [0])
    assert sol.ok and sol.x[0] == pytest.approx(3.0) and sol.objective == pytest.approx(3.0)


def test_contradictory_bounds_are_infeasible():
    sol = HighsBackend().solve_milp([1.0], sp.csr_array([[1.0], [1.0]]), [3.0, -np.inf], [np.inf, 2.0],
                                    [-np.inf], [np.inf], [1])
    assert sol.status == "infeasible"


def test_lp_duals_have_the_minimisation_sign():
    # min -p s.t. p <= 4: one more unit of rhs lowers the optimum by one
    sol = HighsBackend().solve_lp([-1.0], sp.csr_array([[1.0]]), [4.0], [-np.inf], [np.inf])
    assert sol.ok and sol.objective == pytest.approx(-4.0)
    assert sol.duals[0] == pytest.approx(-1.0)


def test_unknown_backend():
    with pytest.raises(BackendError):
        make_backend("cplex")


def test_builder_rejects_duplicates_and_bad_tags():
    b = ModelBuilder()
    b.add_var(("x", 1))
    with pytest.raises(ModelError):
        b.add_var(("x", 1))
    with pytest.raises(ModelError):
        b.add({("x", 1): 1}, "<", 1, "I", "t")
    with pytest.raises(ModelError):
        b.add({("x", 1): 1}, "<=", 1, "IV", "t")
    with pytest.raises(ModelError):
        b.add({("y",): 1}, "<=", 1, "I", "t")


def test_builder_merges_terms_and_counts_families():
    b = ModelBuilder()
    b.binary(("u", "a"))
    b.add_var(("s", "a"), stage="second")
    row = b.add([(("u", "a"), 1), (("u", "a"), 2), (("s", "a"), 0)], "<=", 3, "II", "demo")
    assert b.rows[row].coeffs == {0: 3.0}
    assert b.count_by_family() == {"I": 0, "II": 1, "III": 0}
    b.fix(("u", "a"), 1)
    assert b.var(("u", "a")).lb == b.var(("u", "a")).ub == 1.0


def test_lp_export_is_readable():
    b = ModelBuilder()
    b.binary(("w", "L1", 1))
    b.add_var(("shed", "N@1", 1), ub=5, stage="second")
    b.add({("w", "L1", 1): 1, ("shed", "N@1", 1): 1}, ">=", 1, "II", "demo")
    b.minimize({("shed", "N@1", 1): 7})
    buf = io.StringIO()
    write_lp(b, buf)
    text = buf.getvalue()
    assert "Minimize" in text and "Binaries" in text and text.rstrip().endswith("End")
    assert lp_name(("shed", "N@1", 1)) in text
    assert "@" not in lp_name(("shed", "N@1", 1))
