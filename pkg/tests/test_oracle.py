from fractions import Fraction

import pytest

from kburger import oracle
from kburger.oracle import (
    EnumerationSpec,
    GuardError,
    check_neighbors_after_word,
    exact_d0_product,
    exact_expectation,
    exact_var_D,
    verify_increment_bound,
    verify_M_relation,
    verify_neighbor_closure,
    verify_reduction,
)
from kburger.words import parse_word


def test_reduction_suite_small():
    rep = verify_reduction(2, 4, triple_samples=200)
    assert rep.ok and rep.cases == 1 + 5 + 25 + 125 + 625


def test_reduction_single_symbols_fixed_points():
    rep = verify_reduction(3, 1, triple_samples=0)
    assert rep.ok


def test_reduction_guard():
    with pytest.raises(GuardError):
        verify_reduction(4, 12)


def test_enumeration_spec_validation():
    with pytest.raises(ValueError):
        EnumerationSpec(3, Fraction(1, 2), 4, "var_D:1,2", "forbid")
    with pytest.raises(ValueError):
        EnumerationSpec(3, Fraction(1, 2), 4, "var_D:1,2", "bogus")
    with pytest.raises(ValueError):
        exact_expectation(EnumerationSpec(3, Fraction(0), 4, "nope", "forbid"))


def test_exact_var_D_iid_formula():
    # p=0 increments are i.i.d. with variance 2/k: Var[D_n] = 2n/k exactly
    for k in (2, 3):
        for n in (1, 2, 4, 6):
            if (2 * k) ** n > 4_000_000:
                continue
            r = exact_var_D(k, Fraction(0), n, (1, 2), "forbid")
            assert r.value == Fraction(2 * n, k)
            assert r.residual == 0


def test_exact_var_D_resolve_in_window():
    r = exact_var_D(2, Fraction(1, 2), 4, (1, 2), "resolve_in_window")
    assert 0 < r.residual < 1
    # residual-renormalized second moment stays near the p=0 slope
    assert abs(float(r.value) / 4 - 1.0) < 0.35


def test_d0_product_is_one_for_k2():
    # Y(0) is always of type 1 or 2, so D^{12}(0)^2 = 1 identically
    for p in (Fraction(0), Fraction(1, 2), Fraction(9, 10)):
        for window in (1, 4, 8):
            r = exact_d0_product(2, p, (1, 2), (1, 2), window)
            assert r.value == 1


def test_d0_product_identities_small_window():
    # diagonal 2/k, shared-index 1/k, disjoint 0 at every window size
    for window in (1, 3, 6):
        assert exact_d0_product(3, Fraction(1, 2), (1, 2), (1, 2), window).value == Fraction(2, 3)
        assert exact_d0_product(3, Fraction(1, 2), (1, 2), (1, 3), window).value == Fraction(1, 3)
        assert exact_d0_product(4, Fraction(1, 2), (1, 2), (3, 4), window).value == 0


def test_d0_product_residual_zero_at_p0():
    r = exact_d0_product(3, Fraction(0), (1, 2), (1, 2), 6)
    assert r.residual == 0 and r.value == Fraction(2, 3)


def test_exact_expectation_dispatch():
    spec = EnumerationSpec(3, Fraction(1, 2), 5, "d0_product:1,2,1,3")
    assert exact_expectation(spec).value == Fraction(1, 3)
    spec = EnumerationSpec(2, Fraction(0), 4, "var_D:1,2", "forbid")
    assert exact_expectation(spec).value == 4


def test_increment_bound_small():
    rep = verify_increment_bound(2, 3)
    assert rep.ok and rep.details["max"] <= 2


def test_increment_bound_guard():
    with pytest.raises(GuardError):
        verify_increment_bound(4, 8)


def test_neighbors_spec_example():
    # stack listed bottom-to-top; remove the 4th burger from the top
    stack = [2, 1, 1, 3, 2, 2, 3]
    pos = len(stack) - 4
    for text in ("", "O1 O3 F B2", "F F F F O1 O2 O3 B1"):
        word = parse_word(text, 3)
        neighbors, dmax = check_neighbors_after_word(stack, pos, word, 3)
        assert neighbors and dmax <= 1


def test_neighbors_empty_word_trivial():
    neighbors, dmax = check_neighbors_after_word([1, 2, 1], 1, [], 2)
    assert neighbors and dmax == 1


def test_neighbor_closure_randomized():
    rep = verify_neighbor_closure(2000, seed=21)
    assert rep.ok and rep.cases == 2000


def test_m_relation_zero_and_fixture():
    rep = verify_M_relation(k_values=(2,), trajectories=3, n=50, seed=4)
    assert rep.ok


def test_m_relation_fixture_by_hand():
    import numpy as np

    from kburger import engine
    from kburger.theory import m_matrix

    t = engine.simulate_trajectory(
        engine.ModelParams(2, 0.0), 0, inject="B1 B2 O1", past_mode="none"
    )
    assert t.ctilde[3].tolist() == [0, 1]
    a = t.a_vectors()
    assert a[3].tolist() == [-1, 1]
    assert np.array_equal(a, t.ctilde @ m_matrix(2).T)


def test_monte_carlo_within_four_stderr_of_oracle():
    from kburger.estimators import ExperimentConfig, estimate_cov_D

    # k=2, p=0, n=6: exact Var[D_n]/n = 1
    cfg = ExperimentConfig(k=2, p=0.0, n=6, trials=4000, seed=33, past_mode="none")
    est = estimate_cov_D(cfg, [((1, 2), (1, 2))])[((1, 2), (1, 2))]
    exact = float(exact_var_D(2, Fraction(0), 6, (1, 2), "forbid").value) / 6
    assert abs(est.value - exact) < 4 * est.stderr
