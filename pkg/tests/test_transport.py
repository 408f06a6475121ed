import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from markovdetect.transport import (
    Coupling,
    dbar_between,
    dbar_empirical,
    dbar_exact,
    hamming_cost,
    l1_distance,
    solve_transport,
    tv,
)
from markovdetect.util import all_atoms


def lp_oracle(supply, demand, cost):
    """Reference optimum via scipy's LP solver (independent of our simplex)."""
    nr, nc = cost.shape
    a_eq = []
    for i in range(nr):
        row = np.zeros(nr * nc)
        row[i * nc:(i + 1) * nc] = 1.0
        a_eq.append(row)
    for j in range(nc):
        row = np.zeros(nr * nc)
        row[j::nc] = 1.0
        a_eq.append(row)
    res = linprog(
        cost.ravel(),
        A_eq=np.array(a_eq),
        b_eq=np.concatenate([supply, demand]),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0
    return res.fun


def test_tv_and_l1():
    assert tv([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.4)
    assert l1_distance([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.8)


def test_hamming_cost_counts_mismatches():
    assert hamming_cost((0, 1, 1), (0, 0, 1)) == pytest.approx(1 / 3)
    assert hamming_cost((0, 1), (0, 1)) == 0.0


def test_solver_matches_lp_oracle(rng):
    for trial in range(100):
        nr = int(rng.integers(2, 9))
        nc = int(rng.integers(2, 9))
        supply = rng.dirichlet(np.ones(nr))
        demand = rng.dirichlet(np.ones(nc))
        cost = rng.random((nr, nc))
        value, _, _, _ = solve_transport(supply, demand, cost)
        assert value == pytest.approx(lp_oracle(supply, demand, cost), abs=1e-9)


def test_dbar_exact_matches_lp_oracle_binary_windows(rng):
    for trial in range(20):
        m = int(rng.integers(1, 6))
        n = 2 ** m
        mu = rng.dirichlet(np.ones(n))
        nu = rng.dirichlet(np.ones(n))
        coupling = dbar_exact(mu, nu, m)
        atoms = all_atoms(2, m)
        cost = np.array([[hamming_cost(x, y) for y in atoms] for x in atoms])
        assert coupling.value == pytest.approx(lp_oracle(mu, nu, cost), abs=1e-9)


def test_single_letter_equals_tv(rng):
    for _ in range(50):
        p = rng.dirichlet(np.ones(3))
        q = rng.dirichlet(np.ones(3))
        assert dbar_exact(p, q, 1, alphabet_size=3).value == pytest.approx(
            tv(p, q), abs=1e-11
        )


def _product_law(p, m):
    v = np.array([1.0])
    for _ in range(m):
        v = np.kron(v, np.asarray(p, dtype=float))
    return v


def test_product_law_distance_equals_single_letter(rng):
    """Coordinatewise optimal couplings make the per-letter distance of a
    product law pair collapse to the single-letter total variation."""
    for m in (2, 3, 4):
        p = rng.dirichlet(np.ones(2))
        q = rng.dirichlet(np.ones(2))
        value = dbar_exact(_product_law(p, m), _product_law(q, m), m).value
        assert value == pytest.approx(tv(p, q), abs=1e-9)


def test_metric_axioms(rng):
    for _ in range(15):
        m = int(rng.integers(1, 4))
        n = 2 ** m
        mu = rng.dirichlet(np.ones(n))
        nu = rng.dirichlet(np.ones(n))
        rho = rng.dirichlet(np.ones(n))
        d_xy = dbar_exact(mu, nu, m).value
        d_yx = dbar_exact(nu, mu, m).value
        d_xz = dbar_exact(mu, rho, m).value
        d_zy = dbar_exact(rho, nu, m).value
        assert d_xy == pytest.approx(d_yx, abs=1e-9)
        assert d_xy <= d_xz + d_zy + 1e-9
        assert dbar_exact(mu, mu, m).value == pytest.approx(0.0, abs=1e-11)


def test_coupling_marginals_and_value(rng):
    mu = rng.dirichlet(np.ones(8))
    nu = rng.dirichlet(np.ones(8))
    coupling = dbar_exact(mu, nu, 3)
    coupling.validate()
    recomputed = sum(
        mass * hamming_cost(coupling.atoms_x[i], coupling.atoms_y[j])
        for i, j, mass in coupling.entries
    )
    assert coupling.value == pytest.approx(recomputed, abs=1e-12)


def test_zero_mass_atoms_dropped():
    mu = np.array([0.5, 0.0, 0.5, 0.0])
    nu = np.array([0.0, 0.5, 0.0, 0.5])
    coupling = dbar_exact(mu, nu, 2)
    coupling.validate()
    # every sequence pair differs in exactly the final letter
    assert coupling.value == pytest.approx(0.5, abs=1e-12)


def test_dbar_between_ragged_supports():
    coupling = dbar_between(
        [(0, 0), (1, 1)], [0.5, 0.5],
        [(0, 1)], [1.0],
    )
    assert coupling.value == pytest.approx(0.5)


def test_coupling_json_deterministic(rng):
    mu = rng.dirichlet(np.ones(4))
    nu = rng.dirichlet(np.ones(4))
    a = dbar_exact(mu, nu, 2).to_json()
    b = dbar_exact(mu, nu, 2).to_json()
    assert a == b
    assert "dual_value" in a


@given(st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_degenerate_point_masses(code):
    # point masses at arbitrary atoms: distance = normalized Hamming distance
    x = [(code >> 2) & 1, (code >> 1) & 1, code & 1]
    vec_x = np.zeros(8)
    vec_x[4 * x[0] + 2 * x[1] + x[2]] = 1.0
    vec_y = np.zeros(8)
    vec_y[0] = 1.0
    value = dbar_exact(vec_x, vec_y, 3).value
    assert value == pytest.approx(sum(x) / 3, abs=1e-12)


# -- empirical estimator ----------------------------------------------------


def test_empirical_identical_samples_zero(rng):
    samples = rng.integers(0, 2, size=(200, 4))
    est = dbar_empirical(samples, samples.copy(), bootstrap=30, seed=0)
    assert est.estimate == pytest.approx(0.0, abs=1e-12)
    assert est.ci_low == pytest.approx(0.0, abs=1e-12)


def test_empirical_deterministic(rng):
    x = rng.integers(0, 2, size=(150, 3))
    y = rng.integers(0, 2, size=(180, 3))
    a = dbar_empirical(x, y, bootstrap=40, seed=5)
    b = dbar_empirical(x, y, bootstrap=40, seed=5)
    assert a == b


def test_empirical_ci_brackets_estimate(rng):
    x = rng.integers(0, 2, size=(300, 3))
    y = (rng.random((300, 3)) < 0.7).astype(np.int64)
    est = dbar_empirical(x, y, bootstrap=60, seed=2)
    assert est.ci_low <= est.estimate <= est.ci_high
    assert est.support_x <= 8 and est.support_y <= 8


def test_empirical_converges_to_exact(rng):
    # large same-law samples: estimate approaches the exact distance between laws
    p = np.array([0.7, 0.3])
    q = np.array([0.3, 0.7])
    x = (rng.random((20_000, 1)) > p[0]).astype(np.int64)
    y = (rng.random((20_000, 1)) > q[0]).astype(np.int64)
    est = dbar_empirical(x, y, bootstrap=20, seed=1)
    assert est.estimate == pytest.approx(tv(p, q), abs=0.02)
