import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest

from onlinepd import (ConfigError, ConstraintRow, EngineConfig, InfeasibleError, InputError, ObjectiveSpec,
                      PrimalDualState)
from onlinepd.apps import (Bundle, CCFLInstance, MixedPCInstance, PMPCInstance, SetCoverInstance,
                           build_lp_norm, build_setcover_multicost, ccfl_process_client, ccfl_separation,
                           element_row, mixed_pc_report, pmpc_oracle_enumerate, pmpc_process_buyer,
                           production_cost, run_ccfl_fractional, run_lp_norm, run_pmpc_fractional,
                           run_setcover_fractional)
from onlinepd.apps.ccfl import default_exponent
from onlinepd.apps.pmpc import PMPCFractional, production_cost_at_gradient
from onlinepd.apps.set_cover import integral_cost


class TestLpNorm:
    def test_linear_parameters(self):
        inst = MixedPCInstance([[1.0]], 1.0, [[(0, 1.0)]])
        spec, delta, bound = build_lp_norm(inst, 1)
        np.testing.assert_allclose(delta, 1 / (4 * math.log(3)))
        np.testing.assert_allclose(delta, 0.2276, atol=1e-4)
        np.testing.assert_allclose(bound, 4 * math.log(3))

    def test_square_parameters(self):
        inst = MixedPCInstance(np.eye(2), 2.0, [])
        _, delta, bound = build_lp_norm(inst, 2)
        np.testing.assert_allclose(delta, 1 / (8 * math.log(9)))
        np.testing.assert_allclose(delta, 0.0569, atol=1e-4)
        np.testing.assert_allclose(bound, (8 * math.log(9)) ** 2)

    def test_reduces_to_linear(self, rng):
        c = np.array([[1.5, 0.5, 2.0]])
        spec, _, _ = build_lp_norm(MixedPCInstance(c, 1.0, []), 1)
        lin = ObjectiveSpec.linear(c[0])
        for _ in range(5):
            x = rng.random(3)
            np.testing.assert_allclose(spec.value(x), lin.value(x))
            np.testing.assert_allclose(spec.gradient(x), lin.gradient(x))

    def test_bad_exponent(self):
        with pytest.raises(ConfigError):
            MixedPCInstance(np.eye(2), 0.5, [])

    def test_negative_entries(self):
        with pytest.raises(InputError):
            MixedPCInstance(-np.eye(2), 2.0, [])

    def test_report_identity(self):
        inst = MixedPCInstance(np.eye(2), 2.0, [])
        rep = mixed_pc_report(inst, SimpleNamespace(x=np.ones(2), config=SimpleNamespace(d=2)))
        np.testing.assert_allclose(rep["lp_norm"], math.sqrt(2))
        np.testing.assert_allclose(rep["norm_ratio_bound"], 2 * 4 * math.log(9))

    def test_report_single_row(self):
        inst = MixedPCInstance([[2.0, 1.0]], 3.0, [[(0, 1.0), (1, 1.0)]])
        st = run_lp_norm(inst)
        rep = mixed_pc_report(inst, st)
        np.testing.assert_allclose(rep["lp_norm"], np.array([2.0, 1.0]) @ st.x)

    def test_report_matches_objective(self, rng):
        B = rng.uniform(0.1, 3, (3, 5))
        rows = [ConstraintRow(np.sort(rng.choice(5, 3, replace=False)), rng.uniform(0.5, 2, 3)) for _ in range(8)]
        inst = MixedPCInstance(B, 2.5, rows)
        st = run_lp_norm(inst)
        rep = mixed_pc_report(inst, st)
        np.testing.assert_allclose(rep["objective"], st.primal_value(), rtol=1e-9)
        assert st.duality_report().ratio <= st.duality_report().bound


class TestSetCoverRelaxation:
    def test_linear_collapse(self):
        c = np.array([[1.0, 2.0, 3.0]])
        inst = SetCoverInstance(c, 1.0, [[0], [0, 1], [1]], [0, 1])
        spec, _, _ = build_setcover_multicost(inst, 2)
        x = np.array([0.2, 0.5, 0.7])
        np.testing.assert_allclose(spec.value(x), 2 * c[0] @ x)

    def test_square_value(self):
        b = np.array([[1.5, 2.0, 0.5], [0.7, 1.0, 3.0]])
        inst = SetCoverInstance(b, 2.0, [[0], [1], [2]], [0])
        spec, delta, bound = build_setcover_multicost(inst, 1)
        np.testing.assert_allclose(spec.value([1.0, 0.0, 0.0]), 2 * (b[0, 0] ** 2 + b[1, 0] ** 2))
        L = 4 * math.log(3)
        np.testing.assert_allclose(delta, 1 / (2 * L))
        np.testing.assert_allclose(bound, (2 * L) ** 2)

    def test_element_row(self):
        inst = SetCoverInstance(np.ones((1, 3)), 1.0, [[5], [], [5]], [5])
        r = element_row(inst, 5)
        assert r.indices.tolist() == [0, 2]
        np.testing.assert_allclose(r.values, [1.0, 1.0])

    def test_uncoverable_element(self):
        inst = SetCoverInstance(np.ones((1, 2)), 1.0, [[0], [1]], [0, 7])
        with pytest.raises(InfeasibleError):
            element_row(inst, 7)
        with pytest.raises(InfeasibleError):
            run_setcover_fractional(inst)

    def test_relaxation_within_factor_two(self, rng):
        b = rng.uniform(0.1, 5, (3, 6))
        inst = SetCoverInstance(b, 2.0, [[0]] * 6, [0])
        spec, _, _ = build_setcover_multicost(inst, 6)
        for chosen in itertools.product([0, 1], repeat=6):
            X = np.array(chosen, dtype=float)
            true = integral_cost(inst, X)
            assert true <= spec.value(X) <= 2 * true + 1e-12

    def test_fractional_run(self, rng):
        sets = [list(rng.choice(20, 6, replace=False)) for _ in range(8)]
        arrivals = sorted(set(e for s in sets for e in s))
        inst = SetCoverInstance(rng.uniform(0.1, 10, (2, 8)), 2.0, sets, arrivals)
        frac = run_setcover_fractional(inst)
        assert frac.snapshots.shape == (len(arrivals), 8)
        assert np.all(np.diff(frac.snapshots, axis=0) >= 0)
        for e in arrivals:
            assert element_row(inst, e).value(frac.state.x) >= 1 - 1e-9
        rep = frac.state.duality_report()
        assert rep.ratio <= frac.bound


def brute_separation(x, y, F):
    best = math.inf
    for mask in itertools.product([0, 1], repeat=len(F)):
        val = sum(x[i] if s else y[i] for i, s in zip(F, mask))
        best = min(best, val)
    return best


class TestCCFLSeparation:
    def test_all_zero_start(self):
        S, value = ccfl_separation([0, 0], [0, 0], [0, 1])
        assert S.tolist() == [0, 1] and value == 0.0

    def test_violated(self):
        S, value = ccfl_separation([0.6, 0.0], [0.0, 0.7], [0, 1])
        assert S.tolist() == [1] and value == 0.0

    def test_not_violated(self):
        assert ccfl_separation([0.6, 0.3], [0.2, 0.3], [0, 1]) is None

    def test_tie_rule(self):
        S, _ = ccfl_separation([0.1, 0.0, 0.2], [0.1, 0.0, 0.0], [0, 1, 2])
        assert S.tolist() == [0]

    def test_matches_subset_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            m = int(rng.integers(1, 13))
            x = np.round(rng.random(m) * 0.3, 2)
            y = np.round(rng.random(m) * 0.3, 2)
            F = np.flatnonzero(rng.random(m) < 0.8)
            if F.size == 0 or F.size > 10:
                continue
            out = ccfl_separation(x, y, F)
            brute = brute_separation(x, y, F)
            if brute < 0.5:
                S, value = out
                np.testing.assert_allclose(value, brute, atol=1e-12)
                rest = np.setdiff1d(F, S)
                np.testing.assert_allclose(x[S].sum() + y[rest].sum(), brute, atol=1e-12)
            else:
                assert out is None


def linear_standin(m, n):
    return PrimalDualState(ObjectiveSpec.linear(np.ones(m + m * n)), EngineConfig(d=m))


class TestCCFLProcessClient:
    def test_single_facility(self):
        inst = CCFLInstance([1.0], [[1.0]], [[1.0]])
        st = linear_standin(1, 1)
        rows = ccfl_process_client(inst, st, 0)
        assert 1 <= rows <= 4
        assert min(st.x[0], st.x[1]) >= 0.5 - 1e-9

    def test_two_facilities_half_cover(self):
        inst = CCFLInstance([1.0, 2.0], np.ones((2, 1)), np.ones((2, 1)))
        st = linear_standin(2, 1)
        rows = ccfl_process_client(inst, st, 0)
        x = st.x
        assert rows <= 8
        assert np.sum(np.minimum(2 * x[:2], 2 * x[2:4])) >= 1 - 1e-9

    def test_covered_client_adds_nothing(self):
        inst = CCFLInstance([1.0, 2.0], np.ones((2, 2)), np.ones((2, 2)))
        st = linear_standin(2, 2)
        ccfl_process_client(inst, st, 0)
        # client 1 reuses client 0's assignment levels
        y0 = st.x[2:4]
        for i in range(2):
            st.process_constraint(ConstraintRow([4 + i], [1.0 / max(y0[i], 1e-3)]))
        assert ccfl_process_client(inst, st, 1) == 0

    def test_empty_allowed_set(self):
        inst = CCFLInstance([1.0], [[1.0]], [[1.0]])
        with pytest.raises(InfeasibleError):
            ccfl_process_client(inst, linear_standin(1, 1), 0, F=[])

    def test_default_exponent(self):
        assert default_exponent(8) == 4 and default_exponent(5) == 4 and default_exponent(1) == 1


class TestCCFLPhases:
    def test_rows_and_phases(self):
        rng = np.random.default_rng(1)
        m, n = 5, 12
        inst = CCFLInstance(rng.uniform(1, 10, m), rng.uniform(0.1, 5, (m, n)), rng.uniform(0.1, 3, (m, n)))
        frac = run_ccfl_fractional(inst)
        assert [e.j for e in frac.events] == list(range(n))
        assert frac.max_rows_per_client <= 4 * m
        assert all(e.cover >= 0.5 - 1e-9 for e in frac.events)
        assert len(frac.phases) <= math.log2(frac.M_final / frac.M_initial) + 1 + 1e-9

    def test_doubling_with_small_alpha(self):
        rng = np.random.default_rng(2)
        m, n = 4, 10
        inst = CCFLInstance(rng.uniform(1, 10, m), rng.uniform(0.1, 5, (m, n)), rng.uniform(0.1, 3, (m, n)))
        frac = run_ccfl_fractional(inst, alpha=0.5)
        assert len(frac.phases) > 1
        np.testing.assert_allclose(frac.M_final / frac.M_initial, 2.0 ** (len(frac.phases) - 1))
        for ph in frac.phases:
            if ph.clients:
                assert ph.check.ok
        # rows of a rejected client stay in the abandoned phase
        assert all(ph.rows <= ph.state.n_rows for ph in frac.phases)

    def test_restricted_facilities(self):
        inst = CCFLInstance([1.0, 100.0], [[1.0], [0.1]], [[1.0], [0.1]])
        frac = run_ccfl_fractional(inst)
        assert frac.M_initial == pytest.approx(3.0)
        x = frac.phases[0].state.x
        assert x[1] == 0.0 and x[3] == 0.0


def single_buyer(bundles, m=2, R=None, q=2.0):
    return PMPCInstance(np.ones((1, m)), q, [bundles], R)


class TestPMPCOracle:
    def test_violated(self):
        b = [Bundle((0, 1), 1.0)]
        assert pmpc_oracle_enumerate(0.0, [0.1, 0.1], b) == 0

    def test_satisfied(self):
        assert pmpc_oracle_enumerate(0.0, [0.1, 0.1], [Bundle((0, 1), 0.1)]) is None

    def test_large_utility(self):
        b = [Bundle((0,), 3.0), Bundle((1,), 5.0)]
        assert pmpc_oracle_enumerate(5.0, [0.0, 0.0], b) is None

    def test_most_violated(self):
        b = [Bundle((0,), 1.0), Bundle((1,), 2.0), Bundle((0, 1), 2.5)]
        assert pmpc_oracle_enumerate(0.0, [0.2, 0.5], b) == 2

    def test_empty(self):
        assert pmpc_oracle_enumerate(0.0, [0.0], []) is None


class TestPMPCInstance:
    def test_validation(self):
        with pytest.raises(InputError):
            single_buyer([Bundle((0,), 1.0), Bundle((1,), 20.0)], R=10)
        with pytest.raises(InputError):
            single_buyer([Bundle((3,), 1.0)])
        with pytest.raises(ConfigError):
            single_buyer([Bundle((0,), 1.0)], q=1.0)
        with pytest.raises(InputError):
            Bundle((), 1.0)
        with pytest.raises(InputError):
            PMPCInstance([[1.0, 0.0]], 2.0, [])

    def test_derived(self):
        inst = single_buyer([Bundle((0, 1), 1.0), Bundle((1,), 4.0)], q=3.0)
        assert inst.R == 4.0 and inst.d == 3
        np.testing.assert_allclose(inst.p_conj, 1.5)


class TestPMPCProcessBuyer:
    def test_single_bundle(self):
        inst = single_buyer([Bundle((0,), 1.0)], m=1)
        frac = PMPCFractional.create(inst)
        alloc, it = pmpc_process_buyer(inst, frac, 0)
        assert it == 1
        assert 0 < alloc[0] <= 1
        np.testing.assert_allclose(frac.u[0] + frac.prices[0], 1.0, atol=1e-9)

    def test_zero_valuations(self):
        inst = PMPCInstance(np.ones((1, 2)), 2.0, [[Bundle((0,), 1.0)], [Bundle((0,), 0.0), Bundle((1,), 0.0)]])
        frac = PMPCFractional.create(inst)
        pmpc_process_buyer(inst, frac, 0)
        alloc, it = pmpc_process_buyer(inst, frac, 1)
        assert it == 0 and np.all(alloc == 0)

    def test_iteration_bound(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            buyers = [[Bundle(tuple(rng.choice(2, rng.integers(1, 3), replace=False)), rng.uniform(1, 10))
                       for _ in range(2)] for _ in range(3)]
            inst = PMPCInstance(rng.uniform(0.5, 2, (2, 2)), 2.0, buyers, R=10)
            frac = run_pmpc_fractional(inst)
            assert max(frac.iterations) <= 2 * 3 * 10

    def test_doubled_solution_feasible_and_monotone(self):
        rng = np.random.default_rng(4)
        buyers = [[Bundle(tuple(rng.choice(4, rng.integers(1, 4), replace=False)), rng.uniform(1, 10))
                   for _ in range(3)] for _ in range(10)]
        inst = PMPCInstance(rng.uniform(0.5, 2, (2, 4)), 2.5, buyers, R=10)
        frac = run_pmpc_fractional(inst)
        x = frac.state.x
        for i, bl in enumerate(buyers):
            assert pmpc_oracle_enumerate(2 * x[4 + i], 2 * x[:4], bl) is None
            final = frac.allocation(i)
            assert np.all(final >= frac.allocs[i] - 1e-12)
            assert final.sum() <= 1 + 1e-9
        assert np.all(np.diff(np.array(frac.snapshots), axis=0) >= 0)
        rep = frac.state.duality_report()
        assert 0 < rep.dual <= rep.primal and rep.ratio <= rep.bound


class TestProductionCost:
    def test_single_factory_closed_form(self):
        rates = np.array([[2.0, 0.5, 1.0]])
        mu = np.array([1.0, 0.3, 0.8])
        q = 3.0
        exact = (1 / q) * np.max(mu / rates[0]) ** q
        br = production_cost(rates, q, mu)
        np.testing.assert_allclose([br.lower, br.upper], [exact, exact], rtol=1e-7)

    def test_zero(self):
        br = production_cost(np.ones((2, 2)), 2.0, np.zeros(2))
        assert br.lower == br.upper == 0.0

    def test_brackets_exact_value_at_gradient(self, rng):
        inst = PMPCInstance(rng.uniform(0.5, 2, (3, 4)), 2.0, [])
        a = rng.uniform(0.1, 1, 4)
        lam = inst.rates @ a
        mu = inst.rates.T @ lam ** (inst.p_conj - 1)
        exact = production_cost_at_gradient(inst, a)
        br = production_cost(inst.rates, inst.q, mu)
        assert br.lower <= exact * (1 + 1e-9) and exact <= br.upper * (1 + 1e-9)
        np.testing.assert_allclose(br.upper, exact, rtol=1e-6)

    def test_homogeneity(self, rng):
        rates = rng.uniform(0.5, 2, (2, 3))
        mu = rng.uniform(0.5, 2, 3)
        base = production_cost(rates, 2.5, mu).mid
        np.testing.assert_allclose(production_cost(rates, 2.5, 0.5 * mu).mid, 0.5 ** 2.5 * base, rtol=1e-6)
