import numpy as np
import pytest

from aqctensor.ansatz import apply_ansatz, build_brickwork_ansatz, trotter_initialize
from aqctensor.cost import (
    CostConfig,
    cost_full_local_bruteforce,
    cost_global,
    cost_local_truncated,
    default_alpha_schedule,
    gradient,
    gradient_fd,
    probe_gradient_samples,
    variance_probe,
)
from aqctensor.hamiltonian import XYZHamiltonian, random_xyz
from aqctensor.mps import fidelity, from_product_state
from aqctensor.statevector import random_mps

from conftest import EXACT


def make_instance(n, l, seed, dt=0.2, bits=None):
    rng = np.random.default_rng(seed)
    ham = random_xyz(n, 0.375, 1.125, seed=seed)
    a = build_brickwork_ansatz(n, l, ham, dt)
    bits = bits or ("10" * n)[:n]
    theta = trotter_initialize(a, ham, dt, bits=bits) + rng.normal(0, 0.15, 3 * n + 4 * a.num_blocks)
    return ham, a, theta


class TestCostGlobal:
    def test_zero_at_own_output(self):
        ham, a, theta = make_instance(5, 1, seed=1)
        target = apply_ansatz(a, theta, from_product_state("0" * 5), EXACT)
        assert cost_global(a, theta, target, EXACT).total == pytest.approx(0.0, abs=1e-10)

    def test_one_for_orthogonal_target(self):
        ham, a, theta = make_instance(4, 1, seed=2)
        target = apply_ansatz(a, theta, from_product_state("1000"), EXACT)
        assert cost_global(a, theta, target, EXACT).total == pytest.approx(1.0, abs=1e-10)

    def test_equals_one_minus_fidelity(self):
        ham, a, theta = make_instance(6, 2, seed=3)
        target = random_mps(6, seed=30)
        produced = apply_ansatz(a, theta, from_product_state("0" * 6), EXACT)
        expected = 1.0 - fidelity(produced, target)
        assert cost_global(a, theta, target, EXACT).total == pytest.approx(expected, abs=1e-10)


class TestCostLocalTruncated:
    def test_alpha_zero_equals_global(self):
        ham, a, theta = make_instance(5, 1, seed=4)
        target = random_mps(5, seed=40)
        cfg = CostConfig(k=1, alphas=(0.0,), policy=EXACT)
        local = cost_local_truncated(a, theta, target, cfg)
        assert local.total == cost_global(a, theta, target, EXACT).total

    def test_zero_at_own_output(self):
        ham, a, theta = make_instance(4, 1, seed=5)
        target = apply_ansatz(a, theta, from_product_state("0000"), EXACT)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        value = cost_local_truncated(a, theta, target, cfg)
        assert value.total == pytest.approx(0.0, abs=1e-10)
        assert value.flip_terms[0] == pytest.approx(0.0, abs=1e-10)

    def test_full_order_matches_bruteforce(self):
        n = 6
        ham, a, theta = make_instance(n, 2, seed=6)
        target = random_mps(n, seed=60)
        alphas = tuple((n - m) / n for m in range(1, n + 1))
        cfg = CostConfig(k=n, alphas=alphas, policy=EXACT)
        truncated = cost_local_truncated(a, theta, target, cfg).total
        brute = cost_full_local_bruteforce(a, theta, target, EXACT)
        assert truncated == pytest.approx(brute, abs=1e-12)

    def test_order_above_n_rejected(self):
        ham, a, theta = make_instance(3, 1, seed=7)
        cfg = CostConfig(k=4, alphas=(1, 1, 1, 1), policy=EXACT)
        with pytest.raises(ValueError):
            cost_local_truncated(a, theta, random_mps(3, seed=70), cfg)

    def test_truncation_order_monotonicity(self):
        n = 5
        ham, a, theta = make_instance(n, 1, seed=8)
        target = random_mps(n, seed=80)
        totals = []
        for k in range(n + 1):
            cfg = CostConfig(k=k, alphas=(0.5,) * k, policy=EXACT)
            totals.append(cost_local_truncated(a, theta, target, cfg).total)
        for higher, lower in zip(totals[1:], totals[:-1]):
            assert higher <= lower + 1e-12

    def test_global_phase_invariance(self):
        ham, a, theta = make_instance(4, 1, seed=9)
        target = random_mps(4, seed=90)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        base = cost_local_truncated(a, theta, target, cfg).total

        rotated = target.copy()
        rotated.tensors[1] = rotated.tensors[1] * np.exp(1.1j)
        assert cost_local_truncated(a, theta, rotated, cfg).total == pytest.approx(base, abs=1e-12)

        # shifting any angle by 2pi flips that gate's sign: a pure global phase
        shifted = theta.copy()
        shifted[7] += 2 * np.pi
        assert cost_local_truncated(a, shifted, target, cfg).total == pytest.approx(base, abs=1e-12)


class TestBruteForce:
    def test_perfect_match(self):
        ham, a, theta = make_instance(4, 1, seed=10)
        target = apply_ansatz(a, theta, from_product_state("0000"), EXACT)
        assert cost_full_local_bruteforce(a, theta, target, EXACT) == pytest.approx(0.0, abs=1e-10)

    def test_single_qubit_reduces_to_global(self):
        ham = XYZHamiltonian.uniform(2, 0.75, 0.75, 0.75)
        a = build_brickwork_ansatz(2, 1, ham, 0.2)
        rng = np.random.default_rng(0)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        target = random_mps(2, seed=5)
        # weight (n-m)/n kills the full-flip term only at n=1; at n=2 compare to k=n
        cfg = CostConfig(k=2, alphas=(0.5, 0.0), policy=EXACT)
        assert cost_full_local_bruteforce(a, theta, target, EXACT) == pytest.approx(
            cost_local_truncated(a, theta, target, cfg).total, abs=1e-12
        )

    def test_size_guard(self):
        ham = XYZHamiltonian.uniform(15, 1, 1, 1)
        a = build_brickwork_ansatz(15, 1, ham, 0.1)
        with pytest.raises(ValueError):
            cost_full_local_bruteforce(a, np.zeros(a.num_params), from_product_state("0" * 15))


class TestGradient:
    def test_zero_at_interior_minimum(self):
        ham, a, _ = make_instance(4, 1, seed=11)
        theta = trotter_initialize(a, ham, 0.2, bits="1010")
        target = apply_ansatz(a, theta, from_product_state("0000"), EXACT)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        g = gradient(a, theta, target, cfg)
        assert np.max(np.abs(g)) <= 1e-6

    @pytest.mark.parametrize("seed", [20, 21, 22])
    def test_matches_finite_differences(self, seed):
        ham, a, theta = make_instance(4, 1, seed=seed)
        target = random_mps(4, seed=seed + 100)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        g = gradient(a, theta, target, cfg)
        g_fd = gradient_fd(a, theta, target, cfg)
        np.testing.assert_allclose(g, g_fd, atol=1e-6)

    def test_cost_and_gradient_consistent_with_separate_calls(self):
        from aqctensor.cost import cost_and_gradient

        ham, a, theta = make_instance(5, 1, seed=29)
        target = random_mps(5, seed=129)
        cfg = CostConfig(k=1, alphas=(0.8,), policy=EXACT)
        value, grad = cost_and_gradient(a, theta, target, cfg)
        assert value.total == cost_local_truncated(a, theta, target, cfg).total
        np.testing.assert_array_equal(grad, gradient(a, theta, target, cfg))

    def test_environment_and_reevaluation_agree(self):
        ham, a, theta = make_instance(5, 2, seed=23)
        target = random_mps(5, seed=123)
        cfg = CostConfig(k=1, alphas=(0.8,), policy=EXACT)
        g_env = gradient(a, theta, target, cfg, method="environments")
        g_rev = gradient(a, theta, target, cfg, method="reevaluation")
        np.testing.assert_allclose(g_env, g_rev, atol=1e-12)

    def test_global_cost_gradient(self):
        ham, a, theta = make_instance(4, 1, seed=24)
        target = random_mps(4, seed=124)
        cfg = CostConfig(k=0, alphas=(), policy=EXACT)
        np.testing.assert_allclose(
            gradient(a, theta, target, cfg), gradient_fd(a, theta, target, cfg), atol=1e-6
        )

    def test_k2_gradient(self):
        ham, a, theta = make_instance(4, 1, seed=25)
        target = random_mps(4, seed=125)
        cfg = CostConfig(k=2, alphas=(0.75, 0.5), policy=EXACT)
        np.testing.assert_allclose(
            gradient(a, theta, target, cfg), gradient_fd(a, theta, target, cfg), atol=1e-6
        )

    def test_length_covers_exactly_the_trainable_angles(self):
        ham, a, theta = make_instance(4, 1, seed=26)
        target = random_mps(4, seed=126)
        cfg = CostConfig(k=1, alphas=(0.5,), policy=EXACT)
        assert gradient(a, theta, target, cfg).size == a.num_params

    def test_unknown_method(self):
        ham, a, theta = make_instance(3, 1, seed=27)
        with pytest.raises(ValueError):
            gradient(a, theta, random_mps(3, seed=1), CostConfig(policy=EXACT, alphas=(1.0,)), method="magic")

    def test_fd_richardson_consistency(self):
        ham, a, theta = make_instance(4, 1, seed=28)
        target = random_mps(4, seed=128)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        exact = gradient(a, theta, target, cfg)
        err_h = np.linalg.norm(gradient_fd(a, theta, target, cfg, h=2e-3) - exact)
        err_h2 = np.linalg.norm(gradient_fd(a, theta, target, cfg, h=1e-3) - exact)
        assert err_h / err_h2 == pytest.approx(4.0, rel=0.4)


class TestVarianceProbe:
    def test_determinism(self):
        assert variance_probe(6, 2, 1000, seed=5) == variance_probe(6, 2, 1000, seed=5)

    def test_nested_samples_match_enumeration_oracle(self):
        # brute-force the marginalized cost C = 1 - sum_{S subset of last k} |amp|^2
        n, k, seed = 6, 3, 7
        grads = probe_gradient_samples(n, k, 4, seed=seed)
        rng = np.random.default_rng(seed)
        thetas = rng.uniform(0, 2 * np.pi, size=(4, n))

        def cost(theta):
            p = np.sin(theta / 2) ** 2
            q = 1 - p
            total = 0.0
            for s in range(2**k):
                bits = [int(b) for b in format(s, f"0{k}b")]
                amp = np.prod(q[: n - k])
                for j, b in enumerate(bits):
                    amp *= p[n - k + j] if b else q[n - k + j]
                total += amp
            return 1.0 - total

        for i in range(4):
            h = 1e-6
            tp, tm = thetas[i].copy(), thetas[i].copy()
            tp[0] += h
            tm[0] -= h
            fd = (cost(tp) - cost(tm)) / (2 * h)
            assert grads[i] == pytest.approx(fd, abs=1e-8)

    def test_baseline_is_one_eighth(self):
        v = variance_probe(8, 7, 200000, seed=9)
        assert v == pytest.approx(1 / 8, rel=0.05)

    def test_lhs_weights_pinned_value(self):
        # with the (n-m)/n weights the k = n-1 gradient is -(sin theta)/(2n):
        # variance exactly 1/(8 n^2)
        v = variance_probe(8, 7, 200000, seed=10, weights="lhs")
        assert v == pytest.approx(1 / (8 * 64), rel=0.05)

    def test_component_must_stay_unmarginalized(self):
        with pytest.raises(ValueError):
            probe_gradient_samples(6, 6, 10, seed=1)

    def test_default_schedule_shape(self):
        schedule = default_alpha_schedule(8)
        assert schedule == ((0.5, (7 / 8,)), (0.5, ()))
