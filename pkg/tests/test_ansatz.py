import numpy as np
import pytest

from aqctensor.ansatz import (
    ansatz_ops,
    adjoint_ops,
    apply_ansatz,
    apply_ansatz_adjoint,
    block_unitary,
    build_brickwork_ansatz,
    cnot_depth,
    export_circuit_records,
    solve_triplet_angles,
    triplet_unitary,
    trotter_initialize,
)
from aqctensor.gates import CX_FORWARD, CX_REVERSED, op_from_record, parse_gate_line
from aqctensor.hamiltonian import (
    XYZHamiltonian,
    build_trotter_schedule,
    random_xyz,
    tebd_evolve,
    two_site_unitary,
)
from aqctensor.mps import amplitude, fidelity, from_product_state
from aqctensor.statevector import (
    basis_state,
    mps_to_statevector,
    sv_apply_schedule,
    sv_fidelity,
)

from conftest import EXACT


def dense_ops_matrix(ops, n):
    dim = 2**n
    out = np.eye(dim, dtype=complex)
    for idx in range(dim):
        col = np.zeros(dim, dtype=complex)
        col[idx] = 1.0
        out[:, idx] = sv_apply_schedule(col, ops)
    return out


def phase_distance(u, v):
    tr = np.trace(u.conj().T @ v)
    return 1.0 - abs(tr) / u.shape[0]


class TestStructure:
    def test_counts_n4_l2(self):
        ham = XYZHamiltonian.uniform(4, 1, 1, 1)
        a = build_brickwork_ansatz(4, 2, ham, 0.1)
        assert a.num_params == 108
        assert a.num_blocks == 24

    def test_n2_l1(self):
        ham = XYZHamiltonian.uniform(2, 1, 1, 1)
        a = build_brickwork_ansatz(2, 1, ham, 0.1)
        assert len(a.slot_multiset()) == 2
        assert a.num_blocks == 6
        assert a.num_params == 30

    def test_too_few_qubits(self):
        with pytest.raises(ValueError):
            build_brickwork_ansatz(1, 1, XYZHamiltonian.uniform(2, 1, 1, 1), 0.1)

    @pytest.mark.parametrize("n,l", [(4, 1), (5, 2), (6, 3), (7, 2)])
    def test_slots_mirror_schedule(self, n, l):
        ham = XYZHamiltonian.uniform(n, 1, 1, 1)
        a = build_brickwork_ansatz(n, l, ham, 0.2)
        schedule = build_trotter_schedule(ham, 0.2, l)
        expected = [(c.tag, g.sites[0]) for c in schedule.two_site_columns() for g in c.gates]
        assert a.slot_multiset() == expected

    def test_parameter_count_formula(self):
        for n, l in [(3, 1), (6, 2), (9, 3)]:
            ham = XYZHamiltonian.uniform(n, 1, 1, 1)
            a = build_brickwork_ansatz(n, l, ham, 0.1)
            assert a.num_params == 3 * n + 4 * a.num_blocks

    def test_triplet_reversal_convention(self):
        ham = XYZHamiltonian.uniform(4, 1, 1, 1)
        a = build_brickwork_ansatz(4, 2, ham, 0.1)
        for t in range(0, a.num_blocks, 3):
            outer1, middle, outer2 = a.blocks[t: t + 3]
            assert outer1.reversed and outer2.reversed and not middle.reversed
            assert outer1.pair == middle.pair == outer2.pair


class TestBlockUnitary:
    def test_zero_angles_is_bare_cnot(self):
        np.testing.assert_allclose(block_unitary(np.zeros(4)), CX_FORWARD, atol=1e-14)
        np.testing.assert_allclose(block_unitary(np.zeros(4), reverse=True), CX_REVERSED, atol=1e-14)

    def test_unitarity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            u = block_unitary(rng.uniform(-np.pi, np.pi, 4), reverse=bool(rng.integers(2)))
            np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


class TestTripletSolve:
    def test_zero_couplings_give_identity_up_to_phase(self):
        angles = solve_triplet_angles(0.0, 0.0, 0.0, 0.1)
        assert phase_distance(triplet_unitary(angles), np.eye(4)) < 1e-12

    def test_xxz_values(self):
        angles = solve_triplet_angles(0.75, 0.75, 1.5, 0.1)
        target = two_site_unitary(0.75, 0.75, 1.5, 0.1)
        assert phase_distance(triplet_unitary(angles), target) < 1e-10

    def test_random_couplings(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, d = rng.uniform(-2, 2, 3)
            dt = rng.uniform(0.01, 0.6)
            angles = solve_triplet_angles(a, b, d, dt)
            assert phase_distance(triplet_unitary(angles), two_site_unitary(a, b, d, dt)) < 1e-10


class TestTrotterInitialize:
    def test_cost_against_trotter_target_is_zero(self):
        ham = random_xyz(6, 0.375, 1.125, seed=4)
        dt, l = 0.25, 2
        target = tebd_evolve(from_product_state("101010"), ham, dt, l, EXACT)
        a = build_brickwork_ansatz(6, l, ham, dt)
        theta0 = trotter_initialize(a, ham, dt, bits="101010")
        from aqctensor.cost import cost_global

        assert cost_global(a, theta0, target, EXACT).total == pytest.approx(0.0, abs=1e-8)

    def test_dense_equality_with_fields(self):
        rng = np.random.default_rng(5)
        base = random_xyz(6, 0.375, 1.125, seed=6)
        ham = XYZHamiltonian(base.alpha, base.beta, base.delta, tuple(rng.uniform(-0.5, 0.5, 6)))
        dt, l = 0.2, 2
        a = build_brickwork_ansatz(6, l, ham, dt)
        theta0 = trotter_initialize(a, ham, dt, bits="110010")
        circuit_state = sv_apply_schedule(basis_state("0" * 6), ansatz_ops(a, theta0))
        trotter_state = sv_apply_schedule(basis_state("110010"), build_trotter_schedule(ham, dt, l))
        assert sv_fidelity(circuit_state, trotter_state) == pytest.approx(1.0, abs=1e-10)

    def test_structure_mismatch_rejected(self):
        ham = XYZHamiltonian.uniform(4, 1, 1, 1)
        a = build_brickwork_ansatz(4, 1, ham, 0.1)
        with pytest.raises(ValueError):
            trotter_initialize(a, ham, 0.2)
        other = XYZHamiltonian.uniform(4, 1, 1, 1, h=0.7)
        with pytest.raises(ValueError):
            trotter_initialize(a, other, 0.1)


class TestApply:
    def test_matches_statevector(self):
        rng = np.random.default_rng(7)
        ham = random_xyz(6, 0.375, 1.125, seed=8)
        a = build_brickwork_ansatz(6, 2, ham, 0.15)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        psi = apply_ansatz(a, theta, from_product_state("0" * 6), EXACT)
        dense = sv_apply_schedule(basis_state("0" * 6), ansatz_ops(a, theta))
        assert sv_fidelity(mps_to_statevector(psi), dense) == pytest.approx(1.0, abs=1e-10)

    def test_zero_angles_fix_the_vacuum(self):
        ham = XYZHamiltonian.uniform(5, 1, 1, 1)  # h = 0, CNOTs fix |0...0>
        a = build_brickwork_ansatz(5, 1, ham, 0.1)
        psi = apply_ansatz(a, np.zeros(a.num_params), from_product_state("0" * 5), EXACT)
        assert amplitude(psi, "0" * 5) == pytest.approx(1.0, abs=1e-12)

    def test_adjoint_inverts_forward(self):
        rng = np.random.default_rng(9)
        ham = random_xyz(5, 0.375, 1.125, seed=9)
        a = build_brickwork_ansatz(5, 1, ham, 0.2)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        start = from_product_state("01011")
        round_trip = apply_ansatz_adjoint(a, theta, apply_ansatz(a, theta, start, EXACT), EXACT)
        assert fidelity(round_trip, start) == pytest.approx(1.0, abs=1e-10)

    def test_adjoint_of_own_output_hits_vacuum(self):
        rng = np.random.default_rng(10)
        ham = random_xyz(4, 0.375, 1.125, seed=10)
        a = build_brickwork_ansatz(4, 1, ham, 0.3)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        target = apply_ansatz(a, theta, from_product_state("0000"), EXACT)
        phi = apply_ansatz_adjoint(a, theta, target, EXACT)
        assert abs(amplitude(phi, "0000")) == pytest.approx(1.0, abs=1e-10)

    def test_adjoint_dense_matrix_is_conjugate_transpose(self):
        rng = np.random.default_rng(11)
        ham = random_xyz(4, 0.375, 1.125, seed=11)
        a = build_brickwork_ansatz(4, 1, ham, 0.2)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        ops = ansatz_ops(a, theta)
        forward = dense_ops_matrix(ops, 4)
        backward = dense_ops_matrix(adjoint_ops(ops), 4)
        np.testing.assert_allclose(backward, forward.conj().T, atol=1e-10)

    def test_wrong_parameter_count(self):
        ham = XYZHamiltonian.uniform(4, 1, 1, 1)
        a = build_brickwork_ansatz(4, 1, ham, 0.1)
        with pytest.raises(ValueError):
            apply_ansatz(a, np.zeros(a.num_params - 1), from_product_state("0000"), EXACT)


class TestDepth:
    @pytest.mark.parametrize("n", [3, 4, 6, 9])
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_depth_formula(self, n, l):
        ham = XYZHamiltonian.uniform(n, 1, 1, 1)
        a = build_brickwork_ansatz(n, l, ham, 0.1)
        assert cnot_depth(a) == 3 * (2 * l + 1)

    def test_two_qubit_depth(self):
        ham = XYZHamiltonian.uniform(2, 1, 1, 1)
        a = build_brickwork_ansatz(2, 1, ham, 0.1)
        assert cnot_depth(a) == 6

    @pytest.mark.parametrize("n,l", [(4, 1), (5, 2), (8, 3), (9, 4)])
    def test_equals_trotter_depth(self, n, l):
        ham = XYZHamiltonian.uniform(n, 1, 1, 1)
        a = build_brickwork_ansatz(n, l, ham, 0.1)
        assert cnot_depth(a) == build_trotter_schedule(ham, 0.1, l).cnot_depth()


class TestTrainableFields:
    def make(self):
        rng = np.random.default_rng(40)
        base = random_xyz(4, 0.375, 1.125, seed=41)
        ham = XYZHamiltonian(base.alpha, base.beta, base.delta, tuple(rng.uniform(-0.5, 0.5, 4)))
        a = build_brickwork_ansatz(4, 1, ham, 0.2, trainable_fields=True)
        return ham, a

    def test_parameter_count_grows_by_field_rotations(self):
        ham, a = self.make()
        fixed = build_brickwork_ansatz(4, 1, ham, 0.2)
        assert a.num_params == fixed.num_params + 2 * 1 * 4  # 2l field columns, n each

    def test_initialization_still_exact(self):
        ham, a = self.make()
        theta0 = trotter_initialize(a, ham, 0.2, bits="1010")
        circuit = sv_apply_schedule(basis_state("0000"), ansatz_ops(a, theta0))
        trotter = sv_apply_schedule(basis_state("1010"), build_trotter_schedule(ham, 0.2, 1))
        assert sv_fidelity(circuit, trotter) == pytest.approx(1.0, abs=1e-10)

    def test_field_gradient_components_exist_and_match_fd(self):
        from aqctensor.cost import CostConfig, gradient, gradient_fd
        from aqctensor.statevector import random_mps

        ham, a = self.make()
        rng = np.random.default_rng(42)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)
        target = random_mps(4, seed=43)
        cfg = CostConfig(k=1, alphas=(0.75,), policy=EXACT)
        g = gradient(a, theta, target, cfg)
        assert g.size == a.num_params
        np.testing.assert_allclose(g, gradient_fd(a, theta, target, cfg), atol=1e-6)
        # the promoted components actually carry signal
        assert np.max(np.abs(g[-2 * 4:])) > 1e-8


class TestExport:
    def test_round_trip_reproduces_circuit(self, tmp_path):
        rng = np.random.default_rng(12)
        base = random_xyz(4, 0.375, 1.125, seed=13)
        ham = XYZHamiltonian(base.alpha, base.beta, base.delta, (0.1, -0.2, 0.3, 0.0))
        a = build_brickwork_ansatz(4, 1, ham, 0.2)
        theta = rng.uniform(-np.pi, np.pi, a.num_params)

        from aqctensor.gates import read_gate_list, write_gate_list

        path = tmp_path / "circuit.txt"
        write_gate_list(export_circuit_records(a, theta), str(path))
        ops = [op_from_record(*rec) for rec in read_gate_list(str(path))]

        direct = sv_apply_schedule(basis_state("0000"), ansatz_ops(a, theta))
        parsed = sv_apply_schedule(basis_state("0000"), ops)
        np.testing.assert_allclose(parsed, direct, atol=1e-12)

    def test_parse_gate_line(self):
        name, qubits, angles = parse_gate_line("ry q3 0.25")
        assert (name, qubits, angles) == ("ry", [3], [0.25])
        name, qubits, angles = parse_gate_line("cx q2 q1")
        assert (name, qubits, angles) == ("cx", [2, 1], [])
