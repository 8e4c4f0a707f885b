import numpy as np
import pytest

from uqd import models
from uqd.errors import NumericalError, ValidationError
from uqd.linalg import (
    density,
    frobenius,
    proportionality_coefficient,
    random_pure_state,
    superoperator_matrix,
    trace_distance,
    vec,
)
from uqd.representation import Representation, jump_destination, jump_rates, liouvillian_matrix
from uqd.sjed import (
    NonResetBlock,
    ResetBlock,
    are_jed,
    block_action_matrix,
    composite_action,
    find_witness_state,
    fix_phase,
    minimal_block_representation,
    minimize_representation,
    partition,
)
from conftest import ket
from helpers import random_minimal_representation


def reset_gamma_closed_form(theta, gamma):
    out = np.zeros((3, 3), dtype=complex)
    out[1, 1] = gamma * (1 + np.cos(theta) ** 2)
    out[2, 2] = gamma * (1 + np.sin(theta) ** 2)
    out[1, 2] = out[2, 1] = gamma * np.cos(theta) * np.sin(theta)
    return out


class TestAreJed:
    def test_decay_channels_share_destination(self, qutrit_a):
        assert are_jed(qutrit_a.jumps[0], qutrit_a.jumps[2])

    def test_dephasing_pair_shares_destination(self, qutrit_a):
        assert are_jed(qutrit_a.jumps[3], qutrit_a.jumps[4])

    def test_decay_vs_dephasing_differ(self, qutrit_a):
        # rank 1 against rank 2, not proportional: destinations split at |1>
        assert not are_jed(qutrit_a.jumps[0], qutrit_a.jumps[3])
        d1 = jump_destination(qutrit_a, 0, ket(3, 1))
        d4 = jump_destination(qutrit_a, 3, (ket(3, 0) + ket(3, 2)) / np.sqrt(2))
        assert trace_distance(d1, d4) > 0.5

    def test_zero_operator_rejected(self):
        with pytest.raises(ValidationError):
            are_jed(np.zeros((2, 2)), np.eye(2))

    def test_proportional_rank_one_pair(self):
        a = np.outer(ket(3, 0), ket(3, 1))
        assert are_jed(a, 2j * a)


class TestPartition:
    def test_five_jump_model(self, qutrit_a):
        parts = partition(qutrit_a)
        assert [blk.indices for blk in parts.blocks] == [(0, 1, 2), (3, 4)]
        reset, non_reset = parts.blocks
        assert isinstance(reset, ResetBlock) and isinstance(non_reset, NonResetBlock)
        assert np.allclose(reset.chi, ket(3, 0), atol=1e-12)
        assert np.allclose(reset.gamma_op, reset_gamma_closed_form(np.pi / 6, 1.0), atol=1e-12)
        assert non_reset.weight == pytest.approx(2.0)
        lam = proportionality_coefficient(
            non_reset.canonical_op, models.shared_dephasing_operator()
        )
        assert lam is not None and abs(lam) == pytest.approx(1.0)

    def test_minimal_model(self, qutrit_a_min):
        parts = partition(qutrit_a_min)
        assert [blk.indices for blk in parts.blocks] == [(0, 1), (2,)]
        assert [blk.kind for blk in parts.blocks] == ["reset", "non-reset"]

    def test_two_reset_targets_model(self):
        theta = 0.7
        rep = models.qutrit_b(theta=theta, gammas=(1.0, 0.5, 2.0))
        parts = partition(rep)
        assert [blk.indices for blk in parts.blocks] == [(0, 1, 2), (3, 4)]
        assert all(blk.kind == "reset" for blk in parts.blocks)
        chi_1 = np.cos(theta) * ket(3, 0) + np.sin(theta) * ket(3, 2)
        assert abs(abs(np.vdot(parts.blocks[0].chi, chi_1)) - 1.0) < 1e-12
        gamma = np.diag([0.0, 1.5, 2.0]).astype(complex)
        assert np.allclose(parts.blocks[0].gamma_op, gamma, atol=1e-12)
        assert np.allclose(parts.blocks[1].gamma_op, gamma, atol=1e-12)

    def test_refinement_invariant(self, rng):
        reps = [
            models.qutrit_a(),
            models.qutrit_a_minimal(),
            models.qutrit_b(theta=0.3),
        ] + [random_minimal_representation(rng, dim=3, n_reset=2, n_nonreset=1) for _ in range(5)]
        for rep in reps:
            parts = partition(rep)
            lookup = parts.block_of_channel(rep.n_jumps)
            for i in range(rep.n_jumps):
                for j in range(i + 1, rep.n_jumps):
                    same_block = lookup[i] == lookup[j]
                    assert are_jed(rep.jumps[i], rep.jumps[j]) == same_block

    def test_distinct_blocks_have_distinct_actions(self, qutrit_a):
        parts = partition(qutrit_a)
        actions = [composite_action(qutrit_a, blk) for blk in parts.blocks]
        assert frobenius(actions[0] - actions[1]) > 1e-3


class TestCompositeAction:
    def test_reset_action_closed_form(self, qutrit_a, rng):
        parts = partition(qutrit_a)
        action = composite_action(qutrit_a, parts.blocks[0])
        gamma = reset_gamma_closed_form(np.pi / 6, 1.0)
        target = density(ket(3, 0))
        for _ in range(1000):
            psi = density(random_pure_state(3, rng))
            expected = np.trace(gamma @ psi) * target
            from uqd.linalg import unvec

            assert np.max(np.abs(unvec(action @ vec(psi)) - expected)) < 1e-12

    def test_dephasing_action_is_weighted_single_operator(self, qutrit_a):
        parts = partition(qutrit_a)
        action = composite_action(qutrit_a, parts.blocks[1])
        shared = models.shared_dephasing_operator()
        expected = 4.0 * np.kron(shared.conj(), shared)
        assert np.allclose(action, expected, atol=1e-12)

    def test_singleton_block(self, rng):
        rep = random_minimal_representation(rng, dim=3, n_reset=0, n_nonreset=1)
        parts = partition(rep)
        jump = rep.jumps[0]
        assert np.allclose(
            composite_action(rep, parts.blocks[0]), np.kron(jump.conj(), jump), atol=1e-12
        )

    def test_block_action_matrix_agrees(self, qutrit_a, rng):
        for rep in (qutrit_a, models.qutrit_b(theta=1.1)):
            parts = partition(rep)
            for blk in parts.blocks:
                direct = composite_action(rep, blk)
                assert np.max(np.abs(block_action_matrix(blk) - direct)) < 1e-12

    def test_actions_sum_to_full_channel(self, qutrit_a):
        parts = partition(qutrit_a)
        total = sum(composite_action(qutrit_a, blk) for blk in parts.blocks)
        assert np.max(np.abs(total - superoperator_matrix(qutrit_a.jumps))) < 1e-12


class TestMinimalBlockRepresentation:
    def test_reset_block_diagonalizes_to_two_operators(self, qutrit_a, qutrit_a_min):
        parts = partition(qutrit_a)
        ops = minimal_block_representation(parts.blocks[0])
        assert len(ops) == 2
        # same composite action as the recombined pair, operators equal up to phase
        assert np.max(
            np.abs(superoperator_matrix(ops) - superoperator_matrix(qutrit_a_min.jumps[:2]))
        ) < 1e-10
        # descending weight: first operator carries rate 2, second rate 1
        assert frobenius(ops[0]) == pytest.approx(np.sqrt(2.0), abs=1e-12)
        assert frobenius(ops[1]) == pytest.approx(1.0, abs=1e-12)
        for emitted, reference in zip(ops, (qutrit_a_min.jumps[1], qutrit_a_min.jumps[0])):
            lam = proportionality_coefficient(emitted, reference)
            assert lam is not None and abs(abs(lam) - 1.0) < 1e-10

    def test_dephasing_block_collapses_to_one_operator(self, qutrit_a, qutrit_a_min):
        parts = partition(qutrit_a)
        (op,) = minimal_block_representation(parts.blocks[1])
        lam = proportionality_coefficient(op, qutrit_a_min.jumps[2])
        assert lam is not None and abs(abs(lam) - 1.0) < 1e-10

    def test_idempotent_on_singleton(self):
        rep = Representation(hamiltonian=None, jumps=[np.outer(ket(2, 0), ket(2, 1))])
        parts = partition(rep)
        (op,) = minimal_block_representation(parts.blocks[0])
        lam = proportionality_coefficient(op, rep.jumps[0])
        assert lam is not None and abs(abs(lam) - 1.0) < 1e-12


class TestMinimizeRepresentation:
    def test_five_to_three(self, qutrit_a):
        minimal = minimize_representation(qutrit_a)
        assert minimal.n_jumps == 3
        assert np.max(
            np.abs(liouvillian_matrix(minimal) - liouvillian_matrix(qutrit_a))
        ) < 1e-10

    def test_already_minimal_keeps_count(self, qutrit_a_min):
        assert minimize_representation(qutrit_a_min).n_jumps == qutrit_a_min.n_jumps

    def test_two_reset_blocks_reduce_to_four(self):
        rep = models.qutrit_b(theta=0.4, gammas=(1.0, 0.5, 2.0))
        assert minimize_representation(rep).n_jumps == 4

    def test_composite_actions_preserved(self, rng):
        reps = [
            models.qutrit_a(),
            models.qutrit_a_minimal(),
            models.qutrit_b(theta=0.9),
        ]
        for _ in range(100):
            dim = int(rng.integers(2, 5))
            n_reset = int(rng.integers(0, 3))
            n_nonreset = int(rng.integers(0 if n_reset else 1, 2))
            reps.append(random_minimal_representation(rng, dim, n_reset, n_nonreset))
        for rep in reps:
            parts = partition(rep)
            for blk in parts.blocks:
                ops = minimal_block_representation(blk)
                delta = superoperator_matrix(ops) - composite_action(rep, blk)
                assert np.max(np.abs(delta)) < 1e-10

    def test_idempotent_up_to_phases(self, qutrit_a):
        once = minimize_representation(qutrit_a)
        twice = minimize_representation(once)
        assert twice.n_jumps == once.n_jumps
        for a, b in zip(twice.jumps, once.jumps):
            lam = proportionality_coefficient(a, b)
            assert lam is not None and abs(abs(lam) - 1.0) < 1e-10


class TestPhaseFixing:
    def test_first_significant_entry_real_positive(self):
        mat = np.array([[0.0, -2.0j], [1.0, 0.0]])
        fixed = fix_phase(mat)
        assert fixed[0, 1].real > 0 and abs(fixed[0, 1].imag) < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(ValidationError):
            fix_phase(np.zeros((2, 2)))


class TestWitnessState:
    def test_generic_state_qualifies(self, qutrit_a):
        psi = find_witness_state(qutrit_a, qutrit_a, seed=11)
        assert np.all(jump_rates(qutrit_a, psi) > 1e-6)

    def test_single_block_model_is_trivial(self):
        jumps = [np.outer(ket(3, 0), ket(3, 1)), np.outer(ket(3, 0), ket(3, 2))]
        rep = Representation(hamiltonian=None, jumps=jumps)
        psi = find_witness_state(rep, rep, seed=3)
        assert np.all(jump_rates(rep, psi) > 1e-6)

    def test_degenerate_proposal_is_repaired(self, qutrit_a):
        # |0> has zero rate on the first decay channel and must be perturbed
        psi = find_witness_state(qutrit_a, qutrit_a, seed=5, initial=ket(3, 0))
        assert np.all(jump_rates(qutrit_a, psi) > 1e-6)
        assert np.linalg.norm(psi - ket(3, 0)) > 1e-4

    def test_cross_block_destinations_separated(self, qutrit_a):
        psi = find_witness_state(qutrit_a, qutrit_a, seed=7)
        parts = partition(qutrit_a)
        lookup = parts.block_of_channel(qutrit_a.n_jumps)
        for i in range(qutrit_a.n_jumps):
            for j in range(i + 1, qutrit_a.n_jumps):
                if lookup[i] != lookup[j]:
                    d_i = jump_destination(qutrit_a, i, psi)
                    d_j = jump_destination(qutrit_a, j, psi)
                    assert trace_distance(d_i, d_j) > 1e-6

    def test_exhaustion_raises(self):
        # two proportional rank-2 jumps forms one block, but an impossible
        # threshold can never be met
        rep = Representation(
            hamiltonian=None,
            jumps=[models.shared_dephasing_operator(), 2 * models.shared_dephasing_operator()],
        )
        with pytest.raises(NumericalError, match="no witness"):
            find_witness_state(rep, rep, seed=1, threshold=10.0, max_attempts=50)
