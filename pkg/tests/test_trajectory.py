import numpy as np
import pytest
import scipy.stats

from uqd import models
from uqd.errors import NumericalError, ValidationError
from uqd.linalg import Tolerance, matrix_exponential, normalize
from uqd.representation import Representation, effective_hamiltonian, jump_rates
from uqd.sjed import partition
from uqd.trajectory import (
    JumpEvent,
    coarse_grain,
    simulate,
    simulate_ensemble,
    state_at,
    trajectory_seed,
    _check_contractive,
)
from conftest import ket


def single_decay(gamma=1.0):
    jump = np.zeros((2, 2), dtype=complex)
    jump[0, 1] = np.sqrt(gamma)
    return Representation(hamiltonian=None, jumps=[jump], label="decay")


class TestSingleDecay:
    def test_exactly_one_jump_with_exponential_law(self):
        rep = single_decay(gamma=1.0)
        trajs = simulate_ensemble(rep, ket(2, 1), 12.0, 2000, seed=101, workers=1)
        times = [t.events[0].time for t in trajs if t.events]
        assert all(len(t.events) <= 1 for t in trajs)
        assert len(times) > 1990
        result = scipy.stats.kstest(times, "expon", args=(0.0, 1.0))
        assert result.pvalue > 0.01

    def test_no_jump_state_is_stationary(self):
        # constant rate: the conditional no-jump state stays |1> exactly
        rep = single_decay()
        traj = simulate(rep, ket(2, 1), 5.0, seed=3)
        t_before = traj.events[0].time * 0.5 if traj.events else 1.0
        psi = state_at(traj, rep, t_before)
        assert np.max(np.abs(psi - ket(2, 1))) < 1e-12

    def test_dark_initial_state_never_jumps(self):
        rep = single_decay()
        traj = simulate(rep, ket(2, 0), 5.0, seed=9)
        assert traj.events == ()


class TestDeterminism:
    def test_bitwise_reproducible(self, qutrit_a):
        one = simulate(qutrit_a, ket(3, 1), 2.0, seed=42)
        two = simulate(qutrit_a, ket(3, 1), 2.0, seed=42)
        assert one.events == two.events
        assert all(np.array_equal(a, b) for a, b in zip(one.post_jump_states, two.post_jump_states))

    def test_seeds_differ(self, qutrit_a):
        one = simulate(qutrit_a, ket(3, 1), 2.0, seed=1)
        two = simulate(qutrit_a, ket(3, 1), 2.0, seed=2)
        assert one.events != two.events

    def test_ensemble_independent_of_worker_count(self, qutrit_a):
        serial = simulate_ensemble(qutrit_a, ket(3, 1), 1.0, 8, seed=5, workers=1)
        pooled = simulate_ensemble(qutrit_a, ket(3, 1), 1.0, 8, seed=5, workers=2)
        for a, b in zip(serial, pooled):
            assert a.events == b.events

    def test_trajectory_seed_is_stable(self):
        assert trajectory_seed(7, 3) == trajectory_seed(7, 3)
        assert trajectory_seed(7, 3) != trajectory_seed(7, 4)


class TestSamplingLawReplay:
    """Re-derive every draw of the simulator from its documented stream order.

    The generator emits one uniform per no-jump segment (the survival target
    ``u``) and one uniform per fired jump (the channel selector), so replaying
    the Philox stream checks the crossing residual and the channel law
    exactly.
    """

    @pytest.mark.parametrize("seed", [1, 17, 202])
    def test_crossings_and_channels(self, qutrit_a, seed):
        traj = simulate(qutrit_a, ket(3, 1), 3.0, seed=seed)
        assert traj.events, "expected at least one jump in this horizon"
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        h_eff = effective_hamiltonian(qutrit_a)
        prev_time, prev_state = 0.0, traj.initial_state
        for event, post in zip(traj.events, traj.post_jump_states):
            u = rng.random()
            phi = matrix_exponential(-1j * h_eff * (event.time - prev_time)) @ prev_state
            assert abs(float(np.vdot(phi, phi).real) - u) <= 1e-9
            psi_star = normalize(phi)
            rates = jump_rates(qutrit_a, psi_star)
            rates[rates < 1e-14] = 0.0
            x = rng.random()
            expected_channel = int(np.searchsorted(np.cumsum(rates) / rates.sum(), x, side="right"))
            assert event.channel == expected_channel
            rebuilt_post = normalize(qutrit_a.jumps[event.channel] @ psi_star)
            assert np.max(np.abs(rebuilt_post - post)) < 1e-9
            prev_time, prev_state = event.time, post

    def test_norm_monotone_between_jumps(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 2.0, seed=8)
        h_eff = effective_hamiltonian(qutrit_a)
        segments = [(0.0, traj.initial_state)] + [
            (e.time, s) for e, s in zip(traj.events, traj.post_jump_states)
        ]
        ends = [e.time for e in traj.events] + [traj.t_final]
        for (start, state), end in zip(segments, ends):
            taus = np.linspace(0.0, end - start, 20)
            norms = [
                float(np.linalg.norm(matrix_exponential(-1j * h_eff * tau) @ state)) for tau in taus
            ]
            assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_events_strictly_ordered(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 4.0, seed=23)
        times = [e.time for e in traj.events]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert all(0 < t <= traj.t_final for t in times)


class TestFirstJumpChannelLaw:
    def test_frequencies_match_replayed_rates(self, qutrit_a):
        n = 2000
        observed = np.zeros(qutrit_a.n_jumps)
        expected = np.zeros(qutrit_a.n_jumps)
        h_eff = effective_hamiltonian(qutrit_a)
        for i in range(n):
            traj = simulate(qutrit_a, ket(3, 1), 2.0, seed=trajectory_seed(900, i))
            if not traj.events:
                continue
            event = traj.events[0]
            observed[event.channel] += 1
            phi = matrix_exponential(-1j * h_eff * event.time) @ traj.initial_state
            rates = jump_rates(qutrit_a, normalize(phi))
            expected += rates / rates.sum()
        mask = expected > 5
        stat = float(np.sum((observed[mask] - expected[mask]) ** 2 / expected[mask]))
        p = float(scipy.stats.chi2.sf(stat, df=int(mask.sum()) - 1))
        assert p > 0.001


class TestStateAt:
    def test_time_zero(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 1.0, seed=4)
        assert np.array_equal(state_at(traj, qutrit_a, 0.0), traj.initial_state)

    def test_event_time_gives_post_jump_state(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 2.0, seed=6)
        assert traj.events
        event, post = traj.events[0], traj.post_jump_states[0]
        assert np.array_equal(state_at(traj, qutrit_a, event.time), post)

    def test_full_replay_consistency(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 2.0, seed=12)
        h_eff = effective_hamiltonian(qutrit_a)
        for event, post in zip(traj.events, traj.post_jump_states):
            before = state_at(traj, qutrit_a, np.nextafter(event.time, 0.0))
            jumped = normalize(qutrit_a.jumps[event.channel] @ before)
            assert np.max(np.abs(jumped - post)) < 1e-8

    def test_out_of_range_rejected(self, qutrit_a):
        traj = simulate(qutrit_a, ket(3, 1), 1.0, seed=4)
        with pytest.raises(ValidationError):
            state_at(traj, qutrit_a, 1.5)


class TestCoarseGrain:
    def test_channels_map_to_blocks(self, qutrit_a):
        parts = partition(qutrit_a)
        traj = simulate(qutrit_a, ket(3, 1), 3.0, seed=33)
        coarse = coarse_grain(traj, parts)
        lookup = {0: 0, 1: 0, 2: 0, 3: 1, 4: 1}
        assert [e.channel for e in coarse.events] == [lookup[e.channel] for e in traj.events]
        assert any(e.channel == 1 for e in coarse.events)

    def test_counts_aggregate(self, qutrit_a):
        parts = partition(qutrit_a)
        traj = simulate(qutrit_a, ket(3, 1), 3.0, seed=34)
        fine = traj.counts(5)
        coarse = coarse_grain(traj, parts).counts(2)
        assert coarse[0] == fine[:3].sum() and coarse[1] == fine[3:].sum()

    def test_empty_event_list(self):
        rep = single_decay()
        parts = partition(rep)
        traj = simulate(rep, ket(2, 0), 1.0, seed=1)
        assert coarse_grain(traj, parts).events == ()

    def test_singleton_blocks_do_not_relabel(self):
        jumps = [np.outer(ket(2, 0), ket(2, 1)), 0.5 * np.eye(2, dtype=complex)]
        rep = Representation(hamiltonian=None, jumps=jumps)
        parts = partition(rep)
        assert parts.block_count == 2
        traj = simulate(rep, ket(2, 1), 4.0, seed=2)
        coarse = coarse_grain(traj, parts)
        assert [e.channel for e in coarse.events] == [e.channel for e in traj.events]

    def test_uncovered_channel_rejected(self, qutrit_a):
        parts = partition(single_decay())
        traj = simulate(qutrit_a, ket(3, 1), 1.0, seed=3)
        bad = traj
        if not bad.events:
            bad = simulate(qutrit_a, ket(3, 1), 3.0, seed=3)
        with pytest.raises(ValidationError):
            coarse_grain(bad, parts)


class TestGuards:
    def test_invalid_horizon(self, qutrit_a):
        with pytest.raises(ValidationError):
            simulate(qutrit_a, ket(3, 1), 0.0, seed=1)

    def test_wrong_state_length(self, qutrit_a):
        with pytest.raises(ValidationError):
            simulate(qutrit_a, ket(2, 1), 1.0, seed=1)

    def test_norm_growth_detected(self):
        grower = np.diag([0.5j, -0.5j])
        with pytest.raises(NumericalError, match="invalid effective Hamiltonian"):
            _check_contractive(grower, Tolerance())

    def test_mean_jump_count_matches_expected_intensity(self):
        # constant-rate model: jumps form a Poisson process of rate gamma
        jump = np.sqrt(0.8) * np.eye(2, dtype=complex)
        rep = Representation(hamiltonian=None, jumps=[jump])
        trajs = simulate_ensemble(rep, ket(2, 0), 5.0, 400, seed=6, workers=1)
        counts = [len(t.events) for t in trajs]
        assert np.mean(counts) == pytest.approx(0.8 * 5.0, abs=0.35)
