"""Piecewise-deterministic simulation of jump-unravelled quantum dynamics.

Between jumps the unnormalized conditional state follows
``phi(t) = exp(-i H_eff (t - t_last)) psi_last`` whose squared norm is the
survival probability.  Each segment draws ``u ~ U(0, 1)`` and fires a jump at
the time where the squared norm crosses ``u``; the channel is then selected
with probability proportional to the instantaneous rates and the state resets
to the normalized image under the chosen jump operator.

Implementation notes:

* Propagation uses a cached matrix exponential on a fixed grid step
  ``0.01 / |H_eff|``; the crossing is located inside one step by binary
  descent through pre-halved propagators, resolving the jump time to about
  ``1e-10`` of a step and the crossing residual ``| |phi|^2 - u |`` to 1e-9.
* Randomness comes from a counter-based Philox generator.  Per segment the
  stream is consumed in a fixed order (one uniform for the jump time, then
  one uniform per fired jump for the channel), so trajectories can be
  replayed exactly from their recorded seed.
* Ensembles give every trajectory an independent stream derived from
  ``(master seed, trajectory index)`` and are therefore deterministic for
  any worker count.

Trajectories are independent tasks; `simulate` is pure given its arguments.
"""

from __future__ import annotations

import os
from bisect import bisect_right
from dataclasses import dataclass
from multiprocessing import Pool
from typing import List, Optional, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .linalg import DEFAULT_TOL, Tolerance, dagger, matrix_exponential, normalize
from .representation import Representation, effective_hamiltonian, require_valid
from .sjed import SjedPartition

STEP_SCALE = 0.01
TIME_LEVELS = 34  # step * 2**-34 ~ 1e-10 relative time resolution
MAX_LEVELS = 60
NORM_RESIDUAL_TOL = 1e-9
RATE_FLOOR = 1e-14


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int


@dataclass(eq=False)
class LabelledTrajectory:
    """Conditional-state path summary plus the full measurement record."""

    initial_state: np.ndarray
    events: tuple[JumpEvent, ...]
    post_jump_states: tuple[np.ndarray, ...]
    t_final: float
    seed: int

    def counts(self, n_channels: int, up_to: Optional[float] = None) -> np.ndarray:
        """Per-channel jump counts, optionally restricted to ``time <= up_to``."""
        out = np.zeros(n_channels, dtype=int)
        for event in self.events:
            if up_to is not None and event.time > up_to:
                break
            out[event.channel] += 1
        return out


@dataclass(eq=False)
class PartiallyLabelledTrajectory:
    """Same path with events labelled by block index instead of channel."""

    initial_state: np.ndarray
    events: tuple[JumpEvent, ...]
    post_jump_states: tuple[np.ndarray, ...]
    t_final: float
    seed: int

    def counts(self, n_blocks: int, up_to: Optional[float] = None) -> np.ndarray:
        out = np.zeros(n_blocks, dtype=int)
        for event in self.events:
            if up_to is not None and event.time > up_to:
                break
            out[event.channel] += 1
        return out


class _NoJumpPropagator:
    """Lazily cached exponentials ``exp(-i H_eff h / 2**level)``."""

    def __init__(self, h_eff: np.ndarray):
        self.generator = -1j * np.asarray(h_eff, dtype=complex)
        self._cache: dict[tuple[float, int], np.ndarray] = {}

    def propagator(self, h: float, level: int) -> np.ndarray:
        key = (float(h), level)
        cached = self._cache.get(key)
        if cached is None:
            cached = matrix_exponential(self.generator * (h / 2.0**level))
            self._cache[key] = cached
        return cached


_PROPAGATORS: dict[bytes, _NoJumpPropagator] = {}


def _propagator_for(h_eff: np.ndarray) -> _NoJumpPropagator:
    key = h_eff.tobytes()
    prop = _PROPAGATORS.get(key)
    if prop is None:
        if len(_PROPAGATORS) > 16:
            _PROPAGATORS.clear()
        prop = _NoJumpPropagator(h_eff)
        _PROPAGATORS[key] = prop
    return prop


class _DriftFlow:
    """Fast ``exp(-i H_eff tau) psi`` for arbitrary ``tau``.

    Uses the eigendecomposition of the generator when it is well conditioned
    and verified against a reference exponential; otherwise falls back to a
    fresh matrix exponential per call.
    """

    def __init__(self, h_eff: np.ndarray):
        self.generator = -1j * np.asarray(h_eff, dtype=complex)
        self._diagonalized = False
        try:
            w, v = np.linalg.eig(self.generator)
            v_inv = np.linalg.inv(v)
        except np.linalg.LinAlgError:
            return
        if np.linalg.cond(v) > 1e8:
            return
        scale = max(1.0, float(np.linalg.norm(h_eff, 2)))
        probe = 1.0 / scale
        reference = matrix_exponential(self.generator * probe)
        approx = (v * np.exp(w * probe)) @ v_inv
        if np.linalg.norm(approx - reference) <= 1e-11 * max(1.0, np.linalg.norm(reference)):
            self._w, self._v, self._v_inv = w, v, v_inv
            self._diagonalized = True

    def apply(self, tau: float, psi: np.ndarray) -> np.ndarray:
        if self._diagonalized:
            return self._v @ (np.exp(self._w * tau) * (self._v_inv @ psi))
        return matrix_exponential(self.generator * tau) @ psi


_FLOWS: dict[bytes, _DriftFlow] = {}


def _flow_for(h_eff: np.ndarray) -> _DriftFlow:
    key = h_eff.tobytes()
    flow = _FLOWS.get(key)
    if flow is None:
        if len(_FLOWS) > 16:
            _FLOWS.clear()
        flow = _DriftFlow(h_eff)
        _FLOWS[key] = flow
    return flow


def _check_contractive(h_eff: np.ndarray, tol: Tolerance) -> None:
    antiherm = (h_eff - dagger(h_eff)) / 2j
    top = float(np.max(np.linalg.eigvalsh(antiherm)))
    if top > tol.cutoff(float(np.linalg.norm(h_eff, 2))):
        raise NumericalError(
            f"invalid effective Hamiltonian: norm-increasing mode with rate {top:.3e}"
        )


def _sq_norm(phi: np.ndarray) -> float:
    return float(np.real(np.vdot(phi, phi)))


def _locate_jump(
    prop: _NoJumpPropagator, phi_left: np.ndarray, h: float, u: float
) -> tuple[float, np.ndarray]:
    """Crossing of the squared norm with ``u`` inside ``(0, h]``.

    Maintains a bracket whose left end keeps squared norm above ``u``; after
    each halving the right end is ``offset + width`` with state
    ``U(width) phi``.  Descends until both the time resolution and the norm
    residual are met.
    """
    offset = 0.0
    phi = phi_left
    for level in range(1, MAX_LEVELS + 1):
        width = h / 2.0**level
        half = prop.propagator(h, level)
        candidate = half @ phi
        if _sq_norm(candidate) > u:
            phi = candidate
            offset += width
        if level >= TIME_LEVELS:
            right = half @ phi
            if abs(_sq_norm(right) - u) <= NORM_RESIDUAL_TOL:
                return offset + width, right
    raise NumericalError("jump-time bisection failed to reach the norm residual tolerance")


def simulate(
    rep: Representation,
    psi0: np.ndarray,
    t_max: float,
    seed: int,
    tol: Tolerance = DEFAULT_TOL,
) -> LabelledTrajectory:
    """One labelled trajectory, bitwise reproducible from ``seed``."""
    require_valid(rep, tol)
    if t_max <= 0:
        raise ValidationError("t_max must be positive")
    psi0 = normalize(psi0)
    if psi0.size != rep.dim:
        raise ValidationError(f"initial state has length {psi0.size}, expected {rep.dim}")
    h_eff = effective_hamiltonian(rep)
    _check_contractive(h_eff, tol)
    prop = _propagator_for(h_eff)
    h_norm = float(np.linalg.norm(h_eff, 2))
    step = min(t_max, STEP_SCALE / h_norm) if h_norm > 0 else t_max

    jump_stack = np.stack(rep.jumps)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))

    events: List[JumpEvent] = []
    posts: List[np.ndarray] = []
    t = 0.0
    phi = psi0.copy()
    u = rng.random()
    horizon = t_max - 1e-12 * max(1.0, t_max)
    full_step = prop.propagator(step, 0)
    while t < horizon:
        h = min(step, t_max - t)
        advanced = (full_step if h == step else prop.propagator(h, 0)) @ phi
        if _sq_norm(advanced) > u:
            phi = advanced
            t += h
            continue
        offset, phi_star = _locate_jump(prop, phi, h, u)
        t_star = t + offset
        psi_star = phi_star / np.linalg.norm(phi_star)
        amps = jump_stack @ psi_star
        rates = np.sum(np.abs(amps) ** 2, axis=1)
        rates[rates < RATE_FLOOR] = 0.0
        total = float(rates.sum())
        if total <= 0.0:
            raise NumericalError(
                f"no channel has positive rate at sampled jump time {t_star:.6g}"
            )
        x = rng.random()
        channel = int(np.searchsorted(np.cumsum(rates) / total, x, side="right"))
        channel = min(channel, len(rates) - 1)
        post = amps[channel] / np.linalg.norm(amps[channel])
        events.append(JumpEvent(time=t_star, channel=channel))
        posts.append(post)
        phi = post
        t = t_star
        u = rng.random()
    return LabelledTrajectory(
        initial_state=psi0,
        events=tuple(events),
        post_jump_states=tuple(posts),
        t_final=float(t_max),
        seed=int(seed),
    )


def state_at(traj, rep: Representation, t: float) -> np.ndarray:
    """Conditional state at time ``t`` by replaying the drift.

    At an event time this returns the recorded post-jump state (the right
    limit); between events it propagates from the latest event and
    renormalizes.
    """
    if t < 0 or t > traj.t_final:
        raise ValidationError(f"time {t} outside [0, {traj.t_final}]")
    times = [event.time for event in traj.events]
    idx = bisect_right(times, t) - 1
    if idx < 0:
        base_time, base_state = 0.0, traj.initial_state
    else:
        base_time, base_state = times[idx], traj.post_jump_states[idx]
    tau = t - base_time
    if tau == 0.0:
        return np.array(base_state, copy=True)
    flow = _flow_for(effective_hamiltonian(rep))
    return normalize(flow.apply(tau, base_state))


def coarse_grain(traj: LabelledTrajectory, part: SjedPartition) -> PartiallyLabelledTrajectory:
    """Relabel each event by the block containing its channel."""
    n_channels = sum(len(block.indices) for block in part.blocks)
    lookup = part.block_of_channel(n_channels)
    events = []
    for event in traj.events:
        if event.channel >= n_channels:
            raise ValidationError(f"channel {event.channel + 1} not covered by partition")
        events.append(JumpEvent(time=event.time, channel=int(lookup[event.channel])))
    return PartiallyLabelledTrajectory(
        initial_state=traj.initial_state,
        events=tuple(events),
        post_jump_states=traj.post_jump_states,
        t_final=traj.t_final,
        seed=traj.seed,
    )


def trajectory_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit stream key for trajectory ``index``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(seq.generate_state(1, np.uint64)[0])


def _ensemble_task(args) -> LabelledTrajectory:
    rep, psi0, t_max, master_seed, index, tol = args
    return simulate(rep, psi0, t_max, trajectory_seed(master_seed, index), tol)


def default_workers() -> int:
    env = os.environ.get("UQD_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError(f"UQD_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def simulate_ensemble(
    rep: Representation,
    psi0: np.ndarray,
    t_max: float,
    n_traj: int,
    seed: int,
    workers: Optional[int] = None,
    tol: Tolerance = DEFAULT_TOL,
) -> List[LabelledTrajectory]:
    """Independent trajectories with per-index derived seeds.

    The result is identical for any ``workers`` value; parallelism only
    changes wall time.
    """
    if n_traj < 1:
        raise ValidationError("n_traj must be at least 1")
    if workers is None:
        workers = default_workers()
    tasks = [(rep, psi0, t_max, seed, i, tol) for i in range(n_traj)]
    if workers <= 1 or n_traj == 1:
        return [_ensemble_task(task) for task in tasks]
    chunk = max(1, n_traj // (workers * 8))
    with Pool(processes=workers) as pool:
        return pool.map(_ensemble_task, tasks, chunksize=chunk)
