"""Block-coordinate ascent of the energy efficiency over its variable blocks.

Every mode starts from the same initial state, so runs that share a channel
realization and generator seed are paired: random phases, MMSE beamformers at
full power, and full power itself (pulled back into the QoS set when full
power violates it). Each mode then updates only its active blocks, in the
order powers, beamformers, phases.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .active_beamforming import mmse_receiver
from .convex_kernel import SmoothConcaveProblem, find_interior_point, solve_concave_affine
from .core_model import ChannelSet, SolutionState, SystemConfig, evaluate_state, phases_from_angles
from .exceptions import Infeasible
from .passive_beamforming import PhaseSettings, optimize_phases
from .power_control import (
    PowerSettings,
    build_gain_table,
    dinkelbach_solve,
    is_power_feasible,
    qos_constraints,
)


class OptimizerMode(enum.Enum):
    PROPOSED = "proposed"
    FIX_IRS = "fix_irs"
    FIX_BS = "fix_bs"
    FIX_PA = "fix_pa"
    FIX_ALL = "fix_all"

    @property
    def optimizes_power(self) -> bool:
        return self in (OptimizerMode.PROPOSED, OptimizerMode.FIX_IRS, OptimizerMode.FIX_BS)

    @property
    def optimizes_beams(self) -> bool:
        return self in (OptimizerMode.PROPOSED, OptimizerMode.FIX_IRS, OptimizerMode.FIX_PA)

    @property
    def optimizes_phases(self) -> bool:
        return self in (OptimizerMode.PROPOSED, OptimizerMode.FIX_BS, OptimizerMode.FIX_PA)


@dataclass
class BcdSettings:
    max_outer_iters: int = 20
    ee_rel_tol: float = 1e-4
    randomizations: int = 50
    power: PowerSettings = field(default_factory=PowerSettings)
    phase: PhaseSettings = field(default_factory=PhaseSettings)


def max_feasible_power(gains, config: SystemConfig) -> np.ndarray:
    """Full power if it meets QoS, otherwise the QoS point of largest total power."""
    pmax = config.max_power
    if is_power_feasible(pmax, gains, config):
        return pmax.copy()
    K = config.num_users
    A, b = qos_constraints(gains, config)
    interior = find_interior_point(A, b, np.zeros(K), pmax)
    if interior is None:
        raise Infeasible("QoS constraints cannot be met within the power caps")
    res = solve_concave_affine(SmoothConcaveProblem(
        objective=lambda x: (float(np.sum(x)), np.ones(K), np.zeros((K, K))),
        x0=interior, A=A, b=b, lb=np.zeros(K), ub=pmax))
    return res.x


def initialize(config: SystemConfig, channels: ChannelSet, rng: np.random.Generator) -> SolutionState:
    channels.check(config)
    w = phases_from_angles(rng.uniform(0.0, 2 * np.pi, config.num_irs_elements))
    V = mmse_receiver(config, channels, w, config.max_power)
    gains = build_gain_table(config, channels, w, V)
    try:
        P = max_feasible_power(gains, config)
    except Infeasible:
        P = config.max_power.copy()
    state = evaluate_state(config, channels, w, P, V)
    state.trace = [state.ee]
    return state


def optimize(config: SystemConfig, channels: ChannelSet, mode: OptimizerMode | str,
             settings: BcdSettings | None = None, rng: np.random.Generator | None = None,
             state: SolutionState | None = None) -> SolutionState:
    """Run the alternating updates of ``mode`` until the EE settles.

    Either ``rng`` (used for the initial phases and for randomization) or a
    starting ``state`` must be given; with both, ``rng`` only drives the
    randomization. An infeasible start is returned as is with
    ``feasible=False``.
    """
    mode = OptimizerMode(mode)
    settings = settings or BcdSettings()
    if rng is None:
        if state is None:
            raise ValueError("need an rng or an initial state")
        rng = np.random.default_rng(0)
    if state is None:
        state = initialize(config, channels, rng)
    if not state.feasible or mode is OptimizerMode.FIX_ALL:
        return state

    P, V, w = state.power.copy(), state.beams.copy(), state.phases.copy()
    ee = state.ee
    trace = list(state.trace) or [ee]

    for _ in range(settings.max_outer_iters):
        ee_start = ee
        if mode.optimizes_power:
            gains = build_gain_table(config, channels, w, V)
            try:
                P_new = dinkelbach_solve(gains, config, P, settings.power).power
            except Infeasible:
                P_new = P
            candidate = evaluate_state(config, channels, w, P_new, V)
            if candidate.feasible and candidate.ee >= ee:
                P, ee = P_new, candidate.ee
            trace.append(ee)
        if mode.optimizes_beams:
            V_new = mmse_receiver(config, channels, w, P)
            candidate = evaluate_state(config, channels, w, P, V_new)
            if candidate.feasible and candidate.ee >= ee:
                V, ee = V_new, candidate.ee
            trace.append(ee)
        if mode.optimizes_phases:
            w = optimize_phases(config, channels, V, P, w, settings.randomizations, rng,
                                settings.phase)
            ee = evaluate_state(config, channels, w, P, V).ee
            trace.append(ee)
        if abs(ee - ee_start) <= settings.ee_rel_tol * abs(ee_start):
            break

    return evaluate_state(config, channels, w, P, V, trace=trace)
