"""Energy-efficient power control for fixed beamformers and IRS phases.

The fractional objective sum_k log2(1 + sinr_k) / (psi * sum(P) + Pc) is handled
by Dinkelbach's method; each parametric subproblem is a difference of two
concave functions and is solved by successive linearization of the
subtrahend. All rates here are spectral efficiencies (bit/s/Hz); the
Dinkelbach parameter is in bit/s/Hz per W.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convex_kernel import (
    LogSumObjective,
    SmoothConcaveProblem,
    find_interior_point,
    solve_concave_affine,
)
from .core_model import LN2, ChannelSet, SystemConfig, cross_gains, noise_power
from .exceptions import Infeasible


# warm start: previous iterate pulled slightly toward the interior, entered at high t
WARM_BLEND = 1e-3
WARM_T0 = 1e4
MU = 50.0


@dataclass
class PowerSettings:
    inner_max_iter: int = 50
    inner_rtol: float = 1e-8
    outer_max_iter: int = 30
    outer_tol: float = 1e-6
    kkt_tol: float = 1e-8


@dataclass
class DinkelbachResult:
    power: np.ndarray
    lam: float
    lambdas: list[float] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``power, lam = dinkelbach_solve(...)``
        return iter((self.power, self.lam))


def build_gain_table(config: SystemConfig, channels: ChannelSet, w, beams) -> np.ndarray:
    """Normalized gains ``g[k, i] = |v_k^H G Phi h_i|^2 / sigma_k^2``."""
    beams = np.asarray(beams)
    sigma2 = np.array([noise_power(config, beams[:, k]) for k in range(beams.shape[1])])
    return cross_gains(channels, w, beams) / sigma2[:, None]


def _split(gains):
    gains = np.asarray(gains, dtype=float)
    direct = np.diag(gains).copy()
    cross = gains - np.diag(direct)
    return direct, cross


def sinr_from_gains(P, gains) -> np.ndarray:
    direct, cross = _split(gains)
    P = np.asarray(P, dtype=float)
    return P * direct / (cross @ P + 1.0)


def energy_ratio(P, gains, config: SystemConfig) -> float:
    """Sum spectral efficiency over consumed power, the Dinkelbach ratio."""
    num = float(np.sum(np.log2(1.0 + sinr_from_gains(P, gains))))
    return num / (config.amp_inefficiency * float(np.sum(P)) + config.circuit_power)


def eval_f1_f2(P, gains, lam, config: SystemConfig) -> tuple[float, float]:
    P = np.asarray(P, dtype=float)
    gains = np.asarray(gains, dtype=float)
    _, cross = _split(gains)
    f1 = float(np.sum(np.log2(gains @ P + 1.0))) - lam * (
        config.amp_inefficiency * float(np.sum(P)) + config.circuit_power)
    f2 = float(np.sum(np.log2(cross @ P + 1.0)))
    return f1, f2


def grad_f2(P, gains) -> np.ndarray:
    _, cross = _split(gains)
    P = np.asarray(P, dtype=float)
    return (cross / LN2 / (1.0 + cross @ P)[:, None]).sum(axis=0)


def qos_constraints(gains, config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """QoS as ``A @ P <= b``: ``gamma_k (sum_{i!=k} g_ki P_i + 1) <= g_kk P_k``."""
    direct, cross = _split(gains)
    gmin = config.min_sinr
    A = gmin[:, None] * cross - np.diag(direct)
    b = -gmin.copy()
    return A, b


def qos_slack(P, gains, config: SystemConfig) -> np.ndarray:
    """Per-user ``g_kk P_k - gamma_k (interference + 1)``; feasible when >= 0."""
    A, b = qos_constraints(gains, config)
    return b - A @ np.asarray(P, dtype=float)


def is_power_feasible(P, gains, config: SystemConfig, rtol=1e-6) -> bool:
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or np.any(P > config.max_power):
        return False
    _, cross = _split(gains)
    rhs = config.min_sinr * (cross @ P + 1.0)
    return bool(np.all(qos_slack(P, gains, config) >= -rtol * rhs))


def qos_feasible_init(gains, config: SystemConfig) -> np.ndarray:
    """Minimum-sum-power point of the QoS set within the caps.

    Solved as an LP with the barrier kernel; when the fixed point
    ``g_kk P_k = gamma_k (sum_{i!=k} g_ki P_i + 1)`` lies in the box it is the
    exact vertex optimum and is returned instead of the barrier iterate.
    """
    K = config.num_users
    gains = np.asarray(gains, dtype=float)
    pmax = config.max_power
    if np.all(config.min_sinr == 0):
        return np.zeros(K)
    A, b = qos_constraints(gains, config)

    vertex = None
    try:
        cand = np.linalg.solve(-A, -b)
        if np.all(cand >= -1e-15) and np.all(cand <= pmax * (1 + 1e-12)):
            vertex = np.clip(cand, 0.0, pmax)
    except np.linalg.LinAlgError:
        pass

    interior = find_interior_point(A, b, np.zeros(K), pmax)
    if interior is None:
        if vertex is not None and is_power_feasible(vertex, gains, config):
            return vertex
        raise Infeasible("QoS constraints cannot be met within the power caps")
    res = solve_concave_affine(SmoothConcaveProblem(
        objective=lambda x: (-float(np.sum(x)), -np.ones(K), np.zeros((K, K))),
        x0=interior, A=A, b=b, lb=np.zeros(K), ub=pmax), tol=1e-10)
    if vertex is not None and np.sum(vertex) <= np.sum(res.x) + 1e-9 * np.sum(pmax):
        return vertex
    return res.x


def _surrogate_objective(gains, lam, config, P_lin) -> LogSumObjective:
    """``f1(P) - f2(P_lin) - <grad f2(P_lin), P - P_lin>``."""
    gains = np.asarray(gains, dtype=float)
    _, f2_lin = eval_f1_f2(P_lin, gains, lam, config)
    g2 = grad_f2(P_lin, gains)
    return LogSumObjective(
        G=gains,
        c=lam * config.amp_inefficiency + g2,
        const=-lam * config.circuit_power - f2_lin + float(g2 @ P_lin),
    )


def _dc_objective(P, gains, lam, config):
    f1, f2 = eval_f1_f2(P, gains, lam, config)
    return f1 - f2


def dc_inner_solve(gains, lam, config: SystemConfig, P0, settings: PowerSettings | None = None,
                   interior=None, history: list | None = None) -> np.ndarray:
    """Maximize ``f1 - f2`` over the QoS set by successive linearization of ``f2``.

    ``interior`` is an optional strictly feasible point used to pull each warm
    start off the boundary; it is computed when omitted.
    """
    settings = settings or PowerSettings()
    gains = np.asarray(gains, dtype=float)
    P = np.asarray(P0, dtype=float).copy()
    if not is_power_feasible(P, gains, config):
        raise Infeasible("DC power iterations need a QoS-feasible start")
    A, b = qos_constraints(gains, config)
    pmax = config.max_power
    if interior is None:
        interior = find_interior_point(A, b, np.zeros(P.size), pmax)
    if interior is None:
        # QoS set without interior: nothing to move
        return P

    obj = _dc_objective(P, gains, lam, config)
    if history is not None:
        history.append(obj)
    for _ in range(settings.inner_max_iter):
        problem = SmoothConcaveProblem(
            objective=_surrogate_objective(gains, lam, config, P),
            x0=(1 - WARM_BLEND) * P + WARM_BLEND * interior,
            A=A, b=b, lb=np.zeros(P.size), ub=pmax,
        )
        P_new = solve_concave_affine(problem, tol=settings.kkt_tol, t0=WARM_T0, mu=MU).x
        obj_new = _dc_objective(P_new, gains, lam, config)
        if obj_new < obj:
            break
        gain = obj_new - obj
        P, obj = P_new, obj_new
        if history is not None:
            history.append(obj)
        if gain <= settings.inner_rtol * max(1.0, abs(obj)):
            break
    return P


def dinkelbach_solve(gains, config: SystemConfig, P_init,
                     settings: PowerSettings | None = None) -> DinkelbachResult:
    """Dinkelbach iterations on the energy ratio, starting from ``lambda = 0``.

    The start point is returned unchanged if no iterate beats its ratio.
    """
    settings = settings or PowerSettings()
    gains = np.asarray(gains, dtype=float)
    P_init = np.asarray(P_init, dtype=float)
    if not is_power_feasible(P_init, gains, config):
        raise Infeasible("Dinkelbach needs a QoS-feasible start")
    A, b = qos_constraints(gains, config)
    interior = find_interior_point(A, b, np.zeros(P_init.size), config.max_power)

    psi, pc = config.amp_inefficiency, config.circuit_power
    lam = 0.0
    P = P_init
    lambdas, epsilons = [], []
    for _ in range(settings.outer_max_iter):
        P = dc_inner_solve(gains, lam, config, P, settings, interior=interior)
        num = float(np.sum(np.log2(1.0 + sinr_from_gains(P, gains))))
        den = psi * float(np.sum(P)) + pc
        eps = num - lam * den
        lam_new = num / den
        lambdas.append(lam_new)
        epsilons.append(eps)
        converged = abs(eps) < settings.outer_tol * (1.0 + abs(lam) * pc)
        lam = lam_new
        if converged:
            break

    ratio_init = energy_ratio(P_init, gains, config)
    if ratio_init >= lam:
        return DinkelbachResult(P_init.copy(), ratio_init, lambdas, epsilons)
    return DinkelbachResult(P, lam, lambdas, epsilons)
