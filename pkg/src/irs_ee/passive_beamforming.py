"""IRS phase optimization for fixed powers and receive beamformers.

The sum rate is written over the lifted variable ``W = w w^H`` as the
difference ``f3(W) - f4(W)`` of two concave log-trace functions. The rank-one
requirement is relaxed to the Schur block ``[[W, wbar], [wbar^H, 1]] >= 0``,
``f4`` is linearized around the current iterate (through its partials in the
real and imaginary parts of the strictly-lower-triangular entries of ``W``)
and the resulting concave SDP is solved with the barrier kernel. A
unit-modulus vector is recovered by Gaussian randomization.

Inside the SDP every user's terms are divided by its noise power
``sigma_k^2``. That shifts ``f3`` and ``f4`` by the same constant and leaves the
partials of ``f4`` unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .convex_kernel import (
    LiftedParametrization,
    LogSumObjective,
    PSDConcaveProblem,
    solve_psd_concave,
)
from .core_model import (
    LN2,
    ChannelSet,
    SystemConfig,
    compute_ee,
    compute_sinr,
    is_feasible,
    noise_power,
)
from .exceptions import Infeasible, MaxIterations, NoFeasibleCandidate, NotStrictlyFeasible

EIG_CLIP = 1e-10


@dataclass
class PhaseSettings:
    randomizations: int = 50
    dc_max_iter: int = 30
    dc_rtol: float = 1e-6
    sdp_tol: float = 1e-8
    warm_blend: float = 1e-3
    warm_t0: float = 1e2
    mu: float = 50.0


@dataclass
class LiftedProblem:
    """``H[k, i] = P_i hhat_{k,i} hhat_{k,i}^H`` with ``hhat_{k,i} = (v_k^H G) o h_i``."""

    H: np.ndarray
    sigma2: np.ndarray
    gamma_min: np.ndarray
    hhat: np.ndarray
    power: np.ndarray

    @property
    def K(self) -> int:
        return self.sigma2.size

    @property
    def N(self) -> int:
        return self.H.shape[-1]

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-user ``sum_i H[k, i]`` and ``sum_{i != k} H[k, i]``."""
        full = self.H.sum(axis=1)
        own = self.H[np.arange(self.K), np.arange(self.K)]
        return full, full - own


@dataclass
class LiftedIterate:
    W: np.ndarray
    w_bar: np.ndarray
    values: list[float] = field(default_factory=list)


def build_lifted(config: SystemConfig, channels: ChannelSet, beams, power) -> LiftedProblem:
    beams = np.asarray(beams, dtype=complex)
    power = np.asarray(power, dtype=float)
    vG = beams.conj().T @ channels.G                      # (K, N), row k = v_k^H G
    hhat = vG[:, None, :] * channels.h.T[None, :, :]      # (K, K, N)
    H = power[None, :, None, None] * hhat[..., :, None] * hhat[..., None, :].conj()
    sigma2 = np.array([noise_power(config, beams[:, k]) for k in range(beams.shape[1])])
    return LiftedProblem(H=H, sigma2=sigma2, gamma_min=np.array(config.min_sinr),
                         hhat=hhat, power=power)


def _trace(W, A) -> np.ndarray:
    """``Re Tr(W A_k)`` for a stack ``A`` of shape ``(K, N, N)``."""
    return np.einsum("ij,kji->k", W, A).real


def eval_f3_f4(W, lifted: LiftedProblem) -> tuple[float, float]:
    full, others = lifted.totals()
    u3 = _trace(W, full) + lifted.sigma2
    u4 = _trace(W, others) + lifted.sigma2
    if np.any(u3 <= 0) or np.any(u4 <= 0):
        raise ValueError("log argument is not positive; W must be PSD")
    return float(np.sum(np.log2(u3))), float(np.sum(np.log2(u4)))


def partials_f4(W, lifted: LiftedProblem) -> tuple[np.ndarray, np.ndarray]:
    """Partials of ``f4`` in ``Re W(n, j)`` and ``Im W(n, j)`` for ``n > j``.

    Entries on and above the diagonal are zero. ``W(j, n)`` moves with
    ``W(n, j)`` as its conjugate, which is why each partial collects the entry
    and its conjugate.
    """
    _, others = lifted.totals()
    den = _trace(W, others) + lifted.sigma2
    B = (others / den[:, None, None]).sum(axis=0) / LN2
    lower = np.tril(np.ones(B.shape, dtype=bool), -1)
    d_re = np.where(lower, (B + B.conj()).real, 0.0)
    d_im = np.where(lower, (-1j * (B - B.conj())).real, 0.0)
    return d_re, d_im


def sum_rate_of_phases(lifted: LiftedProblem, w) -> float:
    return float(np.sum(np.log2(1.0 + _candidate_sinr(lifted, np.atleast_2d(w))[0])))


def _candidate_sinr(lifted: LiftedProblem, cands: np.ndarray) -> np.ndarray:
    """SINRs ``(Q, K)`` of unit-modulus candidates given as rows of ``cands``."""
    proj = np.einsum("qj,kij->qki", cands.conj(), lifted.hhat)
    rx = np.abs(proj) ** 2 * lifted.power[None, None, :]
    idx = np.arange(lifted.K)
    signal = rx[:, idx, idx]
    interference = rx.sum(axis=2) - signal
    return signal / (interference + lifted.sigma2[None, :])


@lru_cache(maxsize=None)
def _parametrization(N: int) -> LiftedParametrization:
    return LiftedParametrization(N)


class _NormalizedForms:
    """Affine coefficients of the noise-normalized trace terms in lifted coordinates."""

    def __init__(self, lifted: LiftedProblem, param: LiftedParametrization):
        full, others = lifted.totals()
        s2 = lifted.sigma2
        K = lifted.K
        own = lifted.H[np.arange(K), np.arange(K)]
        forms = [param.trace_form(A) for A in full / s2[:, None, None]]
        self.a = np.array([c for c, _ in forms])
        self.a0 = np.array([c0 for _, c0 in forms]) + 1.0
        forms = [param.trace_form(A) for A in own / s2[:, None, None]]
        own_c = np.array([c for c, _ in forms])
        own_c0 = np.array([c0 for _, c0 in forms])
        forms = [param.trace_form(A) for A in others / s2[:, None, None]]
        oth_c = np.array([c for c, _ in forms])
        oth_c0 = np.array([c0 for _, c0 in forms])
        g = lifted.gamma_min
        # QoS:  own - gamma (others + 1) >= 0
        self.qos_C = own_c - g[:, None] * oth_c
        self.qos_d = own_c0 - g * (oth_c0 + 1.0)
        norms = np.linalg.norm(self.qos_C, axis=1) + np.abs(self.qos_d)
        norms[norms == 0] = 1.0
        self.qos_C /= norms[:, None]
        self.qos_d /= norms

    def surrogate(self, lin: np.ndarray) -> LogSumObjective:
        """``sum_k log2(a_k x + a0_k) - lin x``."""
        return LogSumObjective(G=self.a, c=lin, offset=self.a0)


def _phase_one(param: LiftedParametrization, forms: _NormalizedForms, x_start: np.ndarray):
    """Strictly QoS-feasible interior point of the relaxed set, or ``None``."""
    C, d = forms.qos_C, forms.qos_d
    if np.all(C @ x_start + d > 0):
        return x_start
    dim = param.dim
    lmis = [param.schur_hlmi, param.w_hlmi]
    C_aug = np.hstack([C, -np.ones((C.shape[0], 1))])
    s0 = float(np.min(C @ x_start + d)) - 1.0
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    problem = PSDConcaveProblem(
        objective=LogSumObjective(G=np.zeros((0, dim + 1)), c=c),
        x0=np.append(x_start, s0), lmis=lmis, C=C_aug, d=d,
    )
    if problem.barrier(problem.x0) is None:
        # W = I, wbar = 0 is always inside both PSD blocks
        problem.x0 = np.append(np.zeros(dim), float(np.min(d)) - 1.0)
    try:
        res = solve_psd_concave(problem, tol=1e-6, t0=1.0, mu=20.0)
    except MaxIterations:
        return None
    if res.x[-1] <= 1e-9:
        return None
    return res.x[:-1]


def dc_sdp_iterate(lifted: LiftedProblem, W0, w_bar0,
                   settings: PhaseSettings | None = None) -> LiftedIterate:
    """Successive concave-SDP ascent on ``f3 - f4`` from ``(W0, w_bar0)``.

    Raises :class:`Infeasible` when no relaxed point strictly satisfies the
    QoS constraints.
    """
    settings = settings or PhaseSettings()
    N = lifted.N
    W = np.asarray(W0, dtype=complex)
    w_bar = np.asarray(w_bar0, dtype=complex)
    f3, f4 = eval_f3_f4(W, lifted)
    value = f3 - f4
    if N == 1:
        return LiftedIterate(np.ones((1, 1), dtype=complex), w_bar.copy(), [value])

    param = _parametrization(N)
    forms = _NormalizedForms(lifted, param)
    x = param.pack(W, w_bar)
    blend = settings.warm_blend
    anchor = _phase_one(param, forms, (1 - blend) * x)
    if anchor is None:
        raise Infeasible("QoS constraints are not strictly feasible over the relaxed set")
    lmis = [param.schur_hlmi, param.w_hlmi]
    values = [value]
    if np.any(forms.qos_C @ x + forms.qos_d < -1e-9):
        # an infeasible start must not block the first feasible iterate
        value = -np.inf
    for _ in range(settings.dc_max_iter):
        d_re, d_im = partials_f4(W, lifted)
        lin = np.concatenate([d_re[param.rows, param.cols], d_im[param.rows, param.cols],
                              np.zeros(2 * N)])
        x0 = (1 - blend) * x + blend * anchor
        if np.any(forms.qos_C @ x0 + forms.qos_d <= 0):
            # incumbent violates QoS (within tolerance); start from the interior point
            x0 = anchor
        problem = PSDConcaveProblem(
            objective=forms.surrogate(lin), x0=x0,
            lmis=lmis, C=forms.qos_C, d=forms.qos_d,
        )
        try:
            try:
                res = solve_psd_concave(problem, tol=settings.sdp_tol, t0=settings.warm_t0,
                                        mu=settings.mu)
            except NotStrictlyFeasible:
                # warm start lost interiority to roundoff
                problem.x0 = anchor
                res = solve_psd_concave(problem, tol=settings.sdp_tol, mu=settings.mu)
        except (MaxIterations, NotStrictlyFeasible):
            break
        W_new, w_bar_new = param.unpack(res.x)
        f3, f4 = eval_f3_f4(W_new, lifted)
        value_new = f3 - f4
        if value_new < value:
            break
        improvement = value_new - value
        x, W, w_bar, value = res.x, W_new, w_bar_new, value_new
        values.append(value)
        if improvement <= settings.dc_rtol * max(1.0, abs(value)):
            break
    return LiftedIterate(W, w_bar, values)


def project_unit_modulus(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    out = np.ones_like(z)
    ok = mag >= 1e-12
    out[ok] = z[ok] / mag[ok]
    return out


def gaussian_randomization(lifted: LiftedProblem, iterate: LiftedIterate, Q: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Best QoS-feasible unit-modulus vector among Gaussian draws around ``w_bar``.

    Samples follow ``CN(w_bar, W - w_bar w_bar^H)``; the projected mean itself
    is also scored.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    N = lifted.N
    cov = iterate.W - np.outer(iterate.w_bar, iterate.w_bar.conj())
    cov = 0.5 * (cov + cov.conj().T)
    lam, U = np.linalg.eigh(cov)
    lam = np.where(lam > EIG_CLIP, lam, 0.0)
    factor = U * np.sqrt(lam)[None, :]
    z = (rng.standard_normal((Q, N)) + 1j * rng.standard_normal((Q, N))) / np.sqrt(2.0)
    samples = iterate.w_bar[None, :] + z @ factor.T
    cands = np.vstack([project_unit_modulus(iterate.w_bar)[None, :],
                       project_unit_modulus(samples)])
    sinr = _candidate_sinr(lifted, cands)
    ok = np.all(sinr >= lifted.gamma_min[None, :] * (1.0 - 1e-6), axis=1)
    if not np.any(ok):
        raise NoFeasibleCandidate("no randomized candidate meets the QoS constraints")
    score = np.where(ok, np.log2(1.0 + sinr).sum(axis=1), -np.inf)
    return cands[int(np.argmax(score))]


def optimize_phases(config: SystemConfig, channels: ChannelSet, beams, power, w_incumbent,
                    Q: int, rng: np.random.Generator,
                    settings: PhaseSettings | None = None) -> np.ndarray:
    """One phase-block update; never returns a vector with lower EE than the incumbent."""
    settings = settings or PhaseSettings()
    w_inc = np.asarray(w_incumbent, dtype=complex)
    if Q < 1:
        return w_inc
    lifted = build_lifted(config, channels, beams, power)
    W0 = np.outer(w_inc, w_inc.conj())
    W0[np.diag_indices_from(W0)] = 1.0
    try:
        iterate = dc_sdp_iterate(lifted, W0, w_inc, settings)
        cand = gaussian_randomization(lifted, iterate, Q, rng)
    except (Infeasible, NoFeasibleCandidate):
        return w_inc

    sinr_inc = compute_sinr(config, channels, w_inc, power, beams)
    sinr_new = compute_sinr(config, channels, cand, power, beams)
    if not is_feasible(config, sinr_new):
        return w_inc
    inc_ok = is_feasible(config, sinr_inc)
    if inc_ok and compute_ee(config, sinr_new, power) < compute_ee(config, sinr_inc, power):
        return w_inc
    return cand
