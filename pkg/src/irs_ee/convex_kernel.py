"""Small dense log-barrier solvers.

Two problem families are supported:

* :class:`SmoothConcaveProblem`: maximize a smooth concave ``f(x)`` subject to
  ``A x <= b`` and box bounds.
* :class:`PSDConcaveProblem`: maximize a smooth concave ``f(x)`` where ``x``
  parametrizes affine real-symmetric matrix functions ``S_j(x)`` that must stay
  positive definite, plus affine inequalities ``C x + d >= 0``.

Complex Hermitian blocks are handled through the realification
``H -> [[Re H, -Im H], [Im H, Re H]]``, which preserves positive
semidefiniteness and satisfies ``z^H H z = [Re z; Im z]^T R(H) [Re z; Im z]``;
traces double under it. Since every eigenvalue appears twice,
``log det R(H) = 2 log det H``; the PSD barrier weights each realified block by
1/2 so the barrier parameter counts complex dimensions.
Blocks given as :class:`HermitianLMI` skip the realification and run a
complex Cholesky kernel with the same barrier, roughly ten times cheaper per
Newton step at the sizes used here.

Both families share one path-following engine: for increasing ``t`` the
barrier-augmented function ``t f(x) + barrier(x)`` is maximized by damped
Newton steps with backtracking. The loop stops once ``1/t``, the
complementary-slackness product of every constraint on the central path, is
below the tolerance; the duality gap is then at most ``nu / t`` where ``nu`` is
the barrier parameter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import linalg

from .exceptions import MaxIterations, NotStrictlyFeasible

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


@dataclass
class SolverResult:
    x: np.ndarray
    value: float
    kkt_residual: float
    newton_steps: int
    t: float
    path_values: list[float] = field(default_factory=list)


def realify(H) -> np.ndarray:
    H = np.asarray(H)
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def linear_oracle(c) -> Oracle:
    c = np.asarray(c, dtype=float)
    zeros = np.zeros((c.size, c.size))
    return lambda x: (float(c @ x), c, zeros)


def _barrier_path(objective: Oracle, barrier, nu: float, x0: np.ndarray, tol: float,
                  t0: float, mu: float, max_newton: int, stop_early=None) -> SolverResult:
    """Shared central-path loop.

    ``barrier(x)`` returns ``(value, grad, hess)`` of the (concave) barrier or
    ``None`` when ``x`` is outside the domain.
    """
    x = np.array(x0, dtype=float)
    b = barrier(x)
    if b is None:
        raise NotStrictlyFeasible("start point is not strictly feasible")
    t = t0
    steps = 0
    path = []
    stationarity = 0.0
    while True:
        # centering
        while True:
            f, gf, Hf = objective(x)
            bv, gb, Hb = b
            phi = t * f + bv
            grad = t * gf + gb
            negH = -(t * Hf + Hb)
            try:
                dx = np.linalg.solve(negH, grad)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(negH, grad, rcond=None)[0]
            decrement = float(grad @ dx)
            stationarity = float(np.max(np.abs(grad))) / t if grad.size else 0.0
            if decrement <= max(1e-10, 1e-12 * abs(phi)):
                break
            if steps >= max_newton:
                raise MaxIterations(f"barrier solver exceeded {max_newton} Newton steps")
            steps += 1
            step = 1.0
            accepted = False
            while step > 1e-14:
                xn = x + step * dx
                bn = barrier(xn)
                if bn is not None:
                    phin = t * objective(xn)[0] + bn[0]
                    if phin >= phi + 0.25 * step * decrement:
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                # numerically stalled at this t; the iterate is as central as it gets
                break
            x, b = xn, bn
            if phin - phi <= 1e-13 * max(1.0, abs(phi)):
                break
        path.append(objective(x)[0])
        if stop_early is not None and stop_early(x):
            break
        # complementary slackness of every constraint equals 1/t on the central path
        if 1.0 / t <= tol:
            break
        t *= mu
    value = objective(x)[0]
    return SolverResult(
        x=x,
        value=value,
        kkt_residual=max(1.0 / t, stationarity),
        newton_steps=steps,
        t=t,
        path_values=path,
    )


@dataclass
class LogSumObjective:
    """``sum_k log2(G[k] @ x + offset[k]) - c @ x + const``, concave in ``x``.

    ``offset`` defaults to ones. Callable as a generic oracle; the solvers also
    recognize it and run compiled barrier loops.
    """

    G: np.ndarray
    c: np.ndarray
    const: float = 0.0
    offset: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.ascontiguousarray(self.c, dtype=float)
        self.G = np.ascontiguousarray(self.G, dtype=float).reshape(-1, self.c.size)
        if self.offset is None:
            self.offset = np.ones(self.G.shape[0])
        self.offset = np.ascontiguousarray(self.offset, dtype=float)

    def __call__(self, x):
        u = self.G @ x + self.offset
        if np.any(u <= 0):
            return -np.inf, np.zeros_like(x), np.zeros((x.size, x.size))
        Gu = self.G / u[:, None]
        value = float(np.sum(np.log(u))) / _LN2 - float(self.c @ x) + self.const
        return value, Gu.sum(axis=0) / _LN2 - self.c, -(Gu.T @ Gu) / _LN2


_LN2 = float(np.log(2.0))


@numba.njit(cache=True)
def _logsum_phi(G, off, c, A, b, x, t):
    """Barrier-augmented value; -inf outside the domain."""
    s = b - A @ x
    if s.size and s.min() <= 0.0:
        return -np.inf
    u = G @ x + off
    if u.size and u.min() <= 0.0:
        return -np.inf
    return t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum()


@numba.njit(cache=True)
def _logsum_barrier(G, off, c, A, b, x0, t0, mu, tol, max_newton):
    x = x0.copy()
    n = x.size
    t = t0
    steps = 0
    stationarity = 0.0
    while True:
        while True:
            s = b - A @ x
            u = G @ x + off
            inv_s = 1.0 / s
            Gu = G / u.reshape(-1, 1)
            As = A * inv_s.reshape(-1, 1)
            grad = t * (Gu.sum(axis=0) / _LN2 - c) - A.T @ inv_s
            negH = t * (Gu.T @ Gu) / _LN2 + As.T @ As
            dx = np.linalg.solve(negH, grad)
            decrement = grad @ dx
            phi = t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum()
            stationarity = np.abs(grad).max() / t if n else 0.0
            if decrement <= max(1e-10, 1e-12 * abs(phi)):
                break
            if steps >= max_newton:
                return x, steps, t, stationarity, False
            steps += 1
            step = 1.0
            accepted = False
            phin = phi
            while step > 1e-14:
                phin = _logsum_phi(G, off, c, A, b, x + step * dx, t)
                if phin >= phi + 0.25 * step * decrement:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            x = x + step * dx
            if phin - phi <= 1e-13 * max(1.0, abs(phi)):
                break
        if 1.0 / t <= tol:
            break
        t *= mu
    return x, steps, t, stationarity, True


@numba.njit(cache=True)
def _cholesky(S):
    """Lower Cholesky factor and a success flag (False when S is not PD)."""
    n = S.shape[0]
    L = np.zeros_like(S)
    for j in range(n):
        acc = S[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc <= 0.0:
            return L, False
        L[j, j] = np.sqrt(acc)
        for i in range(j + 1, n):
            acc = S[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    return L, True


@numba.njit(cache=True)
def _lower_inverse(L):
    n = L.shape[0]
    inv = np.zeros_like(L)
    for j in range(n):
        inv[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            acc = 0.0
            for k in range(j, i):
                acc -= L[i, k] * inv[k, j]
            inv[i, j] = acc / L[i, i]
    return inv


@numba.njit(cache=True)
def _assemble(S0, ptr, ri, ci, vals, x):
    S = S0.copy()
    for p in range(x.size):
        for e in range(ptr[p], ptr[p + 1]):
            S[ri[e], ci[e]] += x[p] * vals[e]
    return S


@numba.njit(cache=True)
def _psd_phi(G, off, c, S0, ptr, ri, ci, vals, C, d, x, t):
    s = C @ x + d
    if s.size and s.min() <= 0.0:
        return -np.inf
    u = G @ x + off
    if u.size and u.min() <= 0.0:
        return -np.inf
    L, ok = _cholesky(_assemble(S0, ptr, ri, ci, vals, x))
    if not ok:
        return -np.inf
    return (t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum()
            + np.log(np.diag(L)).sum())


@numba.njit(cache=True)
def _psd_barrier(G, off, c, S0, ptr, ri, ci, vals, C, d, x0, t0, mu, tol, max_newton):
    """Compiled central path for a log-sum objective over one realified LMI.

    The LMI basis is passed in CSR-like form (``ptr``, ``ri``, ``ci``, ``vals``);
    with a handful of entries per coordinate the barrier derivatives reduce to
    lookups in ``S^{-1}``.
    """
    x = x0.copy()
    dim = x.size
    t = t0
    steps = 0
    stationarity = 0.0
    tr = np.empty(dim)
    P = np.empty((dim, dim))
    while True:
        while True:
            s = C @ x + d
            inv_s = 1.0 / s
            Cs = C * inv_s.reshape(-1, 1)
            u = G @ x + off
            Gu = G / u.reshape(-1, 1)
            L, ok = _cholesky(_assemble(S0, ptr, ri, ci, vals, x))
            Linv = _lower_inverse(L)
            Si = Linv.T @ Linv
            for p in range(dim):
                acc = 0.0
                for e in range(ptr[p], ptr[p + 1]):
                    acc += vals[e] * Si[ci[e], ri[e]]
                tr[p] = acc
                for q in range(p + 1):
                    acc = 0.0
                    for e in range(ptr[p], ptr[p + 1]):
                        a = ri[e]
                        b = ci[e]
                        for f in range(ptr[q], ptr[q + 1]):
                            acc += vals[e] * vals[f] * Si[b, ri[f]] * Si[ci[f], a]
                    P[p, q] = acc
                    P[q, p] = acc
            grad = t * (Gu.sum(axis=0) / _LN2 - c) + C.T @ inv_s + 0.5 * tr
            negH = t * (Gu.T @ Gu) / _LN2 + Cs.T @ Cs + 0.5 * P
            dx = np.linalg.solve(negH, grad)
            decrement = grad @ dx
            phi = (t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum()
                   + np.log(np.diag(L)).sum())
            stationarity = np.abs(grad).max() / t
            if decrement <= max(1e-10, 1e-12 * abs(phi)):
                break
            if steps >= max_newton:
                return x, steps, t, stationarity, False
            steps += 1
            step = 1.0
            accepted = False
            phin = phi
            while step > 1e-14:
                phin = _psd_phi(G, off, c, S0, ptr, ri, ci, vals, C, d, x + step * dx, t)
                if phin >= phi + 0.25 * step * decrement:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            x = x + step * dx
            if phin - phi <= 1e-13 * max(1.0, abs(phi)):
                break
        if 1.0 / t <= tol:
            break
        t *= mu
    return x, steps, t, stationarity, True


@dataclass
class SmoothConcaveProblem:
    """maximize objective(x) s.t. A x <= b, lb <= x <= ub."""

    objective: Oracle
    x0: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        n = self.x0.size
        if self.A is None:
            self.A = np.zeros((0, n))
            self.b = np.zeros(0)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float)).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.lb = np.full(n, -np.inf) if self.lb is None else np.broadcast_to(
            np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(
            np.asarray(self.ub, dtype=float), (n,)).copy()
        lo = np.isfinite(self.lb)
        hi = np.isfinite(self.ub)
        eye = np.eye(n)
        # box bounds folded into one stacked system  A_all x <= b_all
        self._A_all = np.vstack([self.A, -eye[lo], eye[hi]])
        self._b_all = np.concatenate([self.b, -self.lb[lo], self.ub[hi]])

    @property
    def n(self) -> int:
        return self.x0.size

    def slacks(self, x) -> np.ndarray:
        return self._b_all - self._A_all @ x

    def barrier(self, x):
        s = self._b_all - self._A_all @ x
        if s.size == 0:
            return 0.0, np.zeros(self.n), np.zeros((self.n, self.n))
        if s.min() <= 0:
            return None
        inv = 1.0 / s
        As = self._A_all * inv[:, None]
        return float(np.log(s).sum()), -(self._A_all.T @ inv), -(As.T @ As)

    @property
    def nu(self) -> int:
        return self._b_all.size


def solve_concave_affine(problem: SmoothConcaveProblem, tol: float = 1e-8,
                         max_newton: int = 200, t0: float = 1.0, mu: float = 20.0,
                         compiled: bool = True) -> SolverResult:
    """Log-barrier path following for a concave objective with affine constraints.

    A :class:`LogSumObjective` runs through a numba-compiled copy of the same
    loop unless ``compiled=False``. The compiled loop does not record
    ``path_values``.
    """
    if problem.barrier(problem.x0) is None:
        raise NotStrictlyFeasible("x0 violates a constraint or lies on the boundary")
    if problem.nu == 0:
        # unconstrained: plain damped Newton on the objective itself
        return _barrier_path(problem.objective, lambda x: (0.0, np.zeros(problem.n),
                             np.zeros((problem.n, problem.n))), 1.0, problem.x0,
                             np.inf, 1.0, mu, max_newton)
    if isinstance(problem.objective, LogSumObjective) and compiled:
        obj = problem.objective
        x, steps, t, stationarity, ok = _logsum_barrier(
            obj.G, obj.offset, obj.c, problem._A_all, problem._b_all, problem.x0,
            float(t0), float(mu), float(tol), int(max_newton))
        if not ok:
            raise MaxIterations(f"barrier solver exceeded {max_newton} Newton steps")
        return SolverResult(x=x, value=obj(x)[0], kkt_residual=max(1.0 / t, stationarity),
                            newton_steps=steps, t=t)
    return _barrier_path(problem.objective, problem.barrier, problem.nu, problem.x0,
                         tol, t0, mu, max_newton)


def find_interior_point(A, b, lb, ub, margin: float = 1e-9) -> np.ndarray | None:
    """Strictly feasible point of ``{A x <= b, lb <= x <= ub}`` by a phase-I solve.

    Maximizes the common slack ``s`` of the row-normalized constraints. Returns
    ``None`` when the best achievable slack is not positive.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    n = lb.size
    rows = [A, np.eye(n)[np.isfinite(ub)], -np.eye(n)[np.isfinite(lb)]]
    rhs = [b, ub[np.isfinite(ub)], -lb[np.isfinite(lb)]]
    Ar = np.vstack(rows)
    br = np.concatenate(rhs)
    norms = np.linalg.norm(Ar, axis=1)
    keep = norms > 0
    if np.any(br[~keep] <= 0):
        return None
    Ar = Ar[keep] / norms[keep, None]
    br = br[keep] / norms[keep]
    if Ar.shape[0] == 0:
        return np.zeros(n)

    x = np.where(np.isfinite(lb) & np.isfinite(ub), 0.5 * (lb + ub),
                 np.where(np.isfinite(lb), lb + 1.0, np.where(np.isfinite(ub), ub - 1.0, 0.0)))
    scale = max(1.0, float(np.max(np.abs(br))))
    s0 = float(np.min(br - Ar @ x)) - scale
    # variables (x, s): maximize s s.t. Ar x + s <= br, s <= scale
    Aaug = np.hstack([Ar, np.ones((Ar.shape[0], 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    problem = SmoothConcaveProblem(
        objective=linear_oracle(c), x0=np.append(x, s0), A=Aaug, b=br,
        ub=np.append(np.full(n, np.inf), scale),
    )
    target = margin * scale
    try:
        res = _barrier_path(problem.objective, problem.barrier, problem.nu, problem.x0,
                            1e-10 * scale, 1.0 / scale, 20.0, 400,
                            stop_early=lambda z: z[-1] > 0.25 * scale)
    except MaxIterations:
        return None
    if res.x[-1] <= target:
        return None
    return res.x[:n]


@dataclass
class HermitianLMI:
    """Hermitian block ``S(x) = S0 + sum_g x[re_g] (E_rc + E_cr) + x[im_g] i (E_rc - E_cr)``.

    ``E_rc`` is the unit matrix with a one at ``(r, c)``, ``r != c``; index -1
    marks an absent real or imaginary coordinate. Each pair moves one complex
    entry and its mirror, which keeps ``S`` Hermitian.
    """

    S0: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    re_idx: np.ndarray
    im_idx: np.ndarray

    def __post_init__(self):
        self.S0 = np.asarray(self.S0, dtype=complex)
        self.rows, self.cols, self.re_idx, self.im_idx = (
            np.asarray(a, dtype=np.int64).reshape(-1)
            for a in (self.rows, self.cols, self.re_idx, self.im_idx))
        if np.any(self.rows == self.cols):
            raise ValueError("coordinate pairs must be off-diagonal")

    def basis(self, dim: int) -> np.ndarray:
        n = self.S0.shape[0]
        B = np.zeros((dim, n, n), dtype=complex)
        for r, c, i_re, i_im in zip(self.rows, self.cols, self.re_idx, self.im_idx):
            if i_re >= 0:
                B[i_re, r, c] += 1.0
                B[i_re, c, r] += 1.0
            if i_im >= 0:
                B[i_im, r, c] += 1j
                B[i_im, c, r] -= 1j
        return B

    def realified(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        B = self.basis(dim)
        n2 = 2 * self.S0.shape[0]
        RB = np.stack([realify(Bp) for Bp in B]) if dim else np.zeros((0, n2, n2))
        return realify(self.S0), RB


@numba.njit(cache=True)
def _cholesky_h(S, n):
    """Complex Cholesky of the leading ``n x n`` block with a success flag."""
    L = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        acc = S[j, j].real
        for k in range(j):
            acc -= L[j, k].real ** 2 + L[j, k].imag ** 2
        if acc <= 0.0:
            return L, False
        L[j, j] = np.sqrt(acc)
        for i in range(j + 1, n):
            z = S[i, j]
            for k in range(j):
                z -= L[i, k] * np.conj(L[j, k])
            L[i, j] = z / L[j, j].real
    return L, True


@numba.njit(cache=True)
def _assemble_h(S0, rows, cols, ire, iim, x):
    S = S0.copy()
    for g in range(rows.size):
        z = 0j
        if ire[g] >= 0:
            z += x[ire[g]]
        if iim[g] >= 0:
            z += 1j * x[iim[g]]
        S[rows[g], cols[g]] += z
        S[cols[g], rows[g]] += np.conj(z)
    return S


@numba.njit(cache=True)
def _herm_logdet(S0s, sizes, rows, cols, ire, iim, counts, x):
    total = 0.0
    for blk in range(sizes.size):
        g = counts[blk]
        S = _assemble_h(S0s[blk], rows[blk, :g], cols[blk, :g], ire[blk, :g], iim[blk, :g], x)
        L, ok = _cholesky_h(S, sizes[blk])
        if not ok:
            return -np.inf
        for j in range(sizes[blk]):
            total += 2.0 * np.log(L[j, j].real)
    return total


@numba.njit(cache=True)
def _herm_phi(G, off, c, S0s, sizes, rows, cols, ire, iim, counts, C, d, x, t):
    s = C @ x + d
    if s.size and s.min() <= 0.0:
        return -np.inf
    u = G @ x + off
    if u.size and u.min() <= 0.0:
        return -np.inf
    ld = _herm_logdet(S0s, sizes, rows, cols, ire, iim, counts, x)
    if ld == -np.inf:
        return -np.inf
    return t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum() + ld


@numba.njit(cache=True)
def _herm_derivatives(S0s, sizes, rows, cols, ire, iim, counts, x, grad, H):
    """Add the gradient and negated Hessian of ``sum log det S_b(x)``; returns the value."""
    total = 0.0
    for blk in range(sizes.size):
        n = sizes[blk]
        gcount = counts[blk]
        r = rows[blk]
        cc = cols[blk]
        a_re = ire[blk]
        a_im = iim[blk]
        S = _assemble_h(S0s[blk], r[:gcount], cc[:gcount], a_re[:gcount], a_im[:gcount], x)
        L, ok = _cholesky_h(S, n)
        Linv = np.zeros((n, n), dtype=np.complex128)
        for j in range(n):
            Linv[j, j] = 1.0 / L[j, j]
            for i in range(j + 1, n):
                z = 0j
                for k in range(j, i):
                    z -= L[i, k] * Linv[k, j]
                Linv[i, j] = z / L[i, i]
            total += 2.0 * np.log(L[j, j].real)
        Z = Linv.conj().T @ Linv
        for g in range(gcount):
            nn = r[g]
            jj = cc[g]
            if a_re[g] >= 0:
                grad[a_re[g]] += 2.0 * Z[nn, jj].real
            if a_im[g] >= 0:
                grad[a_im[g]] += 2.0 * Z[nn, jj].imag
            for h in range(gcount):
                m = r[h]
                l = cc[h]
                A = Z[jj, m] * Z[l, nn]
                B = Z[jj, l] * Z[m, nn]
                Cq = Z[nn, m] * Z[l, jj]
                D = Z[nn, l] * Z[m, jj]
                if a_re[g] >= 0 and a_re[h] >= 0:
                    H[a_re[g], a_re[h]] += (A + B + Cq + D).real
                if a_re[g] >= 0 and a_im[h] >= 0:
                    H[a_re[g], a_im[h]] -= (A - B + Cq - D).imag
                if a_im[g] >= 0 and a_re[h] >= 0:
                    H[a_im[g], a_re[h]] -= (A + B - Cq - D).imag
                if a_im[g] >= 0 and a_im[h] >= 0:
                    H[a_im[g], a_im[h]] -= (A - B - Cq + D).real
    return total


@numba.njit(cache=True)
def _herm_barrier(G, off, c, S0s, sizes, rows, cols, ire, iim, counts, C, d,
                  x0, t0, mu, tol, max_newton):
    """Compiled central path for a log-sum objective over Hermitian LMIs."""
    x = x0.copy()
    dim = x.size
    t = t0
    steps = 0
    stationarity = 0.0
    while True:
        while True:
            s = C @ x + d
            inv_s = 1.0 / s
            Cs = C * inv_s.reshape(-1, 1)
            u = G @ x + off
            Gu = G / u.reshape(-1, 1)
            grad = t * (Gu.sum(axis=0) / _LN2 - c) + C.T @ inv_s
            negH = t * (Gu.T @ Gu) / _LN2 + Cs.T @ Cs
            ld = _herm_derivatives(S0s, sizes, rows, cols, ire, iim, counts, x, grad, negH)
            dx = np.linalg.solve(negH, grad)
            decrement = grad @ dx
            phi = t * (np.log(u).sum() / _LN2 - c @ x) + np.log(s).sum() + ld
            stationarity = np.abs(grad).max() / t
            if decrement <= max(1e-10, 1e-12 * abs(phi)):
                break
            if steps >= max_newton:
                return x, steps, t, stationarity, False
            steps += 1
            step = 1.0
            accepted = False
            phin = phi
            while step > 1e-14:
                phin = _herm_phi(G, off, c, S0s, sizes, rows, cols, ire, iim, counts,
                                 C, d, x + step * dx, t)
                if phin >= phi + 0.25 * step * decrement:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            x = x + step * dx
            if phin - phi <= 1e-13 * max(1.0, abs(phi)):
                break
        if 1.0 / t <= tol:
            break
        t *= mu
    return x, steps, t, stationarity, True


def _pack_hermitian(blocks: list[HermitianLMI]):
    nb = len(blocks)
    nmax = max(b.S0.shape[0] for b in blocks)
    gmax = max(max(b.rows.size for b in blocks), 1)
    S0s = np.tile(np.eye(nmax, dtype=complex), (nb, 1, 1))
    sizes = np.array([b.S0.shape[0] for b in blocks], dtype=np.int64)
    counts = np.array([b.rows.size for b in blocks], dtype=np.int64)
    arrs = [np.full((nb, gmax), -1, dtype=np.int64) for _ in range(4)]
    for i, b in enumerate(blocks):
        n = b.S0.shape[0]
        S0s[i, :n, :n] = b.S0
        for a, src in zip(arrs, (b.rows, b.cols, b.re_idx, b.im_idx)):
            a[i, :src.size] = src
    return (S0s, sizes, *arrs, counts)


@dataclass
class PSDConcaveProblem:
    """maximize objective(x) s.t. S_j(x) > 0 and C x + d >= 0.

    ``lmis`` is a list of ``(S0, B)`` with ``S(x) = S0 + sum_p x_p B[p]``,
    real symmetric (realified) matrices; ``B`` has shape ``(dim, n, n)``.
    Each realified block contributes ``-1/2 log det`` to the barrier.
    Entries may also be :class:`HermitianLMI`; they are realified here and
    kept in ``hermitian`` for the compiled complex path.
    """

    objective: Oracle
    x0: np.ndarray
    lmis: list[tuple[np.ndarray, np.ndarray]]
    C: np.ndarray | None = None
    d: np.ndarray | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        n = self.x0.size
        if self.C is None:
            self.C = np.zeros((0, n))
            self.d = np.zeros(0)
        self.C = np.asarray(self.C, dtype=float).reshape(-1, n)
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        self.lmis = list(self.lmis)
        herm = [b for b in self.lmis if isinstance(b, HermitianLMI)]
        self.hermitian = herm if herm and len(herm) == len(self.lmis) else None
        self.lmis = [b.realified(n) if isinstance(b, HermitianLMI) else b for b in self.lmis]

    @property
    def nu(self) -> float:
        return sum(S0.shape[0] / 2 for S0, _ in self.lmis) + self.C.shape[0]

    def matrices(self, x):
        return [S0 + np.tensordot(x, B, axes=1) for S0, B in self.lmis]

    def barrier(self, x):
        s = self.C @ x + self.d
        if np.any(s <= 0):
            return None
        value = float(np.sum(np.log(s)))
        grad = self.C.T @ (1.0 / s)
        Cs = self.C / s[:, None]
        hess = -Cs.T @ Cs
        for S0, B in self.lmis:
            S = S0 + np.tensordot(x, B, axes=1)
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                return None
            Linv = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
            X = Linv @ B @ Linv.T
            Xf = X.reshape(X.shape[0], -1)
            value += float(np.sum(np.log(np.diag(L))))
            grad += 0.5 * np.einsum("pii->p", X)
            hess -= 0.5 * (Xf @ Xf.T)
        return value, grad, hess

    def min_eigenvalues(self, x) -> list[float]:
        return [float(np.linalg.eigvalsh(S)[0]) for S in self.matrices(x)]


def _block_diagonal_lmi(lmis):
    sizes = [S0.shape[0] for S0, _ in lmis]
    n = sum(sizes)
    dim = lmis[0][1].shape[0]
    S0 = np.zeros((n, n))
    B = np.zeros((dim, n, n))
    o = 0
    for (S0j, Bj), m in zip(lmis, sizes):
        S0[o:o + m, o:o + m] = S0j
        B[:, o:o + m, o:o + m] = Bj
        o += m
    p, r, c = np.nonzero(B)
    ptr = np.searchsorted(p, np.arange(dim + 1)).astype(np.int64)
    return S0, ptr, r.astype(np.int64), c.astype(np.int64), B[p, r, c]


def solve_psd_concave(problem: PSDConcaveProblem, tol: float = 1e-6, max_newton: int = 400,
                      t0: float = 1.0, mu: float = 20.0, compiled: bool = True) -> SolverResult:
    """Barrier method with ``-log det`` terms for the PSD blocks.

    With a :class:`LogSumObjective` a compiled loop is used unless
    ``compiled=False``: blocks given as :class:`HermitianLMI` are handled in
    complex arithmetic, otherwise they are merged into one block-diagonal LMI.
    """
    if problem.barrier(problem.x0) is None:
        raise NotStrictlyFeasible("x0 is not in the interior of the PSD/trace constraints")
    obj = problem.objective
    if isinstance(obj, LogSumObjective) and compiled and problem.hermitian:
        x, steps, t, stationarity, ok = _herm_barrier(
            obj.G, obj.offset, obj.c, *_pack_hermitian(problem.hermitian), problem.C, problem.d,
            problem.x0, float(t0), float(mu), float(tol), int(max_newton))
        if not ok:
            raise MaxIterations(f"barrier solver exceeded {max_newton} Newton steps")
        return SolverResult(x=x, value=obj(x)[0], kkt_residual=max(1.0 / t, stationarity),
                            newton_steps=steps, t=t)
    if isinstance(obj, LogSumObjective) and compiled and problem.lmis:
        S0, ptr, ri, ci, vals = _block_diagonal_lmi(problem.lmis)
        x, steps, t, stationarity, ok = _psd_barrier(
            obj.G, obj.offset, obj.c, S0, ptr, ri, ci, vals, problem.C, problem.d, problem.x0,
            float(t0), float(mu), float(tol), int(max_newton))
        if not ok:
            raise MaxIterations(f"barrier solver exceeded {max_newton} Newton steps")
        return SolverResult(x=x, value=obj(x)[0], kkt_residual=max(1.0 / t, stationarity),
                            newton_steps=steps, t=t)
    return _barrier_path(problem.objective, problem.barrier, problem.nu, problem.x0,
                         tol, t0, mu, max_newton)


class LiftedParametrization:
    """Real coordinates for a unit-diagonal Hermitian ``W`` and a vector ``wbar``.

    ``x = [Re W(n,j), Im W(n,j) for n > j; Re wbar; Im wbar]`` with the
    strictly-lower-triangular pairs in ``numpy.tril_indices`` order. The unit
    diagonal and Hermitian symmetry hold by construction.
    """

    def __init__(self, N: int):
        self.N = N
        self.rows, self.cols = np.tril_indices(N, -1)
        self.npairs = self.rows.size
        self.dim = 2 * self.npairs + 2 * N
        p = np.arange(self.npairs)
        q = np.arange(N)
        off = 2 * self.npairs
        self.schur_hlmi = HermitianLMI(
            S0=np.eye(N + 1),
            rows=np.concatenate([self.rows, q]),
            cols=np.concatenate([self.cols, np.full(N, N)]),
            re_idx=np.concatenate([p, off + q]),
            im_idx=np.concatenate([self.npairs + p, off + N + q]),
        )
        self.w_hlmi = HermitianLMI(S0=np.eye(N), rows=self.rows, cols=self.cols,
                                   re_idx=p, im_idx=self.npairs + p)
        self.schur_basis = self.schur_hlmi.basis(self.dim)
        self.schur_const = np.eye(N + 1, dtype=complex)
        self.schur_lmi = self.schur_hlmi.realified(self.dim)
        self.w_lmi = self.w_hlmi.realified(self.dim)

    def pack(self, W, wbar) -> np.ndarray:
        W = np.asarray(W)
        low = W[self.rows, self.cols]
        wbar = np.asarray(wbar)
        return np.concatenate([low.real, low.imag, wbar.real, wbar.imag])

    def unpack(self, x) -> tuple[np.ndarray, np.ndarray]:
        S = self.schur_const + np.tensordot(x, self.schur_basis, axes=1)
        return S[: self.N, : self.N], S[: self.N, self.N].copy()

    def trace_form(self, A) -> tuple[np.ndarray, float]:
        """Coefficients ``(c, c0)`` with ``Re Tr(W(x) A) = c @ x + c0``."""
        A = np.asarray(A)
        a_jn = A[self.cols, self.rows]
        a_nj = A[self.rows, self.cols]
        c = np.concatenate([(a_jn + a_nj).real, (1j * (a_jn - a_nj)).real, np.zeros(2 * self.N)])
        return c, float(np.trace(A).real)
