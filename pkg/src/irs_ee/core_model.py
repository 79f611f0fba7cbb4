"""System model of the IRS-assisted multi-antenna uplink.

Conventions used throughout the package:

* ``G`` is the ``(M, N)`` IRS-to-BS channel, ``h`` is ``(N, K)`` with column
  ``k`` the user-``k``-to-IRS channel.
* The IRS is described by the phase vector ``w`` with ``w_j = conj(phi_j)``,
  so the reflection matrix is ``Phi = diag(conj(w))``.
* Powers are in watts, ``V`` is ``(M, K)`` with column ``k`` the receive
  beamformer of user ``k``.
* The receiver noise is ``CN(0, N0*B*I_M)``; its power after a beamformer is
  the expectation ``N0*B*||v||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)
UNIT_MODULUS_TOL = 1e-9
FEASIBILITY_RTOL = 1e-6


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one uplink scenario.

    ``max_power`` and ``min_sinr`` are per-user arrays in W and linear units.
    ``noise_psd`` is in W/Hz.
    """

    num_users: int
    num_bs_antennas: int
    num_irs_elements: int
    max_power: np.ndarray
    min_sinr: np.ndarray
    bandwidth: float = 1e6
    noise_psd: float = float(dbm_to_watt(-174.0))
    circuit_power: float = 0.05
    amp_inefficiency: float = 0.35

    def __post_init__(self):
        K = self.num_users
        if min(K, self.num_bs_antennas, self.num_irs_elements) < 1:
            raise ValueError("K, M and N must all be >= 1")
        if self.bandwidth <= 0 or self.noise_psd <= 0 or self.circuit_power <= 0:
            raise ValueError("bandwidth, noise_psd and circuit_power must be positive")
        if self.amp_inefficiency <= 0:
            raise ValueError("amp_inefficiency must be positive")
        pmax = np.broadcast_to(np.asarray(self.max_power, dtype=float), (K,)).copy()
        gmin = np.broadcast_to(np.asarray(self.min_sinr, dtype=float), (K,)).copy()
        if np.any(pmax <= 0):
            raise ValueError("max_power must be positive")
        if np.any(gmin < 0):
            raise ValueError("min_sinr must be non-negative")
        pmax.setflags(write=False)
        gmin.setflags(write=False)
        object.__setattr__(self, "max_power", pmax)
        object.__setattr__(self, "min_sinr", gmin)

    @classmethod
    def uniform(cls, num_users=3, num_bs_antennas=4, num_irs_elements=4,
                pmax_dbm=20.0, min_rate=0.01, **kwargs) -> "SystemConfig":
        """Same power cap (dBm) and minimum rate (bit/s/Hz) for every user."""
        return cls(
            num_users=num_users,
            num_bs_antennas=num_bs_antennas,
            num_irs_elements=num_irs_elements,
            max_power=np.full(num_users, float(dbm_to_watt(pmax_dbm))),
            min_sinr=np.full(num_users, 2.0 ** min_rate - 1.0),
            **kwargs,
        )

    @property
    def noise_var(self) -> float:
        """Noise power per receive antenna, N0*B in W."""
        return self.noise_psd * self.bandwidth


@dataclass
class ChannelSet:
    G: np.ndarray
    h: np.ndarray
    d_bs_irs: float = float("nan")
    d_irs_user: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=complex)
        self.h = np.asarray(self.h, dtype=complex)
        if self.G.ndim != 2 or self.h.ndim != 2 or self.G.shape[1] != self.h.shape[0]:
            raise ValueError(f"incompatible shapes G{self.G.shape}, h{self.h.shape}")
        if not (np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.h))):
            raise ValueError("channel entries must be finite")
        self.d_irs_user = np.asarray(self.d_irs_user, dtype=float)

    @property
    def shape(self) -> tuple[int, int, int]:
        """(K, M, N)."""
        return self.h.shape[1], self.G.shape[0], self.G.shape[1]

    def check(self, config: SystemConfig) -> None:
        if self.shape != (config.num_users, config.num_bs_antennas, config.num_irs_elements):
            raise ValueError(
                f"channel dimensions (K, M, N)={self.shape} do not match the config"
            )


@dataclass
class SolutionState:
    power: np.ndarray
    beams: np.ndarray
    phases: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    ee: float
    feasible: bool
    trace: list[float] = field(default_factory=list)


def check_unit_modulus(w, tol=UNIT_MODULUS_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if w.ndim != 1:
        raise ValueError("phase vector must be one-dimensional")
    if np.any(np.abs(np.abs(w) - 1.0) > tol):
        raise ValueError("phase vector entries must have unit modulus")
    return w


def phases_from_angles(theta) -> np.ndarray:
    """Phase vector ``w`` whose reflection coefficients are ``exp(1j*theta)``."""
    return np.exp(-1j * np.asarray(theta, dtype=float))


def effective_channel(G, w, h_k) -> np.ndarray:
    """``G @ diag(conj(w)) @ h_k``.

    ``h_k`` may be a single ``(N,)`` vector or an ``(N, K)`` matrix of users.
    """
    G = np.asarray(G)
    w = np.asarray(w)
    h_k = np.asarray(h_k)
    N = G.shape[1]
    if w.shape != (N,) or h_k.shape[0] != N:
        raise ValueError(
            f"dimension mismatch: G{G.shape}, w{w.shape}, h{h_k.shape}"
        )
    if h_k.ndim == 1:
        return G @ (w.conj() * h_k)
    return G @ (w.conj()[:, None] * h_k)


def effective_channels(channels: ChannelSet, w) -> np.ndarray:
    """All cascaded channels stacked as an ``(M, K)`` matrix."""
    return effective_channel(channels.G, w, channels.h)


def noise_power(config: SystemConfig, v) -> float:
    v = np.asarray(v)
    return config.noise_var * float(np.vdot(v, v).real)


def _check_beams(beams: np.ndarray) -> None:
    if np.any(np.linalg.norm(beams, axis=0) == 0):
        raise ValueError("beamformer has an all-zero column")
    if not np.all(np.isfinite(beams)):
        raise ValueError("beamformer entries must be finite")


def cross_gains(channels: ChannelSet, w, beams) -> np.ndarray:
    """``|v_k^H hbar_i|^2`` as a ``(K, K)`` matrix indexed ``[k, i]``."""
    hbar = effective_channels(channels, w)
    return np.abs(np.asarray(beams).conj().T @ hbar) ** 2


def compute_sinr(config: SystemConfig, channels: ChannelSet, w, power, beams) -> np.ndarray:
    beams = np.asarray(beams, dtype=complex)
    power = np.asarray(power, dtype=float)
    _check_beams(beams)
    channels.check(config)
    gains = cross_gains(channels, w, beams)
    received = gains * power[None, :]
    signal = np.diag(received)
    interference = received.sum(axis=1) - signal
    noise = config.noise_var * np.sum(np.abs(beams) ** 2, axis=0)
    return signal / (interference + noise)


def rates(sinr) -> np.ndarray:
    """Spectral efficiencies ``log2(1 + sinr)`` in bit/s/Hz."""
    return np.log1p(np.asarray(sinr, dtype=float)) / LN2


def total_power(config: SystemConfig, power) -> float:
    return config.amp_inefficiency * float(np.sum(power)) + config.circuit_power


def compute_ee(config: SystemConfig, sinr, power) -> float:
    """Energy efficiency in bit/J."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be non-negative")
    return config.bandwidth * float(np.sum(rates(sinr))) / total_power(config, power)


def is_feasible(config: SystemConfig, sinr, rtol=FEASIBILITY_RTOL) -> bool:
    return bool(np.all(np.asarray(sinr) >= config.min_sinr * (1.0 - rtol)))


def hadamard_channel(v_k, G, h_i) -> np.ndarray:
    """``(v_k^H G) o h_i``, so that ``|w^H result|^2 = |v_k^H G Phi h_i|^2``."""
    v_k = np.asarray(v_k)
    G = np.asarray(G)
    h_i = np.asarray(h_i)
    if v_k.shape != (G.shape[0],) or h_i.shape != (G.shape[1],):
        raise ValueError(
            f"dimension mismatch: v{v_k.shape}, G{G.shape}, h{h_i.shape}"
        )
    return (v_k.conj() @ G) * h_i


def evaluate_state(config, channels, w, power, beams, trace=None) -> SolutionState:
    sinr = compute_sinr(config, channels, w, power, beams)
    return SolutionState(
        power=np.asarray(power, dtype=float),
        beams=np.asarray(beams, dtype=complex),
        phases=np.asarray(w, dtype=complex),
        sinr=sinr,
        rate=config.bandwidth * rates(sinr),
        ee=compute_ee(config, sinr, power),
        feasible=is_feasible(config, sinr),
        trace=list(trace) if trace is not None else [],
    )
