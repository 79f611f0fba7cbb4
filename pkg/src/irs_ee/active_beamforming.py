"""MMSE receive beamforming at the BS for fixed powers and IRS phases."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .core_model import ChannelSet, SystemConfig, effective_channels


def _loaded_covariances(config: SystemConfig, hbar: np.ndarray, power: np.ndarray):
    """Yield ``(k, R_k)`` with ``R_k = sigma^2 I + sum_{i!=k} P_i hbar_i hbar_i^H``."""
    M, K = hbar.shape
    weighted = hbar * np.sqrt(power)[None, :]
    total = weighted @ weighted.conj().T + config.noise_var * np.eye(M)
    for k in range(K):
        yield k, total - np.outer(weighted[:, k], weighted[:, k].conj())


def mmse_receiver(config: SystemConfig, channels: ChannelSet, w, power) -> np.ndarray:
    """Beamformers ``v_k = R_k^{-1} hbar_k`` stacked as columns of an ``(M, K)`` matrix."""
    power = np.asarray(power, dtype=float)
    hbar = effective_channels(channels, w)
    if np.any(np.linalg.norm(hbar, axis=0) == 0):
        raise ValueError("a user has an all-zero effective channel")
    V = np.empty_like(hbar)
    for k, R in _loaded_covariances(config, hbar, power):
        V[:, k] = linalg.cho_solve(linalg.cho_factor(R), hbar[:, k])
    return V


def mmse_output_sinr(config: SystemConfig, channels: ChannelSet, w, power) -> np.ndarray:
    """``gamma_k = P_k hbar_k^H R_k^{-1} hbar_k``."""
    power = np.asarray(power, dtype=float)
    hbar = effective_channels(channels, w)
    if np.any(np.linalg.norm(hbar, axis=0) == 0):
        raise ValueError("a user has an all-zero effective channel")
    sinr = np.empty(hbar.shape[1])
    for k, R in _loaded_covariances(config, hbar, power):
        x = linalg.cho_solve(linalg.cho_factor(R), hbar[:, k])
        sinr[k] = power[k] * float(np.vdot(hbar[:, k], x).real)
    return sinr
