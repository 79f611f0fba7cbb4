"""Seeded random channel realizations.

The IRS-BS link is Rician with a rank-one unit-modulus LOS part, the
user-IRS links are Rayleigh. Both carry log-distance path loss
``offset + slope*log10(d)`` dB with distances drawn uniformly per realization.

Random streams come from numpy's PCG64 seeded through ``SeedSequence``: trial
``t`` of master seed ``s`` uses ``SeedSequence(s, spawn_key=(t,))``, so a trial's
draws do not depend on which other trials run or in which order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_model import ChannelSet, SystemConfig


@dataclass(frozen=True)
class ChannelParams:
    rician_k_factor: float = 5.0
    pathloss_bs_irs: tuple[float, float] = (30.0, 24.0)
    pathloss_irs_user: tuple[float, float] = (30.0, 28.0)
    d_bs_irs_range: tuple[float, float] = (20.0, 50.0)
    d_irs_user_range: tuple[float, float] = (20.0, 100.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.rician_k_factor < 0:
            raise ValueError("Rician K-factor must be non-negative")
        for name in ("pathloss_bs_irs", "pathloss_irs_user"):
            if getattr(self, name)[1] <= 0:
                raise ValueError(f"{name} slope must be positive")
        for name in ("d_bs_irs_range", "d_irs_user_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial of a seeded experiment."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.PCG64(ss))


def path_loss_linear(offset_db: float, slope: float, d: float) -> float:
    """Power attenuation (amplitude squared) of the log-distance model."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return 10.0 ** (-(offset_db + slope * np.log10(d)) / 10.0)


def sample_rayleigh(shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _los_matrix(rows, cols, rng):
    a_rx = np.exp(1j * rng.uniform(0.0, 2 * np.pi, rows))
    a_tx = np.exp(1j * rng.uniform(0.0, 2 * np.pi, cols))
    return np.outer(a_rx, a_tx.conj())


def sample_rician(rows: int, cols: int, k_factor: float, rng: np.random.Generator) -> np.ndarray:
    if k_factor < 0:
        raise ValueError("Rician K-factor must be non-negative")
    los = _los_matrix(rows, cols, rng)
    nlos = sample_rayleigh((rows, cols), rng)
    return np.sqrt(k_factor / (1 + k_factor)) * los + np.sqrt(1 / (1 + k_factor)) * nlos


def generate_realization(config: SystemConfig, params: ChannelParams,
                         rng: np.random.Generator, max_dims=None) -> ChannelSet:
    """Draw one channel realization for ``config``.

    With ``max_dims=(M_max, N_max)`` the draw is made at the larger size and
    cropped, so realizations that differ only in M or N share the overlapping
    entries when fed the same generator state.
    """
    K, M, N = config.num_users, config.num_bs_antennas, config.num_irs_elements
    M_draw, N_draw = max_dims if max_dims is not None else (M, N)
    if M_draw < M or N_draw < N:
        raise ValueError("max_dims must not be smaller than the config dimensions")

    d_bs_irs = float(rng.uniform(*params.d_bs_irs_range))
    d_users = rng.uniform(*params.d_irs_user_range, size=K)

    G_small = sample_rician(M_draw, N_draw, params.rician_k_factor, rng)[:M, :N]
    h_small = sample_rayleigh((N_draw, K), rng)[:N]

    pl_bs = path_loss_linear(*params.pathloss_bs_irs, d_bs_irs)
    pl_users = np.array([path_loss_linear(*params.pathloss_irs_user, d) for d in d_users])
    return ChannelSet(
        G=np.sqrt(pl_bs) * G_small,
        h=h_small * np.sqrt(pl_users)[None, :],
        d_bs_irs=d_bs_irs,
        d_irs_user=d_users,
    )


def _pack(z: np.ndarray):
    return {"shape": list(z.shape), "re": z.real.ravel().tolist(), "im": z.imag.ravel().tolist()}


def _unpack(obj) -> np.ndarray:
    re = np.array(obj["re"], dtype=float)
    im = np.array(obj["im"], dtype=float)
    return (re + 1j * im).reshape(obj["shape"])


def save_channels(channels: ChannelSet, path) -> None:
    """Write a realization as JSON with complex entries split into re/im lists."""
    doc = {
        "format": "irs_ee.ChannelSet",
        "version": 1,
        "G": _pack(channels.G),
        "h": _pack(channels.h),
        "d_bs_irs": channels.d_bs_irs,
        "d_irs_user": channels.d_irs_user.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_channels(path) -> ChannelSet:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "irs_ee.ChannelSet":
        raise ValueError(f"{path} is not a ChannelSet fixture")
    return ChannelSet(
        G=_unpack(doc["G"]),
        h=_unpack(doc["h"]),
        d_bs_irs=doc["d_bs_irs"],
        d_irs_user=np.array(doc["d_irs_user"]),
    )
