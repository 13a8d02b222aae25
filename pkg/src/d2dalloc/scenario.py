"""Seeded generation of one Monte-Carlo drop: device placement and link gains.

Cellular users are uniform over the cell disk; D2D transmitters are uniform
in a randomly located cluster and each receiver is uniform in a small disk
around its transmitter.  Every random draw comes from a substream derived
from (root seed, drop index, stream tag), so drops are reproducible and
independent, and sweeps can reuse identical topologies across parameter
values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MIN_LINK_DIST_M, SystemParams, channel_gain

__all__ = ["Topology", "LinkGains", "generate_topology", "compute_link_gains"]

# stream tags for substream derivation
_STREAM_TOPOLOGY = 0
_STREAM_SHADOW_GC = 1
_STREAM_SHADOW_GDD = 2
_STREAM_SHADOW_GDC = 3
_STREAM_SHADOW_GCD = 4

_MAX_RESAMPLES = 10_000


def _stream(seed: int, drop_index: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(drop_index, tag))
    )


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """n points uniform over a disk of given radius centred at the origin."""
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass(frozen=True)
class Topology:
    """Positions of one drop, in metres relative to the BS at the origin."""

    bs_pos: np.ndarray
    cellular_pos: np.ndarray  # (n_cellular, 2)
    d2d_tx_pos: np.ndarray  # (n_d2d, 2)
    d2d_rx_pos: np.ndarray  # (n_d2d, 2)
    cluster_center: np.ndarray
    seed: int
    drop_index: int

    def to_json_dict(self) -> dict:
        return {
            "bs_pos": self.bs_pos.tolist(),
            "cellular_pos": self.cellular_pos.tolist(),
            "d2d_tx_pos": self.d2d_tx_pos.tolist(),
            "d2d_rx_pos": self.d2d_rx_pos.tolist(),
            "cluster_center": self.cluster_center.tolist(),
            "seed": int(self.seed),
            "drop_index": int(self.drop_index),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Topology":
        return cls(
            bs_pos=np.asarray(d["bs_pos"], dtype=float),
            cellular_pos=np.asarray(d["cellular_pos"], dtype=float).reshape(-1, 2),
            d2d_tx_pos=np.asarray(d["d2d_tx_pos"], dtype=float).reshape(-1, 2),
            d2d_rx_pos=np.asarray(d["d2d_rx_pos"], dtype=float).reshape(-1, 2),
            cluster_center=np.asarray(d["cluster_center"], dtype=float),
            seed=int(d["seed"]),
            drop_index=int(d["drop_index"]),
        )


@dataclass(frozen=True)
class LinkGains:
    """Linear channel gains of the four link families of one drop."""

    g_c: np.ndarray  # (n_cellular,)  cellular j -> BS
    g_d2d: np.ndarray  # (n_d2d,)       TX i -> RX i
    g_d2c: np.ndarray  # (n_d2d,)       TX i -> BS
    g_c2d: np.ndarray  # (n_d2d, n_cellular)  cellular j -> RX i

    def to_json_dict(self) -> dict:
        return {
            "g_c": self.g_c.tolist(),
            "g_d2d": self.g_d2d.tolist(),
            "g_d2c": self.g_d2c.tolist(),
            "g_c2d": self.g_c2d.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LinkGains":
        g_c2d = np.asarray(d["g_c2d"], dtype=float)
        return cls(
            g_c=np.asarray(d["g_c"], dtype=float),
            g_d2d=np.asarray(d["g_d2d"], dtype=float),
            g_d2c=np.asarray(d["g_d2c"], dtype=float),
            g_c2d=g_c2d.reshape(len(d["g_d2c"]), -1),
        )


def generate_topology(params: SystemParams, seed: int, drop_index: int = 0) -> Topology:
    """Draw one drop's geometry, deterministic in (seed, drop_index).

    Receivers are re-sampled until they land inside the cell and at least
    the pathloss reference distance away from their transmitter.
    """
    params.validate()
    rng = _stream(seed, drop_index, _STREAM_TOPOLOGY)

    cellular = _uniform_disk(rng, params.n_cellular, params.cell_radius_m)
    center = _uniform_disk(rng, 1, params.cell_radius_m - params.cluster_radius_m)[0]
    tx = center + _uniform_disk(rng, params.n_d2d, params.cluster_radius_m)

    rx = np.empty_like(tx)
    for i in range(params.n_d2d):
        for _ in range(_MAX_RESAMPLES):
            cand = tx[i] + _uniform_disk(rng, 1, params.d2d_max_dist_m)[0]
            dist = float(np.hypot(*(cand - tx[i])))
            if dist >= MIN_LINK_DIST_M and np.hypot(*cand) <= params.cell_radius_m:
                rx[i] = cand
                break
        else:
            raise RuntimeError(f"could not place RX {i} after {_MAX_RESAMPLES} tries")

    return Topology(
        bs_pos=np.zeros(2),
        cellular_pos=cellular,
        d2d_tx_pos=tx,
        d2d_rx_pos=rx,
        cluster_center=center,
        seed=seed,
        drop_index=drop_index,
    )


def compute_link_gains(topo: Topology, params: SystemParams, seed: int | None = None) -> LinkGains:
    """Gains for every link of a drop, with per-family shadowing streams.

    Shadowing is zero-mean normal in dB: the cellular sigma applies to every
    link that ends at the BS or starts at a cellular user, the D2D sigma
    only to the TX->RX link of each pair.
    """
    seed = topo.seed if seed is None else seed
    k_db, alpha = params.pathloss_const_db, params.pathloss_exp
    sig_cell, sig_d2d = params.shadow_sigma_cell_db, params.shadow_sigma_d2d_db

    d_c = np.linalg.norm(topo.cellular_pos - topo.bs_pos, axis=1)
    d_d2d = np.linalg.norm(topo.d2d_rx_pos - topo.d2d_tx_pos, axis=1)
    d_d2c = np.linalg.norm(topo.d2d_tx_pos - topo.bs_pos, axis=1)
    # (n_d2d, n_cellular): cellular j to receiver i
    d_c2d = np.linalg.norm(
        topo.cellular_pos[None, :, :] - topo.d2d_rx_pos[:, None, :], axis=2
    )

    di = topo.drop_index
    sh_c = _stream(seed, di, _STREAM_SHADOW_GC).normal(0.0, sig_cell, size=d_c.shape)
    sh_d2d = _stream(seed, di, _STREAM_SHADOW_GDD).normal(0.0, sig_d2d, size=d_d2d.shape)
    sh_d2c = _stream(seed, di, _STREAM_SHADOW_GDC).normal(0.0, sig_cell, size=d_d2c.shape)
    sh_c2d = _stream(seed, di, _STREAM_SHADOW_GCD).normal(0.0, sig_cell, size=d_c2d.shape)

    return LinkGains(
        g_c=channel_gain(k_db, alpha, d_c, sh_c),
        g_d2d=channel_gain(k_db, alpha, d_d2d, sh_d2d),
        g_d2c=channel_gain(k_db, alpha, d_d2c, sh_d2c),
        g_c2d=channel_gain(k_db, alpha, d_c2d, sh_c2d),
    )
