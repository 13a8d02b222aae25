"""Cellular bandwidth split and the per-drop rate table.

The uplink is fully loaded: one channel per cellular user, no spare
spectrum.  Bandwidth is divided by water-filling of utilities (equal
marginal utility per Hz across users), which has a closed form for the
logarithmic curve.  The resulting table of channel bandwidths, clean rates,
D2D rate matrix, interference coefficients, and interference budgets is the
sole input every solver needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    MBPS,
    SystemParams,
    UtilityCurve,
    interference_budget,
    rate_cellular_clean,
    rate_d2d,
)
from .scenario import LinkGains

__all__ = [
    "BaselineInfeasibleError",
    "ChannelAlloc",
    "RateTable",
    "clean_spectral_efficiency",
    "waterfill_bandwidth",
    "build_rate_table",
]


class BaselineInfeasibleError(RuntimeError):
    """Raised when the cell cannot lift every user above the utility floor."""


@dataclass(frozen=True)
class ChannelAlloc:
    """Water-filling result: per-user bandwidth and the water level."""

    w_hz: np.ndarray
    lam: float  # common marginal utility, per Mbps


@dataclass(frozen=True)
class RateTable:
    """Everything a solver needs about one drop.

    w_hz[j]      channel bandwidths (Hz)
    r_c[j]       clean cellular rates (Mbps)
    R[i][j]      rate of pair i when fully reusing channel j (Mbps)
    h[i]         interference coefficient of pair i at the BS (mW/Hz)
    budget[j]    interference budget of channel j (mW/Hz)
    """

    w_hz: np.ndarray
    r_c: np.ndarray
    R: np.ndarray
    h: np.ndarray
    budget: np.ndarray
    curve: UtilityCurve = UtilityCurve()

    @property
    def n_pairs(self) -> int:
        return self.R.shape[0]

    @property
    def n_channels(self) -> int:
        return self.R.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "w_hz": self.w_hz.tolist(),
            "r_c": self.r_c.tolist(),
            "R": self.R.tolist(),
            "h": self.h.tolist(),
            "budget": self.budget.tolist(),
            "curve": {
                "offset": self.curve.offset,
                "scale": self.curve.scale,
                "floor_mbps": self.curve.floor_mbps,
                "eps_mbps": self.curve.eps_mbps,
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RateTable":
        return cls(
            w_hz=np.asarray(d["w_hz"], dtype=float),
            r_c=np.asarray(d["r_c"], dtype=float),
            R=np.asarray(d["R"], dtype=float),
            h=np.asarray(d["h"], dtype=float),
            budget=np.asarray(d["budget"], dtype=float),
            curve=UtilityCurve(**d.get("curve", {})),
        )


def clean_spectral_efficiency(gains: LinkGains, params: SystemParams) -> np.ndarray:
    """Per-user clean spectral efficiency in Mbps/Hz."""
    snr = params.p_cell_density_mw_hz * gains.g_c / params.noise_density_mw_hz
    return np.log2(1.0 + snr) / MBPS


def waterfill_bandwidth(gains: LinkGains, params: SystemParams) -> ChannelAlloc:
    """Split the uplink so every user has the same marginal utility.

    With utility ``a + b*ln(r - r0)`` and rate ``r_j = W_j c_j``, equal
    marginal utility ``b c_j / (W_j c_j - r0) = lam`` gives
    ``W_j = r0/c_j + b/lam`` and the budget constraint fixes the level:
    ``lam = b N / (W_total - r0 * sum 1/c_j)``.

    Raises
    ------
    BaselineInfeasibleError
        If the total bandwidth cannot clear the utility floor for everyone
        (possible under extreme shadowing); such drops are discarded.
    """
    curve = params.utility_curve
    c = clean_spectral_efficiency(gains, params)
    reserved = curve.floor_mbps * np.sum(1.0 / c)
    if params.total_bandwidth_hz <= reserved:
        raise BaselineInfeasibleError(
            f"floor needs {reserved:.3e} Hz of {params.total_bandwidth_hz:.3e} Hz"
        )
    lam = curve.scale * len(c) / (params.total_bandwidth_hz - reserved)
    w = curve.floor_mbps / c + curve.scale / lam
    return ChannelAlloc(w_hz=w, lam=float(lam))


def build_rate_table(
    alloc: ChannelAlloc, gains: LinkGains, params: SystemParams
) -> RateTable:
    """Assemble the full rate table for one drop."""
    p_c = params.p_cell_density_mw_hz
    p_d = params.p_d2d_density_mw_hz
    p_n = params.noise_density_mw_hz
    curve = params.utility_curve
    w = alloc.w_hz

    r_c = rate_cellular_clean(w, p_c, gains.g_c, p_n)
    R = rate_d2d(w[None, :], p_d, gains.g_d2d[:, None], p_c, gains.g_c2d, p_n)
    h = p_d * gains.g_d2c
    budget = interference_budget(
        w, p_c, gains.g_c, p_n, r_c, params.qos_margin_beta, curve
    )
    return RateTable(
        w_hz=w, r_c=r_c, R=np.atleast_2d(R), h=h, budget=np.asarray(budget), curve=curve
    )
