"""Physical-layer and utility formulas shared by every solver.

All channel math lives here: pathloss/shadowing gains, Shannon rates for the
cellular uplink and the D2D links, the logarithmic satisfaction curve with its
tangent extension below the domain floor, and the per-channel interference
budget that turns the QoS margin into a linear constraint.

Unit conventions
----------------
* distances in metres, bandwidth in Hz
* transmit/noise power as flat spectral densities, linear mW/Hz internally,
  dBm/Hz in configuration
* rates in Mbit/s at the utility boundary (the curve's constants assume Mbps)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

__all__ = [
    "SystemParams",
    "UtilityCurve",
    "db_to_linear",
    "dbm_per_hz_to_mw_per_hz",
    "channel_gain",
    "utility",
    "utility_inv",
    "rate_cellular_clean",
    "rate_cellular_interfered",
    "rate_d2d",
    "interference_budget",
]

MBPS = 1e6  # bit/s per Mbit/s

# Links shorter than the pathloss reference distance are rejected or
# re-sampled by the scenario generator.
MIN_LINK_DIST_M = 1.0


def db_to_linear(value_db):
    """Convert a dB quantity to linear scale."""
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def dbm_per_hz_to_mw_per_hz(density_dbm_hz: float) -> float:
    """Convert a power spectral density from dBm/Hz to linear mW/Hz."""
    return 10.0 ** (density_dbm_hz / 10.0)


@dataclass(frozen=True)
class UtilityCurve:
    """Concave satisfaction of a rate in Mbps, with a tangent tail.

    The log branch ``offset + scale*ln(r - floor)`` is undefined at low
    rates, so below ``knot = floor + eps`` the curve continues along the
    tangent at the knot.  The result is strictly increasing, concave, and
    C1 everywhere, which keeps payoffs finite for idle or starving users.
    """

    offset: float = 0.16
    scale: float = 0.8
    floor_mbps: float = 0.3
    eps_mbps: float = 0.001

    @property
    def knot_mbps(self) -> float:
        return self.floor_mbps + self.eps_mbps

    @property
    def knot_value(self) -> float:
        return self.offset + self.scale * math.log(self.eps_mbps)

    @property
    def knot_slope(self) -> float:
        return self.scale / self.eps_mbps

    def value(self, r_mbps):
        """Utility of a rate (scalar or array), tangent-extended below the knot."""
        r = np.asarray(r_mbps, dtype=float)
        if np.any(r < 0):
            raise ValueError("rate must be nonnegative")
        above = r > self.knot_mbps
        safe = np.where(above, r - self.floor_mbps, 1.0)
        log_branch = self.offset + self.scale * np.log(safe)
        lin_branch = self.knot_value + self.knot_slope * (r - self.knot_mbps)
        out = np.where(above, log_branch, lin_branch)
        return float(out) if np.isscalar(r_mbps) else out

    def inverse(self, u):
        """Exact inverse of :meth:`value` on both branches (total function)."""
        uu = np.asarray(u, dtype=float)
        on_log = uu > self.knot_value
        log_branch = self.floor_mbps + np.exp((uu - self.offset) / self.scale)
        lin_branch = self.knot_mbps + (uu - self.knot_value) / self.knot_slope
        out = np.where(on_log, log_branch, lin_branch)
        return float(out) if np.isscalar(u) else out

    def slope(self, r_mbps):
        """Marginal utility dU/dr; constant at ``knot_slope`` below the knot."""
        r = np.asarray(r_mbps, dtype=float)
        above = r > self.knot_mbps
        safe = np.where(above, r - self.floor_mbps, 1.0)
        out = np.where(above, self.scale / safe, self.knot_slope)
        return float(out) if np.isscalar(r_mbps) else out

    def value_at_zero(self) -> float:
        """Payoff of an idle user (rate 0)."""
        return self.knot_value - self.knot_slope * self.knot_mbps


_DEFAULT_CURVE = UtilityCurve()


@dataclass(frozen=True)
class SystemParams:
    """All physical and algorithmic constants of one scenario.

    Defaults follow the single-cell simulation setup (500 m cell, 5 MHz
    uplink, pathloss exponent 4 with 24 dB constant, 8/6 dB shadowing,
    QoS margin 0.5) at desk scale: 20 cellular users and 10 D2D pairs.
    Transmit powers are flat densities over the transmitter's own channel:
    23 dBm in a 250 kHz channel for cellular (-31 dBm/Hz) and 13 dBm for
    D2D (-41 dBm/Hz).  Spreading the same powers over the full band
    instead starves cell-edge users below the utility floor in most drops.
    """

    cell_radius_m: float = 500.0
    cluster_radius_m: float = 100.0
    d2d_max_dist_m: float = 20.0
    n_cellular: int = 20
    n_d2d: int = 10
    total_bandwidth_hz: float = 5e6
    noise_density_dbm_hz: float = -174.0
    pathloss_exp: float = 4.0
    pathloss_const_db: float = 24.0
    shadow_sigma_cell_db: float = 8.0
    shadow_sigma_d2d_db: float = 6.0
    p_cell_density_dbm_hz: float = -31.0
    p_d2d_density_dbm_hz: float = -41.0
    qos_margin_beta: float = 0.5
    utility_floor_mbps: float = 0.3
    utility_eps_mbps: float = 0.001

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("cluster_radius_m", self.cluster_radius_m),
            ("d2d_max_dist_m", self.d2d_max_dist_m),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("pathloss_exp", self.pathloss_exp),
            ("utility_eps_mbps", self.utility_eps_mbps),
            ("utility_floor_mbps", self.utility_floor_mbps),
        ]
        for name, value in positive:
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.n_cellular < 1 or self.n_d2d < 1:
            raise ValueError("need n_cellular >= 1 and n_d2d >= 1")
        if self.qos_margin_beta < 0:
            raise ValueError("qos_margin_beta must be nonnegative")
        if self.cluster_radius_m >= self.cell_radius_m:
            raise ValueError("cluster must fit strictly inside the cell")
        if self.d2d_max_dist_m <= MIN_LINK_DIST_M:
            raise ValueError(
                f"d2d_max_dist_m must exceed the {MIN_LINK_DIST_M} m reference distance"
            )

    # linear-scale densities, mW/Hz
    @property
    def noise_density_mw_hz(self) -> float:
        return dbm_per_hz_to_mw_per_hz(self.noise_density_dbm_hz)

    @property
    def p_cell_density_mw_hz(self) -> float:
        return dbm_per_hz_to_mw_per_hz(self.p_cell_density_dbm_hz)

    @property
    def p_d2d_density_mw_hz(self) -> float:
        return dbm_per_hz_to_mw_per_hz(self.p_d2d_density_dbm_hz)

    @property
    def utility_curve(self) -> UtilityCurve:
        return UtilityCurve(
            floor_mbps=self.utility_floor_mbps, eps_mbps=self.utility_eps_mbps
        )

    def replace(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)

    @classmethod
    def paper_scale(cls, n_d2d: int = 25) -> "SystemParams":
        """Full-scale preset: 50 cellular users, 20-50 D2D pairs."""
        return cls(n_cellular=50, n_d2d=n_d2d)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def channel_gain(k_db, alpha, dist_m, shadow_db=0.0):
    """Linear channel gain: pathloss constant, power-law decay, shadowing.

    gain = 10**(-k_db/10) * dist**(-alpha) * 10**(shadow_db/10)

    Parameters
    ----------
    k_db : float
        Attenuation at 1 m, in dB.
    alpha : float
        Pathloss exponent.
    dist_m : float or ndarray
        Link distance in metres, strictly positive.
    shadow_db : float or ndarray
        Log-normal shadowing sample in dB (0 disables shadowing).
    """
    d = np.asarray(dist_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be strictly positive")
    out = 10.0 ** (-k_db / 10.0) * d ** (-alpha) * 10.0 ** (np.asarray(shadow_db) / 10.0)
    return float(out) if np.isscalar(dist_m) and np.isscalar(shadow_db) else out


def utility(r_mbps, curve: UtilityCurve = _DEFAULT_CURVE):
    """Satisfaction of a rate in Mbps; see :class:`UtilityCurve`."""
    return curve.value(r_mbps)


def utility_inv(u, curve: UtilityCurve = _DEFAULT_CURVE):
    """Rate in Mbps achieving utility ``u``; exact inverse of :func:`utility`."""
    return curve.inverse(u)


def rate_cellular_clean(w_hz, p_c_density, g_c, p_n_density):
    """Interference-free uplink rate in Mbps: W*log2(1 + P_C*g_C/P_N)."""
    snr = p_c_density * g_c / p_n_density
    return w_hz * np.log2(1.0 + snr) / MBPS


def rate_cellular_interfered(w_hz, p_c_density, g_c, interference_density, p_n_density):
    """Uplink rate in Mbps with aggregate D2D interference at the BS."""
    interference_density = np.asarray(interference_density, dtype=float)
    if np.any(interference_density < 0):
        raise ValueError("interference density must be nonnegative")
    sinr = p_c_density * g_c / (interference_density + p_n_density)
    out = w_hz * np.log2(1.0 + sinr) / MBPS
    return float(out) if out.ndim == 0 else out


def rate_d2d(w_hz, p_d2d_density, g_d2d, p_c_density, g_c2d, p_n_density):
    """D2D link rate in Mbps under cross interference from the channel owner."""
    sinr = p_d2d_density * g_d2d / (p_c_density * g_c2d + p_n_density)
    return w_hz * np.log2(1.0 + sinr) / MBPS


def interference_budget(
    w_hz,
    p_c_density,
    g_c,
    p_n_density,
    r_c_clean_mbps,
    qos_margin_beta,
    curve: UtilityCurve = _DEFAULT_CURVE,
):
    """Aggregate D2D interference density (mW/Hz) a channel can absorb.

    The owner may lose at most ``qos_margin_beta`` of utility.  Inverting
    the rate at the lowest acceptable utility gives the tolerable
    interference-plus-noise level; noise is subtracted and the result
    clamped at zero so a zero margin yields a zero budget exactly.
    Plugging the returned budget back into the interfered rate reproduces a
    utility drop of exactly ``qos_margin_beta`` whenever the budget is
    positive.
    """
    w = np.asarray(w_hz, dtype=float)
    if np.any(w <= 0):
        raise ValueError("bandwidth must be positive")
    if qos_margin_beta == 0.0:
        zeros = np.zeros_like(w)
        return 0.0 if np.isscalar(w_hz) else zeros
    r_min_mbps = curve.inverse(curve.value(r_c_clean_mbps) - qos_margin_beta)
    bits_per_hz = np.asarray(r_min_mbps) * MBPS / w
    denom = np.expm1(bits_per_hz * math.log(2.0))
    raw = p_c_density * g_c / denom - p_n_density
    out = np.maximum(raw, 0.0)
    return float(out) if np.isscalar(w_hz) else out
