"""Indoor femtocell link budget: path loss, received power, SNIR and capacity.

All power arithmetic is done in linear mW; dB values appear only at the
function boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError

__all__ = [
    "RadioConfig",
    "LinkBudget",
    "InterferenceBreakdown",
    "path_loss_reference",
    "path_loss_neighbor",
    "received_power",
    "link_budget",
    "snir_linear",
    "capacity",
    "db_from_linear",
    "linear_from_db",
    "free_space_loss",
    "macro_interference",
    "macro_received_power",
]

PATH_LOSS_OFFSET_DB = -28.0
WALL_LOSS_COEFF_DB = 4.0
FSPL_CONST_DB = 32.44


@dataclass(frozen=True)
class RadioConfig:
    """Propagation constants and handover thresholds.

    Powers are in mW, frequency in MHz, thresholds in dB.
    """

    f_ue: float = 1800.0
    n_coeff: float = 30.0
    p0_fap: float = 15.0
    p_macro: float = 1.5e6
    noise_power: float = 6.9882e-7
    bandwidth_w: float = 10e6
    gamma_inner: float = 12.55
    gamma_outer: float = 8.21
    macro_coupling: float = 0.0
    beacon_duty: float = 0.0
    macro_distance: float = 300.0
    macro_wall_loss: float = 10.0

    def __post_init__(self):
        for name in ("f_ue", "n_coeff", "p0_fap", "p_macro", "noise_power",
                     "bandwidth_w", "macro_distance"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("macro_coupling", "beacon_duty"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
        if not self.gamma_outer < self.gamma_inner:
            raise ConfigError(
                f"gamma_outer ({self.gamma_outer}) must be below gamma_inner ({self.gamma_inner})")
        if not math.isfinite(self.macro_wall_loss):
            raise ConfigError("macro_wall_loss must be finite")

    @property
    def gamma_inner_linear(self) -> float:
        return linear_from_db(self.gamma_inner)

    @property
    def gamma_outer_linear(self) -> float:
        return linear_from_db(self.gamma_outer)


@dataclass(frozen=True)
class LinkBudget:
    path_loss_db: float
    rx_power_mw: float


@dataclass(frozen=True)
class InterferenceBreakdown:
    """Interference power at the UE, split by origin (all mW)."""

    i_active_mw: float = 0.0
    i_idle_mw: float = 0.0
    i_macro_mw: float = 0.0

    def __post_init__(self):
        if min(self.i_active_mw, self.i_idle_mw, self.i_macro_mw) < 0:
            raise DomainError("interference powers must be non-negative")

    @property
    def total_mw(self) -> float:
        return self.i_active_mw + self.i_idle_mw + self.i_macro_mw


def _check_link_args(f_mhz: float, d_m: float) -> None:
    if not f_mhz > 0:
        raise DomainError(f"frequency must be positive, got {f_mhz!r} MHz")
    if not d_m > 0:
        raise DomainError(f"distance must be positive, got {d_m!r} m")


def path_loss_reference(f_mhz: float, d_m: float, n_coeff: float) -> float:
    """Path loss (dB) from the serving FAP to a UE in the same room."""
    _check_link_args(f_mhz, d_m)
    if not n_coeff > 0:
        raise DomainError(f"path-loss coefficient must be positive, got {n_coeff!r}")
    return 20.0 * math.log10(f_mhz) + n_coeff * math.log10(d_m) + PATH_LOSS_OFFSET_DB


def path_loss_neighbor(f_mhz: float, d_m: float, n_coeff: float, walls: int) -> float:
    """Path loss (dB) across ``walls`` interior walls.

    Each wall count contributes ``4 * walls**2`` dB on top of the same-room
    loss, so ``walls=0`` reproduces :func:`path_loss_reference`.
    """
    if walls < 0 or int(walls) != walls:
        raise DomainError(f"wall count must be a non-negative integer, got {walls!r}")
    return path_loss_reference(f_mhz, d_m, n_coeff) + WALL_LOSS_COEFF_DB * walls * walls


def received_power(p0_mw: float, loss_db: float) -> float:
    if not p0_mw > 0:
        raise DomainError(f"source power must be positive, got {p0_mw!r} mW")
    return p0_mw * 10.0 ** (-loss_db / 10.0)


def link_budget(cfg: RadioConfig, d_m: float, walls: int = 0) -> LinkBudget:
    loss = path_loss_neighbor(cfg.f_ue, d_m, cfg.n_coeff, walls)
    return LinkBudget(loss, received_power(cfg.p0_fap, loss))


def snir_linear(rx_power_mw: float, interference: InterferenceBreakdown,
                noise_mw: float) -> float:
    """Signal over interference-plus-noise, as a linear ratio.

    The same expression serves the reference cell and any neighbor cell;
    only the interferer set folded into ``interference`` differs.
    """
    if not noise_mw > 0:
        raise DomainError(f"noise power must be positive, got {noise_mw!r} mW")
    if rx_power_mw < 0:
        raise DomainError(f"received power must be non-negative, got {rx_power_mw!r} mW")
    return rx_power_mw / (interference.i_active_mw + interference.i_idle_mw
                          + interference.i_macro_mw + noise_mw)


def capacity(bandwidth_hz: float, snir: float) -> float:
    """Shannon capacity in bit/s for a linear SNIR."""
    if not bandwidth_hz > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth_hz!r} Hz")
    if snir < 0:
        raise DomainError(f"SNIR must be non-negative, got {snir!r}")
    return bandwidth_hz * math.log2(1.0 + snir)


def db_from_linear(x: float) -> float:
    if not x > 0:
        raise DomainError(f"cannot express non-positive ratio {x!r} in dB")
    return 10.0 * math.log10(x)


def linear_from_db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def free_space_loss(d_m: float, f_mhz: float) -> float:
    """Free-space path loss in dB (distance in m, frequency in MHz)."""
    _check_link_args(f_mhz, d_m)
    return FSPL_CONST_DB + 20.0 * math.log10(d_m / 1000.0) + 20.0 * math.log10(f_mhz)


def macro_received_power(cfg: RadioConfig) -> float:
    """Macro BS power reaching the indoor UE plane, mW (no coupling applied)."""
    loss = free_space_loss(cfg.macro_distance, cfg.f_ue) + cfg.macro_wall_loss
    return received_power(cfg.p_macro, loss)


def macro_interference(cfg: RadioConfig) -> float:
    """Co-channel macro interference at an indoor UE, mW.

    ``macro_coupling`` is the fraction of macro power landing in the femto
    band; 0 means the tiers are fully separated by frequency reuse.
    """
    if cfg.macro_coupling == 0.0:
        return 0.0
    return cfg.macro_coupling * macro_received_power(cfg)
