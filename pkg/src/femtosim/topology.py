"""Spatial layout of the femtocell deployment.

The default deployment puts the reference FAP at the origin, surrounded by
two concentric rings of neighbor FAPs: tier 1 one FAP spacing away and
tier 2 two spacings away.  The macro BS sits outdoors at a fixed height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError
from .radio import RadioConfig

__all__ = [
    "Position",
    "FapSite",
    "Layout",
    "LayoutSpec",
    "generate_default_layout",
    "place_reference_ue",
    "distance",
    "horizontal_distance",
    "walls_between",
    "UE_HEIGHT_M",
]

UE_HEIGHT_M = 1.5


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise DomainError(f"non-finite coordinate in {self!r}")

    def moved(self, dx: float, dy: float, dz: float = 0.0) -> "Position":
        return Position(self.x + dx, self.y + dy, self.z + dz)


@dataclass(frozen=True)
class FapSite:
    id: str
    pos: Position
    tier: int
    walls_to_reference_area: int
    radius_m: float = 10.0

    def __post_init__(self):
        if self.tier < 0 or self.walls_to_reference_area < 0:
            raise ConfigError(f"site {self.id}: tier and walls must be non-negative")
        if self.tier == 0 and self.walls_to_reference_area != 0:
            raise ConfigError(f"site {self.id}: the reference site has no walls to itself")
        if not self.radius_m > 0:
            raise ConfigError(f"site {self.id}: coverage radius must be positive")


@dataclass(frozen=True)
class LayoutSpec:
    """Knobs for :func:`generate_default_layout`."""

    tier1_count: int = 12
    tier2_count: int = 18
    fap_spacing: float = 20.0
    cell_radius: float = 10.0
    fap_height: float = 2.0
    macro_height: float = 100.0
    tier1_walls: int = 1
    tier2_walls: int = 2

    def __post_init__(self):
        if self.tier1_count < 0 or self.tier2_count < 0:
            raise ConfigError("tier populations must be non-negative")
        if not self.fap_spacing > 0 or not self.cell_radius > 0:
            raise ConfigError("fap_spacing and cell_radius must be positive")
        if self.cell_radius > self.fap_spacing:
            raise ConfigError("cell_radius must not exceed fap_spacing")
        if self.tier1_walls < 0 or self.tier2_walls < 0:
            raise ConfigError("wall counts must be non-negative")
        if not self.macro_height > UE_HEIGHT_M:
            raise ConfigError(f"macro_height must exceed the UE height {UE_HEIGHT_M} m")


@dataclass(frozen=True)
class Layout:
    reference: FapSite
    neighbors: tuple[FapSite, ...]
    macro_pos: Position
    fap_height_m: float = 2.0
    fap_spacing_m: float = 20.0
    sites_by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [self.reference.id] + [s.id for s in self.neighbors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate FAP ids in layout: {ids}")
        if self.reference.tier != 0:
            raise ConfigError("the reference FAP must be tier 0")
        for s in self.neighbors:
            if s.tier == 0:
                raise ConfigError(f"neighbor {s.id} cannot be tier 0")
        object.__setattr__(self, "sites_by_id", {s.id: s for s in self.sites})

    @property
    def sites(self) -> tuple[FapSite, ...]:
        return (self.reference,) + tuple(self.neighbors)

    def site(self, fap_id: str) -> FapSite:
        try:
            return self.sites_by_id[fap_id]
        except KeyError:
            raise ConfigError(f"unknown FAP id {fap_id!r}") from None


def generate_default_layout(cfg: RadioConfig, spec: LayoutSpec = LayoutSpec()) -> Layout:
    """Reference FAP plus two evenly spaced neighbor rings.

    The macro BS is placed on the +x axis at the horizontal offset that
    makes its 3D distance to the UE plane above the reference FAP equal to
    ``cfg.macro_distance``.
    """
    h = spec.fap_height
    reference = FapSite("fap0", Position(0.0, 0.0, h), 0, 0, spec.cell_radius)
    neighbors = []
    rings = ((1, spec.tier1_count, spec.fap_spacing, spec.tier1_walls),
             (2, spec.tier2_count, 2.0 * spec.fap_spacing, spec.tier2_walls))
    for tier, count, r, walls in rings:
        for k in range(count):
            theta = 2.0 * math.pi * k / count
            pos = Position(r * math.cos(theta), r * math.sin(theta), h)
            neighbors.append(FapSite(f"fap{len(neighbors) + 1}", pos, tier, walls,
                                     spec.cell_radius))
    dz = spec.macro_height - UE_HEIGHT_M
    if cfg.macro_distance < dz:
        raise ConfigError(
            f"macro_distance {cfg.macro_distance} m is shorter than the macro height "
            f"above the UE plane ({dz} m)")
    d_horiz = math.sqrt(cfg.macro_distance ** 2 - dz ** 2)
    return Layout(reference, tuple(neighbors), Position(d_horiz, 0.0, spec.macro_height),
                  fap_height_m=h, fap_spacing_m=spec.fap_spacing)


def place_reference_ue(layout: Layout, d_m: float) -> Position:
    """UE position on the +x axis, ``d_m`` from the reference FAP center."""
    radius = layout.reference.radius_m
    if not 0 < d_m <= radius:
        raise DomainError(f"UE distance must lie in (0, {radius}] m, got {d_m!r}")
    ref = layout.reference.pos
    return Position(ref.x + d_m, ref.y, UE_HEIGHT_M)


def distance(a: Position, b: Position) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def horizontal_distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def walls_between(pos: Position, site: FapSite, spacing_m: float) -> int:
    """Interior walls between a UE and a FAP.

    Zero inside the FAP's coverage disc, then one more wall per FAP spacing
    travelled beyond its edge.  For a UE inside the reference cell of the
    default layout this gives the tier wall counts exactly.
    """
    d = horizontal_distance(pos, site.pos)
    if d <= site.radius_m:
        return 0
    return math.ceil((d - site.radius_m) / spacing_m)
