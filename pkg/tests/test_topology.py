import math

import pytest

from femtosim.errors import ConfigError, DomainError
from femtosim.radio import RadioConfig
from femtosim.topology import (
    UE_HEIGHT_M,
    FapSite,
    Layout,
    LayoutSpec,
    Position,
    distance,
    generate_default_layout,
    horizontal_distance,
    place_reference_ue,
    walls_between,
)


@pytest.fixture
def layout():
    return generate_default_layout(RadioConfig())


def test_thirty_neighbors(layout):
    assert len(layout.neighbors) == 30
    assert sum(s.tier == 1 for s in layout.neighbors) == 12
    assert sum(s.tier == 2 for s in layout.neighbors) == 18


def test_min_spacing_from_reference(layout):
    d = min(horizontal_distance(layout.reference.pos, s.pos) for s in layout.neighbors)
    assert d == pytest.approx(20.0, abs=1e-12)


def test_tier_walls(layout):
    assert layout.reference.walls_to_reference_area == 0
    for s in layout.neighbors:
        assert s.walls_to_reference_area == s.tier


def test_ordering_by_tier_then_angle(layout):
    keys = [(s.tier, math.atan2(s.pos.y, s.pos.x) % (2 * math.pi)) for s in layout.neighbors]
    assert keys == sorted(keys)
    assert [s.id for s in layout.neighbors] == [f"fap{i}" for i in range(1, 31)]


def test_heights(layout):
    assert layout.fap_height_m == 2.0
    assert all(s.pos.z == 2.0 for s in layout.sites)
    assert layout.macro_pos.z == 100.0


def test_deterministic():
    a = generate_default_layout(RadioConfig())
    b = generate_default_layout(RadioConfig())
    assert a == b
    assert [s.pos for s in a.sites] == [s.pos for s in b.sites]


def test_macro_distance_to_ue_plane(layout):
    ue_plane = Position(0.0, 0.0, UE_HEIGHT_M)
    d_h = layout.macro_pos.x
    expected = math.sqrt(d_h ** 2 + (100 - 1.5) ** 2)
    assert distance(ue_plane, layout.macro_pos) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(RadioConfig().macro_distance, rel=1e-12)


def test_macro_too_close_rejected():
    with pytest.raises(ConfigError):
        generate_default_layout(RadioConfig(macro_distance=50.0))


class TestPlaceReferenceUe:
    def test_default_distance(self, layout):
        assert place_reference_ue(layout, 5) == Position(5.0, 0.0, 1.5)

    def test_outer_boundary(self, layout):
        pos = place_reference_ue(layout, 10)
        assert horizontal_distance(pos, layout.reference.pos) == layout.reference.radius_m

    @pytest.mark.parametrize("d", [0, -1, 10.01])
    def test_rejects(self, layout, d):
        with pytest.raises(DomainError):
            place_reference_ue(layout, d)


def test_distance_basics():
    p = Position(1.0, 2.0, 3.0)
    assert distance(p, p) == 0
    assert distance(Position(0, 0, 0), Position(3, 4, 0)) == 5


def test_geometric_walls_match_tiers_for_reference_ue(layout):
    ue = place_reference_ue(layout, 5)
    for s in layout.neighbors:
        assert walls_between(ue, s, layout.fap_spacing_m) == s.walls_to_reference_area
    assert walls_between(ue, layout.reference, layout.fap_spacing_m) == 0


def test_layout_validation():
    ref = FapSite("a", Position(0, 0, 2), 0, 0)
    with pytest.raises(ConfigError):
        Layout(ref, (FapSite("a", Position(20, 0, 2), 1, 1),), Position(0, 0, 100))
    with pytest.raises(ConfigError):
        FapSite("r", Position(0, 0, 2), 0, 1)
    with pytest.raises(DomainError):
        Position(math.nan, 0)
    with pytest.raises(ConfigError):
        LayoutSpec(cell_radius=30)
