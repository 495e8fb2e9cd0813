"""Complementary covers, the chain map, leaf transport, both theorems."""

import math

import numpy as np
import pytest

from gqlab import catalog
from gqlab.action import (
    CocycleObstruction,
    ComplementaryCover,
    build_complementary,
    chain_map,
    transport_leaf,
    verify_theorem_1,
    verify_theorem_2,
)
from gqlab.bohr import enumerate_leaves, holonomy
from gqlab.cech import TransversalGrid, delta, half_offset_labels, random_projected_cochain
from gqlab.geometry import pushforward_polarization
from gqlab.prequantum import ConfigurationError, check_local_data

TWO_PI = 2.0 * math.pi


def test_identity_complementary_reproduces_original_data(models):
    exm = models("torus", k=2)
    phi = catalog.make_map(exm, "identity")
    comp = build_complementary(phi, exm.cover)
    assert isinstance(comp, ComplementaryCover)
    assert comp.certificate_max < 1e-12
    assert all(abs(w - 1.0) < 1e-12 for w in comp.tree_solution.values())
    for cell in exm.cover.nerve.degree(1):
        pts = exm.manifold.reduce(cell.samples)
        a, b = cell.indices
        diff = comp.base.transition(a, b, pts) - exm.cover.transition(a, b, pts)
        assert np.max(np.abs(diff)) < 1e-12
    for cell in exm.cover.nerve.degree(0):
        pts = exm.manifold.reduce(cell.samples)
        t0 = comp.base.potential(cell.indices[0], pts)
        t1 = exm.cover.potential(cell.indices[0], pts)
        assert max(np.max(np.abs(a - b)) for a, b in zip(t0, t1)) < 1e-12


def test_plane_shear_complementary_succeeds(models):
    exm = models("plane", granularity=2)
    phi = catalog.make_map(exm, "shear")
    comp = build_complementary(phi, exm.cover)
    assert isinstance(comp, ComplementaryCover)
    # the shear gauges by a genuine quadratic phase; certificate is honest
    assert comp.certificate_max < 1e-9
    assert check_local_data(comp.base, 1e-9).passed


def test_torus_translation_obstruction_matches_theory(models):
    exm = models("torus", k=2)
    a = 0.7
    phi = catalog.make_map(exm, f"translate:{a},0")
    result = build_complementary(phi, exm.cover)
    assert isinstance(result, CocycleObstruction)
    assert result.deviation > 1e-6
    assert result.constancy_max < 1e-8
    # cycle products realize the flat-difference holonomy exp(-+ i k a)
    expected = {np.exp(1j * 2 * a), np.exp(-1j * 2 * a)}
    assert min(abs(result.cycle_product - e) for e in expected) < 1e-9
    assert len(result.witness_cycle) >= 3


def test_torus_translation_solvable_when_k_a_in_two_pi_z(models):
    exm = models("torus", k=2)
    phi = catalog.make_map(exm, f"translate:{math.pi:.17g},0")
    comp = build_complementary(phi, exm.cover)
    assert isinstance(comp, ComplementaryCover)
    assert comp.certificate_max < 1e-9
    assert check_local_data(comp.base, 1e-9).passed


def test_cylinder_momentum_shift_dichotomy(models):
    exm = models("cylinder")
    frac = build_complementary(catalog.make_map(exm, "pshift:0.4"), exm.cover)
    assert isinstance(frac, CocycleObstruction)
    assert abs(frac.cycle_product - np.exp(2j * math.pi * 0.4)) < 1e-9 or abs(
        frac.cycle_product - np.exp(-2j * math.pi * 0.4)
    ) < 1e-9
    whole = build_complementary(catalog.make_map(exm, "pshift:1.0"), exm.cover)
    assert isinstance(whole, ComplementaryCover)


def test_non_contractible_cover_rejected(models):
    import dataclasses

    exm = catalog.example("plane")
    el = exm.cover.elements[0]
    exm.cover.elements[0] = dataclasses.replace(el, contractible=False)
    with pytest.raises(ConfigurationError, match="contractible"):
        build_complementary(catalog.make_map(exm, "identity"), exm.cover)


def _grids_for(exm, phi, comp, n):
    pol = exm.polarization()
    pushed = pushforward_polarization(phi, pol)
    labels = half_offset_labels(pol.label_range[0], pol.label_range[1], n)
    return (
        TransversalGrid.build(exm.cover, pol, labels),
        TransversalGrid.build(comp.base, pushed, labels),
    )


def test_chain_map_identity_and_linearity(models):
    exm = models("torus", k=1)
    phi = catalog.make_map(exm, "identity")
    comp = build_complementary(phi, exm.cover)
    gs, gd = _grids_for(exm, phi, comp, 16)
    rng = np.random.default_rng(0)
    c = random_projected_cochain(gs, 0, rng)
    moved = chain_map(c, phi, comp, gs, gd)
    assert all(np.array_equal(c.data[k], moved.data[k]) for k in c.data)
    z = random_projected_cochain(gs, 0, rng)
    for k in z.data:
        z.data[k][:] = 0
    assert chain_map(z, phi, comp, gs, gd).norm() == 0.0


def test_chain_map_commutes_with_delta(models):
    exm = models("torus", k=2)
    phi = catalog.make_map(exm, f"translate:{math.pi:.17g},0")
    comp = build_complementary(phi, exm.cover)
    gs, gd = _grids_for(exm, phi, comp, 16)
    rng = np.random.default_rng(1)
    for degree in (0, 1):
        c = random_projected_cochain(gs, degree, rng)
        lhs = delta(gd, chain_map(c, phi, comp, gs, gd))
        rhs = chain_map(delta(gs, c), phi, comp, gs, gd)
        worst = max(
            (np.max(np.abs(lhs.data[k] - rhs.data[k]))
             for k in lhs.data if lhs.data[k].size),
            default=0.0,
        )
        assert worst < 1e-9


def test_transport_leaf_identity(models):
    exm = models("sphere", k=2)
    pol = exm.polarization()
    phi = catalog.make_map(exm, "identity")
    comp = build_complementary(phi, exm.cover)
    pushed = pushforward_polarization(phi, pol)
    leaf = enumerate_leaves(exm.cover, pol, (0.8, 0.8), 1)[0]
    moved, h2 = transport_leaf(leaf, phi, comp, pol, pushed)
    h1 = holonomy(exm.cover, pol, leaf)
    assert moved.label == leaf.label
    assert abs(h1.holonomy - h2.holonomy) < 1e-12


def test_transport_leaf_sphere_rotation_preserves_holonomy(models):
    exm = models("sphere", k=3)
    pol = exm.polarization()
    phi = catalog.make_map(exm, "rot:1.3")
    comp = build_complementary(phi, exm.cover)
    pushed = pushforward_polarization(phi, pol)
    for c in (0.4, 1.0, 2.2):
        leaf = enumerate_leaves(exm.cover, pol, (c, c), 1)[0]
        moved, there = transport_leaf(leaf, phi, comp, pol, pushed)
        here = holonomy(exm.cover, pol, leaf)
        assert abs(here.holonomy - there.holonomy) < 1e-9
        assert moved.label == leaf.label
        # a latitude circle maps to itself as a set: phi-preimages of its
        # points still lie on the latitude circle of the pushed polarization
        ts = np.linspace(0.0, TWO_PI, 7)
        down = phi.apply_inverse(pol.curve_points(c, ts))
        assert np.max(np.abs(pushed.label_of(down) - c)) < 1e-12


def test_transport_leaf_shear_maps_lines_to_lines(models):
    exm = models("plane")
    pol = exm.polarization()
    phi = catalog.make_map(exm, "shear")
    comp = build_complementary(phi, exm.cover)
    pushed = pushforward_polarization(phi, pol)
    leaf = enumerate_leaves(exm.cover, pol, (0.5, 0.5), 1)[0]
    moved, hol_res = transport_leaf(leaf, phi, comp, pol, pushed)
    assert moved.topology == "line" and hol_res is None


def test_leaf_transport_round_trip_is_identity_on_labels(models):
    exm = models("torus", k=1)
    pol = exm.polarization()
    phi = catalog.make_map(exm, "translate:%.17g,0" % TWO_PI)  # k a in 2 pi Z
    comp = build_complementary(phi, exm.cover)
    assert isinstance(comp, ComplementaryCover)
    pushed = pushforward_polarization(phi, pol)
    labels = [l.label for l in enumerate_leaves(exm.cover, pol, (0, TWO_PI), 6)]
    back = [
        l.label for l in enumerate_leaves(comp.base, pushed, (0, TWO_PI), 6)
    ]
    assert np.allclose(sorted(labels), sorted(back), atol=1e-10)


def test_theorem_1_identity(models):
    exm = models("torus", k=1)
    rep = verify_theorem_1(exm, catalog.make_map(exm, "identity"), grid_n=24)
    assert rep.status == "ok" and rep.passed
    assert rep.payload["ranks"]["source"] == rep.payload["ranks"]["target"]


def test_theorem_1_plane_shear(models):
    exm = models("plane")
    rep = verify_theorem_1(exm, catalog.make_map(exm, "shear"), grid_n=32)
    assert rep.passed
    assert rep.payload["ranks"]["source"] == [32, 0, 0]
    assert rep.payload["commutation_residual"] < 1e-9


def test_theorem_1_two_element_plane_shear(models):
    exm = models("plane", granularity=2)
    rep = verify_theorem_1(exm, catalog.make_map(exm, "shear"), grid_n=24)
    assert rep.passed and rep.payload["ranks"]["equal"]
    assert rep.payload["commutation_residual"] < 1e-9


def test_theorem_1_obstructed_reports_hypothesis_failure(models):
    exm = models("torus", k=2)
    rep = verify_theorem_1(exm, catalog.make_map(exm, "translate:0.7,0"))
    assert rep.status == "hypothesis-failed" and not rep.passed
    assert rep.witness is not None and rep.witness["deviation"] > 1e-6


def test_theorem_2_identity(models):
    exm = models("sphere", k=2)
    rep = verify_theorem_2(exm, catalog.make_map(exm, "identity"))
    assert rep.passed
    assert rep.payload["q_bs"]["source"] == rep.payload["q_bs"]["target"]


def test_theorem_2_sphere_rotation(models):
    exm = models("sphere", k=3)
    rep = verify_theorem_2(exm, catalog.make_map(exm, "rot:1.0"))
    assert rep.passed
    assert rep.payload["q_bs"] == {"source": 4, "target": 4}
    assert rep.payload["holonomy_max_difference"] < 1e-9
    assert len(rep.payload["bs_locations"]["source"]) == 2  # interior circles


def test_theorem_2_disk_rotation(models):
    exm = models("disk")
    rep = verify_theorem_2(exm, catalog.make_map(exm, "rot:0.9"))
    assert rep.passed and rep.payload["q_bs"]["source"] == 5
