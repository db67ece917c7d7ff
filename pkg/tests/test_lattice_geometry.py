import math

import numpy as np
import pytest

from app.errors import DomainError, ParseError
from app.models.lattice import Characteristic, ShapeParameter, periodic_distance
from app.services.lattice_geometry import (
    S_MATRIX,
    ensure_reduced,
    fold_to_wigner_seitz,
    frame,
    half_lattice_points,
    in_fundamental_domain,
    mobius,
    reduce_to_fundamental_domain,
    transport_characteristic,
    wigner_seitz_vertices,
)

from tests.conftest import HEX_VERTEX


class TestShapeParameter:

    def test_parse_forms(self):
        assert ShapeParameter.parse('i').value == 1j
        assert ShapeParameter.parse('2i').value == 2j
        tau = ShapeParameter.parse('0.5+0.8660254i')
        assert tau.re == 0.5 and tau.im == pytest.approx(0.8660254)
        polar = ShapeParameter.parse('1@60')
        assert polar.re == pytest.approx(0.5) and polar.im == pytest.approx(math.sqrt(3) / 2)

    def test_parse_errors(self):
        with pytest.raises(ParseError):
            ShapeParameter.parse('abc')
        with pytest.raises(ParseError):
            ShapeParameter.parse('')

    def test_lower_half_plane_rejected(self):
        with pytest.raises(DomainError):
            ShapeParameter(0.0, -1.0)
        with pytest.raises(DomainError):
            ShapeParameter.parse('0.3')

    def test_characteristic_parse(self):
        q = Characteristic.parse('0.5,0.25')
        assert (q.a, q.b) == (0.5, 0.25)
        with pytest.raises(ParseError):
            Characteristic.parse('0.5')


class TestReduction:

    def test_translate_to_hexagonal(self):
        reduced, g = reduce_to_fundamental_domain(ShapeParameter(1.5, math.sqrt(3) / 2))
        assert reduced.re == pytest.approx(0.5)
        assert reduced.im == pytest.approx(math.sqrt(3) / 2)
        assert round(np.linalg.det(g)) == 1

    def test_translate_to_square(self):
        reduced, _ = reduce_to_fundamental_domain(ShapeParameter(5.0, 1.0))
        assert reduced.value == pytest.approx(1j)

    def test_unit_arc_prefers_nonnegative_real_part(self):
        left = ShapeParameter(-0.28, 0.96)
        reduced, g = reduce_to_fundamental_domain(left)
        assert reduced.re == pytest.approx(0.28)
        assert mobius(g, left.value) == pytest.approx(reduced.value)

    def test_random_points(self, rng):
        for _ in range(200):
            tau = ShapeParameter(float(rng.uniform(-5, 5)), float(rng.uniform(0.05, 3.0)))
            reduced, g = reduce_to_fundamental_domain(tau)
            assert in_fundamental_domain(reduced)
            assert abs(mobius(g, tau.value) - reduced.value) < 1e-9
            assert g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0] == 1

    def test_reduced_points_are_untouched(self, hex_tau):
        reduced, g = ensure_reduced(hex_tau)
        assert (reduced.re, reduced.im) == (hex_tau.re, hex_tau.im)
        assert np.array_equal(g, np.eye(2, dtype=np.int64))

    def test_points_inside_unit_circle_are_inverted(self):
        inside = ShapeParameter(0.3, math.sqrt(0.91 - 5e-9))
        reduced, g = reduce_to_fundamental_domain(inside)
        assert abs(reduced.value) ** 2 > 1
        assert reduced.re == pytest.approx(-0.3, abs=1e-8)
        assert np.array_equal(g, S_MATRIX)
        assert not in_fundamental_domain(inside)
        assert ensure_reduced(inside)[0] == reduced

    def test_rounding_band_is_snapped_to_arc(self):
        inside = ShapeParameter(0.3, math.sqrt(0.91 - 1e-13))
        for reduced in (reduce_to_fundamental_domain(inside)[0], ensure_reduced(inside)[0]):
            assert abs(reduced.value) ** 2 >= 1 - 1e-15
            assert reduced.value == pytest.approx(inside.value, abs=1e-12)


    def test_transport_identities(self):
        q = Characteristic(0.2, 0.35)
        # γ(τ + 1; a, a + b) = γ(τ; a, b)
        _, g = reduce_to_fundamental_domain(ShapeParameter(-0.7, 1.3))
        moved = transport_characteristic(q, g)
        assert moved.a == pytest.approx(q.a)
        assert moved.b == pytest.approx(q.b + q.a)


class TestFrame:

    def test_cell_area_and_pairing(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau, ShapeParameter(0.21, 1.7)):
            lattice_frame = frame(tau)
            assert lattice_frame.cell_area == pytest.approx(2 * math.pi)
            pairing = np.array(lattice_frame.pairing_matrix()) / (2 * math.pi)
            assert np.allclose(pairing, np.round(pairing), atol=1e-12)

    def test_k_dot_s(self, hex_tau):
        q = Characteristic(0.3, -0.15)
        lattice_frame = frame(hex_tau)
        k = q.k(hex_tau)
        for n, m in ((1, 0), (0, 1), (2, -3)):
            s = lattice_frame.lattice_point(n, m)
            assert (k.conjugate() * s).real == pytest.approx(2 * math.pi * (q.a * n + q.b * m))


class TestWignerSeitz:

    def test_hexagonal_has_six_vertices(self, hex_tau):
        vertices = wigner_seitz_vertices(hex_tau)
        assert len(vertices) == 6
        assert any(periodic_distance(v, HEX_VERTEX) < 1e-9 for v in vertices)
        norms = [abs(v.k(hex_tau)) for v in vertices]
        assert np.allclose(norms, norms[0])

    def test_square_has_four_vertices(self, square_tau):
        vertices = wigner_seitz_vertices(square_tau)
        assert len(vertices) == 4
        for v in vertices:
            c = v.centered()
            assert abs(abs(c.a) - 0.5) < 1e-9 and abs(abs(c.b) - 0.5) < 1e-9

    def test_half_lattice_points(self, hex_tau):
        points = half_lattice_points(hex_tau)
        assert len(points) == 4
        for p in points:
            assert periodic_distance(p, p.negated()) < 1e-12

    def test_fold_does_not_increase_momentum(self, hex_tau, rng):
        for _ in range(50):
            q = Characteristic(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
            folded = fold_to_wigner_seitz(q, hex_tau)
            assert abs(folded.k(hex_tau)) <= abs(q.centered().k(hex_tau)) + 1e-12
            assert periodic_distance(folded, q) < 1e-12
