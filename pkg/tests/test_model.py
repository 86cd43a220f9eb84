import numpy as np
import pytest
from hypothesis import given, strategies as st

from pyrofield.errors import ConstraintViolation, ValidationError
from pyrofield.model import (Boundary, DiagonalState, NeighborPair, Params, diagonal0_neighbors,
                             kernel, neighbor_statuses, random_params, validate_params)


@st.composite
def valid_params(draw):
    alpha = draw(st.floats(0, 1))
    beta = draw(st.floats(0, 1))
    lo, hi = max(alpha, beta), min(1.0, alpha + beta)
    gamma = draw(st.floats(lo, hi))
    return Params(alpha, beta, gamma)


def test_validate_accepts_interior_point():
    p = validate_params(0.5, 0.5, 0.75)
    assert (p.alpha, p.beta, p.gamma) == (0.5, 0.5, 0.75)


@pytest.mark.parametrize("triple, inequality", [
    ((0.2, 0.3, 0.6), "gamma <= alpha + beta"),
    ((0.4, 0.3, 0.2), "alpha <= gamma"),
    ((0.3, 0.4, 0.35), "beta <= gamma"),
    ((0.5, 0.5, 2.0), "gamma <= 1"),
    ((-0.1, 0.5, 0.5), "0 <= alpha"),
    ((0.5, -0.0001, 0.5), "0 <= beta"),
])
def test_validate_names_violated_inequality(triple, inequality):
    with pytest.raises(ConstraintViolation) as info:
        validate_params(*triple)
    assert info.value.inequality == inequality
    assert inequality in str(info.value)


def test_validation_has_no_tolerance():
    with pytest.raises(ConstraintViolation):
        Params(0.5, 0.5, 1.0 + 1e-16 * 3)
    with pytest.raises(ConstraintViolation):
        Params(0.25, 0.25, np.nextafter(0.5, 1.0))
    Params(0.25, 0.25, 0.5)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), "0.5", None, True])
def test_validate_rejects_non_finite_or_non_real(bad):
    with pytest.raises(ValidationError):
        Params(bad, 0.5, 0.5)


def test_kernel_table_values():
    p = Params(0.5, 0.25, 0.75)
    assert kernel(p, NeighborPair(0, 0)) == 0.0
    assert kernel(p, NeighborPair(1, 0)) == 0.5
    assert kernel(p, NeighborPair(0, 1)) == 0.25
    assert kernel(p, NeighborPair(1, 1)) == 0.75
    assert p.table().tolist() == [[0.0, 0.25], [0.5, 0.75]]


@given(valid_params())
def test_kernel_is_monotone_in_neighbours(p):
    both = kernel(p, NeighborPair(1, 1))
    assert kernel(p, NeighborPair(0, 0)) == 0.0
    assert both >= kernel(p, NeighborPair(1, 0)) >= 0.0
    assert both >= kernel(p, NeighborPair(0, 1)) >= 0.0


def test_random_params_are_valid():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        random_params(rng)


def test_boundary_defaults_and_max_ignition():
    b = Boundary()
    assert b == Boundary.delta()
    assert b.max_ignition == 0
    assert Boundary.empty().max_ignition == -1
    assert Boundary(frozenset({0, 3}), frozenset({7})).max_ignition == 7


def test_boundary_parse_round_trip():
    b = Boundary.parse("0,3,7", "0")
    assert b.fire_x == {0, 3, 7} and b.fire_y == {0}
    assert b.format() == ("0,3,7", "0")
    assert Boundary.parse("", "") == Boundary.empty()
    with pytest.raises(ValidationError):
        Boundary.parse("1,x", "0")
    with pytest.raises(ValidationError):
        Boundary.parse("-1", "0")


def test_diagonal_state_invariants():
    d = DiagonalState(2, (1, 0, 1))
    assert d.y == 2 and d.index == 0b101
    assert DiagonalState.from_index(2, 0b101) == d
    with pytest.raises(ValidationError):
        DiagonalState(2, (1, 0))
    with pytest.raises(ValidationError):
        DiagonalState(1, (2, 0))


def test_neighbor_statuses_delta_boundary():
    prev = DiagonalState(0, (1,))
    b = Boundary.delta()
    assert neighbor_statuses(b, prev, 0) == NeighborPair(0, 1)
    assert neighbor_statuses(b, prev, 1) == NeighborPair(1, 0)


def test_neighbor_statuses_reignition_from_fire_x():
    b = Boundary(frozenset({0, 3}), frozenset())
    prev = DiagonalState(2, (0, 0, 0))
    assert neighbor_statuses(b, prev, 3) == NeighborPair(0, 1)
    assert neighbor_statuses(b, prev, 0) == NeighborPair(0, 0)


def test_neighbor_statuses_range():
    prev = DiagonalState(1, (1, 1))
    with pytest.raises(IndexError):
        neighbor_statuses(Boundary.delta(), prev, 3)
    with pytest.raises(IndexError):
        neighbor_statuses(Boundary.delta(), prev, -1)


def test_diagonal0_neighbors():
    assert diagonal0_neighbors(Boundary.delta()) == NeighborPair(1, 1)
    assert diagonal0_neighbors(Boundary.empty()) == NeighborPair(0, 0)
    assert diagonal0_neighbors(Boundary(frozenset({2}), frozenset())) == NeighborPair(0, 0)
    assert diagonal0_neighbors(Boundary(frozenset({0}), frozenset())) == NeighborPair(0, 1)
