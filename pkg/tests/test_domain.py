import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kslab.domain import (
    INF,
    Field,
    Grid,
    face_gradient,
    gradient,
    divergence,
    integrate,
    lr_norm,
    read_field,
    w1q_distance,
    write_field,
    write_header,
)

from conftest import cos_mode


# --- Grid / Field --------------------------------------------------------------


def test_grid_invariants():
    g = Grid.rectangle(2.0, 0.5, 8, 4)
    assert g.dim == 2
    assert g.spacing == (0.25, 0.125)
    assert g.cell_volume == pytest.approx(0.25 * 0.125)
    assert g.volume == pytest.approx(1.0)
    assert g.size == 32


@pytest.mark.parametrize("extents,cells", [((1.0,), (3,)), ((0.0,), (8,)), ((1.0, 1.0, 1.0), (4, 4, 4)), ((1.0,), (4, 4))])
def test_grid_rejects_bad_shapes(extents, cells):
    with pytest.raises(ValueError):
        Grid(extents, cells)


def test_field_rejects_nonfinite_and_wrong_size():
    g = Grid.interval(1.0, 4)
    with pytest.raises(ValueError):
        Field(g, [1.0, 2.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        Field(g, [1.0, 2.0])


def test_field_is_immutable():
    f = Field.constant(Grid.interval(1.0, 4), 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_locate_boundary_points():
    g = Grid.interval(1.0, 4)
    assert g.locate(0.0) == (0,)
    assert g.locate(1.0) == (3,)
    assert g.locate(0.3) == (1,)
    with pytest.raises(ValueError):
        g.locate(1.01)


# --- integrate -----------------------------------------------------------------


def test_integrate_constant_one_on_volume_two():
    assert integrate(Field.constant(Grid.interval(2.0, 16), 1.0)) == pytest.approx(2.0, rel=1e-15)


def test_integrate_zero():
    assert integrate(Field.constant(Grid.rectangle(1.0, 3.0, 5, 7), 0.0)) == 0.0


def test_integrate_full_cosine_period(grid256):
    assert abs(integrate(cos_mode(grid256))) <= 1e-12


@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**31))
def test_integrate_linear(a, b, seed):
    g = Grid.rectangle(1.5, 0.7, 6, 5)
    rng = np.random.default_rng(seed)
    f, h = Field(g, rng.standard_normal(g.cells)), Field(g, rng.standard_normal(g.cells))
    lhs = integrate(a * f + b * h)
    rhs = a * integrate(f) + b * integrate(h)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 30)


# --- lr_norm -------------------------------------------------------------------


@pytest.mark.parametrize("r", [1, 1.5, 2, 7, INF])
def test_lr_norm_constant_unit_volume(r):
    assert lr_norm(Field.constant(Grid.rectangle(0.5, 2.0, 4, 8), 3.0), r) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize("r", [1, 2, 3.5])
def test_lr_norm_constant_general_volume(r):
    g = Grid.interval(5.0, 10)
    assert lr_norm(Field.constant(g, 2.0), r) == pytest.approx(2.0 * 5.0 ** (1 / r), rel=1e-14)


def test_lr_norm_indicator_cell():
    g = Grid.rectangle(1.0, 2.0, 8, 4)
    vals = np.zeros(g.cells)
    vals[3, 1] = 1.0 / g.cell_volume
    assert lr_norm(Field(g, vals), 1) == pytest.approx(1.0, rel=1e-15)


def test_lr_norm_rejects_r_below_one():
    with pytest.raises(ValueError):
        lr_norm(Field.constant(Grid.interval(1.0, 4), 1.0), 0.5)


fields8 = arrays(np.float64, 8, elements=st.floats(0, 1e3, allow_nan=False))


@given(f=fields8, extra=fields8, r=st.floats(1, 20))
def test_lr_norm_monotone_under_domination(f, extra, r):
    g = Grid.interval(1.0, 8)
    assert lr_norm(Field(g, f), r) <= lr_norm(Field(g, f + extra), r) * (1 + 1e-12) + 1e-300


@given(seed=st.integers(0, 2**31), p=st.floats(1.0, 30.0))
def test_holder_inequality(seed, p):
    rng = np.random.default_rng(seed)
    g = Grid.rectangle(1.3, 0.6, 7, 5)
    f, h = Field(g, rng.standard_normal(g.cells)), Field(g, rng.standard_normal(g.cells) * 10)
    pc = INF if p == 1.0 else p / (p - 1)
    assert lr_norm(f * h, 1) <= lr_norm(f, p) * lr_norm(h, pc) * (1 + 1e-12)


@given(seed=st.integers(0, 2**31), r=st.floats(1.2, 40.0) | st.just(INF), frac=st.floats(0.01, 0.99),
       power=st.floats(0.2, 4.0))
def test_interpolation_inequality(seed, r, frac, power):
    rng = np.random.default_rng(seed)
    g = Grid.interval(rng.uniform(0.2, 3.0), 32)
    f = Field(g, rng.exponential(size=32) ** power)
    s1 = 1.0 + frac * (min(r, 40.0) - 1.0)
    theta = (s1 - 1) / ((1 - (0 if r == INF else 1 / r)) * s1)
    assert lr_norm(f, s1) <= lr_norm(f, 1) ** (1 - theta) * lr_norm(f, r) ** theta * (1 + 1e-12)


# --- gradient --------------------------------------------------------------------


def test_gradient_of_constant_is_zero():
    g = Grid.rectangle(1.0, 2.0, 6, 9)
    for comp in gradient(Field.constant(g, 4.2)):
        assert np.all(comp.values == 0.0)


def test_gradient_of_cosine(grid256):
    x = grid256.centers(0)
    (dx,) = gradient(cos_mode(grid256))
    # centered difference of cos: exact value sin(pi h)/h * (-sin(pi x)); Taylor error O(h^2)
    err = np.abs(dx.values + np.pi * np.sin(np.pi * x))
    assert err[1:-1].max() <= 1e-3
    assert err[1:-1].max() <= 2 * (np.pi**3 / 6) * (1 / 256) ** 2


@given(seed=st.integers(0, 2**31))
def test_boundary_faces_have_zero_normal_derivative(seed):
    g = Grid.rectangle(1.0, 1.7, 6, 5)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.cells))
    for axis in range(2):
        d = face_gradient(f, axis)
        assert np.all(np.take(d, 0, axis=axis) == 0.0)
        assert np.all(np.take(d, -1, axis=axis) == 0.0)


@given(seed=st.integers(0, 2**31))
def test_divergence_is_negative_adjoint_of_gradient(seed):
    rng = np.random.default_rng(seed)
    g = Grid.rectangle(1.0, 0.5, 7, 6)
    phi = Field(g, rng.standard_normal(g.cells))
    w = tuple(Field(g, rng.standard_normal(g.cells)) for _ in range(2))
    lhs = float((divergence(w).values * phi.values).sum())
    rhs = -sum(float((c.values * d.values).sum()) for c, d in zip(w, gradient(phi)))
    assert lhs == pytest.approx(rhs, abs=1e-10)


# --- w1q ---------------------------------------------------------------------------


def test_w1q_zero_for_equal_fields(grid256):
    f = cos_mode(grid256)
    assert w1q_distance(f, f, 1.5) == 0.0


def test_w1q_constant_shift():
    g = Grid.interval(1.0, 32)
    f = cos_mode(g)
    assert w1q_distance(f + 0.3, f, 2.5) == pytest.approx(0.3, rel=1e-12)


def test_w1q_cosine_against_zero(grid256):
    expected = math.sqrt(0.5 + math.pi**2 / 2)
    assert w1q_distance(cos_mode(grid256), Field.constant(grid256, 0.0), 2) == pytest.approx(expected, abs=1e-2)


def test_w1q_rejects_mismatched_grids_and_q():
    a, b = Grid.interval(1.0, 8), Grid.interval(1.0, 16)
    with pytest.raises(ValueError):
        w1q_distance(Field.constant(a, 0), Field.constant(b, 0), 2)
    with pytest.raises(ValueError):
        w1q_distance(Field.constant(a, 0), Field.constant(a, 0), INF)


# --- serialization -------------------------------------------------------------


@pytest.mark.parametrize("grid", [Grid.interval(2.0, 5), Grid.rectangle(1.0, 0.3, 4, 6)])
def test_field_roundtrip(tmp_path, grid):
    f = Field(grid, np.random.default_rng(0).standard_normal(grid.cells) * 1e-7)
    write_field(f, tmp_path / "f.csv")
    write_header(grid, tmp_path / "h.json")
    back = read_field(tmp_path / "f.csv", tmp_path / "h.json")
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)
    assert json.loads((tmp_path / "h.json").read_text()) == {"dim": grid.dim, "extents": list(grid.extents),
                                                            "cells": list(grid.cells)}
