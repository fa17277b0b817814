import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.fields import (
    Field,
    Grid1D,
    GridND,
    field_from_json,
    field_to_csv,
    field_to_json,
    gradient,
    hessian,
    sup_norm_defect,
)


def test_grid_node_counts():
    per = Grid1D(0.0, 1.0, 8, "periodic")
    bnd = Grid1D(0.0, 1.0, 8, "bounded")
    assert per.n_nodes == 8
    assert bnd.n_nodes == 9
    assert per.h == bnd.h == 0.125
    assert per.nodes()[-1] == pytest.approx(1.0 - per.h)
    assert bnd.nodes()[-1] == pytest.approx(1.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1.0, 0.0, 8)
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 8, "torus")
    with pytest.raises(ValueError):
        GridND(axes=(Grid1D(0, 1, 8),) * 4)


def test_field_shape_and_finiteness():
    g = Grid1D(0.0, 1.0, 8, "bounded")
    with pytest.raises(ValueError):
        Field(g, np.zeros(8))  # bounded grid has 9 nodes
    with pytest.raises(ValueError):
        Field(g, np.full(9, np.nan))


def _order(errors):
    errors = np.asarray(errors)
    return np.log2(errors[:-1] / errors[1:])


@pytest.mark.parametrize("topology", ["periodic", "bounded"])
def test_gradient_second_order_1d(topology):
    errs = []
    for n in (32, 64, 128):
        g = Grid1D(0.0, 2 * np.pi, n, topology)
        x = g.nodes()
        f = Field(g, np.sin(x))
        errs.append(np.max(np.abs(gradient(f)[..., 0] - np.cos(x))))
    assert np.all(_order(errs) > 1.8)


def test_hessian_second_order_2d():
    errs = []
    for n in (16, 32, 64):
        g = GridND((Grid1D(0, 1, n), Grid1D(0, 1, n)))
        X, Y = g.meshgrid()
        f = Field(g, np.sin(2 * X) * np.cos(Y))
        H = hessian(f)
        exact_xy = -2 * np.cos(2 * X) * np.sin(Y)
        errs.append(np.max(np.abs(H[..., 0, 1] - exact_xy)))
        assert np.allclose(H[..., 0, 1], H[..., 1, 0])
    assert np.all(_order(errs) > 1.8)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_gradient_exact_on_linear(a, b):
    g = Grid1D(-1.0, 1.0, 16, "bounded")
    x = g.nodes()
    f = Field(g, a * x + b)
    assert np.allclose(gradient(f)[..., 0], a, atol=1e-10 * (1 + abs(a) + abs(b)))


def test_sup_norm_defect_signed():
    g = Grid1D(0, 1, 8)
    x = g.nodes()
    lo = Field(g, x)
    hi = Field(g, x + 0.5)
    assert sup_norm_defect(lo, hi) == pytest.approx(-0.5)
    assert sup_norm_defect(hi, lo) == pytest.approx(0.5)


def test_json_roundtrip(tmp_path):
    g = GridND((Grid1D(0, 1, 4, "periodic"), Grid1D(-1, 1, 5)))
    f = Field(g, np.arange(4 * 6, dtype=float).reshape(4, 6), time=0.25)
    path = tmp_path / "field.json"
    field_to_json(f, path)
    f2 = field_from_json(path)
    assert f2.time == f.time
    assert np.array_equal(f2.values, f.values)
    assert f2.grid == f.grid


def test_csv_export(tmp_path):
    g = Grid1D(0, 1, 4)
    f = Field(g, np.linspace(0, 1, 5))
    path = tmp_path / "f.csv"
    field_to_csv(f, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "x0,value"
    assert len(rows) == 6
