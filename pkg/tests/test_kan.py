import numpy as np
import pytest

from kanbench import autodiff as ad
from kanbench.autodiff import Tensor
from kanbench.gradcheck import check
from kanbench.kan import KanLayer, KanNetwork, SplineGrid, basis_values, kan_init, kan_param_count


class TestSplineGrid:
    def test_knots(self):
        grid = SplineGrid()
        assert len(grid.knots) == 5 + 2 * 3 + 1
        assert grid.knots[3] == -1.0 and grid.knots[8] == 1.0
        np.testing.assert_allclose(np.diff(grid.knots), 0.4, rtol=1e-12)
        assert grid.n_basis == 8

    def test_knots_read_only(self):
        with pytest.raises(ValueError):
            SplineGrid().knots[0] = 5.0

    @pytest.mark.parametrize("kw", [{"grid_size": 0}, {"spline_order": -1}, {"domain_hi": -1.0}])
    def test_rejects_bad_grids(self, kw):
        with pytest.raises(ValueError):
            SplineGrid(**kw)


class TestBasis:
    def test_partition_of_unity(self):
        x = np.linspace(-1, 1, 2001).reshape(-1, 1)
        b = basis_values(x, SplineGrid())
        np.testing.assert_allclose(b.sum(axis=-1), 1.0, atol=1e-9)
        assert b.min() >= 0.0 and b.max() <= 1.0

    @pytest.mark.parametrize("order", range(4))
    def test_closed_domain_endpoints(self, order):
        b = basis_values([[-1.0, 1.0]], SplineGrid(spline_order=order))
        np.testing.assert_allclose(b.sum(axis=-1), 1.0, atol=1e-12)

    def test_local_support(self):
        x = np.random.default_rng(0).uniform(-1, 1, (1000, 1))
        b = basis_values(x, SplineGrid())
        assert ((b > 0).sum(axis=-1) <= 4).all()

    def test_knot_reduces_support(self):
        # 0.2 is a knot of the default grid (0 is not: knots are -1, -0.6, ..., 1).
        b = basis_values([[0.2]], SplineGrid())[0, 0]
        assert (b > 1e-15).sum() == 3
        assert (basis_values([[0.0]], SplineGrid())[0, 0] > 0).sum() == 4

    def test_order_zero_is_interval_indicator(self):
        b = basis_values([[0.1]], SplineGrid(spline_order=0))[0, 0]
        # 0.1 lies in [-0.2, 0.2), the third interval
        np.testing.assert_array_equal(b, [0, 0, 1, 0, 0])

    def test_extrapolates_outside_domain(self):
        b = basis_values([[1.3, -1.7]], SplineGrid())[0]
        assert np.isfinite(b).all() and (b.sum(axis=-1) > 0).all()


class TestKanLayer:
    def test_zero_weights_give_zero(self):
        layer = KanLayer(3, 2)
        out = layer(Tensor(np.random.default_rng(0).normal(size=(5, 3))))
        assert out.shape == (5, 2) and not out.data.any()

    @pytest.mark.parametrize("j", range(8))
    def test_one_hot_spline_weight_selects_basis(self, j):
        layer = KanLayer(1, 1)
        layer.spline_weight.data[0, j] = 1.0
        x = np.linspace(-1.2, 1.2, 25).reshape(-1, 1)
        np.testing.assert_allclose(layer(Tensor(x)).data[:, 0], basis_values(x, layer.grid)[:, 0, j],
                                   rtol=0, atol=1e-15)

    def test_column_mismatch(self):
        with pytest.raises(ad.DimensionError):
            KanLayer(3, 2)(Tensor(np.zeros((1, 4))))

    def test_gradients(self):
        rng = np.random.default_rng(5)
        layer = kan_init([4, 3], rng=rng).layers[0]
        x = Tensor(rng.uniform(-2, 2, (6, 4)), requires_grad=True)
        w = rng.normal(size=(6, 3))
        err = check(lambda: ad.tensor_sum(ad.mul(layer(x), Tensor(w))),
                    [x, layer.base_weight, layer.spline_weight])
        assert err <= 1e-4

    def test_continuity_across_knots(self):
        rng = np.random.default_rng(2)
        layer = kan_init([1, 1], rng=rng).layers[0]
        f = lambda v: layer(Tensor([[v]])).item()
        delta = 1e-7
        for t in layer.grid.knots[1:-1]:
            assert abs(f(t + delta) - f(t - delta)) < 1e-5
            left = (f(t) - f(t - delta)) / delta
            right = (f(t + delta) - f(t)) / delta
            assert abs(right - left) < 1e-4, t


class TestKanNetwork:
    @pytest.mark.parametrize("widths,expected", [([30, 1, 2], 288), ([10, 1, 2], 108)])
    def test_param_count(self, widths, expected):
        assert kan_param_count(widths, SplineGrid()) == expected
        net = KanNetwork(widths)
        assert net.parameter_count() == expected
        assert sum(p.data.size for p in net.parameters()) == expected

    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            kan_param_count([4, 0, 2])
        with pytest.raises(ValueError):
            KanNetwork([4, 0, 2])

    def test_init_deterministic(self):
        a, b = kan_init([5, 3, 2], rng=7), kan_init([5, 3, 2], rng=7)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p.data, q.data)

    def test_spline_init_statistics(self):
        n = 25
        layer = kan_init([n, 50], rng=0).layers[0]
        draws = layer.spline_weight.data.ravel()
        assert draws.size == 10_000
        sigma = 0.1 / np.sqrt(n)
        assert abs(draws.mean()) <= 3 * sigma / np.sqrt(draws.size)
        assert draws.std() == pytest.approx(sigma, rel=0.05)
        assert np.abs(layer.base_weight.data).max() <= 1 / np.sqrt(n)

    def test_zero_input_finite(self):
        out = kan_init([6, 4, 3], rng=0)(Tensor(np.zeros((2, 6))))
        assert out.is_finite()

    def test_zero_spline_is_edgewise_silu_mlp(self):
        rng = np.random.default_rng(9)
        net = kan_init([5, 4, 3], rng=rng)
        for layer in net.layers:
            layer.spline_weight.data[...] = 0.0
        x = rng.normal(size=(10, 5))
        silu = lambda z: z / (1 + np.exp(-z))
        w1, w2 = (layer.base_weight.data for layer in net.layers)
        expected = silu(silu(x) @ w1.T) @ w2.T
        np.testing.assert_allclose(net(Tensor(x)).data, expected, rtol=1e-12, atol=1e-14)
