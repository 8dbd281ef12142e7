import numpy as np
import pytest
from scipy import stats

from randpgd.grid import ParameterGrid, PointSet, quantile_axis, uniform_axis


def test_uniform_axis_endpoints_and_spacing():
    a = uniform_axis(0.5, 1.2, 500)
    assert a[0] == 0.5 and a[-1] == 1.2
    np.testing.assert_allclose(np.diff(a), 0.7 / 499, rtol=1e-12)


def test_quantile_axis_single_point():
    np.testing.assert_array_equal(quantile_axis(1), [0.0])


def test_quantile_axis_fifty_points():
    q = quantile_axis(50)
    assert np.all(np.diff(q) > 0)
    np.testing.assert_allclose(q, -q[::-1], atol=0)
    np.testing.assert_allclose(q, stats.norm.ppf((np.arange(50) + 0.5) / 50), atol=1e-12)


def test_empty_axis_rejected():
    with pytest.raises(ValueError):
        uniform_axis(0, 1, 0)
    with pytest.raises(ValueError):
        ParameterGrid([[]])
    with pytest.raises(ValueError):
        ParameterGrid([[1.0, 0.0]])


def test_huge_cardinality_is_exact():
    g = ParameterGrid([quantile_axis(50)] * 20)
    assert g.cardinality == 50**20
    assert g.cardinality > np.iinfo(np.int64).max
    assert g.log_cardinality == pytest.approx(20 * np.log(50))
    with pytest.raises(ValueError):
        g.full()


def test_full_grid_order_and_sample():
    g = ParameterGrid([[0.0, 1.0], [10.0, 20.0, 30.0]])
    full = g.full()
    assert len(full) == 6
    np.testing.assert_array_equal(full.values, np.array(list(g.iter_points())))
    s = g.sample(50, seed=3)
    np.testing.assert_array_equal(s.index, g.sample(50, seed=3).index)
    assert s.index[:, 1].max() <= 2


def test_locate_and_pointset_checks():
    g = ParameterGrid([uniform_axis(0, 1, 11)])
    assert g.locate(0, 0.3) == 3
    assert g.locate(0, 0.35) is None
    with pytest.raises(ValueError):
        PointSet(g, [[11]])
