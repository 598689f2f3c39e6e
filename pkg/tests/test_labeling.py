import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from selfsup_labels.errors import NegativeTau
from selfsup_labels.labeling import (
    class_counts_sweep,
    default_tau_grid,
    label_values,
    naive_label,
    write_labels_csv,
)
from selfsup_labels.market_data import PriceSeries, ReturnSeries, log_returns


def _r(values):
    return ReturnSeries(np.asarray(values, dtype=float), "log")


def test_single_cases():
    assert naive_label(_r([0.02]), 0.01).labels.tolist() == [1]
    assert naive_label(_r([-0.0100]), 0.0100).labels.tolist() == [0]
    assert naive_label(_r([0.0100]), 0.0100).labels.tolist() == [0]
    assert naive_label(_r([-0.03]), 0.01).labels.tolist() == [-1]


def test_sequence():
    ls = naive_label(_r([0.03, -0.002, 0.001]), 0.005)
    assert ls.labels.tolist() == [1, 0, 0]
    assert ls.tau == 0.005 and ls.source == "original"


def test_negative_tau():
    with pytest.raises(NegativeTau):
        naive_label(_r([0.1]), -0.01)
    with pytest.raises(NegativeTau):
        class_counts_sweep(_r([0.1]), [-1.0, 0.0])


def test_requires_log_returns():
    with pytest.raises(ValueError):
        naive_label(ReturnSeries(np.array([0.1]), "simple"), 0.0)


def test_sweep_examples():
    counts = class_counts_sweep(_r([0.02, -0.02]), [0.0, 0.03])
    assert [(c.count_up, c.count_down, c.count_none) for c in counts] == [(1, 1, 0), (0, 0, 2)]
    zero = class_counts_sweep(_r(np.zeros(7)), [0.0, 0.1, 1.0])
    assert all(c.count_none == 7 for c in zero)


def test_sweep_requires_increasing_grid():
    with pytest.raises(ValueError):
        class_counts_sweep(_r([0.1]), [0.1, 0.1])


def _relabel_count(r, tau, cls):
    n = 0
    for v in r:
        lab = 1 if v > tau else -1 if v < -tau else 0
        n += lab == cls
    return n


returns_arrays = arrays(np.float64, st.integers(1, 80), elements=st.floats(-0.2, 0.2))


@settings(max_examples=100, deadline=None)
@given(returns_arrays, st.lists(st.floats(0, 0.25), min_size=2, max_size=8, unique=True))
def test_sweep_matches_exhaustive_relabeling_and_is_monotone(r, taus):
    taus = sorted(taus)
    counts = class_counts_sweep(_r(r), taus)
    for c in counts:
        assert c.count_none == _relabel_count(r, c.tau, 0)
        assert c.count_up == _relabel_count(r, c.tau, 1)
        assert c.total == len(r)
    for a, b in zip(counts, counts[1:]):
        assert a.count_none <= b.count_none
        assert a.count_up >= b.count_up
        assert a.count_down >= b.count_down


@settings(max_examples=100, deadline=None)
@given(returns_arrays, st.floats(0, 0.25))
def test_sign_symmetry(r, tau):
    a = class_counts_sweep(_r(r), [tau])[0]
    b = class_counts_sweep(_r(r).negated(), [tau])[0]
    assert (a.count_up, a.count_down, a.count_none) == (b.count_down, b.count_up, b.count_none)


def test_tau_zero_is_binary_without_exact_zeros(rng):
    r = rng.normal(0, 0.01, 500)
    r = r[r != 0]
    assert 0 not in naive_label(_r(r), 0.0).labels
    # an exact zero return stays in the no-signal class
    assert naive_label(_r([0.0, 0.1]), 0.0).labels.tolist() == [0, 1]


def test_default_grid(rng):
    r = _r(rng.normal(0, 0.01, 1000))
    grid = default_tau_grid(r)
    assert len(grid) == 21 and grid[0] == 0.0
    assert grid[-1] == pytest.approx(np.quantile(np.abs(r.values), 0.9))
    assert np.allclose(np.diff(grid), grid[1])


def test_labels_csv(tmp_path):
    s = PriceSeries.from_values([100, 102, 101, 101])
    r = log_returns(s)
    path = tmp_path / "labels.csv"
    write_labels_csv(path, s.timestamps, r, naive_label(r, 0.005))
    lines = path.read_text().splitlines()
    assert lines[0] == "timestamp,return,label,tau,source"
    assert [ln.split(",")[2] for ln in lines[1:]] == ["1", "-1", "0"]
    assert lines[1].split(",")[0] == s.timestamps[1]


def test_label_values_vectorised_matches_scalar(rng):
    r = rng.normal(0, 0.02, 200)
    got = label_values(r, 0.01)
    assert got.tolist() == [1 if v > 0.01 else -1 if v < -0.01 else 0 for v in r]
