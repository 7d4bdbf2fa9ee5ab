import numpy as np

from steinshrink._mc import Accumulator, chunk_plan, chunk_rows, substream
from steinshrink import GaussianIso, Identity, mc_risk


def test_accumulator_matches_numpy(rng):
    data = rng.standard_t(5, size=40001) * 2.0 + 1.0
    acc = Accumulator()
    for part in np.array_split(data, 17):
        acc.add(part)
    assert np.isclose(acc.mean, data.mean())
    assert np.isclose(acc.variance, data.var(ddof=1))
    centered = data - data.mean()
    assert np.isclose(acc.m4 / acc.n, np.mean(centered**4), rtol=1e-10)


def test_accumulator_merge_order_invariance(rng):
    data = rng.normal(size=9000)
    one = Accumulator()
    one.add(data)
    a, b, c = Accumulator(), Accumulator(), Accumulator()
    a.add(data[:100])
    b.add(data[100:4000])
    c.add(data[4000:])
    a.merge(b)
    a.merge(c)
    assert np.isclose(a.mean, one.mean)
    assert np.isclose(a.m2, one.m2)
    assert np.isclose(a.m4, one.m4)


def test_chunk_plan_partitions():
    rows = chunk_rows(5)
    plan = list(chunk_plan(2 * rows + 7, 5))
    assert [r for _, r in plan] == [rows, rows, 7]
    assert [i for i, _ in plan] == [0, 1, 2]


def test_substream_deterministic():
    a = substream(42, 3).standard_normal(5)
    b = substream(42, 3).standard_normal(5)
    c = substream(42, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampling_independent_of_chunk_boundaries():
    model = GaussianIso(3, 1.0)
    full = model.sample(1000, 7)
    again = model.sample(1000, 7)
    assert np.array_equal(full, again)


def test_stderr_scales_with_replicates():
    # quadrupling n should halve the standard error within 25%
    model = GaussianIso(4, 1.0)
    small = mc_risk(model, Identity(), 20000, 5)
    large = mc_risk(model, Identity(), 80000, 5)
    ratio = small.stderr / large.stderr
    assert 1.5 < ratio < 2.5
