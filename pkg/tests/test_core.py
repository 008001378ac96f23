import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from modnoise.core import (
    LEAKAGE_TOL,
    NeighborhoodSpec,
    NoisePmf,
    PrivacyBudget,
    QueryChannel,
    bd_cover,
    channel_privacy_profile,
    circular_shift,
    error_rate,
    mean_squared_error,
    privacy_profile,
    publish,
    publish_many,
    read_pmf_csv,
    sample_noise,
    write_pmf_csv,
)

SD = NeighborhoodSpec.single_distance
BD = NeighborhoodSpec.bounded_difference


@st.composite
def pmfs(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    w = draw(
        st.lists(
            st.floats(0.0, 1.0, allow_nan=False), min_size=n + 1, max_size=n + 1
        ).filter(lambda v: sum(v) > 1e-3)
    )
    w = np.asarray(w)
    return NoisePmf(n, 1, w / w.sum())


# ---------------------------------------------------------------- types


def test_pmf_validates_mass_sum_and_size():
    with pytest.raises(ValueError):
        NoisePmf(2, 1, [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        NoisePmf(2, 1, [0.5, 0.5])
    with pytest.raises(ValueError):
        NoisePmf(1, 1, [1.1, -0.1])


def test_pmf_clamps_tiny_negative_masses():
    pmf = NoisePmf(1, 1, [1.0 + 1e-13, -1e-13])
    assert pmf.masses[1] == 0.0
    assert not pmf.masses.flags.writeable


def test_vector_pmf_grid_and_marginal():
    grid = np.outer([0.5, 0.3, 0.2], [0.6, 0.3, 0.1])
    pmf = NoisePmf.from_array(grid)
    assert (pmf.n, pmf.dims, pmf.support_size) == (2, 2, 9)
    assert pmf[(1, 2)] == pytest.approx(0.03)
    assert np.allclose(pmf.marginal(0).masses, [0.5, 0.3, 0.2])
    assert np.allclose(pmf.marginal(1).masses, [0.6, 0.3, 0.1])


def test_neighborhood_constructors():
    assert BD(3).offsets == (1, 2, 3)
    assert SD(2).offsets == (2,)
    assert NeighborhoodSpec.arbitrary([3, 1, 3]).offsets == (1, 3)
    vec = NeighborhoodSpec.vector([(0, 2), (1, 1)])
    assert vec.dims == 2 and not vec.is_scalar
    with pytest.raises(ValueError):
        NeighborhoodSpec.vector([(0, 0)])
    with pytest.raises(ValueError):
        NeighborhoodSpec.arbitrary([0, 1])
    with pytest.raises(ValueError):
        SD(0)
    with pytest.raises(ValueError):
        BD(5).validate(4)


def test_mirrored_adds_negated_offsets():
    assert BD(2).mirrored(6).offsets == (1, 2, 5, 6)


def test_privacy_budget_ranges():
    PrivacyBudget(1.0, 0.5)
    with pytest.raises(ValueError):
        PrivacyBudget(0.0, 0.1)
    with pytest.raises(ValueError):
        PrivacyBudget(1.0, 1.5)


def test_channel_rows_must_sum_to_one():
    with pytest.raises(ValueError):
        QueryChannel(1, [[0.5, 0.4], [0.5, 0.5]])


# ---------------------------------------------------------------- leakage


@pytest.mark.parametrize('n', [1, 4, 9])
@pytest.mark.parametrize('eps', [0.01, 1.0, 5.0])
def test_uniform_pmf_never_leaks(n, eps):
    pmf = NoisePmf.uniform(n)
    for nbhd in (SD(1), BD(n), NeighborhoodSpec.arbitrary(range(1, n + 1))):
        assert privacy_profile(pmf, eps, nbhd).delta_actual == 0.0


def test_table_one_zero_delta_column_does_not_leak():
    f = np.array(oracles.GOLDEN_BD8[0.0])
    # Re-derive the unrounded column so rounding cannot create violations.
    pmf = NoisePmf(8, 1, oracles.bd_zero_delta(8, 3, 1.5))
    assert np.allclose(pmf.masses, f, atol=5e-5)
    assert privacy_profile(pmf, 1.5, BD(3)).delta_actual == 0.0


def test_point_mass_leaks_everything():
    report = privacy_profile(NoisePmf.point_mass(4), 1.0, SD(1))
    assert report.delta_actual == 1.0
    assert report.worst_offset == (1,)
    assert report.indicators[(1,)].tolist() == [True, False, False, False, False]


def test_boundary_equality_is_not_leakage():
    eps = 0.5
    f = np.array([math.exp(eps), 1.0])
    pmf = NoisePmf(1, 1, f / f.sum())
    assert privacy_profile(pmf, eps, SD(1)).delta_actual == 0.0


def test_report_fields_consistent():
    pmf = NoisePmf(3, 1, [0.7, 0.2, 0.05, 0.05])
    rep = privacy_profile(pmf, 0.5, BD(3))
    assert rep.delta_actual == max(rep.per_offset.values())
    assert rep.per_offset[rep.worst_offset] == rep.delta_actual
    d = rep.to_dict()
    assert d['delta_actual'] == rep.delta_actual
    assert len(d['per_offset']) == 3


@given(pmfs(), st.floats(0.05, 4.0), st.data())
def test_privacy_profile_matches_loop_oracle(pmf, eps, data):
    offsets = data.draw(
        st.sets(st.integers(1, pmf.n), min_size=1, max_size=pmf.n), label='offsets'
    )
    nbhd = NeighborhoodSpec.arbitrary(offsets)
    expected = oracles.leakage(pmf.masses, eps, offsets, LEAKAGE_TOL)
    assert privacy_profile(pmf, eps, nbhd).delta_actual == pytest.approx(
        expected, abs=1e-12
    )


@given(pmfs(max_n=6), st.floats(0.05, 4.0))
def test_leakage_non_increasing_in_eps(pmf, eps):
    nbhd = BD(pmf.n)
    lo = privacy_profile(pmf, eps, nbhd).delta_actual
    hi = privacy_profile(pmf, eps * 1.5, nbhd).delta_actual
    assert hi <= lo + 1e-12


def test_vector_privacy_profile_matches_oracle():
    rng = np.random.default_rng(3)
    grid = rng.random((3, 3))
    grid /= grid.sum()
    pmf = NoisePmf.from_array(grid)
    offs = [(0, 1), (1, 2), (2, 0)]
    expected = oracles.leakage(grid, 0.4, offs)
    got = privacy_profile(pmf, 0.4, NeighborhoodSpec.vector(offs)).delta_actual
    assert got == pytest.approx(expected, abs=1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        privacy_profile(NoisePmf.uniform(2, 2), 1.0, SD(1))


# ---------------------------------------------------------------- channels


def test_identical_rows_channel_has_no_leakage():
    rows = np.tile([0.2, 0.5, 0.3], (3, 1))
    assert channel_privacy_profile(QueryChannel(2, rows), 1.0, SD(1)).delta_actual == 0


def test_identity_channel_discloses():
    ch = QueryChannel(4, np.eye(5))
    assert channel_privacy_profile(ch, 1.0, SD(1)).delta_actual == 1.0


@given(pmfs(max_n=8), st.floats(0.05, 3.0))
def test_modular_channel_equals_noise_profile(pmf, eps):
    # The modular channel is shift invariant, so pairs (q, q - mu) and the
    # wrapped shift see the same ratios as the noise itself.
    nbhd = NeighborhoodSpec.arbitrary(range(1, pmf.n + 1))
    ch = QueryChannel.modular(pmf)
    a = channel_privacy_profile(ch, eps, nbhd, two_sided=False).delta_actual
    b = privacy_profile(pmf, eps, nbhd.mirrored(pmf.n)).delta_actual
    assert a == pytest.approx(b, abs=1e-12)


@given(pmfs(max_n=6), st.floats(0.05, 3.0), st.booleans())
def test_channel_profile_matches_loop_oracle(pmf, eps, two_sided):
    rows = QueryChannel.modular(pmf).rows
    rng = np.random.default_rng(int(eps * 1000))
    rows = rows * rng.uniform(0.5, 1.5, rows.shape)
    rows /= rows.sum(axis=1, keepdims=True)
    ch = QueryChannel(pmf.n, rows)
    offs = list(range(1, pmf.n + 1))
    got = channel_privacy_profile(ch, eps, BD(pmf.n), two_sided).delta_actual
    assert got == pytest.approx(oracles.channel_leakage(rows, eps, offs, two_sided))


def test_channel_rejects_vector_neighbourhood():
    with pytest.raises(ValueError):
        channel_privacy_profile(
            QueryChannel(2, np.eye(3)), 1.0, NeighborhoodSpec.vector([(0, 1)])
        )


# ---------------------------------------------------------------- utility


def test_error_rate_examples():
    assert error_rate(NoisePmf.uniform(4)) == pytest.approx(0.8)
    assert error_rate(NoisePmf.point_mass(4)) == 0.0
    pmf = NoisePmf(8, 1, oracles.bd_zero_delta(8, 3, 1.5))
    assert error_rate(pmf) == pytest.approx(1 - 0.5432, abs=5e-5)
    assert error_rate(NoisePmf.point_mass(2, 0, dims=2)) == 0.0


def test_mean_squared_error_examples():
    assert mean_squared_error(NoisePmf.point_mass(5)) == 0.0
    assert mean_squared_error(NoisePmf(2, 1, [0.7, 0.2, 0.1])) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        mean_squared_error(NoisePmf.uniform(2, 2))


# ---------------------------------------------------------------- publication


def test_publish_examples():
    assert publish(5, NoisePmf.point_mass(8), 0) == 5
    assert publish(6, NoisePmf.point_mass(7, 3), 0) == 1
    pmf = NoisePmf(4, 1, [0.3, 0.2, 0.2, 0.2, 0.1])
    assert publish(2, pmf, 42) == publish(2, pmf, 42)
    assert publish((1, 2), NoisePmf.point_mass(3, (1, 1)), 0) == (2, 3)
    with pytest.raises(ValueError):
        publish(9, pmf, 0)


def test_publish_many_matches_pmf_within_three_sigma():
    pmf = NoisePmf(5, 1, [0.4, 0.25, 0.15, 0.1, 0.07, 0.03])
    count = 10**6
    out = publish_many(3, pmf, count, rng_seed=11)
    eta = (out - 3) % 6
    freq = np.bincount(eta, minlength=6) / count
    sigma = np.sqrt(pmf.masses * (1 - pmf.masses) / count)
    assert np.all(np.abs(freq - pmf.masses) <= 3 * sigma + 1e-12)


def test_publish_many_agrees_with_single_draw_stream():
    pmf = NoisePmf(3, 1, [0.4, 0.3, 0.2, 0.1])
    many = publish_many(1, pmf, 5, rng_seed=9)
    eta = sample_noise(pmf, 5, 9)
    assert many.tolist() == ((eta + 1) % 4).tolist()


def test_bd_cover_examples():
    assert bd_cover(NeighborhoodSpec.arbitrary([1, 3])) == 3
    assert bd_cover(SD(2)) == 2
    assert bd_cover(BD(4)) == 4


def test_circular_shift_examples():
    pmf = NoisePmf(4, 1, [0.4, 0.3, 0.2, 0.06, 0.04])
    assert np.array_equal(circular_shift(pmf, 0).masses, pmf.masses)
    moved = circular_shift(NoisePmf.point_mass(4), 2)
    # g(eta) = f(eta + 2): the mass at 0 is read at eta = 3.
    assert moved.masses.tolist() == [0, 0, 0, 1, 0]
    back = circular_shift(circular_shift(pmf, 3), 5 - 3)
    assert np.array_equal(back.masses, pmf.masses)


# ---------------------------------------------------------------- CSV


def test_pmf_csv_round_trip_is_exact(tmp_path):
    pmf = NoisePmf(8, 1, oracles.bd_zero_delta(8, 3, 1.5))
    path = tmp_path / 'p.csv'
    write_pmf_csv(pmf, path)
    assert path.read_text().splitlines()[0] == 'eta,mass'
    back = read_pmf_csv(path)
    assert np.array_equal(back.masses, pmf.masses)


def test_vector_pmf_csv_round_trip(tmp_path):
    pmf = NoisePmf.from_array(np.outer([0.5, 0.5], [0.25, 0.75]))
    buf = io.StringIO()
    write_pmf_csv(pmf, buf)
    assert buf.getvalue().splitlines()[0] == 'eta1,eta2,mass'
    path = tmp_path / 'v.csv'
    path.write_text(buf.getvalue())
    assert np.array_equal(read_pmf_csv(path).masses, pmf.masses)


@pytest.mark.parametrize(
    'text',
    ['', 'eta,prob\n0,1\n', 'eta,mass\n0,0.5\n1,0.4\n', 'eta,mass\n0,abc\n'],
)
def test_pmf_csv_rejects_malformed(tmp_path, text):
    path = tmp_path / 'bad.csv'
    path.write_text(text)
    with pytest.raises(ValueError):
        read_pmf_csv(path)
