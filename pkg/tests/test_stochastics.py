import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from migration_gate.errors import DomainError
from migration_gate.stochastics import (
    BetaParams,
    RandomStream,
    beta_cdf,
    beta_quantile,
    beta_sample,
    gamma_sample,
    normal_sample,
    substream,
    substreams,
)


def test_beta_params_reject_non_positive():
    with pytest.raises(DomainError):
        BetaParams(0, 1)
    with pytest.raises(DomainError):
        BetaParams(1, -2)
    with pytest.raises(DomainError):
        BetaParams(float("inf"), 1)


def test_uniform_prior_median_is_half():
    assert beta_quantile(BetaParams(1, 1), 0.5) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("a,b", [(38, 4), (53, 7), (1, 9), (9, 1), (0.5, 0.5), (2, 30), (1e3, 1e3)])
@pytest.mark.parametrize("q", [0.001, 0.05, 0.5, 0.95, 0.999])
def test_quantile_matches_scipy(a, b, q):
    assert beta_quantile(BetaParams(a, b), q) == pytest.approx(stats.beta.ppf(q, a, b), abs=1e-9)


@pytest.mark.parametrize("a,b,x", [(3, 4, 0.2), (0.5, 2, 0.01), (40, 3, 0.9), (7, 7, 0.5)])
def test_cdf_matches_scipy(a, b, x):
    assert beta_cdf(BetaParams(a, b), x) == pytest.approx(stats.beta.cdf(x, a, b), abs=1e-12)


def test_quantile_endpoints_and_domain():
    p = BetaParams(2, 3)
    assert beta_quantile(p, 0.0) == 0.0
    assert beta_quantile(p, 1.0) == 1.0
    with pytest.raises(DomainError):
        beta_quantile(p, 1.5)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(0.3, 200), b=st.floats(0.3, 200),
    q1=st.floats(0.001, 0.999), q2=st.floats(0.001, 0.999),
)
def test_quantile_is_monotone_and_inverts_cdf(a, b, q1, q2):
    p = BetaParams(a, b)
    lo, hi = sorted((q1, q2))
    x_lo, x_hi = beta_quantile(p, lo), beta_quantile(p, hi)
    assert x_lo <= x_hi
    assert beta_cdf(p, x_lo) == pytest.approx(lo, abs=1e-7)


def test_same_seed_same_stream():
    a = [RandomStream(11, 3).uniform() for _ in range(1)]
    s1, s2 = RandomStream(11, 3), RandomStream(11, 3)
    assert [s1.uniform() for _ in range(5)] == [s2.uniform() for _ in range(5)]
    assert a[0] == RandomStream(11, 3).uniform()


def test_distinct_streams_differ():
    assert substream(5, 0).uniform() != substream(5, 1).uniform()
    assert substream(5, 0).uniform() != substream(6, 0).uniform()


def test_bank_lanes_equal_individual_streams():
    bank = substreams(99, np.arange(50))
    draws = beta_sample(BetaParams(3.5, 0.7), bank)
    singles = [beta_sample(BetaParams(3.5, 0.7), substream(99, i)) for i in range(50)]
    assert np.array_equal(draws, np.array(singles))


def test_uniforms_are_in_open_interval_and_flat():
    u = substreams(1, np.arange(200_000)).uniforms()
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


@pytest.mark.parametrize("shape", [0.3, 1.0, 2.5, 40.0])
def test_gamma_moments(shape):
    x = gamma_sample(shape, substreams(4, np.arange(400_000)))
    assert x.mean() == pytest.approx(shape, rel=0.01)
    assert x.var() == pytest.approx(shape, rel=0.03)


def test_gamma_rejects_bad_shape():
    with pytest.raises(DomainError):
        gamma_sample(0.0, substream(1, 0))


def test_beta_draws_follow_distribution():
    x = beta_sample(BetaParams(53, 7), substreams(8, np.arange(200_000)))
    assert stats.kstest(x, "beta", args=(53, 7)).pvalue > 1e-3
    assert np.all((x > 0) & (x < 1))


def test_normal_sample():
    assert normal_sample(2.0, 0.0, substream(1, 0)) == 2.0
    z = normal_sample(0.0, 1.0, substreams(2, np.arange(200_000)))
    assert abs(z.mean()) < 0.01 and z.std() == pytest.approx(1.0, abs=0.01)
    with pytest.raises(DomainError):
        normal_sample(0.0, -1.0, substream(1, 0))


def test_seed_must_fit_in_64_bits():
    with pytest.raises(DomainError):
        RandomStream(2**64, 0)
    with pytest.raises(DomainError):
        RandomStream(-1, 0)
    assert math.isfinite(RandomStream(2**64 - 1, 0).uniform())
