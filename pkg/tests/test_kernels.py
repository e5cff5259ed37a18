import math

import numpy as np
import pytest
from scipy.stats import chi2

from affinet.domain import Geometry, Params
from affinet.errors import EnvelopeViolationError
from affinet.kernels import (
    AffinitySiteKernel,
    InvitationKernel,
    KernelSet,
    LocalAffinity,
    affinity_accept_prob,
    affinity_integral,
    invitation_accept_prob,
    local_affinity,
    sample_affinity_site,
    sample_invitation_offset,
)


def radial_quadrature_integral(A_f, a_f, side=1.0, n=200_000):
    """Independent oracle: 2*pi*A_f*int_0^a (1 - r/a) r dr / side^2 by midpoint rule."""
    r = (np.arange(n) + 0.5) * (a_f / n)
    return 2.0 * math.pi * A_f * np.sum((1.0 - r / a_f) * r) * (a_f / n) / side**2


@pytest.fixture
def kernels(base_params):
    return KernelSet.from_params(base_params)


def test_local_affinity_examples(kernels):
    aff = kernels.affinity
    x = np.array([0.5, 0.5])
    assert aff.value(x, x) == 0.0
    y = np.array([0.55, 0.5])  # distance a_f/2
    assert aff.value(x, y) == pytest.approx(0.5, rel=1e-12)
    z = np.array([0.65, 0.5])  # distance 1.5 a_f
    assert aff.value(x, z) == 0.0


def test_local_affinity_symmetry(rng, kernels):
    aff = kernels.affinity
    for _ in range(200):
        x, y = rng.random(2), rng.random(2)
        assert aff.value(x, y) == aff.value(y, x)


def test_local_affinity_bounds(rng, kernels):
    xs = rng.random((1_000_000, 2))
    vals = kernels.affinity.value_many(xs, np.array([0.5, 0.5]))
    assert np.all(vals >= 0.0) and np.all(vals <= kernels.affinity.A_f)


def test_invitation_offset_moments(kernels):
    rng = np.random.default_rng(7)
    draws = np.array([kernels.invitation.sample_offset(rng) for _ in range(100_000)])
    sigma = kernels.invitation.sigma
    assert np.all(np.abs(draws.mean(axis=0)) < 4 * sigma / math.sqrt(100_000))
    assert np.allclose(draws.std(axis=0), sigma, rtol=0.05)


def test_invitation_offset_deterministic(kernels):
    a = kernels.invitation.sample_offset(np.random.default_rng(99))
    b = kernels.invitation.sample_offset(np.random.default_rng(99))
    np.testing.assert_array_equal(a, b)


def test_invitation_accept_prob_default(kernels, rng):
    for _ in range(50):
        x, z = rng.random(2), rng.normal(0, 0.01, 2)
        assert kernels.invitation.accept_prob(x, z) == 1.0


def test_invitation_accept_prob_envelope_constant(base_params):
    inv = InvitationKernel(sigma=0.01, gamma1=2.0)
    assert inv.accept_prob(np.zeros(2), np.zeros(2)) == 0.5


def test_invitation_envelope_violation():
    class BrokenEnvelope(InvitationKernel):
        def envelope_density(self, z):
            return 0.0

        def target_density(self, x, z):
            return 1.0

    broken = BrokenEnvelope(sigma=0.01)
    with pytest.raises(EnvelopeViolationError):
        broken.accept_prob(np.zeros(2), np.zeros(2))

    class Undersized(InvitationKernel):
        def target_density(self, x, z):
            return 3.0 * self.envelope_density(z)

    with pytest.raises(EnvelopeViolationError):
        Undersized(sigma=0.01, gamma1=1.5).accept_prob(np.zeros(2), np.ones(2) * 0.001)


def test_affinity_site_uniformity(kernels):
    rng = np.random.default_rng(11)
    draws = np.array([kernels.site.sample_site(rng) for _ in range(100_000)])
    assert np.all(draws >= 0.0) and np.all(draws < 1.0)
    counts, _, _ = np.histogram2d(draws[:, 0], draws[:, 1], bins=10, range=[[0, 1], [0, 1]])
    expected = 1000.0
    sigma = math.sqrt(expected * (1 - 1 / 100))
    assert np.all(np.abs(counts - expected) < 5 * sigma)


def test_affinity_site_deterministic(kernels):
    a = kernels.site.sample_site(np.random.default_rng(3))
    b = kernels.site.sample_site(np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_affinity_accept_prob_examples(kernels):
    x = np.array([0.5, 0.5])
    assert affinity_accept_prob(x, np.array([0.55, 0.5]), kernels) == pytest.approx(0.5)
    assert affinity_accept_prob(x, np.array([0.7, 0.5]), kernels) == 0.0
    assert affinity_accept_prob(x, x, kernels) == 0.0


def test_affinity_accept_prob_zero_amplitude():
    params = Params(alpha=1.0, beta0=1.0, A_f=0.0, a_f=0.1, sigma=0.01)
    kernels = KernelSet.from_params(params)
    assert affinity_accept_prob(np.zeros(2), np.ones(2) * 0.01, kernels) == 0.0


def test_module_level_seam(kernels):
    rng = np.random.default_rng(5)
    z = sample_invitation_offset(rng, kernels)
    assert z.shape == (2,)
    y = sample_affinity_site(rng, kernels)
    assert y.shape == (2,)
    assert invitation_accept_prob(np.zeros(2), z, kernels) == 1.0
    assert 0.0 <= affinity_accept_prob(np.zeros(2), y, kernels) <= 1.0
    assert local_affinity(np.zeros(2), y, kernels.affinity) >= 0.0


def test_affinity_integral_against_quadrature_oracle(base_params):
    oracle = radial_quadrature_integral(1.0, 0.1)
    value = affinity_integral(base_params)
    assert value == pytest.approx(oracle, rel=1e-6)
    assert value == pytest.approx(math.pi / 300, rel=1e-12)


def test_affinity_integral_linearity():
    zero = Params(alpha=1.0, beta0=1.0, A_f=0.0, a_f=0.1, sigma=0.01)
    assert affinity_integral(zero) == 0.0
    double = Params(alpha=1.0, beta0=1.0, A_f=2.0, a_f=0.1, sigma=0.01)
    assert affinity_integral(double) == pytest.approx(2 * math.pi / 300, rel=1e-12)
    oracle = radial_quadrature_integral(2.0, 0.1)
    assert affinity_integral(double) == pytest.approx(oracle, rel=1e-6)


def test_affinity_integral_stratified_monte_carlo(base_params):
    # One uniform sample per stratum of a 3163^2 grid: ~1e7 evaluations whose
    # stratification shrinks the Monte Carlo error to ~5e-6 relative.
    rng = np.random.default_rng(2024)
    aff = LocalAffinity(A_f=1.0, a_f=0.1)
    m = 3163
    total = 0.0
    x = np.array([0.5, 0.5])
    for band in range(10):
        rows = np.arange(band * m // 10, (band + 1) * m // 10)
        u = (rows[:, None] + rng.random((len(rows), m))) / m
        v = (np.arange(m)[None, :] + rng.random((len(rows), m))) / m
        pts = np.stack([u.ravel(), v.ravel()], axis=1)
        total += aff.value_many(pts, x).sum()
    mc = total / (m * m)
    assert mc == pytest.approx(affinity_integral(base_params), rel=5e-5)


def test_rejection_sampler_radial_distribution(base_params):
    """Accepted affinity sites around one particle follow the triangular law.

    Chi-square test at the 0.1% level on the radial histogram of ~1e5
    accepted draws; the envelope is the uniform site kernel and acceptance is
    the triangular ratio, exactly as in the event loop.
    """
    rng = np.random.default_rng(31337)
    a_f = base_params.a_f
    x = np.array([0.4, 0.6])
    accepted = []
    target = 100_000
    while sum(len(a) for a in accepted) < target:
        y = rng.random((2_000_000, 2))
        d = np.abs(y - x)
        d = np.minimum(d, 1.0 - d)
        dist = np.sqrt((d * d).sum(axis=1))
        p = np.clip(1.0 - dist / a_f, 0.0, None)
        keep = rng.random(2_000_000) <= p
        accepted.append(dist[keep])
    dist = np.concatenate(accepted)[:target]

    n_bins = 20
    edges = np.linspace(0.0, a_f, n_bins + 1)
    counts, _ = np.histogram(dist, bins=edges)
    # normalized triangular radial density: (1 - r/a) r / int_0^a (1 - r/a) r dr
    cdf_bits = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = np.linspace(lo, hi, 2000)
        cdf_bits.append(np.trapezoid((1 - r / a_f) * r, r))
    probs = np.array(cdf_bits)
    probs /= probs.sum()
    expected = probs * target
    stat = np.sum((counts - expected) ** 2 / expected)
    assert stat < chi2.ppf(0.999, df=n_bins - 1)
