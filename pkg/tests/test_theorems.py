import numpy as np
import pytest

from blinkfim import fim as F
from blinkfim import theorems as T
from blinkfim.model import AnisotropicGaussianPSF, GaussianPSF, SourceModel


def test_verdict_three_valued():
    assert T.verdict(1e-3) == T.PASS
    assert T.verdict(-1e-3) == T.FAIL
    assert T.verdict(1e-12) == T.INDETERMINATE
    assert T.verdict(np.nan) == T.INDETERMINATE


def test_additivity_independent_sources(quad):
    m = SourceModel([-0.5, 0.7], None, 1.0, 1)
    c = T.certify_additivity(F.source_family(m, 0), F.source_family(m, 1), m.theta, quad)
    assert c.passed and c.claim == "Lemma1"


def test_additivity_same_family_doubles(quad):
    m = SourceModel([0.3], None, 1.0, 1)
    f = F.source_family(m, 0)
    assert T.certify_additivity(f, f, m.theta, quad).passed


def test_additivity_with_parameter_free_factor(quad):
    m = SourceModel([0.3], None, 1.0, 1)
    uniform = F.DensityFamily(pdf=lambda X, th: np.full(len(X), 1 / 10.0),
                              grad=lambda X, th: np.zeros((len(X), 1)), n_params=1,
                              box=lambda th: [(-5.0, 5.0)], scale=1.0)
    assert T.certify_additivity(F.source_family(m, 0), uniform, m.theta, quad).passed


def test_cohen(quad):
    q1, q2 = T.shifted_gaussians(1.0, 1.5)
    c = T.certify_cohen(q1, q2, 0.5, [0.0], quad)
    assert c.passed and c.margin > 0
    same = T.certify_cohen(q1, q1, 0.5, [0.0], quad)
    assert same.verdict == T.INDETERMINATE
    edge = T.certify_cohen(q1, q2, 1e-6, [0.0], quad)
    assert edge.margin < 1e-5 and edge.verdict != T.FAIL
    with pytest.raises(ValueError):
        T.certify_cohen(q1, q2, 1.0, [0.0], quad)


def test_theorem2_equal_and_unequal(quad):
    a, b = T.certify_theorem2(SourceModel.pair_1d(1.0, 0.0, 1.0, 10_000), quad)
    assert a.passed and b.passed
    a, b = T.certify_theorem2(SourceModel.pair_1d(1.0, 0.5, 1.0, 10_000), quad)
    assert b.passed and "outside" in a.note


def test_theorem2_coincident_is_indeterminate(quad):
    a, b = T.certify_theorem2(SourceModel.pair_1d(0.0, 0.0, 1.0, 10_000), quad)
    assert a.verdict == T.INDETERMINATE and b.verdict == T.INDETERMINATE


def test_theorem2_margins_vanish_when_separated(quad):
    a, b = T.certify_theorem2(SourceModel.pair_1d(20.0, 0.0, 1.0, 10_000), quad)
    assert a.verdict != T.FAIL and b.verdict != T.FAIL
    assert abs(a.margin) < 1e-8 and abs(b.margin) < 1e-8


def test_theorem2_2d_three_sources(quad):
    m = SourceModel([[0, 0], [1.0, 0.3], [-0.4, 0.9]], None, 1.0, 300)
    a, b = T.certify_theorem2(m, quad)
    assert a.passed and b.passed


def test_invariance(quad):
    pts = np.array([[0.0, 0.0], [1.3, -0.4], [-2.0, 0.7]])
    ok = T.certify_invariance(GaussianPSF(1.5, 2), pts, quad)
    assert ok.passed and ok.config["f0"] == pytest.approx(1 / 2.25, rel=1e-8)
    bad = T.certify_invariance(AnisotropicGaussianPSF([1.0, 1.4]), pts, quad)
    assert bad.verdict == T.FAIL


def test_theorem4():
    pairs = T.certify_theorem4(10_000, 1.0, 0.0, [0.0, 2.0])
    (a0, b0), (a2, b2) = pairs
    assert a0.verdict == b0.verdict == T.INDETERMINATE
    assert b2.passed and a2.verdict == T.INDETERMINATE and a2.spectrum[-1] > 0
    # trace gap N / (2 e sigma^2), normalized by Tr Q_blink = N / sigma^2
    assert b2.margin == pytest.approx(np.exp(-1) / 2, rel=1e-12)


def test_advantage(quad):
    certs = T.certify_advantage(SourceModel.pair_1d(1.0, 0.0, 1.0, 10_000), quad)
    assert [c.claim for c in certs] == ["CorollaryBounds", "Advantage_h_tot",
                                        "Advantage_h_ind", "Advantage_h_eig"]
    assert all(c.passed for c in certs)


def test_rotation_step(quad):
    m = SourceModel.pair_1d(0.8, 0.0, 1.0, 100)
    c = T.certify_rotation_step(F.fim_cofluorescent(m, quad), F.fim_blinking(m))
    assert c.passed and len(c.spectrum) == 2


def test_counterexample_search_finds_none(quad):
    certs, neg = T.search_counterexamples(30, seed=4, quad=quad)
    assert len(certs) > 30 and neg == []


def test_record_format():
    c = T.Certificate("X", T.PASS, 0.5, {"s_over_sigma": 1.0}, {"strict": 1e-9}, (0.1,), "a b")
    assert c.to_record() == ("claim=X verdict=pass margin=0.5 s_over_sigma=1.0 "
                             "tol_strict=1e-09 spectrum=0.1 note=a_b")


def test_default_suite_small_grid():
    certs = list(T.default_suite(grid=np.linspace(0.1, 3, 5), deltas=(0.0, 0.5)))
    assert not [c for c in certs if c.verdict == T.FAIL]
    claims = {c.claim for c in certs}
    assert {"Lemma1", "Lemma2", "Lemma4", "Theorem2A", "Theorem2B", "Theorem4A",
            "Theorem4B", "Theorem1Rotation", "Advantage_h_eig"} <= claims


def test_default_suite_flags_anisotropic_psf():
    certs = list(T.default_suite(suites=["invariance"],
                                 psf=AnisotropicGaussianPSF([1.0, 1.3])))
    assert [c.verdict for c in certs] == [T.FAIL]
