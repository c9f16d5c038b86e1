"""Slope certificates on surfaces: roots, witnesses, verdicts."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from slopeflow.errors import InputError
from slopeflow.surface_lattice import DivisorClass, intersect, volume
from slopeflow.surface_slopes import (
    SEMISTABLE,
    STABLE,
    UNSTABLE,
    bigness_threshold,
    blowup_plane_model,
    dhym_slope_certificate,
    j_slope_certificate,
    one_point_blowup_certificate,
)


@pytest.fixture(scope="module")
def blp2():
    return blowup_plane_model()


def test_j_unstable_closed_form_root(blp2):
    alpha = DivisorClass.of(2, "0.3")
    beta = DivisorClass.of(3, 1)
    cert = j_slope_certificate(alpha, beta, blp2)
    # oracle: root of (2-3s)^2 = 8 s^2 gives xi = (3 + 2 sqrt 2)/2
    xi_exact = (3 + 2 * math.sqrt(2)) / 2
    assert abs(cert.slope - xi_exact) < 1e-9
    assert cert.verdict == UNSTABLE
    assert cert.topological_slope == pytest.approx(11.4 / 3.91, rel=1e-14)
    assert cert.slope < cert.topological_slope
    assert cert.bracket[0] <= cert.slope <= cert.bracket[1]
    # witness divisor is (5.7 - 4 sqrt 2) E, negative part of the Zariski split
    assert cert.witness is not None
    w = -float(cert.witness.coeffs[1])  # E-multiple in the (H, -E) basis
    assert abs(w - (5.7 - 4 * math.sqrt(2))) < 1e-9
    assert abs(cert.witness_slope - xi_exact) < 1e-9


def test_j_witness_realizes_slope_exactly(blp2):
    alpha = DivisorClass.of(2, "0.3")
    beta = DivisorClass.of(3, 1)
    cert = j_slope_certificate(alpha, beta, blp2)
    ap = alpha - cert.witness
    recomputed = 2 * intersect(ap, beta, blp2) / intersect(ap, ap, blp2)
    assert abs(float(recomputed) - cert.slope) < 1e-9


def test_j_stable_curve_slopes(blp2):
    alpha = DivisorClass.of(2, 1)   # 2H - E
    beta = DivisorClass.of(3, 1)    # 3H - E
    cert = j_slope_certificate(alpha, beta, blp2)
    mu = F(10, 3)
    slopes = [
        intersect(beta, c, blp2) / intersect(alpha, c, blp2) for c in blp2.curves
    ]
    assert slopes == [F(1), F(2), F(3, 2)]
    assert all(s < mu for s in slopes)
    assert cert.verdict == STABLE
    assert cert.slope == pytest.approx(float(mu), abs=1e-12)
    assert cert.residual == 0.0


def test_j_alpha_equals_beta(blp2):
    alpha = DivisorClass.of(2, "0.5")
    cert = j_slope_certificate(alpha, alpha, blp2)
    assert cert.slope == pytest.approx(2.0, abs=1e-12)
    assert cert.verdict == STABLE


def test_j_requires_kahler_inputs(blp2):
    with pytest.raises(InputError):
        j_slope_certificate(DivisorClass.of(1, 1), DivisorClass.of(3, 1), blp2)


def test_j_destabilizing_witness_property(blp2):
    alpha = DivisorClass.of(2, "0.3")
    beta = DivisorClass.of(3, 1)
    cert = j_slope_certificate(alpha, beta, blp2)
    d = cert.witness
    mu = 2 * intersect(alpha, beta, blp2) / intersect(alpha, alpha, blp2)
    assert intersect(beta, d, blp2) / intersect(alpha, d, blp2) > mu


def test_j_decreasing_volume_ratio(blp2):
    # f(s) = vol(alpha - s beta)/(s^2 beta^2) strictly decreasing on the bracket
    alpha = DivisorClass.of(2, "0.3")
    beta = DivisorClass.of(3, 1)
    b2 = intersect(beta, beta, blp2)
    mu = 2 * intersect(alpha, beta, blp2) / intersect(alpha, alpha, blp2)
    values = []
    for k in range(40):
        s = (1 / mu) * (1 + F(k, 60))
        v = volume(alpha - s * beta, blp2) / (s * s * b2)
        if v == 0:
            break
        values.append(v)
    assert all(v2 < v1 for v1, v2 in zip(values, values[1:]))


def test_dhym_unstable_root(blp2):
    alpha = DivisorClass.of(3, 0)
    beta = DivisorClass.of(2, 1)
    cert = dhym_slope_certificate(alpha, beta, blp2)
    xi_exact = 6 - math.sqrt(30)  # root of t^2 - 12t + 6 = 0
    assert abs(cert.slope - xi_exact) < 1e-9
    assert cert.verdict == UNSTABLE
    assert cert.topological_slope == pytest.approx(0.5, abs=1e-15)
    assert cert.slope >= cert.topological_slope
    assert abs(cert.witness_slope - cert.slope) < 1e-9


def test_dhym_alpha_equals_beta(blp2):
    alpha = DivisorClass.of(2, 1)
    cert = dhym_slope_certificate(alpha, alpha, blp2)
    assert cert.slope == pytest.approx(0.0, abs=1e-15)
    assert cert.verdict == STABLE


def test_dhym_stable_case(blp2):
    alpha = DivisorClass.of(3, 1)   # 3H - E
    beta = DivisorClass.of(2, 1)    # 2H - E
    cert = dhym_slope_certificate(alpha, beta, blp2)
    assert cert.topological_slope == pytest.approx(0.5)
    assert cert.verdict == STABLE
    assert cert.slope == pytest.approx(0.5, abs=1e-12)


def test_dhym_sign_convention_guard(blp2):
    with pytest.raises(InputError):
        dhym_slope_certificate(DivisorClass.of(-3, 0), DivisorClass.of(2, 1), blp2)


def test_dhym_volume_equation_convexity(blp2):
    # f(t) = vol(alpha - t beta) - (1+t^2) beta^2 has nonnegative second
    # differences on a uniform grid inside the big range
    alpha = DivisorClass.of(3, 0)
    beta = DivisorClass.of(2, 1)
    b2 = intersect(beta, beta, blp2)
    ts = [F(1, 2) + F(k, 100) for k in range(60)]
    vals = [volume(alpha - t * beta, blp2) - (1 + t * t) * b2 for t in ts]
    second = [vals[i - 1] - 2 * vals[i] + vals[i + 1] for i in range(1, len(vals) - 1)]
    assert all(s >= 0 for s in second)


def test_bigness_threshold(blp2):
    alpha = DivisorClass.of(3, 0)
    beta = DivisorClass.of(2, 1)
    # alpha - t beta = (3-2t)H + tE is big for t < 3/2
    assert bigness_threshold(alpha, beta, blp2) == pytest.approx(1.5, abs=1e-9)


def test_closed_form_matches_paper_example():
    cert = one_point_blowup_certificate(2, 3, 0)
    assert abs(cert.slope - (6 - math.sqrt(30))) < 1e-12
    assert cert.verdict == UNSTABLE
    assert cert.topological_slope == pytest.approx(0.5)


def test_closed_form_semistable_boundary():
    # (b,p,q) = (3,1,-1): the discriminant is a perfect square and q = c0,
    # so the trichotomy sits exactly on the semistable boundary
    cert = one_point_blowup_certificate(3, 1, -1)
    assert cert.verdict == SEMISTABLE
    assert cert.slope == pytest.approx(-1.0, abs=1e-12)
    assert cert.topological_slope == pytest.approx(-1.0, abs=1e-15)


def test_closed_form_balanced_pair_is_stable():
    cert = one_point_blowup_certificate(2, 2, 1)
    assert cert.verdict == STABLE
    assert cert.slope == pytest.approx(0.0, abs=1e-15)


def test_closed_form_near_boundary_instance():
    # q = 1/2 sits just below c0 = 23/44, hence unstable with the generic root
    cert = one_point_blowup_certificate(2, 3, F(1, 2))
    assert cert.topological_slope == pytest.approx(float(F(23, 44)), abs=1e-15)
    assert cert.verdict == UNSTABLE
    assert abs(cert.slope - (6 - math.sqrt(30))) < 1e-12


def test_closed_form_input_guards():
    with pytest.raises(InputError):
        one_point_blowup_certificate(1, 3, 0)
    with pytest.raises(InputError):
        one_point_blowup_certificate(2, 1, 5)


def test_closed_form_agrees_with_volume_solver(blp2):
    rng = np.random.default_rng(20240817)
    agree = 0
    while agree < 100:
        b = F(int(rng.integers(11, 40)), 10)
        p = F(int(rng.integers(5, 60)), 10)
        q = F(int(rng.integers(-20, int(10 * float(b * p)) - 1)), 10)
        if b * p <= q:
            continue
        closed = one_point_blowup_certificate(b, p, q)
        alpha = DivisorClass((p, q))
        beta = DivisorClass((b, F(1)))
        general = dhym_slope_certificate(alpha, beta, blp2)
        assert abs(closed.slope - general.slope) < 1e-9, (b, p, q)
        assert closed.verdict == general.verdict, (b, p, q)
        agree += 1


def test_certificate_serialization(blp2):
    cert = dhym_slope_certificate(DivisorClass.of(3, 0), DivisorClass.of(2, 1), blp2)
    d = cert.to_dict()
    assert d["schema"] == 1
    assert d["verdict"] == UNSTABLE
    assert isinstance(d["witness"]["coeffs"][1], float)
