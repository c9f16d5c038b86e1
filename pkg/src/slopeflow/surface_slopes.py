"""Slope certificates for the J-equation and the dHYM equation on surfaces.

The minimal J-slope is the root of vol(alpha - beta/xi) = beta^2/xi^2 and the
dHYM slope is the root of vol(alpha - t beta) = (1 + t^2) beta^2; both roots
are bracketed by monotonicity/convexity of the volume and found by bisection
with exact rational volume evaluations at dyadic rational points.  The
negative part of the Zariski decomposition at the root is the witness divisor
achieving the slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InputError, RootBracketError
from .surface_lattice import (
    DivisorClass,
    SurfaceModel,
    intersect,
    is_kahler,
    is_nef,
    volume,
    zariski,
)

__all__ = [
    "STABLE",
    "SEMISTABLE",
    "UNSTABLE",
    "SlopeCertificate",
    "j_slope_certificate",
    "dhym_slope_certificate",
    "one_point_blowup_certificate",
    "bigness_threshold",
    "blowup_plane_model",
]

STABLE = "Stable"
SEMISTABLE = "Semistable"
UNSTABLE = "Unstable"

#: relative bracket width for bisection and the residual certificate scale
BRACKET_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass
class SlopeCertificate:
    """Result of a slope root-finding run.

    slope             root of the volume equation (zeta_min or zeta_H)
    bracket           interval certified to contain the exact root
    witness           negative part of the Zariski decomposition at the root,
                      None when the decomposition has no negative part
    verdict           Stable / Semistable / Unstable
    topological_slope mu = 2 a.b/a^2 for J, c0 = (a^2-b^2)/(2a.b) for dHYM
    residual          |f(slope)| of the defining volume equation
    witness_slope     slope recomputed from the witness divisor (cross-check)
    """

    equation: str
    slope: float
    bracket: tuple[float, float]
    witness: DivisorClass | None
    verdict: str
    topological_slope: float
    residual: float
    witness_slope: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "equation": self.equation,
            "slope": self.slope,
            "bracket": list(self.bracket),
            "witness": None if self.witness is None else {
                "coeffs": self.witness.as_floats(),
                "coeffs_exact": [str(c) for c in self.witness.coeffs],
            },
            "verdict": self.verdict,
            "topological_slope": self.topological_slope,
            "residual": self.residual,
            "witness_slope": self.witness_slope,
        }


def _bisect_exact(f, lo: Fraction, hi: Fraction, tol: float) -> tuple[Fraction, Fraction]:
    """Bisect a sign change of f (exact rational values) to relative width tol.

    Requires f(lo) > 0 > f(hi).  Midpoints are dyadic refinements of the
    endpoints so every evaluation stays exact.
    """
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 and fhi < 0):
        raise RootBracketError("bracket endpoints do not straddle the root")
    scale = max(abs(hi), Fraction(1))
    while hi - lo > Fraction(repr(tol)) * scale:
        mid = (lo + hi) / 2
        fm = f(mid)
        if fm == 0:
            return mid, mid
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def j_slope_certificate(
    alpha: DivisorClass, beta: DivisorClass, model: SurfaceModel, tol: float = BRACKET_TOL
) -> SlopeCertificate:
    """Minimal J-slope certificate for two Kahler classes on a surface.

    The root xi of vol(alpha - beta/xi) = beta^2/xi^2 is located in
    (mu0, mu]; the function s -> vol(alpha - s beta) - s^2 beta^2 of s = 1/xi
    is positive at s = 1/mu (with equality exactly in the non-unstable case)
    and eventually negative, so a sign change brackets the root.  The verdict
    compares curve slopes (beta.C)/(alpha.C) with mu over the curve list.
    """
    if not is_kahler(alpha, model):
        raise InputError("alpha is not Kahler on this model")
    if not is_kahler(beta, model):
        raise InputError("beta is not Kahler on this model")
    a2 = intersect(alpha, alpha, model)
    ab = intersect(alpha, beta, model)
    b2 = intersect(beta, beta, model)
    mu = 2 * ab / a2

    curve_slopes = []
    for c in model.curves:
        ac = intersect(alpha, c, model)
        bc = intersect(beta, c, model)
        curve_slopes.append(bc / ac)
    if all(cs < mu for cs in curve_slopes):
        verdict = STABLE
    elif all(cs <= mu for cs in curve_slopes):
        verdict = SEMISTABLE
    else:
        verdict = UNSTABLE

    def g(s: Fraction) -> Fraction:
        return volume(alpha - s * beta, model) - s * s * b2

    s_mu = 1 / mu
    g0 = g(s_mu)
    if g0 < 0:
        raise RootBracketError("vol(alpha - beta/mu) < beta^2/mu^2; inconsistent model")
    if g0 == 0:
        # alpha - beta/mu is nef: the root is exactly mu.
        xi = mu
        dec = zariski(alpha - s_mu * beta, model)
        witness = dec.negative_class(model)
        witness = None if witness.is_zero() else witness
        cert = SlopeCertificate(
            equation="j",
            slope=float(xi),
            bracket=(float(xi), float(xi)),
            witness=witness,
            verdict=verdict,
            topological_slope=float(mu),
            residual=0.0,
        )
        cert.witness_slope = _j_witness_slope(alpha, beta, model, witness)
        return cert

    s_hi = s_mu
    for _ in range(200):
        s_hi = 2 * s_hi
        if g(s_hi) < 0:
            break
    else:
        raise RootBracketError("could not bracket the J volume equation root")
    lo, hi = _bisect_exact(g, s_mu, s_hi, tol)
    s_root = (lo + hi) / 2
    xi_lo, xi_hi = 1 / hi, 1 / lo
    xi = float(1 / s_root)

    dec = zariski(alpha - s_root * beta, model)
    witness = dec.negative_class(model)
    witness = None if witness.is_zero() else witness
    residual = abs(float(g(s_root)))
    cert = SlopeCertificate(
        equation="j",
        slope=xi,
        bracket=(float(xi_lo), float(xi_hi)),
        witness=witness,
        verdict=verdict,
        topological_slope=float(mu),
        residual=residual,
    )
    cert.witness_slope = _j_witness_slope(alpha, beta, model, witness)
    if residual > RESIDUAL_TOL * float(b2):
        raise RootBracketError(f"J root residual {residual} exceeds certificate tolerance")
    return cert


def _j_witness_slope(alpha, beta, model, witness) -> float:
    ap = alpha if witness is None else alpha - witness
    return float(2 * intersect(ap, beta, model) / intersect(ap, ap, model))


def bigness_threshold(
    alpha: DivisorClass, beta: DivisorClass, model: SurfaceModel, tol: float = BRACKET_TOL
) -> float:
    """sup{t : alpha - t beta is big}, located by bisection on the volume."""
    t_lo = Fraction(0)
    if volume(alpha, model) <= 0:
        raise InputError("alpha itself is not big; no positive threshold")
    t_hi = Fraction(1)
    for _ in range(200):
        if volume(alpha - t_hi * beta, model) == 0:
            break
        t_lo = t_hi
        t_hi *= 2
    else:
        raise RootBracketError("alpha - t beta stays big for unreasonably large t")
    while t_hi - t_lo > Fraction(repr(tol)) * max(t_hi, Fraction(1)):
        mid = (t_lo + t_hi) / 2
        if volume(alpha - mid * beta, model) > 0:
            t_lo = mid
        else:
            t_hi = mid
    return float((t_lo + t_hi) / 2)


def dhym_slope_certificate(
    alpha: DivisorClass, beta: DivisorClass, model: SurfaceModel, tol: float = BRACKET_TOL
) -> SlopeCertificate:
    """dHYM slope certificate: the root of vol(alpha - t beta) = (1+t^2) beta^2.

    f(t) = vol(alpha - t beta) - (1+t^2) beta^2 is convex with f(c0) >= 0
    (equality exactly when alpha - c0 beta is nef) and f < 0 beyond the
    bigness threshold, so the root in [c0, t0) is unique.  Verdict: Stable if
    alpha - c0 beta is Kahler, Semistable if it is nef but not Kahler,
    Unstable otherwise.
    """
    if not is_kahler(beta, model):
        raise InputError("beta is not Kahler on this model")
    ab = intersect(alpha, beta, model)
    if ab <= 0:
        raise InputError("alpha.beta <= 0; replace alpha by -alpha and retry")
    a2 = intersect(alpha, alpha, model)
    b2 = intersect(beta, beta, model)
    c0 = (a2 - b2) / (2 * ab)

    gamma0 = alpha - c0 * beta
    if is_kahler(gamma0, model):
        verdict = STABLE
    elif is_nef(gamma0, model):
        verdict = SEMISTABLE
    else:
        verdict = UNSTABLE

    def f(t: Fraction) -> Fraction:
        return volume(alpha - t * beta, model) - (1 + t * t) * b2

    f0 = f(c0)
    if f0 < 0:
        raise RootBracketError("vol(alpha - c0 beta) < (1+c0^2) beta^2; inconsistent model")
    if f0 == 0:
        xi = c0
        dec = zariski(alpha - c0 * beta, model)
        witness = dec.negative_class(model)
        witness = None if witness.is_zero() else witness
        cert = SlopeCertificate(
            equation="dhym",
            slope=float(xi),
            bracket=(float(xi), float(xi)),
            witness=witness,
            verdict=verdict,
            topological_slope=float(c0),
            residual=0.0,
        )
        cert.witness_slope = _dhym_witness_slope(alpha, beta, model, witness)
        return cert

    # f(c0) > 0: back off from the bigness threshold until f < 0.
    t0 = Fraction(repr(bigness_threshold(alpha, beta, model, tol)))
    t_hi = None
    for k in range(60):
        cand = t0 - (t0 - c0) * Fraction(1, 2**k)
        if cand > c0 and f(cand) < 0:
            t_hi = cand
            break
    if t_hi is None:
        raise RootBracketError("could not find a negative endpoint below the bigness threshold")
    lo, hi = _bisect_exact(f, c0, t_hi, tol)
    t_root = (lo + hi) / 2
    xi = float(t_root)

    dec = zariski(alpha - t_root * beta, model)
    witness = dec.negative_class(model)
    witness = None if witness.is_zero() else witness
    residual = abs(float(f(t_root)))
    cert = SlopeCertificate(
        equation="dhym",
        slope=xi,
        bracket=(float(lo), float(hi)),
        witness=witness,
        verdict=verdict,
        topological_slope=float(c0),
        residual=residual,
    )
    cert.witness_slope = _dhym_witness_slope(alpha, beta, model, witness)
    if residual > RESIDUAL_TOL * float(b2):
        raise RootBracketError(f"dHYM root residual {residual} exceeds certificate tolerance")
    return cert


def _dhym_witness_slope(alpha, beta, model, witness) -> float:
    ap = alpha if witness is None else alpha - witness
    b2 = intersect(beta, beta, model)
    return float((intersect(ap, ap, model) - b2) / (2 * intersect(ap, beta, model)))


def blowup_plane_model() -> SurfaceModel:
    """The plane blown up in one point, in the basis (H, -E).

    With this basis a class entered as ``p,q`` means pH - qE, matching the
    conventions used for the one-point-blow-up closed forms.  The curve list
    is the exceptional curve, the strict transform of a line through the
    point, and a general line.
    """
    one, zero = Fraction(1), Fraction(0)
    return SurfaceModel(
        basis_labels=("H", "-E"),
        form=((one, zero), (zero, -one)),
        curves=(
            DivisorClass((zero, -one)),   # E
            DivisorClass((one, one)),     # H - E
            DivisorClass((one, zero)),    # H
        ),
        kahler_ref=DivisorClass((Fraction(3), one)),  # 3H - E
    )


def one_point_blowup_certificate(b, p, q) -> SlopeCertificate:
    """Closed-form dHYM certificate on the one-point blow-up of the plane.

    For alpha = pH - qE and beta = bH - E with b > 1 and bp > q:
    c0 = (p^2 - q^2 - b^2 + 1)/(2(bp - q)); the slope is
    bp - sqrt((p^2+1)(b^2-1)) whenever that value is >= q, and c0 otherwise;
    the trichotomy verdict is the sign of q - c0.
    """
    from .surface_lattice import to_fraction

    b, p, q = to_fraction(b), to_fraction(p), to_fraction(q)
    if b <= 1:
        raise InputError("need b > 1 so that beta = bH - E is Kahler")
    if b * p <= q:
        raise InputError("need bp > q so that alpha.beta > 0")
    c0 = (p * p - q * q - b * b + 1) / (2 * (b * p - q))
    disc = float((p * p + 1) * (b * b - 1))
    xi_big = float(b * p) - math.sqrt(disc)
    if q < c0:
        verdict = UNSTABLE
    elif q == c0:
        verdict = SEMISTABLE
    else:
        verdict = STABLE
    witness_slope = None
    if xi_big >= float(q):
        xi = xi_big
        # (xi - q) E in the (H, -E) basis carries coefficient q - xi.
        witness = DivisorClass((Fraction(0), Fraction(repr(float(q) - xi))))
        xf = Fraction(repr(xi))
        witness_slope = float(
            (p * p - xf * xf - b * b + 1) / (2 * (b * p - xf))
        )
    else:
        xi = float(c0)
        witness = None
        witness_slope = xi
    width = 4 * abs(xi) * 2.3e-16 + 1e-15
    return SlopeCertificate(
        equation="dhym",
        slope=xi,
        bracket=(xi - width, xi + width),
        witness=witness,
        verdict=verdict,
        topological_slope=float(c0),
        residual=0.0,
        witness_slope=witness_slope,
    )
