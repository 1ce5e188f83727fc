"""Exact 2D orientation and incircle predicates.

Each predicate first evaluates a floating-point expression with a static
forward error bound; when the magnitude clears the bound the sign is
certain.  Otherwise it escalates to exact rational arithmetic on the
(exactly representable) double inputs.  There is no symbolic
perturbation: an exact zero is reported as 0 and callers treat it as a
degeneracy.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["orient2d", "incircle", "orient2d_exact", "incircle_exact"]

_EPS = 7.0 / 3.0 - 4.0 / 3.0 - 1.0  # machine epsilon 2^-52
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the orientation determinant, exact (-1, 0, +1)."""
    ax, ay = Fraction(ax), Fraction(ay)
    bx, by = Fraction(bx), Fraction(by)
    cx, cy = Fraction(cx), Fraction(cy)
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """+1 if a,b,c are counterclockwise, -1 clockwise, 0 collinear."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    if detleft > 0.0:
        if detright <= 0.0:
            return 1
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return -1
        detsum = -detleft - detright
    else:
        return orient2d_exact(ax, ay, bx, by, cx, cy)
    errbound = _CCW_BOUND * detsum
    if det > errbound:
        return 1
    if det < -errbound:
        return -1
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Sign of the incircle determinant, exact.

    Positive iff d lies strictly inside the circle through a, b, c taken
    in counterclockwise order.
    """
    ax, ay = Fraction(ax), Fraction(ay)
    bx, by = Fraction(bx), Fraction(by)
    cx, cy = Fraction(cx), Fraction(cy)
    dx, dy = Fraction(dx), Fraction(dy)
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdx * cdy - bdy * cdx)
        + blift * (cdx * ady - cdy * adx)
        + clift * (adx * bdy - ady * bdx)
    )
    return (det > 0) - (det < 0)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Filtered incircle test; escalates to exact arithmetic when unsure."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady

    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy

    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    errbound = _ICC_BOUND * permanent
    if det > errbound:
        return 1
    if det < -errbound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)
