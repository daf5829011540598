"""Mellin symbol of the model corner operator and its inverse on the half-strip.

The symbol is ``K(z) = sin((pi - alpha) z) / sin(pi z)``, analytic for
``|Re z| < 1``.  On the half-strip ``{|Re z| < 1/2, Im z < 0}`` it is a
biholomorphism onto the interior of the contour ``Sigma_1`` with the slit
``gamma_1 = [1 - alpha/pi, sin((pi - alpha)/2)]`` removed; ``mu_inverse``
evaluates the inverse map.
"""
from dataclasses import dataclass
from functools import lru_cache
import cmath
import math

import numpy as np
from scipy.optimize import brentq

from ._validation import CornerAngle, check_alpha, check_complex, check_int, check_positive
from .exceptions import DomainError, NoConvergence, NotInDomain, OnBoundary, PoleError

SERIES_RADIUS = 1e-3
_EXP_BRANCH = 20.0
_POLE_TOL = 1e-12


def _series_coefficients(alpha, nterms=4):
    """Coefficients q_k of K(z) = sum_k q_k z^(2k) from the sine series quotient."""
    a, b = math.pi - alpha, math.pi
    num = [(-1) ** k * a ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(nterms)]
    den = [(-1) ** k * b ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(nterms)]
    q = []
    for k in range(nterms):
        acc = num[k] - sum(den[j] * q[k - j] for j in range(1, k + 1))
        q.append(acc / den[0])
    return q


def _cot_stable(w):
    # valid for |Im w| large; avoids overflow of cos/sin separately
    out = np.empty_like(w)
    lower = w.imag < 0
    e = np.exp(-2j * w[lower])
    out[lower] = 1j * (1 + e) / (1 - e)
    e = np.exp(2j * w[~lower])
    out[~lower] = -1j * (1 + e) / (1 - e)
    return out


def _ratio_lower(alpha, z):
    """sin(a z)/sin(pi z) for Im z << 0 without overflow."""
    a = math.pi - alpha
    sgn = 1.0 if a > 0 else -1.0
    a = abs(a)
    b = math.pi
    return sgn * np.exp(1j * (a - b) * z) * (1 - np.exp(-2j * a * z)) / (1 - np.exp(-2j * b * z))


def _check_poles(z):
    n = np.round(z.real)
    bad = (n != 0) & (np.abs(z - n) <= _POLE_TOL * np.maximum(1.0, np.abs(n)))
    if np.any(bad):
        raise PoleError(f"symbol has a pole at z = {z[bad][0]}")


def _symbol(alpha, z):
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    _check_poles(flat)
    out = np.empty_like(flat)
    a = math.pi - alpha

    small = np.abs(flat) < SERIES_RADIUS
    big = ~small & (np.abs(flat.imag) > _EXP_BRANCH)
    mid = ~small & ~big

    if np.any(small):
        w = flat[small] ** 2
        q = _series_coefficients(alpha)
        out[small] = q[0] + w * (q[1] + w * (q[2] + w * q[3]))
    if np.any(mid):
        zm = flat[mid]
        out[mid] = np.sin(a * zm) / np.sin(math.pi * zm)
    if np.any(big):
        zb = flat[big]
        up = zb.imag > 0
        zl = np.where(up, np.conj(zb), zb)
        val = _ratio_lower(alpha, zl)
        out[big] = np.where(up, np.conj(val), val)
    return out.reshape(z.shape) if z.ndim else out[0]


def _symbol_derivative(alpha, z):
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    _check_poles(flat)
    out = np.empty_like(flat)
    a, b = math.pi - alpha, math.pi

    small = np.abs(flat) < SERIES_RADIUS
    big = ~small & (np.abs(flat.imag) > _EXP_BRANCH)
    mid = ~small & ~big
    if np.any(small):
        zs = flat[small]
        w = zs ** 2
        q = _series_coefficients(alpha)
        out[small] = zs * (2 * q[1] + w * (4 * q[2] + w * 6 * q[3]))
    if np.any(mid):
        zm = flat[mid]
        s = np.sin(b * zm)
        out[mid] = (a * np.cos(a * zm) * s - b * np.sin(a * zm) * np.cos(b * zm)) / s ** 2
    if np.any(big):
        zb = flat[big]
        out[big] = _symbol(alpha, zb) * (a * _cot_stable(a * zb) - b * _cot_stable(b * zb))
    return out.reshape(z.shape) if z.ndim else out[0]


def symbol_value(alpha, z):
    """Evaluate ``sin((pi - alpha) z) / sin(pi z)``.

    Accepts scalars or arrays.  Near ``z = 0`` (removable singularity) a
    four-term Taylor series in ``z**2`` is used; for ``|Im z| > 20`` an
    exponential form avoids overflow.

    Raises
    ------
    PoleError
        If ``z`` is a nonzero integer.
    """
    alpha = check_alpha(alpha)
    if np.ndim(z) == 0:
        z = check_complex(z, "z")
    return _symbol(alpha, z)


def symbol_derivative(alpha, z):
    """Complex derivative of the symbol with respect to ``z``."""
    alpha = check_alpha(alpha)
    if np.ndim(z) == 0:
        z = check_complex(z, "z")
    return _symbol_derivative(alpha, z)


def symbol_taylor_at_zero(alpha):
    """Return ``(c0, c2)`` with ``K(z) = c0 + c2 z**2 + O(z**4)``."""
    alpha = check_alpha(alpha)
    c0 = 1 - alpha / math.pi
    c2 = alpha * (math.pi - alpha) * (2 * math.pi - alpha) / (6 * math.pi)
    return c0, c2


def essential_spectrum_bound(alpha):
    """Half-width ``|1 - alpha/pi|`` of the essential spectrum interval."""
    return abs(1 - check_alpha(alpha) / math.pi)


def gamma1_endpoints(alpha):
    """Endpoints of the slit ``gamma_1 = [1 - alpha/pi, sin((pi - alpha)/2)]``."""
    alpha = check_alpha(alpha)
    if alpha >= math.pi:
        raise DomainError("gamma_1 is defined for 0 < alpha < pi; use reduce_angle first")
    return 1 - alpha / math.pi, math.sin((math.pi - alpha) / 2)


def reduce_angle(alpha, lam):
    """Map a reflex corner to its acute-side partner.

    Uses ``K_{2pi - alpha}(z) = -K_alpha(z)``: for ``alpha > pi`` returns
    ``(CornerAngle(2pi - alpha), -lam, -1)``, otherwise the input unchanged
    with sign ``+1``.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    if alpha > math.pi:
        return CornerAngle(2 * math.pi - alpha), -lam, -1
    return CornerAngle(alpha), lam, 1


@dataclass(frozen=True)
class SigmaContour:
    alpha: float
    eta: float
    samples: np.ndarray
    parameter_grid: np.ndarray

    def __post_init__(self):
        self.samples.setflags(write=False)
        self.parameter_grid.setflags(write=False)


def _tanh_grid(n, t_max, u_max=2.5):
    u = np.linspace(-u_max, u_max, n)
    return t_max * np.tanh(u) / math.tanh(u_max)


def sigma_contour(alpha, eta, n_samples=2048, t_max=30.0):
    """Sample the symbol on the vertical line ``Re z = 1/2 - eta``.

    The parameter grid is ``t = t_max * tanh(u) / tanh(u_max)`` on a uniform
    ``u`` grid, which places many samples in the exponentially small tails.
    """
    alpha = check_alpha(alpha)
    eta = float(eta)
    if not 0 <= eta <= 1:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    n_samples = check_int(n_samples, "n_samples", low=16)
    t_max = check_positive(t_max, "t_max")
    t = _tanh_grid(n_samples, t_max)
    z = (0.5 - eta) + 1j * t
    return SigmaContour(alpha, eta, np.asarray(_symbol(alpha, z)), t)


@lru_cache(maxsize=32)
def _adaptive_sigma1(alpha, n_samples, t_max, tol):
    """Polyline of Sigma_1 refined until chord midpoints are within ``tol``."""
    t = _tanh_grid(n_samples, t_max)
    for _ in range(30):
        vals = _symbol(alpha, -0.5 + 1j * t)
        tm = 0.5 * (t[1:] + t[:-1])
        vm = _symbol(alpha, -0.5 + 1j * tm)
        dev = np.abs(vm - 0.5 * (vals[1:] + vals[:-1]))
        bad = dev > tol
        if not np.any(bad):
            break
        t = np.sort(np.concatenate([t, tm[bad]]))
    vals = _symbol(alpha, -0.5 + 1j * t)
    vals.setflags(write=False)
    return vals


def _segment_distance(pts, lam):
    a = pts[:-1]
    d = pts[1:] - a
    dd = np.abs(d) ** 2
    proj = np.where(dd > 0, ((lam - a) * np.conj(d)).real / np.where(dd > 0, dd, 1), 0.0)
    proj = np.clip(proj, 0.0, 1.0)
    return np.min(np.abs(a + proj * d - lam))


def winding_number(polyline, point):
    """Winding number of the closed polyline around ``point``.

    ``Sigma_1`` sampled with increasing ``t`` runs clockwise, so interior
    points of ``sigma_contour(alpha, 1)`` have winding number -1.
    """
    closed = np.append(polyline, polyline[:1])
    rel = closed - point
    dphi = np.angle(rel[1:] / rel[:-1])
    return int(round(dphi.sum() / (2 * math.pi)))


def _crossing_parity(closed, lam):
    """Even-odd ray casting along the horizontal ray to the right of ``lam``."""
    a = closed[:-1]
    b = closed[1:]
    up = (a.imag <= lam.imag) != (b.imag <= lam.imag)
    if not np.any(up):
        return False
    a = a[up]
    b = b[up]
    x = a.real + (lam.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
    return bool(np.count_nonzero(x > lam.real) % 2)


@lru_cache(maxsize=32)
def _membership_tables(alpha, n_samples, t_max, tol):
    fine = np.append(_adaptive_sigma1(alpha, n_samples, t_max, tol),
                     _adaptive_sigma1(alpha, n_samples, t_max, tol)[:1])
    coarse_tol = 1e-4
    coarse = _adaptive_sigma1(alpha, 512, t_max, coarse_tol)
    coarse = np.append(coarse, coarse[:1])
    return fine, coarse, coarse_tol


def in_sigma_tilde(alpha, lam, tol=1e-8, n_samples=20000, t_max=30.0):
    """Is ``lam`` inside the region bounded by ``Sigma_{1,alpha}``?

    Membership is decided by ray casting against an adaptively refined
    polyline of the contour.  Points well away from the contour use a
    coarse polyline; near it only the fine segments in a local window are
    inspected.  Requires ``0 < alpha < pi``.

    Raises
    ------
    OnBoundary
        If ``lam`` is within ``tol`` of the contour.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    if alpha > math.pi:
        raise DomainError("in_sigma_tilde needs 0 < alpha < pi; use reduce_angle first")
    fine, coarse, ctol = _membership_tables(alpha, int(n_samples), float(t_max),
                                            min(tol, 1e-10))
    margin = 10 * ctol
    if _segment_distance(coarse, lam) > margin:
        return _crossing_parity(coarse, lam)
    # near the contour: local fine segments decide proximity
    near = np.abs(fine - lam) < 0.1
    idx = np.flatnonzero(near[:-1] | near[1:])
    if idx.size:
        segs = np.concatenate([fine[idx], fine[idx + 1]]).reshape(2, -1)
        a, b = segs
        d = b - a
        dd = np.abs(d) ** 2
        proj = np.clip(((lam - a) * np.conj(d)).real / np.where(dd > 0, dd, 1), 0, 1)
        if np.min(np.abs(a + proj * d - lam)) < tol:
            raise OnBoundary(f"lambda = {lam} lies on Sigma_1 within {tol}")
    return _crossing_parity(fine, lam)


@dataclass(frozen=True)
class MuResult:
    mu: complex
    residual: float
    iterations: int


def mu_closed_form_right_angle(lam):
    """Exact inverse for ``alpha = pi/2``.

    For the right angle the symbol is ``1 / (2 cos(pi z / 2))`` so the inverse
    is ``z = (2/pi) arccos(1 / (2 lam))`` on the branch in the closed lower
    half-strip.  For real ``lam`` in ``(0, 1/2)`` this equals
    ``-(2i/pi) log(1/(2 lam) + sqrt((2 lam)**-2 - 1))``.  The printed formula
    with prefactor ``2i/lam`` in place of ``2i/pi`` does not invert the
    symbol (it fails the endpoint check ``lam = 1/sqrt(2) -> 1/2``).
    """
    lam = check_complex(lam, "lambda")
    if lam == 0:
        raise NotInDomain("lambda = 0 is the image of -i*infinity")
    w = (2 / math.pi) * np.arccos(1 / (2 * lam))
    cands = [complex(w), complex(-w)]
    below = [c for c in cands if c.imag < -1e-14]
    if below:
        mu = below[0]
    else:
        mu = max(cands, key=lambda c: c.real)
    if abs(mu.real) > 0.5 + 1e-12:
        raise NotInDomain(f"lambda = {lam} is outside the half-strip image")
    return mu


def _scalar_pair(alpha, z):
    """Symbol and derivative at one point; cmath on the plain sine branch."""
    if SERIES_RADIUS <= abs(z) and abs(z.imag) <= _EXP_BRANCH and abs(z.real) < 0.99:
        a, b = math.pi - alpha, math.pi
        sa, sb = cmath.sin(a * z), cmath.sin(b * z)
        return sa / sb, (a * cmath.cos(a * z) * sb - b * sa * cmath.cos(b * z)) / (sb * sb)
    return complex(_symbol(alpha, z)), complex(_symbol_derivative(alpha, z))


def _in_quarter(z, slack=1e-12):
    return -slack <= z.real <= 0.5 + slack and z.imag <= slack


def _newton(alpha, lam, z0, tol, max_iter):
    z = complex(z0)
    for it in range(1, max_iter + 1):
        val, df = _scalar_pair(alpha, z)
        f = val - lam
        if abs(f) <= tol:
            return z, abs(f), it
        if df == 0 or not cmath.isfinite(df):
            return None
        step = f / df
        # keep iterates inside the analyticity strip |Re z| < 1
        while abs((z - step).real) >= 0.95 and abs(step) > 1e-16:
            step *= 0.5
        z -= step
        if not cmath.isfinite(z):
            return None
    f = abs(complex(_symbol(alpha, z)) - lam)
    if f <= tol:
        return z, f, max_iter
    return None


def _seeds(alpha, lam):
    """Initial guesses for the root in the quarter strip 0 <= Re z <= 1/2, Im z < 0."""
    c0, c2 = symbol_taylor_at_zero(alpha)
    if abs(lam - c0) < 1e-2:
        r = np.sqrt(complex((lam - c0) / c2))
        for c in (r, -r):
            if _in_quarter(c, 1e-3):
                yield ("series", c)
    # homotopy in the angle, starting from the right-angle closed form
    try:
        z = mu_closed_form_right_angle(lam)
    except NotInDomain:
        z = None
    if z is not None:
        if _in_quarter(z) and abs(z.imag) < 1e-14:
            z = complex(min(z.real, 0.49), -1e-3)
        yield ("homotopy", ("path", z))
    if abs(lam) < 0.2:
        yield ("asymptotic", 0.25 + 1j * math.log(abs(lam)) / alpha)
    yield ("grid", None)


def _grid_seed(alpha, lam):
    re = np.linspace(0.02, 0.48, 24)
    im = -np.concatenate([np.linspace(0.0, 1.0, 21)[1:], np.geomspace(1.0, 40.0, 40)])
    zz = re[None, :] + 1j * im[:, None]
    vals = _symbol(alpha, zz)
    k = np.argmin(np.abs(vals - lam))
    return complex(zz.flat[k])


def _solve_lower(alpha, lam, tol, max_iter):
    """Root for Im lam < 0: Re mu in [0, 1/2], Im mu < 0."""
    total = 0
    for kind, seed in _seeds(alpha, lam):
        if kind == "homotopy":
            z = seed[1]
            steps = np.linspace(math.pi / 2, alpha, 17)[1:] if alpha != math.pi / 2 else []
            ok = True
            for a_k in steps:
                res = _newton(a_k, lam, z, tol, max_iter)
                if res is None or not _in_quarter(res[0]):
                    ok = False
                    break
                z = res[0]
                total += res[2]
            if not ok:
                continue
        elif kind == "grid":
            z = _grid_seed(alpha, lam)
        else:
            z = seed
        res = _newton(alpha, lam, z, tol, max_iter)
        if res is None:
            continue
        total += res[2]
        if _in_quarter(res[0]) and res[0].imag < 0:
            return MuResult(res[0], res[1], total)
    return None


def _real_inverse(alpha, lam):
    c0 = 1 - alpha / math.pi
    top = math.sin((math.pi - alpha) / 2)
    a = math.pi - alpha
    if lam == c0:
        return 0j
    if 0 < lam < c0:
        # K(i t) = sinh(a t) / sinh(pi t) increases from 0 to c0 on (-inf, 0]
        def g(t):
            return math.exp(-alpha * abs(t)) * (1 - math.exp(-2 * a * abs(t))) / (
                1 - math.exp(-2 * math.pi * abs(t))) - lam if t != 0 else c0 - lam

        lo = -1.0
        while g(lo) > 0:
            lo *= 2
            if lo < -1e4:
                raise NoConvergence("bracketing failed for real lambda")
        t = brentq(g, lo, 0.0, xtol=1e-17, rtol=1e-15)
        return 1j * t
    if abs(lam - top) <= 4 * np.finfo(float).eps:
        lam = top
    if c0 < lam <= top:
        if lam == top:
            return 0.5 + 0j
        x = brentq(lambda x: math.sin(a * x) / math.sin(math.pi * x) - lam if x else c0 - lam,
                   0.0, 0.5, xtol=1e-17, rtol=1e-15)
        return complex(x)
    raise NotInDomain(f"real lambda = {lam} is outside (0, sin((pi-alpha)/2)]")


def mu_inverse(alpha, lam, tol=1e-12, max_iter=60):
    """Invert the symbol on the half-strip ``{|Re z| < 1/2, Im z < 0}``.

    Newton's method with the analytic derivative.  Seeds are tried in order:
    Taylor inversion near ``1 - alpha/pi``, homotopy in the angle from the
    right-angle closed form, the tail asymptotics ``i log|lam| / alpha`` for
    small ``|lam|`` and finally a coarse table of symbol values.  Real
    ``lam`` are handled by bracketing on the boundary of the half-strip:
    ``(0, 1 - alpha/pi)`` maps to the negative imaginary axis and the slit
    ``gamma_1`` to ``[0, 1/2]``.

    The conjugation law ``mu(conj lam) = -conj(mu(lam))`` fixes the sign of
    ``Re mu``: negative for ``Im lam > 0`` and positive for ``Im lam < 0``.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    if alpha > math.pi:
        raise DomainError("mu_inverse needs 0 < alpha < pi; use reduce_angle first")
    if lam.imag == 0:
        mu = _real_inverse(alpha, lam.real)
        return MuResult(mu, abs(complex(_symbol(alpha, mu)) - lam), 0)
    try:
        inside = in_sigma_tilde(alpha, lam)
    except OnBoundary:
        inside = True
    if not inside:
        raise NotInDomain(f"lambda = {lam} is outside Sigma_1 for alpha = {alpha}")
    flip = lam.imag > 0
    target = lam.conjugate() if flip else lam
    res = _solve_lower(alpha, target, tol, max_iter)
    if res is None:
        raise NoConvergence(f"Newton failed for lambda = {lam} from every seed")
    mu = -res.mu.conjugate() if flip else res.mu
    return MuResult(mu, res.residual, res.iterations)


def mu_continued(alpha, lam, n_steps=64, tol=1e-12, max_iter=60):
    """Analytic continuation of ``mu`` along ``u + i t Im(lam)``, ``0 <= t <= 1``.

    Starts from the boundary value at the real point ``u = Re lam`` in
    ``(0, sin((pi - alpha)/2))`` and tracks the root of ``K(z) = lam`` by
    Newton steps.  Inside the half-strip image it agrees with
    :func:`mu_inverse`; outside it (small ``u`` with large ``Im lam``) the
    continued root leaves the strip ``|Re z| < 1/2``.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    if alpha > math.pi:
        raise DomainError("mu_continued needs 0 < alpha < pi; use reduce_angle first")
    z = _real_inverse(alpha, lam.real)
    if lam.imag == 0:
        return MuResult(z, abs(complex(_symbol(alpha, z)) - lam), 0)
    total = 0
    for t in np.linspace(0.0, 1.0, n_steps + 1)[1:]:
        target = complex(lam.real, t * lam.imag)
        res = _newton(alpha, target, z, tol, max_iter)
        if res is None:
            raise NoConvergence(f"continuation lost the root near lambda = {target}")
        z = res[0]
        total += res[2]
    return MuResult(z, res[1], total)
