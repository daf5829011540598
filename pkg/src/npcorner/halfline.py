"""Model Mellin convolution operator of a corner on the half-line.

In the log variable ``x = log s`` the model operator is a convolution,
``(K f)(x) = int k(x - y) f(y) dy`` with

    k(xi) = K(e^xi, 1) = (sin a / 2pi) / (cosh xi - cos a),

whose two-sided Laplace transform ``int e^{z xi} k(xi) dxi`` is the symbol
``sin((pi - a) z) / sin(pi z)`` on ``|Re z| < 1``.  On the line
``Re z = c`` the operator is the Fourier multiplier ``K(c - i zeta)``
applied to ``e^{c x} f``.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.signal import fftconvolve
from scipy.signal.windows import tukey

from ._validation import check_alpha, check_complex, check_int, check_vector
from .exceptions import ConfigError, DomainError, NotInDomain, SmallDenominator, TruncationError
from .symbol import _symbol, _symbol_derivative, mu_inverse

TRUNCATION_TOL = 1e-8
DENOM_TOL = 1e-8


@dataclass(frozen=True)
class LogGrid:
    """Equispaced grid ``x_k = x_min + k dx``, ``k < n``, in ``x = log s``."""

    x_min: float = -18.0
    x_max: float = 6.0
    n: int = 4096

    def __post_init__(self):
        n = check_int(self.n, "n", low=16)
        if n & (n - 1):
            raise ConfigError(f"grid size must be a power of two, got {n}")
        if not self.x_max > self.x_min:
            raise ConfigError("x_max must exceed x_min")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def s(self):
        return np.exp(self.x)

    def frequencies(self, n=None):
        n = self.n if n is None else n
        return 2 * math.pi * np.fft.fftfreq(n, d=self.dx)


def model_kernel(alpha, s, t):
    """``K(s, t) = -(1/pi) Im(e^{ia} / (t e^{ia} - s))``, homogeneous of degree -1."""
    alpha = check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise DomainError("model kernel needs s, t > 0")
    e = np.exp(1j * alpha)
    return -(e / (t * e - s)).imag / math.pi


def log_kernel(alpha, xi):
    """Convolution kernel ``k(xi) = K(e^xi, 1)`` in the log variable."""
    xi = np.asarray(xi, dtype=float)
    return math.sin(alpha) / (2 * math.pi) / (np.cosh(xi) - math.cos(alpha))


def _kernel_tail(alpha, u):
    """``int_u^inf k(xi) dxi``."""
    c0 = 1 - alpha / math.pi
    f = np.arctan(np.tanh(np.asarray(u) / 2) / math.tan(alpha / 2)) / math.pi
    return c0 / 2 - f


def _check_decay(f, where="input", tol=TRUNCATION_TOL):
    n = f.size
    edge = max(n // 50, 1)
    total = np.linalg.norm(f)
    if total == 0:
        return
    mass = math.hypot(np.linalg.norm(f[:edge]), np.linalg.norm(f[-edge:]))
    if mass > tol * total:
        raise TruncationError(f"{where} carries relative mass {mass / total:.2e} at the grid ends")


def _padded_size(n, factor):
    m = 1
    while m < factor * n:
        m *= 2
    return m


def _multiplier(alpha, grid, f, line, pad, divide_by=None):
    """Apply (or divide by) ``K(line - i zeta) [- lam]`` on a zero-padded periodic grid."""
    m = _padded_size(grid.n, pad)
    lead = (m - grid.n) // 2
    x = grid.x_min + grid.dx * (np.arange(m) - lead)
    buf = np.zeros(m, dtype=complex)
    buf[lead:lead + grid.n] = f * np.exp(line * grid.x)
    zeta = 2 * math.pi * np.fft.fftfreq(m, d=grid.dx)
    # transform of e^{cx} f at zeta pairs with e^{-(c - i zeta) x}
    sym = _symbol(alpha, line - 1j * zeta)
    if divide_by is not None:
        sym = sym - divide_by
        dmin = float(np.min(np.abs(sym)))
        if dmin < DENOM_TOL:
            raise SmallDenominator(f"|K - lambda| = {dmin:.2e} on the grid line Re z = {line}")
    spec = np.fft.fft(buf)
    spec = spec / sym if divide_by is not None else spec * sym
    out = np.fft.ifft(spec) * np.exp(-line * x)
    return out[lead:lead + grid.n], out, x


def apply_model_operator(alpha, f, grid=None, method="multiplier", line=0.5, pad=4,
                         extend="zero", window=True):
    """Apply the model operator to samples ``f`` on a LogGrid.

    ``method='direct'`` is the trapezoid rule of the log-variable
    convolution (an exact discrete linear convolution); ``'multiplier'``
    multiplies by the symbol on the line ``Re z = line`` after the
    ``e^{line x}`` conjugation, on a grid zero-padded ``pad`` times.  With
    ``extend='constant'`` (direct method only) ``f`` is continued by its
    first sample toward ``s -> 0`` and the tail integral is added exactly.

    Raises
    ------
    TruncationError
        If ``f`` does not decay at the grid ends (checked for zero extension).
    """
    alpha = check_alpha(alpha)
    grid = LogGrid() if grid is None else grid
    f = check_vector(f, grid.n, "f")
    if extend not in ("zero", "constant"):
        raise ConfigError("extend must be 'zero' or 'constant'")
    if extend == "zero":
        _check_decay(f)
        if window:
            f = f * tukey(grid.n, 0.1)
    if method == "direct":
        n, dx = grid.n, grid.dx
        kk = log_kernel(alpha, dx * np.arange(-(n - 1), n))
        out = fftconvolve(f, kk)[n - 1:2 * n - 1] * dx
        if extend == "constant":
            # samples are midpoint cells; f = f[0] left of the first cell
            out = out + f[0] * _kernel_tail(alpha, grid.x - grid.x_min + dx / 2)
        return out
    if method == "multiplier":
        if extend != "zero":
            raise ConfigError("the multiplier method needs decaying input")
        if not abs(line) < 1:
            raise ConfigError("multiplier line must satisfy |Re z| < 1")
        return _multiplier(alpha, grid, f, line, pad)[0]
    raise ConfigError(f"unknown method {method!r}")


def _decay_pad(alpha, lam, grid, tol=1e-13, max_points=2 ** 22):
    """Padding factor so the slowest solution tail decays below ``tol`` on the padded grid."""
    try:
        mu = mu_inverse(alpha, lam).mu
        rate = abs(mu.real)
    except (DomainError, ArithmeticError, RuntimeError):
        rate = 0.5
    rate = max(rate, 1e-3)
    length = math.log(1 / tol) / rate
    m = _padded_size(grid.n, 2 + 2 * length / (grid.x_max - grid.x_min))
    return min(m, max_points) / grid.n


def model_resolvent(alpha, lam, g, grid=None, line=0.0, pad=None, window=True):
    """Solve ``(K - lam) f = g`` by division by ``K(line - i zeta) - lam``.

    ``line = 0`` (default) selects the solution whose corner behaviour is
    ``s^{-sgn(Im lam) mu}``, ``mu = mu_inverse(alpha, lam)``; the Mellin line
    must separate ``mu`` from ``-mu``.  On ``Re z = 1/2`` the division gives
    the other, square-integrable but more singular, solution.  The periodic
    grid is padded so that the solution tails decay before wrapping.

    Returns the samples on ``grid``.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    grid = LogGrid() if grid is None else grid
    g = check_vector(g, grid.n, "g")
    _check_decay(g)
    if window:
        g = g * tukey(grid.n, 0.1)
    if not abs(line) < 1:
        raise ConfigError("resolvent line must satisfy |Re z| < 1")
    if pad is None:
        pad = _decay_pad(alpha, lam, grid)
    return _multiplier(alpha, grid, g, line, pad, divide_by=lam)[0]


def cutoff(s):
    """Smooth cutoff with ``phi = 1`` on ``[0, 1/4]`` and ``phi = 0`` on ``[1, inf)``."""
    s = np.asarray(s, dtype=float)
    u = np.clip((s - 0.25) / 0.75, 0.0, 1.0)

    def h(v):
        return np.where(v > 0, np.exp(-1 / np.where(v > 0, v, 1)), 0.0)

    return h(1 - u) / (h(1 - u) + h(u))


def _cutoff_mellin(z, n=4000):
    """Continuation of ``int_0^inf s^{z-1} phi(s) ds`` to ``Re z < 0``: ``1/z + int_0^1 s^{z-1}(phi-1)``."""
    x, w = np.polynomial.legendre.leggauss(200)
    # phi - 1 vanishes on [0, 1/4]; integrate over [1/4, 1]
    s = 0.25 + 0.375 * (x + 1)
    return 1 / z + 0.375 * np.sum(w * s ** (z - 1) * (cutoff(s) - 1))


@dataclass(frozen=True)
class SingularCoefficient:
    c_lambda: complex
    mu: complex
    exponent: complex        # the singular term is c_lambda * phi(s) * s**(-exponent)
    d: float
    regular_part_norm: float


def w1_proxy_norm(f, grid):
    """``sqrt(int (|f'|^2 + |f/s|^2) ds)`` evaluated in the log variable."""
    f = np.asarray(f)
    df = np.gradient(f, grid.dx)
    return float(math.sqrt(np.sum((np.abs(df) ** 2 + np.abs(f) ** 2) * np.exp(-grid.x)) * grid.dx))


def extract_singular_coefficient(alpha, lam, g, grid=None, solution=None):
    """Coefficient of the corner singularity of ``(K - lam)^-1 g``.

    Writes ``g = g(0) phi + h`` with the standard cutoff ``phi`` and returns
    ``c = d (h^(nu) + g(0) phi^(nu)) / K'(nu)`` where ``nu = sgn(Im lam) mu``
    is the root of ``K(z) = lam`` left of the line ``Re z = 0``, ``^``
    denotes ``int s^{z-1} . ds`` and ``d = -int phi' = 1``.  For ``g(0) = 0``
    this is ``d h^(mu) / K'(mu)``.  The solution then behaves like
    ``c phi(s) s^{-nu}`` at the corner; the W1-proxy norm of the remainder
    is returned as ``regular_part_norm``.
    """
    alpha = check_alpha(alpha)
    lam = check_complex(lam, "lambda")
    if lam.imag == 0:
        raise NotInDomain("singular coefficient needs Im lambda != 0")
    grid = LogGrid() if grid is None else grid
    g = check_vector(g, grid.n, "g")
    mu = mu_inverse(alpha, lam).mu
    nu = mu if lam.imag > 0 else -mu
    s = grid.s
    g0 = complex(g[0])
    phi = cutoff(s)
    h = g - g0 * phi
    # int s^{nu-1} h ds = int e^{nu x} h dx
    h_hat = np.sum(np.exp(nu * grid.x) * h) * grid.dx
    num = h_hat + (g0 * _cutoff_mellin(nu) if g0 != 0 else 0.0)
    d = 1.0
    c = d * num / complex(_symbol_derivative(alpha, nu))
    if solution is None:
        solution = model_resolvent(alpha, lam, g, grid)
    remainder = np.asarray(solution) - c * phi * np.exp(-nu * grid.x)
    return SingularCoefficient(complex(c), complex(mu), complex(nu), d, w1_proxy_norm(remainder, grid))


def fit_log_exponent(f, grid, x_lo, x_hi):
    """Least-squares fit ``f ~ C exp(-nu x)`` on ``[x_lo, x_hi]``; returns ``nu``.

    Uses the log-amplitude and the unwrapped phase; ``-Re nu`` is the decay
    rate toward ``s -> 0`` and ``-Im nu`` the angular frequency in ``log s``.
    """
    x = grid.x
    sel = (x >= x_lo) & (x <= x_hi)
    if np.count_nonzero(sel) < 8:
        raise ConfigError("fit window holds fewer than 8 samples")
    xs = x[sel]
    v = np.asarray(f)[sel]
    amp = np.polyfit(xs, np.log(np.abs(v)), 1)[0]
    ph = np.polyfit(xs, np.unwrap(np.angle(v)), 1)[0]
    return complex(-amp, -ph)
