"""Polarizability, spectral densities, eigenvalue detection and corner exponents.

Sweeps over the shift ``z`` reuse one eigendecomposition ``K = V D V^-1``
per mesh, so each cell costs ``O(N)``.  On a graded mesh the discrete
resolvent at ``lam`` inside the region enclosed by the symbol contour
carries a spurious wave reflected at the smallest panel.  Adding one
grading level multiplies it by ``q = 4**(-|mu|)`` (the exponent pair
``+-mu`` of the corner), so values on consecutive levels follow a Mobius
map of ``q**L`` whose constant term is the limit of infinite grading.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator

from ._validation import check_complex, check_eps_ladder, check_int, check_vector
from .exceptions import (ConfigError, DomainError, FitDiverged, NearSingular, NoConvergence,
                         WindowTooSmall)
from .geometry import build_mesh, load_curve
from .operators import COND_LIMIT, OperatorMatrix, _lu_with_condition, _values, assemble_K
from .symbol import (essential_spectrum_bound, in_sigma_tilde, mu_continued, mu_inverse,
                     reduce_angle)

DEFAULT_LADDER = (0.08, 0.04, 0.02, 0.01)
FLAG_OK = "ok"
FLAG_EIG = "near-eigenvalue"
FLAG_END = "near-endpoint"
FLAG_FAIL = "failed"


def _entries(K):
    return np.asarray(K.entries if isinstance(K, OperatorMatrix) else K)


def _moments(mesh):
    """Coordinates ``a_j``, weighted normals ``b_k dsigma`` and the area."""
    p, nrm = mesh.points, mesh.normal
    a = np.column_stack([p.real, p.imag])
    bw = np.column_stack([nrm.real, nrm.imag]) * mesh.dsigma[:, None]
    return a, bw, mesh.area()


def essential_radius(spec):
    """``max |1 - alpha/pi|`` over the corners of a curve (0 for smooth curves)."""
    return max((essential_spectrum_bound(a) for _, a in spec.corners), default=0.0)


@dataclass(frozen=True)
class PolarizabilityTensor:
    omega: np.ndarray
    z: complex
    area: float


def polarizability(mesh, K, z, cond_limit=COND_LIMIT):
    """Area-scaled polarizability ``omega_jk = (2/area) \\oint rho_j b_k``.

    ``rho_j`` solves ``(K + z) rho_j = -a_j`` with ``a_j`` the j-th
    coordinate and ``b_k`` the k-th normal component.

    Raises
    ------
    NearSingular
        If the condition estimate of ``K + z`` exceeds ``cond_limit``.
    """
    z = check_complex(z, "z")
    k = _entries(K)
    a, bw, area = _moments(mesh)
    fac, cond = _lu_with_condition(k + z * np.eye(mesh.n))
    if not cond < cond_limit:
        raise NearSingular(f"K + z is numerically singular at z = {z} (condition {cond:.2e})", cond)
    rho = sla.lu_solve(fac, -a.astype(complex), check_finite=False)
    omega = 2.0 / area * (rho.T @ bw)
    omega.setflags(write=False)
    return PolarizabilityTensor(omega, z, area)


class EigenResolvent:
    """Resolvent ``(K - lam)^-1`` through one eigendecomposition of ``K``."""

    def __init__(self, K):
        k = _entries(K)
        lam, vec = sla.eig(k, check_finite=False)
        order = np.lexsort((lam.imag, lam.real))
        self.eigenvalues = lam[order]
        self.vectors = vec[:, order]
        self._lu = sla.lu_factor(self.vectors, check_finite=False)
        self.norm = float(np.linalg.norm(k, 1))

    def project(self, rhs):
        """Coordinates ``V^-1 rhs``."""
        return sla.lu_solve(self._lu, np.asarray(rhs, dtype=complex), check_finite=False)

    def bilinear(self, left, right):
        """Return ``f(lam) = left @ (K - lam)^-1 @ right`` as a vectorized callable."""
        lv = np.asarray(left) @ self.vectors
        vr = self.project(right)
        ev = self.eigenvalues

        def value(lam):
            lam = np.atleast_1d(np.asarray(lam, dtype=complex))
            d = 1.0 / (ev[None, :] - lam[:, None])
            return np.einsum("mn,ln,nr->lmr", lv, d, vr)

        return value

    def condition_proxy(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        gap = np.min(np.abs(self.eigenvalues[None, :] - lam[:, None]), axis=1)
        with np.errstate(divide="ignore"):
            return self.norm / gap


@dataclass(frozen=True)
class SweepTable:
    """Sweep over ``u + i eps``.

    ``raw`` has shape ``(n_u, n_eps) + value_shape`` and ``extrapolated``
    ``(n_u,) + value_shape``; cells that failed are NaN.  ``flags`` holds
    one of ``ok``, ``near-eigenvalue``, ``near-endpoint`` per ``u``.
    """

    grid: np.ndarray
    eps_ladder: np.ndarray
    raw: np.ndarray
    extrapolated: np.ndarray
    flags: tuple
    kind: str = "polarizability"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.grid, self.eps_ladder, self.raw, self.extrapolated):
            a.setflags(write=False)

    def component(self, index=()):
        """Raw and extrapolated values of one tensor component."""
        idx = (slice(None), slice(None)) + tuple(index)
        return self.raw[idx], self.extrapolated[(slice(None),) + tuple(index)]

    @property
    def ok(self):
        return np.array([f == FLAG_OK for f in self.flags])

    def to_csv(self, path, index=()):
        """Write ``u,eps,re,im`` raw rows, then ``u,inf,re,im`` rows for unflagged ``u``."""
        raw, ext = self.component(index)
        if raw.ndim != 2:
            raise ConfigError("to_csv writes one scalar component; pass its index")
        lines = ["u,eps,re,im"]
        for i, u in enumerate(self.grid):
            for j, e in enumerate(self.eps_ladder):
                v = raw[i, j]
                if np.isfinite(v):
                    lines.append(",".join(_text(x) for x in (u, e, v.real, v.imag)))
        for i, u in enumerate(self.grid):
            v = ext[i]
            if self.flags[i] == FLAG_OK and np.isfinite(v):
                lines.append(",".join([_text(u), "inf", _text(v.real), _text(v.imag)]))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _text(x):
    """Shortest round-trip text of a float."""
    return repr(float(x) + 0.0)


def richardson_weights(eps):
    """Weights ``w`` with ``sum w_i p(eps_i) = p(0)`` for polynomials of degree ``len(eps) - 1``."""
    eps = np.asarray(eps, dtype=float)
    w = np.empty(eps.size)
    for i in range(eps.size):
        others = np.delete(eps, i)
        w[i] = np.prod(others / (others - eps[i]))
    return w


def richardson(values, eps):
    """Extrapolate ``values[i] ~ v(eps[i])`` to ``eps = 0`` along the first axis, skipping NaN rows."""
    values = np.asarray(values)
    good = np.all(np.isfinite(values.reshape(values.shape[0], -1)), axis=1)
    if np.count_nonzero(good) < 2:
        return np.full(values.shape[1:], np.nan, dtype=values.dtype)
    w = richardson_weights(np.asarray(eps)[good])
    return np.tensordot(w, values[good], axes=1)


def _flags(u_grid, eps, shift_sign, eigenvalues, rho, cond):
    """Per-u flags; the singular shifts are ``u = shift_sign * lam``."""
    width = 2 * float(np.max(eps))
    out = []
    for i, u in enumerate(u_grid):
        near_eig = any(abs(u - shift_sign * lam) < width for lam in eigenvalues)
        if near_eig or np.any(cond[i] > 1e10):
            out.append(FLAG_EIG)
        elif abs(u) < width or (rho > 0 and min(abs(u - rho), abs(u + rho)) < width):
            out.append(FLAG_END)
        else:
            out.append(FLAG_OK)
    return tuple(out)


def reflection_ratio(alpha, lam):
    """Per-level ratio ``q`` of the spurious corner wave in ``(K - lam)^-1``.

    Even corner modes see the symbol ``K``, odd ones ``-K``; whichever of
    ``lam``, ``-lam`` lies inside the region enclosed by the symbol contour
    gives ``mu`` and ``q = 4**(-|Re mu|) * phase``.  Returns None when
    neither does (the discrete resolvent then converges under grading).
    """
    alpha, lam, sign = reduce_angle(alpha, lam)
    alpha = float(alpha)
    lam = sign * lam
    for target in (lam, -lam):
        if target.imag == 0:
            continue
        try:
            if not in_sigma_tilde(alpha, target):
                continue
            mu = mu_inverse(alpha, target).mu
        except (DomainError, NoConvergence):
            continue
        return complex(4.0 ** (-mu) if mu.real > 0 else 4.0 ** mu)
    return None


def mobius_limit(values, q, degree=1):
    """Constant term ``A`` of ``y_L = (A + sum B_k w^k) / (1 + sum C_k w^k)``, ``w = q**L``.

    ``values`` are given on consecutive levels ``L = 0, 1, ...``; needs at
    least ``2 * degree + 1`` of them (least squares beyond).
    """
    y = np.asarray(values, dtype=complex)
    n = y.size
    if n < 2 * degree + 1:
        raise ConfigError(f"Mobius extrapolation of degree {degree} needs {2 * degree + 1} levels")
    w = q ** np.arange(n)
    cols = [np.ones(n)] + [w ** k for k in range(1, degree + 1)] + [-(w ** k) * y for k in range(1, degree + 1)]
    coef = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)[0]
    return coef[0]


def _common_angle(spec):
    angles = {round(a, 12) for _, a in spec.corners}
    if len(angles) != 1:
        raise ConfigError("grading extrapolation needs every corner to share one angle")
    return spec.corners[0][1]


class _Family:
    """Eigen-resolvents of one curve on consecutive grading levels."""

    def __init__(self, meshes, Ks):
        if len(meshes) != len(Ks) or not meshes:
            raise ConfigError("need one operator per mesh")
        levels = [m.grading_levels for m in meshes]
        if len(meshes) == 2:
            raise ConfigError("grading extrapolation needs at least three levels")
        if len(meshes) > 1 and list(np.diff(levels)) != [1] * (len(levels) - 1):
            raise ConfigError("grading extrapolation needs consecutive grading levels")
        self.meshes = list(meshes)
        self.solvers = [EigenResolvent(K) for K in Ks]
        self.alpha = _common_angle(meshes[0].spec) if len(meshes) > 1 else None
        self.degree = 1

    def evaluate(self, builders, lams):
        """``builders[i]`` returns a callable of the shifts for mesh ``i``; combine over levels."""
        per_level = np.stack([b(lams) for b in builders])  # (levels, n_lam, m, r)
        if len(self.meshes) == 1:
            return per_level[0]
        out = per_level[-1].copy()
        for i, lam in enumerate(lams):
            q = reflection_ratio(self.alpha, lam)
            if q is None:
                continue
            flat = per_level[:, i].reshape(len(self.meshes), -1)
            out[i] = np.array([mobius_limit(flat[:, c], q, self.degree)
                               for c in range(flat.shape[1])]).reshape(out[i].shape)
        return out


def _polarizability_values(family, lams):
    builders = []
    for mesh, solver in zip(family.meshes, family.solvers):
        a, bw, area = _moments(mesh)
        f = solver.bilinear(bw.T, -a)
        builders.append(lambda lam, f=f, area=area: (2.0 / area) * f(lam))
    vals = family.evaluate(builders, lams)          # [cell, k, j]
    return np.swapaxes(vals, 1, 2)                 # omega[cell, j, k]


def limit_polarizability_sweep(mesh, K, u_grid, eps_ladder=DEFAULT_LADDER, eigenvalues=(1.0,),
                               refinements=()):
    """Polarizability ``omega(u + i eps)`` on a grid and its limit ``eps -> 0+``.

    ``refinements`` optionally holds ``(mesh, K)`` pairs on the following
    consecutive grading levels; values are then extrapolated to infinite
    grading before the Richardson step in ``eps``.  ``eigenvalues`` (stable
    discrete eigenvalues) drive the near-eigenvalue flags at ``u = -lam``.
    """
    u = check_vector(u_grid, name="u_grid", dtype=float)
    eps = check_eps_ladder(eps_ladder, min_length=3)
    meshes = [mesh] + [m for m, _ in refinements]
    family = _Family(meshes, [K] + [k for _, k in refinements])
    z = (u[:, None] + 1j * eps[None, :]).ravel()
    lams = -z
    vals = _polarizability_values(family, lams).reshape(u.size, eps.size, 2, 2)
    cond = family.solvers[-1].condition_proxy(lams).reshape(u.size, eps.size)
    vals[cond > 1 / np.finfo(float).eps] = np.nan
    ext = np.stack([richardson(vals[i], eps) for i in range(u.size)])
    rho = essential_radius(mesh.spec)
    flags = _flags(u, eps, -1.0, eigenvalues, rho, cond)
    info = {"levels": [m.grading_levels for m in meshes], "n": [m.n for m in meshes],
            "essential_radius": rho, "curve": mesh.spec.name}
    return SweepTable(u, eps, vals, ext, flags, "polarizability", info)


def polarizability_limit_values(mesh, K, z, refinements=()):
    """``omega(z)`` for an array of shifts, optionally extrapolated in grading."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    meshes = [mesh] + [m for m, _ in refinements]
    family = _Family(meshes, [K] + [k for _, k in refinements])
    return _polarizability_values(family, -z)


def _node_data(g, mesh):
    return _values(g(mesh) if callable(g) else g, mesh)


def spectral_density(mesh, K, S, g, h, u_grid, eps_ladder=DEFAULT_LADDER, eigenvalues=(1.0,),
                     refinements=()):
    """``tau_{g,h}(u) = (1/pi) Im <(K - (u + i eps))^-1 g, h>_E'`` and its ``eps -> 0+`` limit.

    ``g`` and ``h`` are node values or callables ``mesh -> values``; the
    latter are needed with ``refinements``, ``(mesh, K, S)`` triples on the
    following grading levels used for grading extrapolation.
    """
    u = check_vector(u_grid, name="u_grid", dtype=float)
    eps = check_eps_ladder(eps_ladder, min_length=3)
    if refinements and not (callable(g) and callable(h)):
        raise ConfigError("grading extrapolation needs g and h as callables of the mesh")
    levels = [(mesh, K, S)] + [tuple(r) for r in refinements]
    family = _Family([m for m, _, _ in levels], [k for _, k, _ in levels])
    builders = []
    for (m, _, s_op), solver in zip(levels, family.solvers):
        gv, hv = _node_data(g, m), _node_data(h, m)
        # <f, h>_E' = sum (S^-1 f) conj(h) dsigma = r @ f with r = S^-T (conj(h) dsigma)
        row = sla.solve(np.asarray(s_op.entries).T, np.conj(hv) * m.dsigma)
        builders.append(solver.bilinear(row[None, :], gv[:, None]))
    lams = (u[:, None] + 1j * eps[None, :]).ravel()
    pair = family.evaluate(builders, lams)[:, 0, 0].reshape(u.size, eps.size)
    tau = pair.imag / math.pi
    cond = family.solvers[-1].condition_proxy(lams).reshape(u.size, eps.size)
    tau[cond > 1 / np.finfo(float).eps] = np.nan
    ext = np.array([richardson(tau[i], eps) for i in range(u.size)])
    rho = essential_radius(mesh.spec)
    flags = _flags(u, eps, 1.0, eigenvalues, rho, cond)
    info = {"curve": mesh.spec.name, "levels": [m.grading_levels for m, _, _ in levels],
            "n": [m.n for m, _, _ in levels], "essential_radius": rho}
    return SweepTable(u, eps, tau, ext, flags, "density", info)


def density_from_polarizability(table, component=(0, 0)):
    """``tau(u) = (1/pi) Im omega+(-u)`` on the mirrored grid, sorted ascending in ``u``."""
    _, ext = table.component(component)
    order = np.argsort(-table.grid)
    return -table.grid[order], ext[order].imag / math.pi


def polarizability_residues(mesh, K, eigenvalues, component=(0, 0), tol=1e-6):
    """Point masses ``tau(n)`` of ``-omega_jk`` at the given discrete eigenvalues."""
    solver = EigenResolvent(K)
    a, bw, area = _moments(mesh)
    j, k = component
    lv = bw[:, k] @ solver.vectors
    vr = solver.project(a[:, j])
    out = []
    for lam in eigenvalues:
        sel = np.abs(solver.eigenvalues - lam) < tol
        # -omega(z) = (2/area) sum lv vr / (lam_n + z)
        out.append((float(lam), complex(2.0 / area * np.sum(lv[sel] * vr[sel]))))
    return out


def stieltjes_transform(u, tau, z, masses=()):
    """``int tau(u) / (u + z) du + sum m_n / (lam_n + z)`` by the trapezoid rule."""
    u = np.asarray(u, dtype=float)
    tau = np.asarray(tau)
    z = check_complex(z, "z")
    val = np.trapezoid(tau / (u + z), u)
    for lam, m in masses:
        val += m / (lam + z)
    return complex(val)


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: np.ndarray
    stability: np.ndarray
    stable: np.ndarray
    essential_interval: tuple
    levels: tuple

    @property
    def isolated(self):
        r = self.essential_interval[1]
        return self.eigenvalues[self.stable & (np.abs(self.eigenvalues) >= r)]

    @property
    def embedded_candidates(self):
        r = self.essential_interval[1]
        return self.eigenvalues[self.stable & (np.abs(self.eigenvalues) < r)]

    def pairing_defects(self, exclude=(1.0,), tol=1e-3):
        """``min |lam + lam'|`` over stable ``lam'`` for each stable ``lam`` not excluded."""
        st = self.eigenvalues[self.stable]
        out = []
        for lam in st:
            if any(abs(lam - e) < tol for e in exclude):
                continue
            out.append((float(lam), float(np.min(np.abs(st + lam)))))
        return out


def _nearest(a, b):
    i = np.searchsorted(b, a).clip(1, len(b) - 1)
    return np.where(np.abs(b[i - 1] - a) <= np.abs(b[i] - a), i - 1, i)


def detect_eigenvalues(meshes, Ks, tol=1e-3, converged=1e-8):
    """Eigenvalues of ``K`` that persist under grading refinement.

    The E'-symmetrized form of ``K`` is similar to ``K``, so the spectra
    coincide.  Each eigenvalue of the finest mesh is traced back through
    mutual nearest neighbours on coarser meshes.  It is stable when the
    last change is below ``tol`` and every change at most halves the
    previous one (or all changes are below ``converged``); unstable ones
    are essential-spectrum fill-in.
    """
    if len(meshes) < 2 or len(meshes) != len(Ks):
        raise ConfigError("eigenvalue detection needs at least two refinement levels")
    spectra = []
    for K in Ks:
        ev = sla.eigvals(_entries(K), check_finite=False)
        spectra.append(np.sort(ev.real))
    fine = spectra[-1]
    cur = np.arange(fine.size)
    vals = fine
    mutual = np.ones(fine.size, bool)
    deltas = []
    for lev in range(len(spectra) - 2, -1, -1):
        coarse = spectra[lev]
        j = _nearest(vals, coarse)
        mutual &= _nearest(coarse[j], spectra[lev + 1]) == cur
        deltas.append(np.abs(vals - coarse[j]))
        vals, cur = coarse[j], j
    d = np.array(deltas)
    shrinking = np.all(d[:-1] <= 0.5 * d[1:], axis=0) if d.shape[0] > 1 else np.ones(fine.size, bool)
    stable = mutual & (d[0] < tol) & (shrinking | (d.max(axis=0) < converged))
    rho = essential_radius(meshes[-1].spec)
    return EigenReport(fine, d.max(axis=0), stable, (-rho, rho),
                       tuple(m.grading_levels for m in meshes))


@dataclass(frozen=True)
class SingularFit:
    mu_fit: complex
    c: complex
    d: complex
    residual: float
    window: tuple
    mu_oracle: complex
    sides: tuple = ()

    @property
    def relative_error(self):
        return abs(self.mu_fit - self.mu_oracle) / abs(self.mu_oracle)


def _fit_side(f, s, nu0):
    """Variable-projection fit of ``d + c1 s^-nu + c2 s^nu``; returns ``(nu, d, c1, c2, residual)``."""
    norm = np.linalg.norm(f)

    def basis(nu):
        return np.column_stack([np.ones_like(s), s ** (-nu), s ** nu])

    def res(p):
        a = basis(p[0] + 1j * p[1])
        c = np.linalg.lstsq(a, f, rcond=None)[0]
        r = (a @ c - f) / norm
        return np.concatenate([r.real, r.imag])

    sol = least_squares(res, [nu0.real, nu0.imag], method="lm", x_scale=[0.1, 0.1])
    nu = complex(sol.x[0], sol.x[1])
    if sol.status <= 0 or not np.isfinite(nu) or not abs(nu.real) < 1:
        raise FitDiverged(f"exponent fit did not converge (status {sol.status})")
    c = np.linalg.lstsq(basis(nu), f, rcond=None)[0]
    return nu, c[0], c[1], c[2], float(np.linalg.norm(sol.fun))


def exponent_fit(mesh, K, u, eps, g=None, corner=0, window=None, decades=2.5):
    """Fit the corner exponent of ``(K - (u + i eps))^-1 g`` and compare with the symbol.

    On each side of the corner the solution is fitted on
    ``s_lo <= s <= s_hi`` (default: half a decade above the smallest node to
    ``decades`` further, capped at a tenth of the curve scale) by
    ``d + c s^-mu + c' s^mu``.  The second term is the wave reflected at
    the end of the graded mesh.  ``mu`` is initialized from the symbol and
    the side average is returned.
    """
    lam = check_complex(complex(u, eps), "lambda")
    if eps == 0:
        raise DomainError("exponent fit needs eps != 0")
    corner = check_int(corner, "corner", low=0, high=len(mesh.spec.corners) - 1)
    alpha = mesh.spec.corners[corner][1]
    a_r, lam_r, sign = reduce_angle(alpha, lam)
    mu0 = mu_continued(float(a_r), lam_r).mu
    if g is None:
        g = mesh.points.real
    gv = _values(g, mesh)
    k = _entries(K)
    fac, cond = _lu_with_condition(k - lam * np.eye(mesh.n))
    if not cond < COND_LIMIT:
        raise NearSingular(f"K - lambda is numerically singular at {lam}", cond)
    f = sla.lu_solve(fac, gv, check_finite=False)
    sides = []
    for side in (-1, 1):
        idx = mesh.corner_nodes(corner, side)
        s = mesh.s_corner[idx]
        if window is None:
            s_lo = s.min() * 10 ** 0.5
            s_hi = min(s_lo * 10 ** decades, 0.1 * mesh.spec.scale)
        else:
            s_lo, s_hi = window
        sel = (s >= s_lo) & (s <= s_hi)
        if np.count_nonzero(sel) < 8:
            raise WindowTooSmall(f"fit window [{s_lo:.2e}, {s_hi:.2e}] holds fewer than 8 nodes")
        nu, d, c1, c2, r = _fit_side(f[idx][sel], s[sel], mu0)
        sides.append({"side": side, "mu": nu, "d": d, "c": c1, "c_reflected": c2, "residual": r})
    mu = sum(x["mu"] for x in sides) / 2
    return SingularFit(mu, sum(x["c"] for x in sides) / 2, sum(x["d"] for x in sides) / 2,
                       max(x["residual"] for x in sides), (float(s_lo), float(s_hi)), mu0, tuple(sides))


class Polarizability(BaseEstimator):
    """Polarizability of a curve with grading extrapolation.

    ``fit`` builds meshes on levels ``grading_levels .. grading_levels +
    n_levels - 1`` and their eigendecompositions; ``predict`` returns
    ``omega(z)`` for an array of shifts.
    """

    def __init__(self, grading_levels=20, n_levels=3, panels_per_piece=8, gauss_order=16,
                 eps_ladder=DEFAULT_LADDER):
        self.grading_levels = grading_levels
        self.n_levels = n_levels
        self.panels_per_piece = panels_per_piece
        self.gauss_order = gauss_order
        self.eps_ladder = eps_ladder

    def fit(self, curve, y=None):
        spec = load_curve(curve) if isinstance(curve, str) else curve
        check_int(self.n_levels, "n_levels", low=1)
        self.meshes_ = [build_mesh(spec, self.panels_per_piece, self.grading_levels + i, self.gauss_order)
                        for i in range(self.n_levels)]
        self.operators_ = [assemble_K(m) for m in self.meshes_]
        pairs = list(zip(self.meshes_, self.operators_))
        self.refinements_ = pairs[1:]
        self.family_ = _Family(self.meshes_, self.operators_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "family_"):
            raise ConfigError("Polarizability is not fitted")

    def predict(self, z):
        self._check_fitted()
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return _polarizability_values(self.family_, -z)

    def sweep(self, u_grid, eigenvalues=(1.0,)):
        self._check_fitted()
        return limit_polarizability_sweep(self.meshes_[0], self.operators_[0], u_grid,
                                          self.eps_ladder, eigenvalues, self.refinements_)


class SingularExponentFit(BaseEstimator):
    """Corner exponent of the limiting-absorption solution on a curve."""

    def __init__(self, grading_levels=10, corner=0, decades=2.5, panels_per_piece=8, gauss_order=16):
        self.grading_levels = grading_levels
        self.corner = corner
        self.decades = decades
        self.panels_per_piece = panels_per_piece
        self.gauss_order = gauss_order

    def fit(self, curve, y=None):
        spec = load_curve(curve) if isinstance(curve, str) else curve
        self.mesh_ = build_mesh(spec, self.panels_per_piece, self.grading_levels, self.gauss_order)
        self.K_ = assemble_K(self.mesh_)
        return self

    def predict(self, lams, g=None):
        """One SingularFit per spectral parameter ``u + i eps``."""
        if not hasattr(self, "K_"):
            raise ConfigError("SingularExponentFit is not fitted")
        return [exponent_fit(self.mesh_, self.K_, complex(l).real, complex(l).imag, g,
                             self.corner, decades=self.decades)
                for l in np.atleast_1d(lams)]
