"""Nystrom discretization of the Neumann-Poincare operator and the single layer.

Matrices act on nodal values.  With ``dsigma = weight * jac`` the discrete
L2 pairing is ``<f, g> = sum f conj(g) dsigma``, and ``W = diag(dsigma)``.

* ``K_ij = (1/pi) <y_j - x_i, n_j> / |x_i - y_j|^2 dsigma_j``, with the
  smooth limit ``kappa_i / (2 pi) dsigma_i`` on the diagonal.
* ``K* = W^-1 K^T W`` is the discrete L2 adjoint.
* ``S_ij = (1/2pi) log(1/|x_i - y_j|)`` integrated with product rules on
  the panel containing ``x_i`` and dyadically refined rules on nearby panels.
"""
from dataclasses import dataclass, field
import math
import struct

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from sklearn.base import BaseEstimator

from ._validation import check_complex, check_vector
from .exceptions import ConfigError, DegenerateKernel, NearSingular, SchemaError
from .geometry import build_mesh, load_curve

KINDS = ("NP_K", "NP_Kstar", "SingleLayer_S")
COND_LIMIT = 1e14


@dataclass(eq=False)
class OperatorMatrix:
    """Dense matrix of a layer operator on a mesh.  ``entries`` are read-only."""

    entries: np.ndarray
    kind: str
    mesh: object
    info: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown operator kind {self.kind!r}")
        if self.entries.shape != (self.mesh.n, self.mesh.n):
            raise ConfigError("operator size does not match the mesh")
        self.entries.setflags(write=False)

    @property
    def n(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, DiscreteFunction):
            return DiscreteFunction(self.entries @ other.values, self.mesh)
        return self.entries @ np.asarray(other)


@dataclass(eq=False)
class DiscreteFunction:
    values: np.ndarray
    mesh: object
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = check_vector(self.values, self.mesh.n, "values")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _values(f, mesh):
    if isinstance(f, DiscreteFunction):
        if f.mesh is not mesh:
            raise ConfigError("function lives on a different mesh")
        return f.values
    return check_vector(f, mesh.n, "function values")


def _same_mesh(*ops):
    m = ops[0].mesh
    if any(op.mesh is not m for op in ops[1:]):
        raise ConfigError("operators come from different meshes")
    return m


# ---------------------------------------------------------------- K and K*

def _np_kernel(diff, normal):
    """``(1/pi) <y - x, n_y> / |x - y|^2`` with ``diff = x - y``."""
    return -(np.conj(normal) * diff).real / (np.abs(diff) ** 2) / math.pi


def assemble_K(mesh, near_quadrature=True):
    """Nystrom matrix of the Neumann-Poincare operator ``K``.

    With ``near_quadrature`` the entries for a target close to another
    panel (closer than that panel's length) integrate the kernel against
    the panel's Lagrange basis with a rule refined toward the target.  This
    matters across corners, where the kernel is nearly singular at the scale
    of the graded panels; plain Gauss there leaves O(1) errors on the
    smallest panels.
    """
    d = mesh.differences()                        # x_i - y_j
    np.fill_diagonal(d, 1.0)
    k = _np_kernel(d, mesh.normal[None, :])
    np.fill_diagonal(k, mesh.curvature / (2 * math.pi))
    k *= mesh.dsigma[None, :]
    if near_quadrature:
        _refine_near_K(mesh, k)
    return OperatorMatrix(k, "NP_K", mesh, {"near_quadrature": bool(near_quadrature)})


def _refine_near_K(mesh, k):
    order = mesh.gauss_order
    xg, wg, vinv, _ = _gauss_data(order)
    pid = mesh.panel_id
    pts = mesh.points
    for q in range(len(mesh.panels)):
        iq = np.flatnonzero(pid == q)
        geo = _PanelGeometry(mesh, q, iq)
        plen = mesh.dsigma[iq].sum()
        dist = np.min(np.abs(pts[:, None] - pts[iq][None, :]), axis=1)
        for i in np.flatnonzero((dist < plen) & (pid != q)):
            target = mesh.anchor[i] - geo.anchor + mesh.offset[i]
            c, dmin = _closest_param(geo, np.array([target + geo.anchor]), xg)
            xr, wr = _graded_rule(c, 0.1 * dmin / (plen / 2), xg, wg)
            off, jac, normal = geo.at(xr, normals=True)
            ker = _np_kernel(target - off, normal)
            k[i, iq] = (ker * jac * wr) @ _interp_matrix(xr, vinv, order)


def assemble_Kstar(mesh, K=None):
    """Discrete L2 adjoint ``W^-1 K^T W``."""
    if K is None:
        K = assemble_K(mesh)
    w = mesh.dsigma
    ks = K.entries.T * w[None, :] / w[:, None]
    return OperatorMatrix(np.ascontiguousarray(ks), "NP_Kstar", mesh)


# ---------------------------------------------------------------- S

def _legendre_q(x, nmax):
    """Ferrers functions of the second kind ``Q_0..Q_nmax`` on ``(-1, 1)``."""
    x = np.asarray(x, dtype=float)
    q = np.empty((nmax + 1,) + x.shape)
    q[0] = 0.5 * np.log((1 + x) / (1 - x))
    if nmax >= 1:
        q[1] = x * q[0] - 1
    for n in range(1, nmax):
        q[n + 1] = ((2 * n + 1) * x * q[n] - n * q[n - 1]) / (n + 1)
    return q


def log_moments(x, nmax):
    """``I_k(x) = int_{-1}^{1} log|x - t| P_k(t) dt`` for ``k = 0..nmax``."""
    x = np.asarray(x, dtype=float)
    q = _legendre_q(x, nmax + 1)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = (1 + x) * np.log1p(x) + (1 - x) * np.log1p(-x) - 2
    for k in range(1, nmax + 1):
        out[k] = 2.0 / (2 * k + 1) * (q[k + 1] - q[k - 1])
    return out


def _gauss_data(order):
    x, w = np.polynomial.legendre.leggauss(order)
    vinv = np.linalg.inv(np.polynomial.legendre.legvander(x, order - 1))
    # product weights: int log|t - x_i| l_j(t) dt
    mom = log_moments(x, order - 1).T                 # (i, k)
    return x, w, vinv, mom @ vinv


def _interp_matrix(xi, vinv, order):
    """Values at ``xi`` of the Lagrange basis on the Gauss nodes."""
    return np.polynomial.legendre.legvander(xi, order - 1) @ vinv


def _graded_rule(center, scale, xg, wg):
    """Composite Gauss rule on [-1, 1] refined dyadically toward ``center``.

    Subintervals shrink by halves from width 2 down to about ``scale``.
    """
    edges = {-1.0, 1.0}
    if -1 < center < 1:
        edges.add(center)
    d = 1.0
    floor = max(scale, 2.0 ** -40)
    while d >= floor:
        for e in (center - d, center + d):
            if -1 < e < 1:
                edges.add(e)
        d /= 2
    edges = np.array(sorted(edges))
    a, b = edges[:-1], edges[1:]
    x = (0.5 * (b - a)[:, None] * (xg + 1) + a[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * wg).ravel()
    return x, w


def _end_graded_rule(xg, wg, levels=30):
    """Composite Gauss rule on [-1, 1] refined dyadically toward both ends."""
    edges = [-1.0, 1.0, 0.0]
    for m in range(1, levels + 1):
        edges += [-1 + 2.0 ** -m, 1 - 2.0 ** -m]
    edges = np.array(sorted(set(edges)))
    a, b = edges[:-1], edges[1:]
    x = (0.5 * (b - a)[:, None] * (xg + 1) + a[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * wg).ravel()
    return x, w


class _PanelGeometry:
    """Evaluate a panel at local coordinates ``xi`` in [-1, 1]."""

    def __init__(self, mesh, k, nodes):
        self.panel = mesh.panels[k]
        self.arc = mesh.spec.pieces[self.panel.piece]
        self.anchor = mesh.anchor[nodes[0]]
        self.h = self.panel.u_b - self.panel.u_a

    def ends(self):
        off, _ = self.at(np.array([-1.0, 1.0]))
        return self.anchor + off

    def at(self, xi, normals=False):
        u = self.panel.u_a + 0.5 * self.h * (xi + 1)
        t = u if self.panel.side == 0 else 1.0 - u
        d1 = self.arc.derivatives(t)[0]
        speed = np.abs(d1)
        off = self.arc.offset(u, self.panel.side)
        if normals:
            return off, speed * self.h / 2, -1j * d1 / speed
        return off, speed * self.h / 2


def _self_rows(geo, xi_out, xg, vinv, order):
    """``int_P log|x(xi) - y| l_j(y) dsigma_y`` for targets ``x(xi)`` on the same panel."""
    off_o, _ = geo.at(xi_out)
    off_n, jac_n = geo.at(xg)
    diff = off_o[:, None] - off_n[None, :]
    dxi = xi_out[:, None] - xg[None, :]
    # targets never coincide with Gauss nodes of the source panel here
    smooth = np.log(np.abs(diff) / np.abs(dxi))
    mom = log_moments(xi_out, order - 1).T @ vinv
    return mom * jac_n[None, :] + smooth * (wg_of(order) * jac_n)[None, :]


_WG = {}


def wg_of(order):
    if order not in _WG:
        _WG[order] = np.polynomial.legendre.leggauss(order)[1]
    return _WG[order]


def _closest_param(geo, other_pts, xg):
    """Local coordinate on ``geo`` closest to a set of points, and that distance."""
    xs = np.concatenate([[-1.0], xg, [1.0]])
    off, _ = geo.at(xs)
    dist = np.min(np.abs((geo.anchor + off)[:, None] - other_pts[None, :]), axis=1)
    j = int(np.argmin(dist))
    return xs[j], dist[j]


def _near_block(gp, gq, ends_p, ends_q, xg, wg, vinv, order):
    """Block of ``-2pi W S`` between two distinct nearby panels."""
    xs = np.concatenate([[-1.0], xg, [1.0]])
    pts_q = gq.anchor + gq.at(xs)[0]
    pts_p = gp.anchor + gp.at(xs)[0]
    cp, dp = _closest_param(gp, pts_q, xg)
    cq, dq = _closest_param(gq, pts_p, xg)
    touch = np.min(np.abs(ends_p[:, None] - ends_q[None, :]))
    half_p = np.sum(wg * gp.at(xg)[1])
    half_q = np.sum(wg * gq.at(xg)[1])
    if touch <= 1e-13 * max(half_p, half_q):
        # shared endpoint: grade both factors toward it
        a = np.argmin(np.abs(ends_p[:, None] - ends_q[None, :]))
        cp, cq = (-1.0, 1.0)[a // 2], (-1.0, 1.0)[a % 2]
        sp = sq = 0.0
    else:
        gap = min(dp, dq)
        sp, sq = 0.1 * gap / half_p, 0.1 * gap / half_q
    xp, wp = _graded_rule(cp, sp, xg, wg)
    xq, wq = _graded_rule(cq, sq, xg, wg)
    offp, _ = gp.at(xp)
    offq, _ = gq.at(xq)
    g = np.log(np.abs((gp.anchor - gq.anchor) + offp[:, None] - offq[None, :]))
    lp = _interp_matrix(xp, vinv, order) * wp[:, None]
    lq = _interp_matrix(xq, vinv, order) * wq[:, None]
    jp = gp.at(xg)[1]
    jq = gq.at(xg)[1]
    return -(lp.T @ g @ lq) * jp[:, None] * jq[None, :]


def assemble_S(mesh, near_factor=1.0):
    """Single layer ``(1/2pi) int log(1/|x-y|) f(y) dsigma_y`` on the mesh.

    Well separated node pairs use the point rule
    ``(W S)_ij = dsigma_i dsigma_j G(x_i, y_j)``.  For a panel and its
    neighbours the block of ``W S`` is the double integral
    ``int int G(x, y) l_i(x) l_j(y)`` of the Lagrange basis functions, with
    log-moment product integration on the diagonal block and dyadically
    refined Gauss rules elsewhere.  The weighted matrix ``W S`` is
    therefore symmetric, and ``S f`` keeps the accuracy of a Nystrom rule
    on smooth densities because the Gauss rule of the outer integral is
    exact on ``l_i`` times polynomials of degree below the panel order.
    """
    d = mesh.differences()
    np.fill_diagonal(d, 1.0)
    w = mesh.dsigma
    ws = -np.log(np.abs(d)) * w[:, None] * w[None, :]

    order = mesh.gauss_order
    xg, wg, vinv, _ = _gauss_data(order)
    xo, wo = _end_graded_rule(xg, wg)
    lo = _interp_matrix(xo, vinv, order)              # outer basis values (m, i)
    pid = mesh.panel_id
    panel_nodes = [np.flatnonzero(pid == k) for k in range(len(mesh.panels))]
    panel_len = np.array([w[ix].sum() for ix in panel_nodes])
    geos = [_PanelGeometry(mesh, k, ix) for k, ix in enumerate(panel_nodes)]
    pts = mesh.points
    npan = len(panel_nodes)
    centers = np.array([pts[ix].mean() for ix in panel_nodes])

    ends = np.array([g.ends() for g in geos])          # (panel, 2)
    for p in range(npan):
        ip = panel_nodes[p]
        jac_p = geos[p].at(xg)[1]
        outer = wo[:, None] * lo * jac_p[None, :]    # (m, i)
        ws[np.ix_(ip, ip)] = -(outer.T @ _self_rows(geos[p], xo, xg, vinv, order))
        # neighbours q > p; the transposed block follows by symmetry
        cand = np.flatnonzero(np.abs(centers - centers[p]) < 2 * (panel_len + panel_len[p]))
        for q in cand[cand > p]:
            iq = panel_nodes[q]
            size = max(panel_len[p], panel_len[q])
            gap = np.min(np.abs(pts[ip][:, None] - pts[iq][None, :]))
            if gap >= near_factor * size:
                continue
            ws[np.ix_(ip, iq)] = _near_block(geos[p], geos[q], ends[p], ends[q],
                                             xg, wg, vinv, order)
            ws[np.ix_(iq, ip)] = ws[np.ix_(ip, iq)].T
    ws /= 2 * math.pi
    s = ws / w[:, None]
    return OperatorMatrix(s, "SingleLayer_S", mesh)


# ---------------------------------------------------------------- functions of the operators

def equilibrium_density(K_star, S):
    """Unit-mass null vector of ``K* - I`` from the smallest singular vector."""
    mesh = _same_mesh(K_star, S)
    a = K_star.entries - np.eye(mesh.n)
    _, sv, vh = sla.svd(a, lapack_driver="gesdd")
    if sv[-2] < 10 * sv[-1]:
        raise DegenerateKernel(
            f"K* - I has no isolated null vector (singular values {sv[-2]:.3e}, {sv[-1]:.3e})")
    rho = vh[-1].real
    rho = rho / np.sum(rho * mesh.dsigma)
    pot = S.entries @ rho
    flat = float(np.std(pot) / abs(np.mean(pot)))
    return DiscreteFunction(rho, mesh, {"flatness": flat, "potential": float(np.mean(pot)),
                                        "sigma_min": float(sv[-1]), "sigma_next": float(sv[-2])})


def _lu_with_condition(a):
    lu, piv = sla.lu_factor(a, check_finite=False)
    anorm = np.linalg.norm(a, 1)
    if np.iscomplexobj(lu):
        rcond, info = lapack.zgecon(lu, anorm, norm="1")
    else:
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    return (lu, piv), cond


def resolvent_solve(K, lam, g, cond_limit=COND_LIMIT):
    """Solve ``(K - lam) f = g`` by dense LU.

    The 1-norm condition estimate and the relative residual are stored in
    ``info``.  Raises NearSingular when the condition estimate exceeds
    ``cond_limit``.
    """
    lam = check_complex(lam, "lambda")
    mesh = K.mesh
    gv = _values(g, mesh)
    a = K.entries - lam * np.eye(mesh.n)
    if lam.imag != 0 or np.iscomplexobj(gv):
        a = a.astype(complex)
    fac, cond = _lu_with_condition(a)
    if cond > cond_limit:
        raise NearSingular(f"K - lambda is numerically singular at lambda = {lam} "
                           f"(condition {cond:.2e})", cond)
    f = sla.lu_solve(fac, gv, check_finite=False)
    res = float(np.linalg.norm(a @ f - gv) / max(np.linalg.norm(gv), 1e-300))
    return DiscreteFunction(f, mesh, {"condition": cond, "residual": res})


def eprime_inner(S, f, g):
    """``<S^-1 f, g>`` in the discrete L2 pairing."""
    mesh = S.mesh
    fv = _values(f, mesh)
    gv = _values(g, mesh)
    fac, cond = _cached_s_factor(S)
    if cond > COND_LIMIT:
        raise NearSingular(f"single layer is numerically singular (condition {cond:.2e})", cond)
    x = sla.lu_solve(fac, fv, check_finite=False)
    return complex(np.sum(x * np.conj(gv) * mesh.dsigma))


def _cached_s_factor(S):
    if "lu" not in S._cache:
        S._cache["lu"] = _lu_with_condition(S.entries)
    return S._cache["lu"]


def _weighted_norm_2(a, w, iters=100, tol=1e-10, seed=0):
    """2-norm of the L2(dsigma) operator with matrix ``a`` by power iteration."""
    sw = np.sqrt(w)
    b = a * sw[:, None] / sw[None, :]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(b.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        u = b.T @ (b @ v)
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        new = math.sqrt(nu)
        v = u / nu
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


def plemelj_residual(K, Kstar, S):
    """``||K S - S K*|| / ||K S||`` in the L2(dsigma) operator norm."""
    mesh = _same_mesh(K, Kstar, S)
    ks = K.entries @ S.entries
    sk = S.entries @ Kstar.entries
    w = mesh.dsigma
    return _weighted_norm_2(ks - sk, w) / _weighted_norm_2(ks, w)


def gauss_identity_error(K, min_corner_distance=0.1):
    """Max of ``|K 1 - 1|`` over nodes farther than the threshold from every corner."""
    mesh = K.mesh
    err = np.abs(K.entries.sum(axis=1) - 1)
    keep = mesh.s_corner > min_corner_distance
    return float(np.max(err[keep]))


def eprime_factor(S):
    """Cholesky factor ``C`` of the weighted single layer ``W S = C C^T`` (cached)."""
    if "chol" not in S._cache:
        ws = S.entries * S.mesh.dsigma[:, None]
        try:
            S._cache["chol"] = sla.cholesky(0.5 * (ws + ws.T), lower=True)
        except np.linalg.LinAlgError:
            raise DegenerateKernel("weighted single layer is not positive definite")
    return S._cache["chol"]


def eprime_symmetrized(K, S):
    """Matrix of ``K`` in an orthonormal basis of the discrete E' inner product.

    With ``W S = C C^T`` the E' Gram matrix is ``W S^-1 = L L^T`` for
    ``L = W C^-T``; the returned ``A = C^-1 (W K W^-1) C`` equals
    ``L^T K L^-T`` and is symmetric exactly when ``K S = S K*``.
    """
    mesh = _same_mesh(K, S)
    c = eprime_factor(S)
    w = mesh.dsigma
    wk = K.entries * w[:, None] / w[None, :]
    return sla.solve_triangular(c, wk @ c, lower=True)


def eprime_asymmetry(K, S):
    a = eprime_symmetrized(K, S)
    return float(np.linalg.norm(a - a.T, 2) / np.linalg.norm(a, 2))


# ---------------------------------------------------------------- binary dumps

_MAGIC = b"NPOP"
_HEADER = struct.Struct("<4sIIQ16s")


def dump_operator(op, path):
    """Write ``op`` as header ``{kind, N, mesh hash}`` plus row-major little-endian complex64."""
    head = _HEADER.pack(_MAGIC, 1, KINDS.index(op.kind), op.n, op.mesh.hash().encode("ascii"))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(op.entries, dtype="<c8").tobytes())


def read_operator(path):
    """Return ``(kind, entries, mesh_hash)`` from a binary dump."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SchemaError("operator file too short")
    magic, version, kind, n, mhash = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1 or kind >= len(KINDS):
        raise SchemaError("not an operator dump")
    data = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size)
    if data.size != n * n:
        raise SchemaError(f"operator dump holds {data.size} entries, header says {n}x{n}")
    return KINDS[kind], data.reshape(n, n), mhash.decode("ascii")


# ---------------------------------------------------------------- estimator

class BoundaryOperators(BaseEstimator):
    """Mesh and layer operators of a curve.

    ``fit`` accepts a builtin name, a config path or a ``CurveSpec`` and
    sets ``mesh_``, ``K_``, ``Kstar_``, ``S_`` and ``rho0_``;
    ``transform`` applies ``K`` to node values.
    """

    def __init__(self, panels_per_piece=8, grading_levels=10, gauss_order=16, with_single_layer=True):
        self.panels_per_piece = panels_per_piece
        self.grading_levels = grading_levels
        self.gauss_order = gauss_order
        self.with_single_layer = with_single_layer

    def fit(self, curve, y=None):
        spec = load_curve(curve) if isinstance(curve, str) else curve
        self.mesh_ = build_mesh(spec, self.panels_per_piece, self.grading_levels, self.gauss_order)
        self.K_ = assemble_K(self.mesh_)
        self.Kstar_ = assemble_Kstar(self.mesh_, self.K_)
        if self.with_single_layer:
            self.S_ = assemble_S(self.mesh_)
            self.rho0_ = equilibrium_density(self.Kstar_, self.S_)
        return self

    def transform(self, f):
        if not hasattr(self, "K_"):
            raise ConfigError("BoundaryOperators is not fitted")
        return self.K_.entries @ _values(f, self.mesh_)

    def resolvent(self, lam, g):
        if not hasattr(self, "K_"):
            raise ConfigError("BoundaryOperators is not fitted")
        return resolvent_solve(self.K_, lam, g)
