"""Piecewise smooth Jordan curves and corner-graded Gauss-Legendre meshes.

Points are complex numbers ``x + iy``.  Every arc is a map ``[0, 1] -> C``
with analytic first and second derivatives.  Besides ``point(t)`` an arc
can return ``offset(u, side)``, the displacement from one of its endpoints
at parameter distance ``u`` from that endpoint.  Near a corner the mesh
stores node positions as ``anchor + offset`` so that differences of nearby
points keep full relative precision even after many levels of grading.
"""
from dataclasses import dataclass, field
import hashlib
import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from ._validation import check_int, check_positive
from .exceptions import ConfigError

CLOSE_TOL = 1e-12
ANGLE_TOL = 1e-8
CAPACITY_RADIUS = 0.25


# ---------------------------------------------------------------- arcs

class Arc:
    """Smooth parametric arc on ``[0, 1]``; subclasses supply ``_eval``."""

    def _eval(self, t):
        """Return ``(z, dz, d2z)`` at parameter values ``t``."""
        raise NotImplementedError

    def point(self, t):
        return self._eval(np.asarray(t, dtype=float))[0]

    def derivatives(self, t):
        _, d1, d2 = self._eval(np.asarray(t, dtype=float))
        return d1, d2

    def offset(self, u, side):
        """Displacement from endpoint ``side`` (0 or 1) at parameter distance ``u``."""
        u = np.asarray(u, dtype=float)
        if side == 0:
            return self.point(u) - self.point(0.0)
        return self.point(1.0 - u) - self.point(1.0)

    def scaled(self, factor):
        return _ScaledArc(self, factor)


class _ScaledArc(Arc):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)

    def _eval(self, t):
        z, d1, d2 = self.base._eval(t)
        return self.factor * z, self.factor * d1, self.factor * d2

    def offset(self, u, side):
        return self.factor * self.base.offset(u, side)


class LineArc(Arc):
    def __init__(self, start, end):
        self.start = complex(start)
        self.end = complex(end)

    def _eval(self, t):
        d = self.end - self.start
        z = self.start + d * t
        return z, np.full_like(z, d), np.zeros_like(z)

    def offset(self, u, side):
        d = self.end - self.start
        return d * u if side == 0 else -d * u


class CircleArc(Arc):
    """Full counterclockwise circle starting at angle ``theta0``."""

    def __init__(self, center, radius, theta0=0.0):
        self.center = complex(center)
        self.radius = float(radius)
        self.theta0 = float(theta0)

    def _eval(self, t):
        w = 2 * math.pi
        e = np.exp(1j * (self.theta0 + w * t))
        r = self.radius
        return self.center + r * e, 1j * w * r * e, -(w ** 2) * r * e

    def offset(self, u, side):
        w = 2 * math.pi * u * (1 if side == 0 else -1)
        e0 = np.exp(1j * self.theta0)
        # r (e^{iw} - 1) without cancellation
        return self.radius * e0 * 2j * np.sin(w / 2) * np.exp(0.5j * w)


class DropletArc(Arc):
    """``sin(pi t) exp(i beta (t - 1/2))``: a droplet with a corner of angle beta at 0."""

    def __init__(self, beta):
        self.beta = float(beta)

    def _eval(self, t):
        b = self.beta
        e = np.exp(1j * b * (t - 0.5))
        s, c = np.sin(math.pi * t), np.cos(math.pi * t)
        z = s * e
        d1 = (math.pi * c + 1j * b * s) * e
        d2 = (-(math.pi ** 2) * s + 2j * b * math.pi * c - b ** 2 * s) * e
        return z, d1, d2

    def offset(self, u, side):
        u = np.asarray(u, dtype=float)
        if side == 0:
            return np.sin(math.pi * u) * np.exp(1j * self.beta * (u - 0.5))
        return np.sin(math.pi * u) * np.exp(1j * self.beta * (0.5 - u))


class ExprArc(Arc):
    """Arc given by expressions ``x(t)``, ``y(t)``; derivatives by sympy."""

    def __init__(self, x_expr, y_expr):
        import sympy

        t = sympy.Symbol("t", real=True)
        try:
            ex = sympy.sympify(x_expr, locals={"t": t})
            ey = sympy.sympify(y_expr, locals={"t": t})
        except (sympy.SympifyError, TypeError) as err:
            raise ConfigError(f"cannot parse arc expressions: {err}")
        extra = (ex.free_symbols | ey.free_symbols) - {t}
        if extra:
            raise ConfigError(f"arc expressions use unknown symbols {sorted(map(str, extra))}")
        self.x_expr, self.y_expr = str(x_expr), str(y_expr)
        fns = []
        for e in (ex, ey):
            fns.append([sympy.lambdify(t, e.diff(t, k), "numpy") for k in range(3)])
        self._fns = fns

    def _eval(self, t):
        out = []
        for k in range(3):
            x = np.broadcast_to(self._fns[0][k](t), np.shape(t)).astype(float)
            y = np.broadcast_to(self._fns[1][k](t), np.shape(t)).astype(float)
            out.append(x + 1j * y)
        return tuple(out)


# ---------------------------------------------------------------- curve

def _arc_length(arc, a=0.0, b=1.0):
    val, _ = quad(lambda t: abs(arc.derivatives(t)[0]), a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@dataclass(frozen=True)
class CurveSpec:
    """Closed piecewise smooth curve.

    ``corners`` holds ``(junction, alpha)`` pairs; junction ``j`` joins the
    end of piece ``j - 1`` (cyclically) to the start of piece ``j``.
    ``pieces`` are stored already scaled.
    """

    pieces: tuple
    corners: tuple
    scale: float = 1.0
    name: str = "curve"
    ccw: bool = True
    source: dict = field(default=None, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise ConfigError("curve needs at least one piece")
        n = len(self.pieces)
        for j in range(n):
            gap = abs(self.pieces[j - 1].point(1.0) - self.pieces[j].point(0.0))
            if gap > CLOSE_TOL:
                raise ConfigError(f"curve not closed at junction {j} (gap {gap:.3e})")
        if self.signed_area() <= 0:
            raise ConfigError("curve must be counterclockwise (positive signed area)")
        declared = dict(self.corners)
        for j in range(n):
            alpha = junction_angle(self.pieces[j - 1], self.pieces[j])
            if j in declared:
                if abs(alpha - declared[j]) > ANGLE_TOL:
                    raise ConfigError(
                        f"corner at junction {j}: declared angle {declared[j]} but tangents give {alpha}")
            elif abs(alpha - math.pi) > ANGLE_TOL:
                raise ConfigError(f"undeclared corner at junction {j} with angle {alpha}")
        for j, a in self.corners:
            if not (0 < a < 2 * math.pi) or abs(a - math.pi) < 1e-12:
                raise ConfigError(f"corner angle {a} at junction {j} is not a corner")

    @property
    def corner_points(self):
        return [self.pieces[j].point(0.0) for j, _ in self.corners]

    def lengths(self):
        return np.array([_arc_length(p) for p in self.pieces])

    def length(self):
        return float(self.lengths().sum())

    def signed_area(self):
        """Shoelace integral ``(1/2) \\oint (x dy - y dx)``."""
        total = 0.0
        for p in self.pieces:
            def f(t, p=p):
                z, d1, _ = p._eval(np.asarray(t, dtype=float))
                return (np.conj(z) * d1).imag / 2
            total += quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        return total

    def centroid(self):
        area = self.signed_area()
        cx = cy = 0.0
        for p in self.pieces:
            def fx(t, p=p):
                z, d1, _ = p._eval(np.asarray(t, dtype=float))
                return z.real ** 2 * d1.imag / 2
            def fy(t, p=p):
                z, d1, _ = p._eval(np.asarray(t, dtype=float))
                return -(z.imag ** 2) * d1.real / 2
            cx += quad(fx, 0.0, 1.0, epsabs=1e-15, limit=200)[0]
            cy += quad(fy, 0.0, 1.0, epsabs=1e-15, limit=200)[0]
        return complex(cx / area, cy / area)

    def max_radius(self, center=None, n=2001):
        c = self.centroid() if center is None else center
        t = np.linspace(0, 1, n)
        return max(float(np.max(np.abs(p.point(t) - c))) for p in self.pieces)


def junction_angle(incoming, outgoing):
    """Interior angle at the junction end(incoming) -> start(outgoing) of a ccw curve."""
    t_in = incoming.derivatives(1.0)[0]
    t_out = outgoing.derivatives(0.0)[0]
    a = float(np.angle(-t_in / t_out))
    return a % (2 * math.pi)


def _fit_scale(pieces):
    """Scale factor (about the origin) fitting the curve in the radius-1/4 disk."""
    probe = CurveSpec(tuple(pieces), tuple(_detect_corners(pieces)))
    return CAPACITY_RADIUS / probe.max_radius()


def _detect_corners(pieces):
    out = []
    for j in range(len(pieces)):
        a = junction_angle(pieces[j - 1], pieces[j])
        if abs(a - math.pi) > ANGLE_TOL:
            out.append((j, a))
    return out


def _finish(pieces, corners, scale, name, source=None):
    pieces = tuple(p.scaled(scale) if scale != 1.0 else p for p in pieces)
    spec = CurveSpec(pieces, tuple(corners), float(scale), name, True, source)
    if spec.max_radius() > CAPACITY_RADIUS * (1 + 1e-9):
        raise ConfigError("scaled curve does not fit in the radius-1/4 disk about its centroid")
    return spec


def builtin_droplet(alpha=2 * math.pi / 7):
    """Droplet ``sin(pi s)(cos(a(s - 1/2)), sin(a(s - 1/2)))`` with one corner at the origin."""
    check_positive(alpha, "alpha")
    if alpha >= math.pi:
        raise ConfigError("droplet angle must lie in (0, pi)")
    arc = DropletArc(alpha)
    scale = _fit_scale([arc])
    return _finish([arc], [(0, float(alpha))], scale, "droplet",
                   {"curve": "droplet", "alpha": float(alpha)})


def builtin_square(side=1.0):
    """Square centred at the origin with four right-angle corners."""
    side = check_positive(side, "side")
    h = side / 2
    v = [complex(-h, -h), complex(h, -h), complex(h, h), complex(-h, h)]
    pieces = [LineArc(v[k], v[(k + 1) % 4]) for k in range(4)]
    scale = CAPACITY_RADIUS / (h * math.sqrt(2))
    return _finish(pieces, [(k, math.pi / 2) for k in range(4)], scale, "square",
                   {"curve": "square", "side": side})


def builtin_disk(radius=1.0):
    """Circle of the given radius (before scaling); no corners."""
    radius = check_positive(radius, "radius")
    scale = CAPACITY_RADIUS / radius
    return _finish([CircleArc(0.0, radius)], [], scale, "disk",
                   {"curve": "disk", "radius": radius})


BUILTIN = {"droplet": builtin_droplet, "square": builtin_square, "disk": builtin_disk}

_CONFIG_KEYS = {"pieces", "corners", "scale", "name"}


def curve_from_config(config):
    """Build a curve from a mapping with ``pieces``, optional ``corners`` and ``scale``.

    Each piece is ``{x_expr, y_expr}`` in the parameter ``t`` on ``[0, 1]``
    or ``{polyline: [[x, y], ...]}`` (expanded into line segments).
    Without ``corners`` the corners are detected from tangent jumps.
    Without ``scale`` the curve is rescaled to fit the radius-1/4 disk.
    """
    if not isinstance(config, dict):
        raise ConfigError("curve config must be a mapping")
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown curve config keys: {sorted(unknown)}")
    raw = config.get("pieces")
    if not raw:
        raise ConfigError("curve config needs a non-empty 'pieces' list")
    pieces = []
    for k, p in enumerate(raw):
        if not isinstance(p, dict):
            raise ConfigError(f"piece {k} must be a mapping")
        if "polyline" in p:
            pts = [complex(*xy) for xy in p["polyline"]]
            if len(pts) < 2:
                raise ConfigError(f"piece {k}: polyline needs two points")
            pieces += [LineArc(a, b) for a, b in zip(pts[:-1], pts[1:])]
        elif "x_expr" in p and "y_expr" in p:
            pieces.append(ExprArc(p["x_expr"], p["y_expr"]))
        else:
            raise ConfigError(f"piece {k} needs x_expr/y_expr or polyline")
    if "corners" in config:
        corners = []
        for c in config["corners"]:
            try:
                corners.append((int(c["junction"]), float(c["alpha"])))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"invalid corner entry {c!r}")
    else:
        corners = _detect_corners(pieces)
    if "scale" in config:
        scale = check_positive(config["scale"], "scale")
    else:
        scale = _fit_scale(pieces)
    return _finish(pieces, corners, scale, str(config.get("name", "user")), dict(config))


def load_curve(spec):
    """Resolve a builtin name or a YAML/JSON file path to a CurveSpec."""
    if isinstance(spec, CurveSpec):
        return spec
    if isinstance(spec, str) and spec in BUILTIN:
        return BUILTIN[spec]()
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"unknown curve {spec!r}: not a builtin name or a file")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        import yaml

        data = yaml.safe_load(text)
    return curve_from_config(data)


# ---------------------------------------------------------------- mesh

@dataclass(frozen=True)
class Panel:
    piece: int
    side: int          # endpoint the local offsets are measured from
    u_a: float         # parameter distance of the panel ends from that endpoint
    u_b: float
    order: int

    @property
    def interval(self):
        """Parameter interval ``(t_a, t_b)`` with ``t_a < t_b``."""
        if self.side == 0:
            return self.u_a, self.u_b
        return 1.0 - self.u_b, 1.0 - self.u_a


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Composite Gauss-Legendre mesh with per-node geometry.

    ``weight`` is the Gauss weight times the half panel width in the curve
    parameter; ``jac = |z'(t)|``, so ``weight * jac`` integrates against
    arclength.  ``anchor + offset`` is the node position; ``corner`` is the
    index of the nearest corner (-1 if none) and ``corner_side`` is +1 on the
    outgoing piece, -1 on the incoming piece of that corner.
    """

    spec: CurveSpec
    panels: tuple
    anchor: np.ndarray
    offset: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    jac: np.ndarray
    weight: np.ndarray
    s_corner: np.ndarray
    panel_id: np.ndarray
    corner: np.ndarray
    corner_side: np.ndarray
    param: np.ndarray
    grading_levels: int
    panels_per_piece: int
    gauss_order: int

    def __post_init__(self):
        for name in ("anchor", "offset", "normal", "tangent", "curvature", "jac", "weight",
                     "s_corner", "panel_id", "corner", "corner_side", "param"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self):
        return self.offset.shape[0]

    @property
    def points(self):
        return self.anchor + self.offset

    @property
    def corner_flags(self):
        return self.corner >= 0

    @property
    def dsigma(self):
        """Arclength quadrature weights ``weight * jac``."""
        return self.weight * self.jac

    def differences(self):
        """Matrix of ``x_i - y_j`` computed anchor-wise for precision near corners."""
        return (self.anchor[:, None] - self.anchor[None, :]) + (self.offset[:, None] - self.offset[None, :])

    def length(self):
        return float(np.sum(self.dsigma))

    def area(self):
        """Shoelace area ``(1/2) \\oint <x, n> dsigma``."""
        return float(0.5 * np.sum((np.conj(self.normal) * self.points).real * self.dsigma))

    def params(self):
        return {"curve": self.spec.name, "panels": self.panels_per_piece,
                "levels": self.grading_levels, "order": self.gauss_order, "n": self.n}

    def hash(self):
        h = hashlib.sha256()
        for a in (self.anchor, self.offset, self.weight, self.jac):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]

    def corner_nodes(self, corner, side):
        """Indices of nodes on one side of a corner, sorted by distance to it."""
        idx = np.flatnonzero((self.corner == corner) & (self.corner_side == side))
        return idx[np.argsort(self.s_corner[idx])]


def _piece_panels(n_panels, levels, corner_start, corner_end, order):
    """Panels in local (side, u_a, u_b) form with dyadic grading toward corners."""
    h = 1.0 / n_panels
    out = []
    for k in range(n_panels):
        a, b = k * h, (k + 1) * h
        if k == 0 and corner_start:
            edges = [0.0] + [h * 2.0 ** (-levels + m) for m in range(levels + 1)]
            out += [(0, edges[m], edges[m + 1]) for m in range(len(edges) - 1)]
        elif k == n_panels - 1 and corner_end:
            edges = [0.0] + [h * 2.0 ** (-levels + m) for m in range(levels + 1)]
            out += [(1, edges[m], edges[m + 1]) for m in reversed(range(len(edges) - 1))]
        elif b <= 0.5:
            out.append((0, a, b))
        else:
            # measure from the closer endpoint; panels straddling 1/2 use the start
            if a >= 0.5:
                out.append((1, 1.0 - b, 1.0 - a))
            else:
                out.append((0, a, b))
    return [(s, ua, ub, order) for s, ua, ub in out]


def _gauss_arclength(arc, side, u0, u1, n=32):
    """Arclength between local parameters ``u0 < u1`` measured from endpoint ``side``."""
    x, w = np.polynomial.legendre.leggauss(n)
    h = 0.5 * (np.asarray(u1, dtype=float) - u0)
    u = h[..., None] * (x + 1) + u0
    t = u if side == 0 else 1.0 - u
    return h * np.sum(w * np.abs(arc.derivatives(t)[0]), axis=-1)


def build_mesh(spec, panels_per_piece=8, grading_levels=10, gauss_order=16):
    """Composite Gauss-Legendre mesh, dyadically graded toward every corner.

    The panel touching a corner is split ``grading_levels`` times in half
    toward it, so the smallest panel is ``2**-grading_levels`` times the
    base panel.  Gauss nodes are interior, so no node sits on a corner.
    """
    panels_per_piece = check_int(panels_per_piece, "panels_per_piece", low=2)
    grading_levels = check_int(grading_levels, "grading_levels", low=0)
    gauss_order = check_int(gauss_order, "gauss_order", low=4, high=32)
    if grading_levels > 1000:
        raise ConfigError("grading_levels above 1000 underflows the panel widths")
    if not isinstance(spec, CurveSpec):
        raise ConfigError("build_mesh needs a CurveSpec")

    npieces = len(spec.pieces)
    corner_at = {j: k for k, (j, _) in enumerate(spec.corners)}
    lengths = spec.lengths()
    xg, wg = np.polynomial.legendre.leggauss(gauss_order)
    # corner index and curve position for distance computations
    ends = []
    cols = {k: [] for k in ("anchor", "offset", "d1", "d2", "weight", "panel", "param",
                            "a_start", "a_end", "piece")}
    panels = []
    for p, arc in enumerate(spec.pieces):
        c_start = p in corner_at
        c_end = ((p + 1) % npieces) in corner_at
        local = _piece_panels(panels_per_piece, grading_levels, c_start, c_end, gauss_order)
        # anchor end panels at the junction points shared with the neighbours
        p0, p1 = arc.point(0.0), spec.pieces[(p + 1) % npieces].point(0.0)
        for side, ua, ub, order in local:
            pid = len(panels)
            panels.append(Panel(p, side, ua, ub, order))
            u = ua + 0.5 * (ub - ua) * (xg + 1)
            t = u if side == 0 else 1.0 - u
            d1, d2 = arc.derivatives(t)
            cols["anchor"].append(np.full(order, p0 if side == 0 else p1))
            cols["offset"].append(arc.offset(u, side))
            cols["d1"].append(d1)
            cols["d2"].append(d2)
            cols["weight"].append(wg * 0.5 * (ub - ua))
            cols["panel"].append(np.full(order, pid))
            cols["param"].append(t)
            # arclength from the measuring endpoint: whole panels plus partial panel
            base = _gauss_arclength(arc, side, 0.0, ua) if ua > 0 else 0.0
            part = _gauss_arclength(arc, side, ua, u)
            a = base + part
            if side == 0:
                cols["a_start"].append(a)
                cols["a_end"].append(lengths[p] - a)
            else:
                cols["a_end"].append(a)
                cols["a_start"].append(lengths[p] - a)
            cols["piece"].append(np.full(order, p))
    col = {k: np.concatenate(v) for k, v in cols.items()}
    d1 = col["d1"]
    jac = np.abs(d1)
    tangent = d1 / jac
    normal = -1j * tangent
    curvature = (np.conj(d1) * col["d2"]).imag / jac ** 3

    n = jac.size
    s_corner = np.full(n, np.inf)
    corner = np.full(n, -1)
    corner_side = np.zeros(n, dtype=int)
    piece = col["piece"]
    for k, (j, _) in enumerate(spec.corners):
        # backward: from node to start of its piece, then pieces down to junction j
        back_extra = np.array([sum(lengths[(j + m) % npieces] for m in range((q - j) % npieces))
                               for q in range(npieces)])
        fwd_extra = np.array([sum(lengths[(q + 1 + m) % npieces] for m in range((j - q - 1) % npieces))
                              for q in range(npieces)])
        d_back = col["a_start"] + back_extra[piece]
        d_fwd = col["a_end"] + fwd_extra[piece]
        for d, sgn in ((d_back, 1), (d_fwd, -1)):
            closer = d < s_corner
            s_corner[closer] = d[closer]
            corner[closer] = k
            corner_side[closer] = sgn
    if not spec.corners:
        s_corner[:] = np.inf

    return BoundaryMesh(
        spec=spec, panels=tuple(panels), anchor=col["anchor"].astype(complex),
        offset=col["offset"].astype(complex), normal=normal, tangent=tangent,
        curvature=curvature, jac=jac, weight=col["weight"], s_corner=s_corner,
        panel_id=col["panel"].astype(int), corner=corner, corner_side=corner_side,
        param=col["param"], grading_levels=grading_levels,
        panels_per_piece=panels_per_piece, gauss_order=gauss_order)


MESH_COLUMNS = ("panel", "x", "y", "nx", "ny", "kappa", "weight", "jac", "s_corner")


def mesh_table(mesh):
    """Node table with the columns of ``MESH_COLUMNS``."""
    p = mesh.points
    s = np.where(np.isfinite(mesh.s_corner), mesh.s_corner, -1.0)
    return np.column_stack([mesh.panel_id, p.real, p.imag, mesh.normal.real, mesh.normal.imag,
                            mesh.curvature, mesh.weight, mesh.jac, s])
