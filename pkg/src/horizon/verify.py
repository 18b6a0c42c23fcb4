"""Numerical verification of arc-level identities and inequalities, plus
injectivity scans of the restriction outside a disk.

Orientation convention used throughout: an f-leaf arc is traversed in the
direction of (-f_y, f_x), along which g increases.  The gradient of f is
the 90-degree clockwise rotation of the motion, so for a region bounded
below by a horizontal baseline and above by the arc, the outward normal
on the arc is -grad f/|grad f| when the arc moves rightward and
+grad f/|grad f| when it moves leftward.  All boundary formulas below
carry that direction sign explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import OrderingError, PreconditionError, RegionConstructionError
from .field import VectorField
from .foliation import LeafArc, trace_forward_batch

IDENTITY_TOL = 1e-6
NUMERICAL_SLACK = 1e-8
COLLISION_TOL_SCALE = 1e-9
SEPARATION_FLOOR = 1e-3


# ----------------------------------------------------------------------
# arc bookkeeping


@dataclass
class MonotoneArc:
    """A leaf sub-arc with strictly monotone horizontal projection,
    traversed in the oriented (g-increasing) direction."""

    points: np.ndarray   # (n, 2), dense
    level: float
    direction: int       # +1 rightward (x increasing), -1 leftward

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def span(self) -> float:
        return abs(float(self.points[-1, 0] - self.points[0, 0]))

    @property
    def x_interval(self) -> tuple[float, float]:
        xs = self.points[:, 0]
        return float(xs.min()), float(xs.max())


def monotone_arc_from_leaf(arc: LeafArc) -> MonotoneArc:
    """Interpret a traced LeafArc as a monotone arc; reject mixed directions."""
    pts = arc.points
    dx = np.diff(pts[:, 0])
    tol = 1e-14 * (1.0 + np.max(np.abs(pts[:, 0])))
    has_pos = bool(np.any(dx > tol))
    has_neg = bool(np.any(dx < -tol))
    if has_pos and has_neg:
        raise OrderingError("arc is not monotone in the horizontal projection")
    direction = 1 if has_pos else (-1 if has_neg else 0)
    return MonotoneArc(points=pts, level=arc.level, direction=direction or 1)


def sample_monotone_arcs(field: VectorField, n_arcs: int, annulus: tuple[float, float],
                         rng_seed: int = 0, min_span: float = 0.5,
                         n_steps: int = 1500, ds_scale: float = 2e-3,
                         max_batches: int = 30) -> list[MonotoneArc]:
    """Trace forward leaf arcs from random annulus seeds and keep the
    maximal prefix on which the horizontal projection is strictly monotone
    and stays right of the vertical axis."""
    rng = np.random.default_rng(rng_seed)
    out: list[MonotoneArc] = []
    r0, r1 = annulus
    for _ in range(max_batches):
        if len(out) >= n_arcs:
            break
        m = max(2 * (n_arcs - len(out)), 16)
        rr = np.sqrt(rng.uniform(r0 ** 2, r1 ** 2, m))
        th = rng.uniform(0.0, 2.0 * np.pi, m)
        seeds = np.column_stack([rr * np.cos(th), rr * np.sin(th)])
        pts, lengths = trace_forward_batch(field, seeds, "f", +1.0, ds_scale, n_steps)
        for i in range(m):
            if len(out) >= n_arcs:
                break
            arc = _monotone_prefix(pts[: lengths[i], i, :], field.sigma)
            if arc is None or arc.span < min_span:
                continue
            val = field.f(arc.points[:, 0], arc.points[:, 1])
            out.append(MonotoneArc(points=arc.points, level=float(np.mean(val)),
                                   direction=arc.direction))
    return out


def _monotone_prefix(pts: np.ndarray, sigma: float) -> MonotoneArc | None:
    if pts.shape[0] < 8:
        return None
    dx = np.diff(pts[:, 0])
    tol = 1e-14 * (1.0 + np.max(np.abs(pts[:, 0])))
    sgn0 = 0
    cut = pts.shape[0]
    for k, d in enumerate(dx):
        s = 1 if d > tol else (-1 if d < -tol else 0)
        if s == 0:
            continue
        if sgn0 == 0:
            sgn0 = s
        elif s != sgn0:
            cut = k + 1
            break
    sub = pts[:cut]
    if sub.shape[0] < 8 or sgn0 == 0:
        return None
    if float(np.min(sub[:, 0])) <= sigma:
        return None  # projection must stay in (sigma, +inf)
    return MonotoneArc(points=sub, level=0.0, direction=sgn0)


# ----------------------------------------------------------------------
# quadrature helpers


def _arc_time_integrals(field: VectorField, pts: np.ndarray, level: float):
    """Trapezoid integrals along the arc against the leaf-time element
    dt = ds / |grad f|.  Returns dict of the integrals used by the checks."""
    x, y = pts[:, 0], pts[:, 1]
    fx, fy, _, _ = field.jacobian_array(x, y)
    fv, gv = field.eval_raw(x, y)
    grad_norm = np.hypot(fx, fy)
    if np.any(grad_norm < 1e-12):
        raise PreconditionError("gradient vanishes along the arc")
    seg = np.hypot(np.diff(x), np.diff(y))

    def integrate(w):
        wt = w / grad_norm
        return float(np.sum(0.5 * (wt[:-1] + wt[1:]) * seg))

    inner_x_gradf = fv * fx + gv * fy            # <X, grad f>
    f_minus_c = fv - level
    return {
        "int_X_gradf_dt": integrate(inner_x_gradf),
        "int_fx_dt": integrate(fx),
        "int_F_gradf_dt": integrate(f_minus_c * fx + gv * fy),
        "delta_y": float(y[-1] - y[0]),
        "arc_length": float(np.sum(seg)),
    }


def _gauss_panels(a: float, b: float, panels: int = 64, order: int = 8):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    return xs, ws


# ----------------------------------------------------------------------
# reports


@dataclass
class ArcIntegralReport:
    check: str           # green_identity | flux_inequality
    variant: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    detail: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.check, "variant": self.variant, "lhs": self.lhs,
                "rhs": self.rhs, "slack": self.slack, "passed": self.passed,
                "detail": self.detail}


# ----------------------------------------------------------------------
# vertical ray check


@dataclass
class RayCheckEntry:
    seed: tuple[float, float]
    crossings_up_forward: int
    crossings_down_backward: int
    min_ray_distance: float
    passed: bool


@dataclass
class RayCheckReport:
    entries: list[RayCheckEntry]
    passed: bool
    note: str = "positive half-leaf vs upward ray; negative half-leaf vs downward ray"

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_seeds": len(self.entries),
            "total_crossings": sum(e.crossings_up_forward + e.crossings_down_backward
                                   for e in self.entries),
            "min_ray_distance": min((e.min_ray_distance for e in self.entries),
                                    default=float("inf")),
            "note": self.note,
        }


def vertical_ray_check(field: VectorField, seeds, n_steps: int = 2500,
                       ds_scale: float = 2e-3) -> RayCheckReport:
    """For each seed p = (a, c): the forward half-leaf must meet the upward
    ray {(a, y): y >= c} only at p, and the backward half-leaf must meet the
    downward ray only at p."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    fwd, fwd_len = trace_forward_batch(field, seeds, "f", +1.0, ds_scale, n_steps)
    bwd, bwd_len = trace_forward_batch(field, seeds, "f", -1.0, ds_scale, n_steps)
    entries = []
    for i in range(seeds.shape[0]):
        a, c = float(seeds[i, 0]), float(seeds[i, 1])
        scale = 1.0 + float(np.hypot(a, c))
        excl = 1e-2 * scale
        up = _ray_crossings(fwd[: fwd_len[i], i, :], a, c, +1, excl)
        dn = _ray_crossings(bwd[: bwd_len[i], i, :], a, c, -1, excl)
        dist = min(up[1], dn[1])
        entries.append(RayCheckEntry(seed=(a, c), crossings_up_forward=up[0],
                                     crossings_down_backward=dn[0],
                                     min_ray_distance=dist,
                                     passed=(up[0] == 0 and dn[0] == 0)))
    return RayCheckReport(entries=entries, passed=all(e.passed for e in entries))


def _ray_crossings(pts: np.ndarray, a: float, c: float, up: int,
                   excl: float) -> tuple[int, float]:
    if pts.shape[0] < 2:
        return 0, float("inf")
    x, y = pts[:, 0], pts[:, 1]
    far = np.hypot(x - a, y - c) > excl
    s = x - a
    prod = s[:-1] * s[1:]
    w = np.where(np.abs(s[:-1] - s[1:]) > 0, s[:-1] / (s[:-1] - s[1:]), 0.0)
    y_cross = y[:-1] + w * (y[1:] - y[:-1])
    on_ray = (y_cross >= c) if up > 0 else (y_cross <= c)
    crossing = (prod < 0) & on_ray & far[:-1] & far[1:]
    n = int(np.sum(crossing))
    if up > 0:
        dist = np.hypot(s, np.maximum(0.0, c - y))
    else:
        dist = np.hypot(s, np.maximum(0.0, y - c))
    dist = dist[far]
    return n, (float(np.min(dist)) if dist.size else float("inf"))


# ----------------------------------------------------------------------
# Green identity on the region bounded by an arc, two verticals, a baseline


def green_identity_check(field: VectorField, arc: LeafArc | MonotoneArc,
                         baseline: float, identity_tol: float = IDENTITY_TOL,
                         x_panels: int = 96, y_order: int = 16) -> ArcIntegralReport:
    """Compare the area integral of g_y over the region bounded by the arc,
    two vertical segments and a horizontal baseline against its boundary
    decomposition (vertical segments contribute exactly zero)."""
    marc = arc if isinstance(arc, MonotoneArc) else monotone_arc_from_leaf(arc)
    pts = marc.points
    a, b = marc.x_interval
    if b - a < 1e-12 * (1.0 + abs(a)):
        # Degenerate vertical leaf: zero-width region, both sides vanish.
        return ArcIntegralReport(check="green_identity", variant="degenerate",
                                 lhs=0.0, rhs=0.0, slack=0.0, passed=True,
                                 detail={"span": 0.0})
    if a <= field.sigma:
        raise RegionConstructionError(
            f"strip [{a:.3g}, {b:.3g}] must lie right of x = sigma = {field.sigma:g}")
    y_min = float(np.min(pts[:, 1]))
    if baseline >= y_min:
        raise RegionConstructionError("baseline must lie strictly below the arc")

    level = float(np.mean(field.f(pts[:, 0], pts[:, 1])))
    xs, ws = _gauss_panels(a, b, x_panels)
    y_top = _leaf_height(field, pts, xs, level)

    # area form: inner Gauss quadrature of g_y on each vertical slice
    nodes, weights = np.polynomial.legendre.leggauss(y_order)
    mid = 0.5 * (y_top + baseline)
    half = 0.5 * (y_top - baseline)
    yy = mid[:, None] + half[:, None] * nodes[None, :]
    xx = np.broadcast_to(xs[:, None], yy.shape)
    _, _, _, gy = field.jacobian_array(xx.ravel(), yy.ravel())
    inner = np.sum(gy.reshape(yy.shape) * weights[None, :], axis=1) * half
    area_form = float(np.sum(inner * ws))

    # boundary form: -dir * arc term - baseline term
    ints = _arc_time_integrals(field, pts, level)
    arc_term = ints["int_F_gradf_dt"]
    g_base = field.g(xs, np.full_like(xs, baseline))
    baseline_term = float(np.sum(g_base * ws))
    boundary_form = -marc.direction * arc_term - baseline_term

    slack = area_form - boundary_form
    tol = identity_tol * (1.0 + abs(area_form))
    return ArcIntegralReport(
        check="green_identity", variant="standard",
        lhs=area_form, rhs=boundary_form, slack=slack,
        passed=abs(slack) <= tol,
        detail={"arc_term": arc_term, "baseline_term": baseline_term,
                "vertical_terms": 0.0, "x_interval": [a, b],
                "baseline": baseline, "direction": marc.direction,
                "tolerance": tol},
    )


def _leaf_height(field: VectorField, pts: np.ndarray, xs: np.ndarray,
                 level: float) -> np.ndarray:
    """Height of the graph-like arc at the given abscissas: linear
    interpolation refined by a vertical Newton iteration on {f = level}."""
    order = np.argsort(pts[:, 0])
    px = pts[order, 0]
    py = pts[order, 1]
    y = np.interp(xs, px, py)
    for _ in range(4):
        fv = field.f(xs, y)
        _, fy, _, _ = field.jacobian_array(xs, y)
        fy = np.where(np.abs(fy) < 1e-12, np.sign(fy) * 1e-12 + 1e-30, fy)
        y = y - (fv - level) / fy
    return y


# ----------------------------------------------------------------------
# flux inequalities along oriented arcs


def flux_inequality_check(field: VectorField, arc: LeafArc | MonotoneArc,
                          variant: str, numerical_slack: float = NUMERICAL_SLACK
                          ) -> ArcIntegralReport:
    """Arc-flux inequality for fields with no nonnegative real eigenvalues.

    positive variant (arc moves rightward, start p, end q, Pi(p) < Pi(q)):
        int <X, grad f> dt  <=  f(p) * int f_x dt - g(p) * (Pi(q) - Pi(p))
    negative variant (arc moves leftward, Pi(q) < Pi(p)):
        int <X, grad f> dt  >=  f(q) * int f_x dt + g(p) * (Pi(p) - Pi(q))

    Both follow from the Green decomposition of the region between the arc
    and a low horizontal baseline; the direction of traversal decides which
    side of the arc the outward normal lies on, hence the inequality sense.
    """
    if variant not in ("positive", "negative"):
        raise PreconditionError("variant must be 'positive' or 'negative'")
    marc = arc if isinstance(arc, MonotoneArc) else monotone_arc_from_leaf(arc)
    pts = marc.points
    a, bx = marc.x_interval
    if a <= field.sigma:
        raise OrderingError("arc projection must lie in (sigma, +inf)")
    span = bx - a
    _check_no_nonneg_real_on_arc(field, pts)

    degenerate = span <= 1e-12 * (1.0 + abs(a))
    if variant == "positive" and marc.direction < 0 and not degenerate:
        raise OrderingError("positive variant requires Pi(start) < Pi(end)")
    if variant == "negative" and marc.direction > 0 and not degenerate:
        raise OrderingError("negative variant requires Pi(end) < Pi(start)")

    level = float(np.mean(field.f(pts[:, 0], pts[:, 1])))
    ints = _arc_time_integrals(field, pts, level)
    lhs = ints["int_X_gradf_dt"]
    f_start = float(field.f(pts[0, 0], pts[0, 1]))
    f_end = float(field.f(pts[-1, 0], pts[-1, 1]))
    g_start = float(field.g(pts[0, 0], pts[0, 1]))

    if variant == "positive":
        rhs = f_start * ints["int_fx_dt"] - g_start * span
        slack = rhs - lhs
    else:
        rhs = f_end * ints["int_fx_dt"] + g_start * span
        slack = lhs - rhs

    tol = numerical_slack * (1.0 + abs(lhs))
    quad_check = abs(ints["int_fx_dt"] - ints["delta_y"])
    return ArcIntegralReport(
        check="flux_inequality", variant=variant,
        lhs=lhs, rhs=rhs, slack=slack, passed=slack >= -tol,
        detail={"span": span, "degenerate": degenerate,
                "arc_length": ints["arc_length"],
                "int_fx_dt": ints["int_fx_dt"],
                "int_fx_dt_vs_delta_y": quad_check,
                "tolerance": tol},
    )


def _check_no_nonneg_real_on_arc(field: VectorField, pts: np.ndarray) -> None:
    fx, fy, gx, gy = field.jacobian_array(pts[:, 0], pts[:, 1])
    t = fx + gy
    d = fx * gy - fy * gx
    disc = t * t - 4.0 * d
    top = np.where(disc >= 0, (t + np.sqrt(np.abs(disc))) / 2.0, -1.0)
    if np.any(top >= 0.0):
        raise PreconditionError(
            "field has a nonnegative real eigenvalue on the arc; "
            "the flux inequalities do not apply")


# ----------------------------------------------------------------------
# injectivity scan


@dataclass
class InjectivityScanReport:
    s: float
    r_max: float
    pairs_tested: int
    hash_samples: int
    collision_tol: float
    collisions: list[dict]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "s": self.s, "r_max": self.r_max,
            "pairs_tested": self.pairs_tested,
            "hash_samples": self.hash_samples,
            "collision_tol": self.collision_tol,
            "n_collisions": len(self.collisions),
            "collisions": self.collisions[:32],
            "passed": self.passed,
        }


def injectivity_scan(field: VectorField, s: float, n_pairs: int = 100_000,
                     rng_seed: int = 0, r_max: float | None = None,
                     hash_samples: int = 1_000_000) -> InjectivityScanReport:
    """Random point pairs plus an image hash grid looking for distinct
    points with (near-)equal images on the annulus [s, r_max]."""
    if s < field.sigma:
        raise PreconditionError(f"s = {s} must be >= sigma = {field.sigma}")
    r_max = r_max if r_max is not None else 16.0 * s
    rng = np.random.default_rng(rng_seed)

    def sample(n):
        rr = np.sqrt(rng.uniform(s ** 2, r_max ** 2, n))
        th = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.column_stack([rr * np.cos(th), rr * np.sin(th)])

    pts = sample(hash_samples)
    fv, gv = field.eval_raw(pts[:, 0], pts[:, 1])
    img = np.column_stack([fv, gv])
    image_scale = float(np.percentile(np.hypot(fv, gv), 95))
    tol = COLLISION_TOL_SCALE * (1.0 + image_scale)

    collisions: dict[tuple[int, int], dict] = {}

    def check_pairs(i_idx, j_idx):
        di = np.hypot(img[i_idx, 0] - img[j_idx, 0], img[i_idx, 1] - img[j_idx, 1])
        dz = np.hypot(pts[i_idx, 0] - pts[j_idx, 0], pts[i_idx, 1] - pts[j_idx, 1])
        hit = (di <= tol) & (dz > SEPARATION_FLOOR)
        for k in np.flatnonzero(hit):
            key = (min(int(i_idx[k]), int(j_idx[k])), max(int(i_idx[k]), int(j_idx[k])))
            collisions[key] = {
                "p": pts[i_idx[k]].tolist(), "q": pts[j_idx[k]].tolist(),
                "image_distance": float(di[k]), "point_distance": float(dz[k]),
            }

    # hash grid with four shifted quantizations: any two images within
    # tol/2 share a cell in at least one grid
    cell = max(4.0 * tol, 1e-300)
    for ox, oy in ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)):
        q = np.floor(img / cell + np.array([ox, oy])).astype(np.int64)
        _, inverse, counts = np.unique(q, axis=0, return_inverse=True, return_counts=True)
        multi = np.flatnonzero(counts > 1)
        if multi.size == 0:
            continue
        order = np.argsort(inverse, kind="stable")
        sorted_inv = inverse[order]
        boundaries = np.searchsorted(sorted_inv, multi)
        for bidx, cell_id in zip(boundaries, multi):
            group = order[bidx: bidx + counts[cell_id]]
            if group.size > 64:
                group = group[:64]
            ii, jj = np.triu_indices(group.size, k=1)
            check_pairs(group[ii], group[jj])

    # plain random pairing
    i_idx = rng.integers(0, hash_samples, n_pairs)
    j_idx = rng.integers(0, hash_samples, n_pairs)
    check_pairs(i_idx, j_idx)

    coll = sorted(collisions.values(), key=lambda c: c["image_distance"])
    return InjectivityScanReport(
        s=float(s), r_max=float(r_max), pairs_tested=int(n_pairs),
        hash_samples=int(hash_samples), collision_tol=tol,
        collisions=coll, passed=not coll,
    )
