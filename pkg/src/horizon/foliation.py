"""Level-set foliations: leaf tracing, level topology, half-Reeb detection.

Leaves of the first component f are traced with the tangent field
(-f_y, f_x), normalized for arc-length stepping, with a Newton projection
back onto the level set after every step.  Along an f-leaf the second
component g is strictly increasing (its derivative is det DX > 0), which
fixes the orientation.

Half-Reeb detection is a sound-but-incomplete witness heuristic: a level
set disconnected inside a half-plane-like subwindow bounded by a traced
leaf.  Absence of witnesses is reported as none_found, never as a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .errors import PreconditionError, VanishingGradientError
from .field import VectorField

GRAD_FLOOR = 1e-12
MONOTONICITY_TOL = 1e-10


def leaf_tol(level: float) -> float:
    return 1e-8 * (1.0 + abs(level))


# ----------------------------------------------------------------------
# geometry helpers


@dataclass(frozen=True)
class Window:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise PreconditionError("window must have positive extent")

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def scaled(self, factor: float) -> "Window":
        cx, cy = (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0
        hx, hy = factor * (self.x1 - self.x0) / 2.0, factor * (self.y1 - self.y0) / 2.0
        return Window(cx - hx, cx + hx, cy - hy, cy + hy)

    @property
    def diag(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)


@dataclass(frozen=True)
class GridSpec:
    nx: int = 241
    ny: int = 241


# ----------------------------------------------------------------------
# leaf tracing


@dataclass(frozen=True)
class LeafTraceControls:
    ds: float | None = None          # arc-length step; default scale-aware
    max_steps: int = 20000           # per direction
    max_length: float | None = None  # per direction
    window: Window | None = None
    stop_at_sigma: bool = True


@dataclass
class LeafArc:
    """Ordered polyline on one leaf, oriented so the transverse coordinate
    (g for f-leaves, f for g-leaves) increases."""

    component: str
    level: float
    points: np.ndarray          # (n, 2)
    transverse: np.ndarray      # g (resp. f) along the arc
    start_index: int            # position of the seed point
    residual_max: float
    termination: dict           # reasons per direction

    @property
    def orientation(self) -> str:
        return "g-increasing" if self.component == "f" else "f-increasing"

    def to_csv_rows(self):
        s = 0.0
        prev = None
        for i in range(self.points.shape[0]):
            p = self.points[i]
            if prev is not None:
                s += float(np.hypot(p[0] - prev[0], p[1] - prev[1]))
            prev = p
            yield (s, p[0], p[1], self.transverse[i])


def _scalar_and_grad(field: VectorField, component: str):
    if component == "f":
        def value(x, y):
            return field.f(np.asarray(x, float), np.asarray(y, float))

        def grad(x, y):
            fx, fy, _, _ = field.jacobian_array(x, y)
            return fx, fy
    elif component == "g":
        def value(x, y):
            return field.g(np.asarray(x, float), np.asarray(y, float))

        def grad(x, y):
            _, _, gx, gy = field.jacobian_array(x, y)
            return gx, gy
    else:
        raise PreconditionError(f"component must be 'f' or 'g', got {component!r}")
    return value, grad


def _transverse_fn(field: VectorField, component: str):
    return (lambda x, y: field.g(np.asarray(x, float), np.asarray(y, float))) if component == "f" \
        else (lambda x, y: field.f(np.asarray(x, float), np.asarray(y, float)))


def _unit_tangent(field: VectorField, component: str, p: np.ndarray, sign: float) -> np.ndarray:
    tx, ty = field.hamiltonian_array(p[0], p[1], component)
    n = float(np.hypot(tx, ty))
    if n < GRAD_FLOOR:
        raise VanishingGradientError(f"|grad| < {GRAD_FLOOR:g} at {p.tolist()}")
    return np.array([float(tx), float(ty)]) * (sign / n)


def _project_onto_level(value, grad, p: np.ndarray, c: float, tol: float) -> tuple[np.ndarray, float]:
    z = p.copy()
    res = float(value(z[0], z[1]) - c)
    for _ in range(3):
        if abs(res) <= 0.25 * tol:
            break
        gx, gy = grad(z[0], z[1])
        gx, gy = float(gx), float(gy)
        n2 = gx * gx + gy * gy
        if n2 < GRAD_FLOOR ** 2:
            raise VanishingGradientError(f"|grad| < {GRAD_FLOOR:g} during projection at {z.tolist()}")
        z = z - res * np.array([gx, gy]) / n2
        res = float(value(z[0], z[1]) - c)
    return z, res


def _trace_direction(field: VectorField, start: np.ndarray, component: str, c: float,
                     sign: float, ctrl: LeafTraceControls) -> tuple[list[np.ndarray], str, float]:
    value, grad = _scalar_and_grad(field, component)
    tol = leaf_tol(c)
    pts: list[np.ndarray] = []
    z = start.copy()
    ds0 = ctrl.ds if ctrl.ds is not None else 0.01
    ds = ds0 * max(1.0, float(np.hypot(z[0], z[1])))
    length = 0.0
    res_max = 0.0
    reason = "budget"
    for _ in range(ctrl.max_steps):
        if ctrl.max_length is not None and length >= ctrl.max_length:
            reason = "length"
            break
        k1 = _unit_tangent(field, component, z, sign)
        k2 = _unit_tangent(field, component, z + 0.5 * ds * k1, sign)
        k3 = _unit_tangent(field, component, z + 0.5 * ds * k2, sign)
        k4 = _unit_tangent(field, component, z + ds * k3, sign)
        step = ds * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        z_new, res = _project_onto_level(value, grad, z + step, c, tol)
        if abs(res) > tol:
            if ds > 1e-6 * max(1.0, float(np.hypot(z[0], z[1]))):
                ds *= 0.5
                continue
            reason = "projection_failure"
            break
        res_max = max(res_max, abs(res))
        pts.append(z_new)
        length += float(np.hypot(*(z_new - z)))
        z = z_new
        ds = min(ds * 1.25, ds0 * max(1.0, float(np.hypot(z[0], z[1]))))
        if ctrl.stop_at_sigma and field.sigma > 0 and np.hypot(z[0], z[1]) <= field.sigma:
            reason = "entered_inner_disk"
            break
        if ctrl.window is not None and not bool(ctrl.window.contains(z[0], z[1])):
            reason = "left_window"
            break
    return pts, reason, res_max


def trace_forward_batch(field: VectorField, seeds, component: str = "f",
                        sign: float = +1.0, ds_scale: float = 2e-3,
                        n_steps: int = 2000, sigma_stop: bool = True
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Trace many leaves at once with fixed arc-length substeps.

    Returns (points, lengths): points has shape (n_steps + 1, N, 2) with
    terminated trajectories frozen at their last valid point; lengths[i]
    is the number of valid points for seed i (including the seed).
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    n = seeds.shape[0]
    value, grad = _scalar_and_grad(field, component)
    levels = np.asarray(value(seeds[:, 0], seeds[:, 1]), float)
    tols = 1e-8 * (1.0 + np.abs(levels))

    pts = np.empty((n_steps + 1, n, 2))
    pts[0] = seeds
    lengths = np.ones(n, dtype=int)
    active = np.ones(n, dtype=bool)
    cur = seeds.copy()

    def tangents(p):
        fx, fy, gx, gy = field.jacobian_array(p[:, 0], p[:, 1])
        tx, ty = (-fy, fx) if component == "f" else (gy, -gx)
        nrm = np.hypot(tx, ty)
        bad = nrm < GRAD_FLOOR
        nrm = np.where(bad, 1.0, nrm)
        t = np.stack([tx / nrm, ty / nrm], axis=-1) * sign
        return t, bad

    last = 0
    for step in range(n_steps):
        if not np.any(active):
            break
        p = cur[active]
        ds = ds_scale * np.maximum(1.0, np.hypot(p[:, 0], p[:, 1]))[:, None]
        k1, b1 = tangents(p)
        k2, b2 = tangents(p + 0.5 * ds * k1)
        k3, b3 = tangents(p + 0.5 * ds * k2)
        k4, b4 = tangents(p + ds * k3)
        bad = b1 | b2 | b3 | b4
        nxt = p + ds * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        lv = levels[active]
        for _ in range(2):
            res = np.asarray(value(nxt[:, 0], nxt[:, 1]), float) - lv
            gx_, gy_ = grad(nxt[:, 0], nxt[:, 1])
            n2 = gx_ * gx_ + gy_ * gy_
            small = n2 < GRAD_FLOOR ** 2
            bad |= small
            n2 = np.where(small, 1.0, n2)
            nxt = nxt - (res / n2)[:, None] * np.stack([gx_, gy_], axis=-1)
        res = np.abs(np.asarray(value(nxt[:, 0], nxt[:, 1]), float) - lv)
        bad |= res > tols[active]
        if sigma_stop and field.sigma > 0:
            bad |= np.hypot(nxt[:, 0], nxt[:, 1]) <= field.sigma
        idx = np.flatnonzero(active)
        ok = idx[~bad]
        cur[ok] = nxt[~bad]
        pts[step + 1] = cur
        lengths[ok] += 1
        active[idx[bad]] = False
        last = step + 1
    pts[last + 1:] = cur  # freeze any rows left after early termination
    return pts, lengths


def trace_leaf(field: VectorField, start, component: str = "f",
               controls: LeafTraceControls | None = None) -> LeafArc:
    """Trace the leaf through ``start`` both ways and orient it so the
    transverse coordinate increases."""
    ctrl = controls or LeafTraceControls()
    start = np.asarray(start, dtype=float)
    if np.hypot(start[0], start[1]) <= field.sigma:
        raise PreconditionError("leaf start must lie strictly outside the sigma disk")
    value, _ = _scalar_and_grad(field, component)
    c = float(value(start[0], start[1]))

    fwd, fwd_reason, r1 = _trace_direction(field, start, component, c, +1.0, ctrl)
    bwd, bwd_reason, r2 = _trace_direction(field, start, component, c, -1.0, ctrl)
    pts = list(reversed(bwd)) + [start] + fwd
    arr = np.asarray(pts)
    trans = _transverse_fn(field, component)(arr[:, 0], arr[:, 1])
    return LeafArc(
        component=component,
        level=c,
        points=arr,
        transverse=np.asarray(trans, float),
        start_index=len(bwd),
        residual_max=max(r1, r2),
        termination={"forward": fwd_reason, "backward": bwd_reason},
    )


# ----------------------------------------------------------------------
# level-set scan (marching cells)


@dataclass
class LevelComponent:
    points: np.ndarray
    closed: bool
    bbox: tuple[float, float, float, float]
    touches_window: bool
    min_abs_z: float

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])


@dataclass
class LevelSetScan:
    window: Window
    level: float
    components: list[LevelComponent]
    cell_size: tuple[float, float]

    @property
    def n_components(self) -> int:
        return len(self.components)


def level_components(field: VectorField, level: float, window: Window,
                     grid: GridSpec | None = None, component: str = "f",
                     mask_fn=None) -> LevelSetScan:
    """Extract the connected pieces of {h = level} inside a window.

    Sign-change cells are contoured with linear edge interpolation and
    chained through shared edge crossings; cells with any corner inside
    the sigma disk (or excluded by ``mask_fn``) are skipped.
    """
    grid = grid or GridSpec()
    value, _ = _scalar_and_grad(field, component)
    xs = np.linspace(window.x0, window.x1, grid.nx)
    ys = np.linspace(window.y0, window.y1, grid.ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vals = np.asarray(value(xx, yy), dtype=float) - level

    valid = np.isfinite(vals)
    if field.sigma > 0:
        valid &= np.hypot(xx, yy) >= field.sigma
    if mask_fn is not None:
        valid &= np.asarray(mask_fn(xx, yy), dtype=bool)

    eps = 1e-12 * (1.0 + abs(level))
    vals = np.where(vals == 0.0, eps, vals)
    pos = vals > 0.0

    cell_ok = valid[:-1, :-1] & valid[1:, :-1] & valid[1:, 1:] & valid[:-1, 1:]
    pb = pos[:-1, :-1]
    pbr = pos[1:, :-1]
    ptr = pos[1:, 1:]
    ptl = pos[:-1, 1:]
    crossing = cell_ok & ~((pb == pbr) & (pbr == ptr) & (ptr == ptl))
    cells = np.argwhere(crossing)

    dx = xs[1] - xs[0] if grid.nx > 1 else 0.0
    dy = ys[1] - ys[0] if grid.ny > 1 else 0.0

    def edge_point(kind: str, i: int, j: int) -> tuple[float, float]:
        if kind == "h":
            v0, v1 = vals[i, j], vals[i + 1, j]
            t = v0 / (v0 - v1)
            return (xs[i] + t * dx, ys[j])
        v0, v1 = vals[i, j], vals[i, j + 1]
        t = v0 / (v0 - v1)
        return (xs[i], ys[j] + t * dy)

    adjacency: dict[tuple, list[tuple]] = {}
    coords: dict[tuple, tuple[float, float]] = {}

    def add_segment(e1: tuple, e2: tuple) -> None:
        for e in (e1, e2):
            if e not in coords:
                coords[e] = edge_point(*e)
        adjacency.setdefault(e1, []).append(e2)
        adjacency.setdefault(e2, []).append(e1)

    for i, j in cells:
        b = ("h", i, j)
        t = ("h", i, j + 1)
        l = ("v", i, j)
        r = ("v", i + 1, j)
        cb = pb[i, j] != pbr[i, j]
        cr = pbr[i, j] != ptr[i, j]
        ct = ptl[i, j] != ptr[i, j]
        cl = pb[i, j] != ptl[i, j]
        active = [e for e, c_ in ((b, cb), (r, cr), (t, ct), (l, cl)) if c_]
        if len(active) == 2:
            add_segment(active[0], active[1])
        elif len(active) == 4:
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            center_pos = float(value(np.asarray(cx), np.asarray(cy))) - level > 0.0
            if center_pos == bool(pb[i, j]):
                add_segment(b, r)
                add_segment(t, l)
            else:
                add_segment(b, l)
                add_segment(t, r)

    # connected components over the crossing graph
    seen: set[tuple] = set()
    comps: list[LevelComponent] = []
    margin_x = 1.5 * dx
    margin_y = 1.5 * dy
    for node in coords:
        if node in seen:
            continue
        stack = [node]
        members = []
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            members.append(u)
            stack.extend(v for v in adjacency.get(u, []) if v not in seen)
        ordered = _order_polyline(members, adjacency)
        pts = np.asarray([coords[e] for e in ordered])
        closed = len(ordered) > 2 and ordered[0] in adjacency.get(ordered[-1], [])
        bbox = (float(pts[:, 0].min()), float(pts[:, 0].max()),
                float(pts[:, 1].min()), float(pts[:, 1].max()))
        touches = bool(
            np.any(pts[:, 0] <= window.x0 + margin_x) or np.any(pts[:, 0] >= window.x1 - margin_x)
            or np.any(pts[:, 1] <= window.y0 + margin_y) or np.any(pts[:, 1] >= window.y1 - margin_y)
        )
        comps.append(LevelComponent(
            points=pts, closed=closed, bbox=bbox, touches_window=touches,
            min_abs_z=float(np.min(np.hypot(pts[:, 0], pts[:, 1]))),
        ))
    comps.sort(key=lambda cmp: (-cmp.n_points, cmp.bbox))
    return LevelSetScan(window=window, level=level, components=comps, cell_size=(dx, dy))


def _order_polyline(members: list[tuple], adjacency: dict) -> list[tuple]:
    member_set = set(members)
    deg = {m: len(set(adjacency.get(m, [])) & member_set) for m in members}
    start = next((m for m in members if deg[m] == 1), members[0])
    ordered = [start]
    visited = {start}
    cur = start
    while True:
        nxt = next((v for v in adjacency.get(cur, []) if v in member_set and v not in visited), None)
        if nxt is None:
            break
        ordered.append(nxt)
        visited.add(nxt)
        cur = nxt
    if len(ordered) < len(members):  # branching (non-generic); append leftovers
        ordered.extend(m for m in members if m not in visited)
    return ordered


# ----------------------------------------------------------------------
# vertical convexity probe


@dataclass
class ConvexityProbe:
    convex: bool
    side: str
    levels_checked: list[float]
    witness_level: float | None = None
    witness_components: int = 0


def vertical_convexity_probe(field: VectorField, leaf: LeafArc, side: str,
                             window: Window, n_levels: int = 15,
                             grid: GridSpec | None = None) -> ConvexityProbe:
    """Check whether any level set on one side of a traced leaf is
    disconnected inside the window.

    The side {sign(h - level) = side} approximates the half plane bounded
    by the leaf; the approximation is exact when the leaf's full level set
    is connected in the window.
    """
    if side not in ("+", "-"):
        raise PreconditionError("side must be '+' or '-'")
    if leaf.component not in ("f", "g"):
        raise PreconditionError("leaf must come from component 'f' or 'g'")
    sgn = 1.0 if side == "+" else -1.0
    c0 = leaf.level
    value, _ = _scalar_and_grad(field, leaf.component)

    def mask_fn(x, y):
        return sgn * (np.asarray(value(x, y), float) - c0) > 0.0

    g = grid or GridSpec()
    xs = np.linspace(window.x0, window.x1, g.nx)
    ys = np.linspace(window.y0, window.y1, g.ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vv = np.asarray(value(xx, yy), float)
    ok = np.isfinite(vv) & (np.hypot(xx, yy) >= field.sigma) & (sgn * (vv - c0) > 0.0)
    if not np.any(ok):
        return ConvexityProbe(convex=True, side=side, levels_checked=[])
    qs = np.linspace(0.1, 0.9, n_levels)
    levels = sorted(set(float(v) for v in np.quantile(vv[ok], qs)))
    checked = []
    for lev in levels:
        if abs(lev - c0) < 1e-9 * (1.0 + abs(c0)):
            continue
        checked.append(lev)
        scan = level_components(field, lev, window, grid=g, component=leaf.component,
                                mask_fn=mask_fn)
        genuine = _drop_disk_artifacts(scan, field.sigma)
        if len(genuine) >= 2:
            return ConvexityProbe(convex=False, side=side, levels_checked=checked,
                                  witness_level=lev, witness_components=len(genuine))
    return ConvexityProbe(convex=True, side=side, levels_checked=checked)


def _drop_disk_artifacts(scan: LevelSetScan, sigma: float) -> list[LevelComponent]:
    """Drop component groups whose disconnection is caused by the removed
    inner disk: pieces that terminate on the disk boundary and face each
    other across it are one leaf cut by the hole, not a foliation feature."""
    if sigma <= 0:
        return list(scan.components)
    dx, dy = scan.cell_size
    margin = sigma + 2.0 * float(np.hypot(dx, dy))
    keep = []
    disk_cut = []
    for comp in scan.components:
        (disk_cut if comp.min_abs_z <= margin else keep).append(comp)
    # Pairs of disk-cut pieces are artifacts of the hole; a single disk-
    # touching piece is genuine enough to keep.
    if len(disk_cut) == 1:
        keep.extend(disk_cut)
    return keep


# ----------------------------------------------------------------------
# half-Reeb detection


@dataclass(frozen=True)
class HalfReebControls:
    n_levels: int = 21
    grid: GridSpec = dc_field(default_factory=lambda: GridSpec(201, 201))
    escalation_rounds: int = 3
    trace_budget: int = 6000
    min_separation_cells: float = 3.0


@dataclass
class HalfReebWitness:
    level: float
    window: tuple[float, float, float, float]
    edge_endpoints: tuple[tuple[float, float], tuple[float, float]]
    edge_kind: str               # dual-arc | segment
    boundedness: str             # bounded | unbounded | unknown
    bounding_leaf_level: float
    bounding_box: tuple[float, float, float, float]
    detail: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "witness_level": self.level,
            "witness_window": list(self.window),
            "compact_edge_endpoints": [list(self.edge_endpoints[0]), list(self.edge_endpoints[1])],
            "compact_edge_kind": self.edge_kind,
            "boundedness": self.boundedness,
            "bounding_leaf_level": self.bounding_leaf_level,
            "bounding_box": list(self.bounding_box),
            "detail": self.detail,
        }


@dataclass
class HalfReebReport:
    detected: list[HalfReebWitness]
    none_found: bool
    levels_scanned: int
    detail: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "detected": [w.to_dict() for w in self.detected],
            "none_found": self.none_found,
            "levels_scanned": self.levels_scanned,
            "detail": self.detail,
        }


def _closest_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    tree = cKDTree(b)
    dist, idx = tree.query(a)
    k = int(np.argmin(dist))
    return a[k], b[idx[k]], float(dist[k])


def _segment_crosses_polyline(p: np.ndarray, q: np.ndarray, poly: np.ndarray) -> bool:
    if poly.shape[0] < 2:
        return False
    a, b = poly[:-1], poly[1:]
    d1 = np.cross(q - p, a - p)
    d2 = np.cross(q - p, b - p)
    d3 = np.cross(b - a, p - a)
    d4 = np.cross(b - a, q - a)
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def _dual_probe(field: VectorField, a: np.ndarray, toward: np.ndarray, component: str,
                target: cKDTree | None, stop_window: Window, confine_window: Window,
                budget: int) -> dict:
    """Trace the dual foliation from ``a`` in the direction of ``toward``.

    The trace is judged on its prefix up to the closest approach to the
    target component (its reconvergence point): once past that point the
    arc has left the structure under test, so later behavior is ignored.
    """
    dual = "g" if component == "f" else "f"
    try:
        t0 = _unit_tangent(field, dual, a, +1.0)
    except VanishingGradientError:
        return {"outcome": "vanishing", "closest": np.inf, "end": a.tolist()}
    sign = 1.0 if float(np.dot(t0, toward - a)) >= 0.0 else -1.0
    ctrl = LeafTraceControls(max_steps=budget, window=stop_window, ds=0.004)
    try:
        pts, reason, _ = _trace_direction(field, a, dual,
                                          float(_scalar_and_grad(field, dual)[0](a[0], a[1])),
                                          sign, ctrl)
    except VanishingGradientError:
        return {"outcome": "vanishing", "closest": np.inf, "end": a.tolist()}
    if not pts:
        return {"outcome": "stalled", "closest": np.inf, "end": a.tolist()}
    arr = np.asarray(pts)
    closest = np.inf
    close_pt = arr[-1]
    k = arr.shape[0] - 1
    if target is not None:
        dists, _ = target.query(arr)
        k = int(np.argmin(dists))
        closest = float(dists[k])
        close_pt = arr[k]
    prefix = arr[: k + 1]
    prefix_inside = bool(np.all(confine_window.contains(prefix[:, 0], prefix[:, 1])))
    min_at_end = k >= arr.shape[0] - 2
    if reason == "entered_inner_disk" and prefix_inside:
        outcome = "confined"
    elif not min_at_end and prefix_inside:
        outcome = "confined"  # reconverged toward the target inside the box
    elif reason == "left_window":
        outcome = "escaped"
    else:
        outcome = "stalled"
    return {"outcome": outcome, "closest": closest, "end": arr[-1].tolist(),
            "closest_point": close_pt, "n_points": int(arr.shape[0]),
            "trace_reason": reason}


def _find_bounding_leaf(field: VectorField, component: str, window: Window,
                        c_target: float, p: np.ndarray, q: np.ndarray,
                        vals_range: tuple[float, float]) -> tuple[LeafArc | None, float]:
    """Trace a leaf at a level distinct from the witness level such that
    the witness bridge does not cross it: the leaf bounds a half-plane-like
    subwindow containing both witness components."""
    value, _ = _scalar_and_grad(field, component)
    lo, hi = vals_range
    span = hi - lo if hi > lo else 1.0
    cx, cy = window.center
    corners = [(window.x0, window.y0), (window.x1, window.y0),
               (window.x1, window.y1), (window.x0, window.y1)]
    for delta in (0.3 * span, -0.3 * span, 0.15 * span, -0.15 * span):
        c0 = c_target + delta
        if not (lo < c0 < hi) or abs(c0 - c_target) < 1e-9 * (1.0 + abs(c_target)):
            continue
        for corner in corners:
            ts = np.linspace(0.05, 0.98, 160)
            px = cx + ts * (corner[0] - cx)
            py = cy + ts * (corner[1] - cy)
            ok = np.hypot(px, py) > field.sigma * 1.05
            if not np.any(ok):
                continue
            vv = np.asarray(value(px, py), float) - c0
            vv[~ok] = np.nan
            sgn = np.sign(vv)
            flips = np.flatnonzero(np.diff(sgn) != 0)
            flips = [k for k in flips if np.isfinite(vv[k]) and np.isfinite(vv[k + 1])]
            if not flips:
                continue
            k = flips[0]
            w = vv[k] / (vv[k] - vv[k + 1])
            start = np.array([px[k] + w * (px[k + 1] - px[k]),
                              py[k] + w * (py[k + 1] - py[k])])
            try:
                arc = trace_leaf(field, start, component,
                                 LeafTraceControls(max_steps=4000, window=window, ds=0.01))
            except VanishingGradientError:
                continue
            if arc.points.shape[0] < 8:
                continue
            if not _segment_crosses_polyline(p, q, arc.points):
                return arc, c0
    return None, float("nan")


def detect_half_reeb(field: VectorField, component: str = "f",
                     search_window: Window | None = None,
                     controls: HalfReebControls | None = None) -> HalfReebReport:
    """Scan a grid of levels for half-Reeb witnesses and classify each
    witness as bounded / unbounded / unknown by window escalation."""
    ctrl = controls or HalfReebControls()
    if search_window is None:
        r = 20.0 * max(field.sigma, 1.0)
        search_window = Window(-r, r, -r, r)
    value, _ = _scalar_and_grad(field, component)

    xs = np.linspace(search_window.x0, search_window.x1, ctrl.grid.nx)
    ys = np.linspace(search_window.y0, search_window.y1, ctrl.grid.ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vv = np.asarray(value(xx, yy), float)
    ok = np.isfinite(vv) & (np.hypot(xx, yy) >= field.sigma)
    if not np.any(ok):
        return HalfReebReport(detected=[], none_found=True, levels_scanned=0)
    qs = np.linspace(0.05, 0.95, ctrl.n_levels)
    levels = sorted(set(float(v) for v in np.quantile(vv[ok], qs)))
    lo, hi = float(np.min(vv[ok])), float(np.max(vv[ok]))

    cell = float(np.hypot(xs[1] - xs[0], ys[1] - ys[0])) if ctrl.grid.nx > 1 else 1.0
    candidates = []
    for lev in levels:
        scan = level_components(field, lev, search_window, grid=ctrl.grid, component=component)
        genuine = _drop_disk_artifacts(scan, field.sigma)
        genuine = [cmp for cmp in genuine if cmp.n_points >= 4]
        if len(genuine) < 2:
            continue
        for i in range(len(genuine)):
            for j in range(i + 1, len(genuine)):
                p, q, dist = _closest_pair(genuine[i].points, genuine[j].points)
                if dist < ctrl.min_separation_cells * cell:
                    continue  # likely one curve split by grid resolution
                candidates.append({"level": lev, "p": p, "q": q, "dist": dist,
                                   "comp_i": genuine[i], "comp_j": genuine[j]})

    clusters = _cluster_witnesses(candidates, search_window)
    detected: list[HalfReebWitness] = []
    skipped = 0
    for group in clusters:
        cand = group[len(group) // 2]  # median-level representative
        arc, c0 = _find_bounding_leaf(field, component, search_window, cand["level"],
                                      cand["p"], cand["q"], (lo, hi))
        if arc is None:
            skipped += 1
            continue
        witness = _classify_witness(field, component, cand, search_window, ctrl, c0)
        if witness is not None:
            detected.append(witness)
    detected.sort(key=lambda w: w.level)
    return HalfReebReport(
        detected=detected,
        none_found=not detected,
        levels_scanned=len(levels),
        detail={"candidate_levels": len({c['level'] for c in candidates}),
                "clusters": len(clusters), "skipped_no_bounding_leaf": skipped},
    )


def _cluster_witnesses(candidates: list[dict], window: Window) -> list[list[dict]]:
    """Group witnesses whose bridges sit at the same place with the same
    direction; each group is one geometric feature seen at many levels."""
    radius = 0.15 * window.diag
    clusters: list[dict] = []
    for cand in sorted(candidates, key=lambda c: c["level"]):
        mid = (cand["p"] + cand["q"]) / 2.0
        d = cand["q"] - cand["p"]
        n = np.linalg.norm(d)
        direction = d / n if n > 0 else np.array([1.0, 0.0])
        placed = False
        for cl in clusters:
            if np.linalg.norm(mid - cl["mid"]) <= radius and abs(float(np.dot(direction, cl["dir"]))) >= 0.7:
                cl["members"].append(cand)
                placed = True
                break
        if not placed:
            clusters.append({"mid": mid, "dir": direction, "members": [cand]})
    return [cl["members"] for cl in clusters]


def _classify_witness(field: VectorField, component: str, cand: dict,
                      window: Window, ctrl: HalfReebControls, c0: float) -> HalfReebWitness | None:
    lev = cand["level"]
    p, q = cand["p"], cand["q"]
    big = window.scaled(2.0 ** (ctrl.escalation_rounds - 1))

    # persistence + pinned bridge across escalated windows
    pinned = True
    persists = True
    mid0 = (p + q) / 2.0
    for r in range(1, ctrl.escalation_rounds):
        wr = window.scaled(2.0 ** r)
        scan = level_components(field, lev, wr, grid=ctrl.grid, component=component)
        genuine = _drop_disk_artifacts(scan, field.sigma)
        comp_p = _component_containing(genuine, p, scan)
        comp_q = _component_containing(genuine, q, scan)
        if comp_p is None or comp_q is None:
            persists = False
            break
        if comp_p is comp_q:
            return None  # pieces merge in the larger window: window artifact
        pr, qr, _ = _closest_pair(comp_p.points, comp_q.points)
        if np.linalg.norm((pr + qr) / 2.0 - mid0) > 0.25 * window.diag:
            pinned = False

    tree_q = cKDTree(cand["comp_j"].points)
    tree_p = cKDTree(cand["comp_i"].points)
    confine = window.scaled(1.25)
    probe_pq = _dual_probe(field, p, q, component, tree_q, big, confine, ctrl.trace_budget)
    probe_qp = _dual_probe(field, q, p, component, tree_p, big, confine, ctrl.trace_budget)

    cell = float(np.hypot(*_cell_of(window, ctrl.grid)))
    edge_kind = "segment"
    endpoint_q = q
    if probe_pq["closest"] < 2.0 * cell and "closest_point" in probe_pq:
        edge_kind = "dual-arc"
        endpoint_q = np.asarray(probe_pq["closest_point"], float)

    confined = {"confined", "stalled"}
    both_confined = probe_pq["outcome"] in confined and probe_qp["outcome"] in confined
    escaped = probe_pq["outcome"] == "escaped" or probe_qp["outcome"] == "escaped"
    if persists and pinned and both_confined:
        bounded = "bounded"
    elif persists and escaped:
        bounded = "unbounded"
    else:
        bounded = "unknown"

    bi, bj = cand["comp_i"].bbox, cand["comp_j"].bbox
    bbox = (min(bi[0], bj[0]), max(bi[1], bj[1]), min(bi[2], bj[2]), max(bi[3], bj[3]))
    return HalfReebWitness(
        level=lev,
        window=window.as_tuple(),
        edge_endpoints=((float(p[0]), float(p[1])), (float(endpoint_q[0]), float(endpoint_q[1]))),
        edge_kind=edge_kind,
        boundedness=bounded,
        bounding_leaf_level=c0,
        bounding_box=bbox,
        detail={
            "bridge_length": cand["dist"],
            "persists": persists,
            "bridge_pinned": pinned,
            "edge_probe_outcomes": [probe_pq["outcome"], probe_qp["outcome"]],
        },
    )


def _component_containing(comps: list[LevelComponent], pt: np.ndarray,
                          scan: LevelSetScan) -> LevelComponent | None:
    tol = 3.0 * float(np.hypot(*scan.cell_size))
    best = None
    best_d = tol
    for comp in comps:
        d = float(np.min(np.hypot(comp.points[:, 0] - pt[0], comp.points[:, 1] - pt[1])))
        if d < best_d:
            best, best_d = comp, d
    return best


def _cell_of(window: Window, grid: GridSpec) -> tuple[float, float]:
    return ((window.x1 - window.x0) / max(grid.nx - 1, 1),
            (window.y1 - window.y0) / max(grid.ny - 1, 1))
