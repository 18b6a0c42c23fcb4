"""Tangencies of the f-foliation with closed curves, curve indices, and
the internal-tangency-count sweep over growing radii.

A tangency parameter is a zero of cross(X_f(c(theta)), c'(theta)); it is
classified internal/external by tracing a short leaf arc through the
tangency and testing which side of the curve it lies on.  The curve index
is the winding number of X_f along the curve, an exact integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ._parallel import parallel_map
from .curves import ClosedCurve, circle, star_curve
from .errors import (
    DegenerateTangencyError,
    PreconditionError,
    StepResolutionError,
    VanishingFieldError,
)
from .field import VectorField
from .foliation import LeafTraceControls, Window, _scalar_and_grad, _trace_direction

DENSE_SAMPLES = 2 ** 14
ANGLE_TOL = 1e-10
PARAM_TOL = 1e-12
JITTER_AMPLITUDE = 1e-3
JITTER_RETRIES = 8


@dataclass(frozen=True)
class TangencyPoint:
    theta: float
    position: tuple[float, float]
    klass: str  # internal | external | degenerate

    def to_dict(self) -> dict:
        return {"theta": self.theta, "x": self.position[0], "y": self.position[1],
                "class": self.klass}


@dataclass
class TangencyReport:
    curve: ClosedCurve
    points: list[TangencyPoint]
    n_ext: int
    n_int: int
    index_formula: float
    index_winding: int
    formula_holds: bool
    general_position: bool
    extremes_external: bool
    jitter_applied: int
    detail: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_ext": self.n_ext,
            "n_int": self.n_int,
            "index_formula": self.index_formula,
            "index_winding": self.index_winding,
            "formula_holds": self.formula_holds,
            "general_position": self.general_position,
            "extremes_external": self.extremes_external,
            "jitter_applied": self.jitter_applied,
            "points": [p.to_dict() for p in self.points],
        }


def _hamiltonian_on_curve(field: VectorField, curve: ClosedCurve, theta: np.ndarray):
    pts = curve.point(theta)
    hx, hy = field.hamiltonian_array(pts[..., 0], pts[..., 1], "f")
    return pts, np.stack([hx, hy], axis=-1)


def _cross_on_curve(field: VectorField, curve: ClosedCurve, theta: np.ndarray) -> np.ndarray:
    _, ham = _hamiltonian_on_curve(field, curve, theta)
    tan = curve.tangent(theta)
    return ham[..., 0] * tan[..., 1] - ham[..., 1] * tan[..., 0]


def _check_curve_domain(field: VectorField, curve: ClosedCurve) -> None:
    theta = np.linspace(0.0, 2.0 * np.pi, 1024, endpoint=False)
    pts = curve.point(theta)
    if np.min(np.hypot(pts[:, 0], pts[:, 1])) <= field.sigma:
        raise PreconditionError("curve must lie strictly outside the sigma disk")


def find_tangencies(field: VectorField, curve: ClosedCurve,
                    n_samples: int = DENSE_SAMPLES) -> list[TangencyPoint]:
    """Locate and classify all tangencies of the f-foliation with the curve."""
    _check_curve_domain(field, curve)
    theta = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    pts, ham = _hamiltonian_on_curve(field, curve, theta)
    tan = curve.tangent(theta)
    cr = ham[:, 0] * tan[:, 1] - ham[:, 1] * tan[:, 0]

    speed = np.hypot(ham[:, 0], ham[:, 1])
    scale = float(np.max(speed))
    if float(np.min(speed)) < 1e-9 * max(scale, 1.0):
        raise VanishingFieldError("X_f vanishes (or nearly) on the curve")

    cr_scale = float(np.max(np.abs(cr))) or 1.0
    zeros: list[float] = []
    sign = np.sign(np.where(cr == 0.0, 1e-300, cr))
    flips = np.flatnonzero(sign != np.roll(sign, -1))
    for k in flips:
        a = theta[k]
        b = theta[(k + 1) % n_samples] if k + 1 < n_samples else 2.0 * np.pi
        zeros.append(_bisect_zero(field, curve, a, b))

    # Grazing (no sign change) near-zeros are degenerate contacts.
    local_min = (np.abs(cr) < 1e-10 * cr_scale)
    graze = local_min & (sign == np.roll(sign, -1)) & (sign == np.roll(sign, 1))
    if np.any(graze):
        k = int(np.flatnonzero(graze)[0])
        raise DegenerateTangencyError(
            f"grazing contact near theta={theta[k]:.6f} (no transversal sign change)")

    out = []
    for th in zeros:
        pos = curve.point(np.asarray(th))
        klass = _classify_tangency(field, curve, float(th))
        if klass == "degenerate":
            raise DegenerateTangencyError(
                f"leaf crosses the curve at tangency theta={th:.9f}")
        out.append(TangencyPoint(theta=float(th), position=(float(pos[0]), float(pos[1])),
                                 klass=klass))
    out.sort(key=lambda t: t.theta)
    return out


def _bisect_zero(field: VectorField, curve: ClosedCurve, a: float, b: float) -> float:
    fa = float(_cross_on_curve(field, curve, np.asarray(a)))
    for _ in range(80):
        if b - a <= PARAM_TOL:
            break
        m = 0.5 * (a + b)
        fm = float(_cross_on_curve(field, curve, np.asarray(m)))
        if fm == 0.0:
            return m
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _classify_tangency(field: VectorField, curve: ClosedCurve, th: float) -> str:
    z = np.asarray(curve.point(np.asarray(th)), dtype=float)
    probe_len = 3e-2 * curve.radius
    value, _ = _scalar_and_grad(field, "f")
    c = float(value(z[0], z[1]))
    for attempt in range(2):
        sides = []
        ctrl = LeafTraceControls(ds=probe_len / 12.0, max_steps=12, stop_at_sigma=False)
        for sign in (+1.0, -1.0):
            pts, _, _ = _trace_direction(field, z, "f", c, sign, ctrl)
            if not pts:
                return "degenerate"
            arr = np.asarray(pts)
            exc = curve.radial_excess(arr)
            k = int(np.argmax(np.abs(exc)))
            if abs(exc[k]) < 1e-12 * (1.0 + curve.radius):
                sides.append(0.0)
            else:
                sides.append(float(np.sign(exc[k])))
        if 0.0 in sides:
            probe_len *= 4.0
            continue
        if sides[0] != sides[1]:
            return "degenerate"
        return "external" if sides[0] > 0 else "internal"
    return "degenerate"


def curve_index(field: VectorField, curve: ClosedCurve, n_samples: int = 4096) -> int:
    """Winding number of X_f along the curve (exact integer)."""
    _check_curve_domain(field, curve)
    for n in (n_samples, 4 * n_samples):
        theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        _, ham = _hamiltonian_on_curve(field, curve, theta)
        if np.min(np.hypot(ham[:, 0], ham[:, 1])) < 1e-12:
            raise VanishingFieldError("X_f vanishes on the curve")
        ang = np.arctan2(ham[:, 1], ham[:, 0])
        d = np.diff(np.append(ang, ang[0]))
        d = (d + np.pi) % (2.0 * np.pi) - np.pi
        if np.max(np.abs(d)) < 0.5 * np.pi:
            total = float(np.sum(d) / (2.0 * np.pi))
            idx = int(np.round(total))
            if abs(total - idx) > 0.05:
                raise StepResolutionError(f"winding sum {total} far from an integer")
            return idx
    raise StepResolutionError("angle increment reached pi/2 even after refinement")


def tangency_report(field: VectorField, curve: ClosedCurve,
                    rng_seed: int = 0) -> TangencyReport:
    """Tangency counts, both index computations, and general-position flags.

    Degenerate contacts are resolved by retrying on a star-shaped jitter of
    the curve (amplitude 1e-3 * radius, up to 8 retries).
    """
    rng = np.random.default_rng(rng_seed)
    cur = curve
    jitter = 0
    last_err: Exception | None = None
    for attempt in range(1 + JITTER_RETRIES):
        try:
            points = find_tangencies(field, cur)
            break
        except DegenerateTangencyError as err:
            last_err = err
            jitter += 1
            cur = _jittered(curve, rng)
    else:
        raise DegenerateTangencyError(
            f"degenerate tangencies persist after {JITTER_RETRIES} jitters: {last_err}")

    n_ext = sum(1 for p in points if p.klass == "external")
    n_int = sum(1 for p in points if p.klass == "internal")
    formula = (2.0 - n_ext + n_int) / 2.0
    winding = curve_index(field, cur)
    gp, gp_detail = _general_position(field, cur, points)
    extremes = _extremes_external(field, cur, points)
    return TangencyReport(
        curve=cur, points=points, n_ext=n_ext, n_int=n_int,
        index_formula=formula, index_winding=winding,
        formula_holds=(formula == float(winding)),
        general_position=gp and extremes,
        extremes_external=extremes,
        jitter_applied=jitter,
        detail=gp_detail,
    )


def _jittered(curve: ClosedCurve, rng: np.random.Generator) -> ClosedCurve:
    pert = star_curve(curve.radius, rng, order=4, amplitude=JITTER_AMPLITUDE,
                      center=curve.center)
    return pert


def _general_position(field: VectorField, curve: ClosedCurve,
                      points: list[TangencyPoint]) -> tuple[bool, dict]:
    """Finite tangency set, none degenerate, and no single leaf tangent at
    two of the detected points (confirmed by tracing between equal-level
    tangencies for a finite length budget)."""
    detail: dict = {"leaf_trace_pairs": 0}
    if any(p.klass == "degenerate" for p in points):
        return False, detail
    if not points:
        return True, detail
    value, _ = _scalar_and_grad(field, "f")
    pos = np.asarray([p.position for p in points])
    f_vals = np.asarray(value(pos[:, 0], pos[:, 1]), float)
    diameter = 2.0 * curve.max_radius()
    tol_same_leaf = 1e-2 * curve.radius
    budget = 6.0 * diameter
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if abs(f_vals[i] - f_vals[j]) > 1e-6 * (1.0 + abs(f_vals[i])):
                continue  # different levels: certainly different leaves
            detail["leaf_trace_pairs"] += 1
            box = 1.4 * curve.max_radius()
            cx, cy = curve.center
            win = Window(cx - box, cx + box, cy - box, cy + box)
            ctrl = LeafTraceControls(max_steps=2000, max_length=budget,
                                     ds=0.03, window=win)
            reached = False
            for sign in (+1.0, -1.0):
                pts, _, _ = _trace_direction(field, pos[i], "f", float(f_vals[i]), sign, ctrl)
                if pts:
                    arr = np.asarray(pts)
                    d = np.min(np.hypot(arr[:, 0] - pos[j, 0], arr[:, 1] - pos[j, 1]))
                    if d < tol_same_leaf:
                        reached = True
                        break
            if reached:
                detail["same_leaf_pair"] = [int(i), int(j)]
                return False, detail
    return True, detail


def _extremes_external(field: VectorField, curve: ClosedCurve,
                       points: list[TangencyPoint]) -> bool:
    """The two tangencies realizing min and max of f on the curve must be
    external and distinct."""
    if len(points) < 2:
        return False
    theta = np.linspace(0.0, 2.0 * np.pi, 8192, endpoint=False)
    pts = curve.point(theta)
    value, _ = _scalar_and_grad(field, "f")
    f_vals = np.asarray(value(pts[:, 0], pts[:, 1]), float)
    th_min = float(theta[np.argmin(f_vals)])
    th_max = float(theta[np.argmax(f_vals)])
    if _angdist(th_min, th_max) < 1e-3:
        return False
    ok = True
    for th in (th_min, th_max):
        nearest = min(points, key=lambda p: _angdist(p.theta, th))
        ok &= _angdist(nearest.theta, th) < 0.05 and nearest.klass == "external"
    return ok


def _angdist(a: float, b: float) -> float:
    d = abs(a - b) % (2.0 * np.pi)
    return min(d, 2.0 * np.pi - d)


# ----------------------------------------------------------------------
# internal-tangency sweep


@dataclass
class EtaSweepEntry:
    radius: float
    n_int_min: int
    n_ext_at_min: int
    per_curve: list[dict]


@dataclass
class EtaSweepResult:
    entries: list[EtaSweepEntry]
    nondecreasing: bool
    rng_seed: int
    note: str = ("minima are upper bounds for the true minimum over all "
                 "general-position curves; the family is finite")

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"radius": e.radius, "n_int_min": e.n_int_min,
                 "n_ext_at_min": e.n_ext_at_min, "curves": e.per_curve}
                for e in self.entries
            ],
            "nondecreasing": self.nondecreasing,
            "rng_seed": self.rng_seed,
            "note": self.note,
        }


def eta_sweep(field: VectorField, radii, n_star: int = 32, rng_seed: int = 0,
              amplitude: float = 0.08, order: int = 4) -> EtaSweepResult:
    """Minimize the internal tangency count over a finite curve family at
    each radius.  The same perturbation shapes are reused across radii
    (scaled proportionally), so minima are comparable rung to rung.
    """
    radii = [float(r) for r in radii]
    if any(r < field.sigma for r in radii):
        raise PreconditionError("all radii must be >= sigma")
    if sorted(radii) != radii:
        raise PreconditionError("radii must be increasing")
    rng = np.random.default_rng(rng_seed)
    shapes = []
    for _ in range(n_star):
        probe = star_curve(1.0, rng, order=order, amplitude=amplitude, keep_enclosing=True)
        shapes.append((probe.radius, probe.cos_coeffs, probe.sin_coeffs))

    def run_radius(r: float) -> EtaSweepEntry:
        family = [circle(r)]
        for lift, a, b in shapes:
            family.append(ClosedCurve(radius=r * lift, cos_coeffs=a, sin_coeffs=b,
                                      encloses=r))
        per_curve = []
        best = None
        for k, cur in enumerate(family):
            try:
                rep = tangency_report(field, cur, rng_seed=rng_seed + k)
            except (DegenerateTangencyError, VanishingFieldError, StepResolutionError) as err:
                per_curve.append({"curve": k, "failed": str(err)})
                continue
            per_curve.append({"curve": k, "n_int": rep.n_int, "n_ext": rep.n_ext,
                              "general_position": rep.general_position})
            if rep.general_position and (best is None or rep.n_int < best.n_int):
                best = rep
        if best is None:
            raise DegenerateTangencyError(f"no general-position curve found at radius {r}")
        return EtaSweepEntry(radius=r, n_int_min=best.n_int, n_ext_at_min=best.n_ext,
                             per_curve=per_curve)

    entries = parallel_map(run_radius, radii)
    minima = [e.n_int_min for e in entries]
    nondec = all(minima[i] <= minima[i + 1] for i in range(len(minima) - 1))
    return EtaSweepResult(entries=entries, nondecreasing=nondec, rng_seed=rng_seed)
