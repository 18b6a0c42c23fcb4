"""Attractor/repellor classification of the point at infinity.

Evidence assembled per verdict: a ladder of closed curves transversal to
X + v with strictly one-signed normal component, unanimous escape of a
seed batch integrated from the outermost curve (forward for an attractor,
backward for a repellor), absence of periodic returns, and agreement of
the verdict with the sign of the index at infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .curves import ClosedCurve, circle, star_curve
from .errors import SearchFailureError
from .field import VectorField
from .flow import EscapeLadder, FlowControls, classify_limit, integrate_batch
from .index_infinity import IndexControls, IndexEstimate, compute_index

ZERO_MARGIN_SCALE = 1e-4      # relative to the annulus inner radius
TRANSVERSALITY_SCALE = 1e-6   # relative to 1 + max |X+v| on the curve
DEFAULT_RADII_FACTORS = (1.3, 1.6, 2.0, 2.5)
INDEX_SIGN_TOL = 1e-6


def _shifted(field: VectorField, v: np.ndarray) -> VectorField:
    vx, vy = float(v[0]), float(v[1])
    if vx == 0.0 and vy == 0.0:
        return field
    base_f, base_g = field.f, field.g
    return VectorField(
        name=f"{field.name}+v({vx:g},{vy:g})",
        sigma=field.sigma,
        f=lambda x, y: base_f(x, y) + vx,
        g=lambda x, y: base_g(x, y) + vy,
        fx=field.fx, fy=field.fy, gx=field.gx, gy=field.gy,
        jacobian_mode=field.jacobian_mode,
        meta={"translation_of": field.name, "v": [vx, vy]},
    )


@dataclass(frozen=True)
class TranslationControls:
    inner_factor: float = 1.1   # annulus starts at inner_factor * sigma
    outer_factor: float = 20.0
    radii: int = 48
    angles: int = 192
    grid_half_width: int = 2
    grid_step_factor: float = 0.75


def _min_field_norm(field: VectorField, v: np.ndarray, r_in: float, r_out: float,
                    n_r: int, n_t: int) -> float:
    rr = np.geomspace(r_in, r_out, n_r)
    tt = np.linspace(0.0, 2.0 * np.pi, n_t, endpoint=False)
    r, t = np.meshgrid(rr, tt, indexing="ij")
    x = (r * np.cos(t)).ravel()
    y = (r * np.sin(t)).ravel()
    fv, gv = field.eval_raw(x, y)
    return float(np.min(np.hypot(fv + v[0], gv + v[1])))


def choose_translation(field: VectorField, controls: TranslationControls | None = None) -> np.ndarray:
    """Find v such that X + v clears a zero margin on the sampled annulus.

    v = 0 is preferred; otherwise a small grid around minus the mean of X
    over the inner circle is searched.  The margin is scale-anchored to
    the annulus inner radius.
    """
    ctrl = controls or TranslationControls()
    r_in = ctrl.inner_factor * max(field.sigma, 1e-6)
    r_out = ctrl.outer_factor * max(field.sigma, 1e-6)
    margin = ZERO_MARGIN_SCALE * r_in

    if _min_field_norm(field, np.zeros(2), r_in, r_out, ctrl.radii, ctrl.angles) > margin:
        return np.zeros(2)

    theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    fv, gv = field.eval_raw(r_in * np.cos(theta), r_in * np.sin(theta))
    base = -np.array([float(np.mean(fv)), float(np.mean(gv))])
    scale = max(float(np.mean(np.hypot(fv, gv))), r_in)
    offsets = []
    w = ctrl.grid_half_width
    for i in range(-w, w + 1):
        for j in range(-w, w + 1):
            offsets.append((np.hypot(i, j), i, j))
    offsets.sort()
    for _, i, j in offsets:
        v = base + ctrl.grid_step_factor * scale * np.array([i, j], dtype=float)
        if _min_field_norm(field, v, r_in, r_out, ctrl.radii, ctrl.angles) > margin:
            return v
    raise SearchFailureError("no translation v cleared the zero margin on the annulus")


@dataclass
class RungResult:
    radius: float
    curve: ClosedCurve | None
    min_normal: float          # min |<X+v, n>| over samples (sign-definite only)
    sign: int                  # +1 outward, -1 inward, 0 failed
    margin: float
    accepted: bool
    search_used: bool

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "accepted": self.accepted,
            "sign": self.sign,
            "min_normal_component": self.min_normal,
            "margin": self.margin,
            "star_search_used": self.search_used,
            "curve": None if self.curve is None else {
                "radius": self.curve.radius,
                "cos_coeffs": list(self.curve.cos_coeffs),
                "sin_coeffs": list(self.curve.sin_coeffs),
            },
        }


@dataclass
class TransversalLadder:
    v: tuple[float, float]
    rungs: list[RungResult]

    @property
    def accepted(self) -> list[RungResult]:
        return [r for r in self.rungs if r.accepted]

    @property
    def signs_coherent(self) -> bool:
        signs = {r.sign for r in self.accepted}
        return len(signs) == 1

    def to_dict(self) -> dict:
        return {"v": list(self.v), "rungs": [r.to_dict() for r in self.rungs],
                "signs_coherent": self.signs_coherent}


def _normal_profile(field_v: VectorField, curve: ClosedCurve, n: int = 4096):
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = curve.point(theta)
    fv, gv = field_v.eval_raw(pts[:, 0], pts[:, 1])
    nrm = curve.outward_normal(theta)
    inner = fv * nrm[:, 0] + gv * nrm[:, 1]
    speed = np.hypot(fv, gv)
    return inner, float(np.max(speed))


def _test_curve(field_v: VectorField, curve: ClosedCurve) -> tuple[bool, float, int, float]:
    inner, max_speed = _normal_profile(field_v, curve)
    margin = TRANSVERSALITY_SCALE * (1.0 + max_speed)
    if np.all(inner > margin):
        return True, float(np.min(inner)), +1, margin
    if np.all(inner < -margin):
        return True, float(np.min(-inner)), -1, margin
    return False, float(np.min(np.abs(inner))), 0, margin


def find_transversal_ladder(field: VectorField, v, radii,
                            star_iterations: int = 200, star_order: int = 4,
                            rng_seed: int = 0) -> TransversalLadder:
    """Test round circles first; on failure, hill-climb star-shaped curves
    to maximize the worst signed normal component.  Failed rungs are
    recorded, not hidden."""
    v = np.asarray(v, dtype=float)
    field_v = _shifted(field, v)
    rng = np.random.default_rng(rng_seed)
    rungs: list[RungResult] = []
    for radius in radii:
        cur = circle(float(radius))
        ok, mn, sign, margin = _test_curve(field_v, cur)
        used_search = False
        if not ok:
            used_search = True
            best_curve, best_score = cur, -np.inf
            for _ in range(star_iterations):
                trial = star_curve(float(radius), rng, order=star_order,
                                   amplitude=0.12, keep_enclosing=True)
                inner, _ = _normal_profile(field_v, trial, n=1024)
                score = max(float(np.min(inner)), float(np.min(-inner)))
                if score > best_score:
                    best_curve, best_score = trial, score
            cur = best_curve
            ok, mn, sign, margin = _test_curve(field_v, cur)
        rungs.append(RungResult(radius=float(radius), curve=cur, min_normal=mn,
                                sign=sign, margin=margin, accepted=ok,
                                search_used=used_search))
    return TransversalLadder(v=(float(v[0]), float(v[1])), rungs=rungs)


@dataclass
class InfinityVerdict:
    verdict: str                       # attractor | repellor | inconclusive
    v: tuple[float, float]
    ladder: TransversalLadder
    escape_stats: dict
    periodicity_flag: bool
    index: IndexEstimate | None
    index_sign_consistent: bool | None
    detail: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "v": list(self.v),
            "ladder": self.ladder.to_dict(),
            "escape_stats": self.escape_stats,
            "periodicity_flag": self.periodicity_flag,
            "index": None if self.index is None else self.index.to_dict(),
            "index_sign_consistent": self.index_sign_consistent,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class InfinityControls:
    radii_factors: tuple[float, ...] = DEFAULT_RADII_FACTORS
    n_seeds: int = 64
    t_max: float = 30000.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    # Escape ladder relative to the seed radius; factors kept close to 1 so
    # slow spirals (radial speed decaying like 1/r^3) stay desk-checkable.
    escape_start: float = 1.02
    escape_factor: float = 1.15
    escape_rungs: int = 5
    periodic_return_tol: float = 1e-6
    compute_index_estimate: bool = True
    rng_seed: int = 0


def classify_infinity(field: VectorField, controls: InfinityControls | None = None) -> InfinityVerdict:
    """Classify infinity for X + v with v from the translation search.

    attractor: every sampled trajectory from the outermost transversal
    curve escapes forward; repellor: every one escapes backward.  Any
    mixed outcome is reported as inconclusive, never majority-voted.
    """
    ctrl = controls or InfinityControls()
    v = choose_translation(field)
    radii = [fac * max(field.sigma, 1e-6) for fac in ctrl.radii_factors]
    ladder = find_transversal_ladder(field, v, radii, rng_seed=ctrl.rng_seed)
    field_v = _shifted(field, v)

    accepted = ladder.accepted
    detail: dict = {"radii": radii}
    if not accepted:
        return InfinityVerdict(
            verdict="inconclusive", v=ladder.v, ladder=ladder,
            escape_stats={"forward_escape_fraction": 0.0, "backward_escape_fraction": 0.0,
                          "n_seeds": 0},
            periodicity_flag=False, index=None, index_sign_consistent=None,
            detail={**detail, "reason": "no transversal rung accepted"},
        )

    outer = accepted[-1]
    theta = np.linspace(0.0, 2.0 * np.pi, ctrl.n_seeds, endpoint=False)
    seeds = outer.curve.point(theta)
    r_seed = float(np.max(np.hypot(seeds[:, 0], seeds[:, 1])))
    escape = EscapeLadder(r0=ctrl.escape_start * r_seed, factor=ctrl.escape_factor,
                          rungs=ctrl.escape_rungs)
    r_top = float(escape.thresholds()[-1])
    flow_ctrl = FlowControls(rel_tol=ctrl.rel_tol, abs_tol=ctrl.abs_tol,
                             t_max=ctrl.t_max, r_max=r_top * 1.0001)

    fractions = {}
    periodic = False
    verdicts = {}
    for direction in ("forward", "backward"):
        trajs = integrate_batch(field_v, seeds, direction, flow_ctrl)
        kinds = [classify_limit(t, escape).kind for t in trajs]
        fractions[direction] = sum(1 for k in kinds if k == "goes_to_infinity") / len(kinds)
        verdicts[direction] = kinds
        for t in trajs:
            if _periodic_return(t, ctrl.periodic_return_tol, radii[0]):
                periodic = True

    stats = {
        "forward_escape_fraction": fractions["forward"],
        "backward_escape_fraction": fractions["backward"],
        "n_seeds": ctrl.n_seeds,
        "forward_kinds": _tally(verdicts["forward"]),
        "backward_kinds": _tally(verdicts["backward"]),
    }

    if fractions["forward"] == 1.0 and fractions["backward"] < 1.0 and not periodic:
        verdict = "attractor"
    elif fractions["backward"] == 1.0 and fractions["forward"] < 1.0 and not periodic:
        verdict = "repellor"
    else:
        verdict = "inconclusive"

    index = None
    consistent = None
    if ctrl.compute_index_estimate:
        index = compute_index(field, IndexControls())
        if verdict in ("attractor", "repellor") and not np.isnan(index.value):
            # nonnegative index (within tolerance) pairs with attractor,
            # negative with repellor
            nonneg = index.value >= -INDEX_SIGN_TOL
            consistent = (verdict == "attractor") == nonneg

    detail["outer_curve_sign"] = outer.sign
    detail["sign_matches_verdict"] = (
        (verdict == "attractor" and outer.sign == +1)
        or (verdict == "repellor" and outer.sign == -1)
        or verdict == "inconclusive"
    )
    return InfinityVerdict(
        verdict=verdict, v=ladder.v, ladder=ladder, escape_stats=stats,
        periodicity_flag=periodic, index=index, index_sign_consistent=consistent,
        detail=detail,
    )


def _tally(kinds: list[str]) -> dict:
    out: dict[str, int] = {}
    for k in kinds:
        out[k] = out.get(k, 0) + 1
    return dict(sorted(out.items()))


def _periodic_return(traj, tol_scale: float, min_radius: float) -> bool:
    """Closest-return test: did the orbit come back near its start after
    leaving, while staying outside the ladder's innermost curve?"""
    pts = traj.points
    if pts.shape[0] < 8:
        return False
    seed = pts[0]
    d = np.hypot(pts[:, 0] - seed[0], pts[:, 1] - seed[1])
    scale = 1.0 + float(np.hypot(seed[0], seed[1]))
    left = np.flatnonzero(d > 0.05 * scale)
    if left.size == 0:
        return False
    after = d[left[0]:]
    radii = np.hypot(pts[left[0]:, 0], pts[left[0]:, 1])
    near = (after < tol_scale * scale) & (radii > min_radius)
    return bool(np.any(near))
