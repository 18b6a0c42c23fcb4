"""Index of a field at infinity via boundary flux on a geometric radius ladder.

The field is blended with a linear interior model across a C^1 radial ramp
on [s, 2s] to obtain a globally defined extension.  By the divergence
theorem the area integral of the extension's Jacobian trace over the disk
of radius R equals the outward boundary flux through the circle of radius
R, so the index is evaluated as the flux limit along the ladder, with an
independent polar-grid area quadrature as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ._parallel import parallel_map
from .errors import BlendSeamError, InconsistencyError, PreconditionError
from .field import VectorField

CIRCLE_SAMPLES = 4096
LADDER_RUNGS = 13  # radii 4*sigma * 2**k, k = 0..12
SEAM_FD_STEP = 1e-6
SEAM_TOL = 1e-4


def _smoothstep(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C^1 ramp on [0,1] with zero slope at both ends; returns (value, slope)."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u)


@dataclass(frozen=True)
class ExtensionBlend:
    """Global field equal to X for |z| >= 2s and to -scale*z for |z| <= s."""

    base: VectorField
    s: float
    interior_scale: float
    blended: VectorField

    @property
    def outer(self) -> float:
        return 2.0 * self.s

    def trace_array(self, x, y) -> np.ndarray:
        fx, _, _, gy = self.blended.jacobian_array(x, y)
        return fx + gy

    def seam_jacobian_discrepancy(self, h: float = SEAM_FD_STEP, n: int = 64) -> float:
        """Max jump of the finite-difference Jacobian across both seams."""
        worst = 0.0
        for r0 in (self.s, self.outer):
            theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
            for side in (-2.0 * h, 2.0 * h):
                x = (r0 + side) * np.cos(theta)
                y = (r0 + side) * np.sin(theta)
                jin = np.stack(self.blended.jacobian_array(x, y, mode="fd"))
                x2 = r0 * np.cos(theta)
                y2 = r0 * np.sin(theta)
                jat = np.stack(self.blended.jacobian_array(x2, y2, mode="fd"))
                worst = max(worst, float(np.max(np.abs(jin - jat))) / (1.0 + float(np.max(np.abs(jat)))))
        return worst

    def min_seam_det(self, n_r: int = 24, n_theta: int = 128) -> float:
        rr = np.linspace(self.s, self.outer, n_r)
        tt = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
        r, t = np.meshgrid(rr, tt, indexing="ij")
        x = (r * np.cos(t)).ravel()
        y = (r * np.sin(t)).ravel()
        fx, fy, gx, gy = self.blended.jacobian_array(x, y)
        return float(np.min(fx * gy - fy * gx))


def _make_blend(field: VectorField, s: float, interior_scale: float) -> VectorField:
    lam = float(interior_scale)

    def split(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        r = np.hypot(x, y)
        u = (r - s) / s
        beta, dbeta = _smoothstep(u)
        dbeta = np.where((r <= s) | (r >= 2.0 * s), 0.0, dbeta / s)  # d beta / d r
        return x, y, r, beta, dbeta

    def clamp_outward(x, y, r):
        # Base formulas are only trusted for r >= s >= sigma; where beta = 0
        # their value is multiplied by zero, so evaluate them on the circle
        # r = s instead of at interior points that may be singular.
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(r >= s, 1.0, s / np.where(r == 0.0, 1.0, r))
        xs = np.where(r == 0.0, s, x * fac)
        ys = np.where(r == 0.0, 0.0, y * fac)
        return xs, ys

    def f(x, y):
        x, y, r, beta, _ = split(x, y)
        fv, _ = field.eval_raw(*clamp_outward(x, y, r))
        return (1.0 - beta) * (-lam * x) + beta * fv

    def g(x, y):
        x, y, r, beta, _ = split(x, y)
        _, gv = field.eval_raw(*clamp_outward(x, y, r))
        return (1.0 - beta) * (-lam * y) + beta * gv

    def partials(x, y):
        x, y, r, beta, dbeta = split(x, y)
        xs, ys = clamp_outward(x, y, r)
        fv, gv = field.eval_raw(xs, ys)
        bfx, bfy, bgx, bgy = field.jacobian_array(xs, ys)
        with np.errstate(invalid="ignore", divide="ignore"):
            nx = np.where(r > 0, x / r, 0.0)
            ny = np.where(r > 0, y / r, 0.0)
        dfx = (1.0 - beta) * (-lam) + beta * bfx + dbeta * nx * (fv + lam * x)
        dfy = beta * bfy + dbeta * ny * (fv + lam * x)
        dgx = beta * bgx + dbeta * nx * (gv + lam * y)
        dgy = (1.0 - beta) * (-lam) + beta * bgy + dbeta * ny * (gv + lam * y)
        return dfx, dfy, dgx, dgy

    return VectorField(
        name=f"{field.name}+blend(s={s:g},scale={lam:g})",
        sigma=0.0,
        f=f, g=g,
        fx=lambda x, y: partials(x, y)[0],
        fy=lambda x, y: partials(x, y)[1],
        gx=lambda x, y: partials(x, y)[2],
        gy=lambda x, y: partials(x, y)[3],
        jacobian_mode="analytic",
        meta={"blend_of": field.name, "s": s, "interior_scale": lam},
    )


AUTO_SCALES = (1.0, 0.5, 0.25, 0.1, 2.0, 4.0)


def build_extension(field: VectorField, s: float, interior_scale: float | None = None,
                    max_doublings: int = 3, require_positive_det: bool = False) -> ExtensionBlend:
    """Blend the field with the interior model -scale*z across [s, 2s].

    When no scale is given, a fixed candidate list is tried and the first
    scale keeping the blend determinant positive on the seam annulus wins
    (falling back to the best achieved).  The trace integral that defines
    the index does not need a positive determinant, so a failed
    determinant is recorded as a diagnostic; with ``require_positive_det``
    the search instead doubles s (up to ``max_doublings``) and then raises.
    """
    if s < field.sigma:
        raise PreconditionError(f"blend radius s={s} must be >= sigma={field.sigma}")
    scales = AUTO_SCALES if interior_scale is None else (float(interior_scale),)
    s_try = float(s)
    best: ExtensionBlend | None = None
    best_det = -np.inf
    for _ in range(max_doublings + 1):
        for lam in scales:
            blend = ExtensionBlend(base=field, s=s_try, interior_scale=lam,
                                   blended=_make_blend(field, s_try, lam))
            det = blend.min_seam_det()
            if det > 0.0:
                return blend
            if det > best_det:
                best, best_det = blend, det
        if not require_positive_det:
            break
        s_try *= 2.0
    if require_positive_det:
        raise BlendSeamError(
            f"blend determinant not positive on the seam for s up to {s_try / 2:g}")
    return best


@dataclass
class IndexEstimate:
    value: float            # finite, +inf, -inf, or nan when unreliable
    classification: str     # finite | minus_infinity | plus_infinity | unreliable
    radii: list[float]
    flux: list[float]
    interior_contribution: float
    area_flux_max_rel_discrepancy: float
    reliable: bool
    diagnostics: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        from .reporting import encode_float
        return {
            "value": encode_float(self.value),
            "classification": self.classification,
            "radii": self.radii,
            "flux": self.flux,
            "interior_contribution": self.interior_contribution,
            "area_flux_max_rel_discrepancy": self.area_flux_max_rel_discrepancy,
            "reliable": self.reliable,
            "diagnostics": {k: encode_float(v) if isinstance(v, float) else v
                            for k, v in self.diagnostics.items()},
        }


@dataclass(frozen=True)
class IndexControls:
    s: float | None = None
    rungs: int = LADDER_RUNGS
    base_factor: float = 4.0        # first rung at base_factor * sigma
    growth: float = 2.0
    circle_samples: int = CIRCLE_SAMPLES
    tol: float = 1e-6
    interior_scale: float | None = None  # None: auto-select for seam regularity
    area_check: bool = True
    radial_nodes: int = 48
    angular_nodes: int = 256


def _circle_flux(field: VectorField, radius: float, n: int) -> float:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    x = radius * np.cos(theta)
    y = radius * np.sin(theta)
    fv, gv = field.eval_raw(x, y)
    normal = (fv * np.cos(theta) + gv * np.sin(theta))
    return float(np.mean(normal) * 2.0 * np.pi * radius)


def _annulus_trace_integral(blend: ExtensionBlend, r0: float, r1: float,
                            n_r: int, n_t: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r1 - r0) * nodes + 0.5 * (r1 + r0)
    wr = 0.5 * (r1 - r0) * weights
    theta = np.linspace(0.0, 2.0 * np.pi, n_t, endpoint=False)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    x = rr * np.cos(tt)
    y = rr * np.sin(tt)
    tr = blend.trace_array(x.ravel(), y.ravel()).reshape(rr.shape)
    ang_mean = np.mean(tr, axis=1) * 2.0 * np.pi
    return float(np.sum(wr * r * ang_mean))


def compute_index(field: VectorField, controls: IndexControls | None = None) -> IndexEstimate:
    """Evaluate the index at infinity on a geometric radius ladder.

    Classification: the flux sequence is declared finite when its
    successive differences are Cauchy; otherwise a power-law fit of
    |flux| against R over the last rungs with a consistent sign yields
    +/- infinity; anything else is unreliable.
    """
    ctrl = controls or IndexControls()
    s = ctrl.s if ctrl.s is not None else max(field.sigma, 1e-6)
    blend = build_extension(field, s, interior_scale=ctrl.interior_scale)
    s = blend.s

    base = ctrl.base_factor * max(field.sigma, 1e-6)
    radii = [max(base, 2.0 * s * 1.0001) * ctrl.growth ** k for k in range(ctrl.rungs)]
    flux = parallel_map(lambda r: _circle_flux(blend.blended, r, ctrl.circle_samples), radii)

    # The blend trace has slope kinks exactly at the seams r = s and 2s;
    # integrate each smooth radial panel separately.
    interior = (_annulus_trace_integral(blend, 0.0, s, ctrl.radial_nodes, ctrl.angular_nodes)
                + _annulus_trace_integral(blend, s, 2.0 * s, ctrl.radial_nodes, ctrl.angular_nodes))

    max_rel = 0.0
    if ctrl.area_check:
        cum = interior + _annulus_trace_integral(blend, 2.0 * s, radii[0],
                                                 ctrl.radial_nodes, ctrl.angular_nodes)
        for k, r in enumerate(radii):
            if k > 0:
                cum += _annulus_trace_integral(blend, radii[k - 1], r,
                                               ctrl.radial_nodes, ctrl.angular_nodes)
            rel = abs(cum - flux[k]) / (1.0 + abs(flux[k]))
            max_rel = max(max_rel, rel)

    quad_tol = 1e-7 if field.jacobian_mode == "analytic" else 1e-3
    reliable = max_rel <= 10.0 * max(ctrl.tol, quad_tol)

    diffs = np.diff(flux)
    abs_diffs = np.abs(diffs)
    tail = abs_diffs[-4:]
    noise = 1e-14 * (1.0 + abs(flux[-1]))
    cauchy = bool(np.all(tail[1:] <= 0.9 * tail[:-1] + noise)) and \
        tail[-1] <= ctrl.tol * (1.0 + abs(flux[-1]))

    # power-law growth fit on the last four rungs
    tailf = np.asarray(flux[-4:])
    growth_p = float("nan")
    sign_consistent = bool(np.all(tailf > 0) or np.all(tailf < 0))
    if np.all(np.abs(tailf) > 0):
        lr = np.log(np.asarray(radii[-4:]))
        lf = np.log(np.abs(tailf))
        growth_p = float(np.polyfit(lr, lf, 1)[0])

    aitken = float("nan")
    if len(flux) >= 3 and diffs[-1] != 0 and diffs[-2] != 0:
        rho = diffs[-1] / diffs[-2]
        if abs(rho) < 0.95:
            aitken = flux[-1] + diffs[-1] * rho / (1.0 - rho)

    if cauchy:
        value = aitken if np.isfinite(aitken) else float(flux[-1])
        classification = "finite"
    elif sign_consistent and np.isfinite(growth_p) and growth_p > 0.5:
        value = float(np.sign(tailf[-1]) * np.inf)
        classification = "minus_infinity" if value < 0 else "plus_infinity"
    else:
        value = float("nan")
        classification = "unreliable"
        reliable = False

    est = IndexEstimate(
        value=value,
        classification=classification,
        radii=[float(r) for r in radii],
        flux=[float(fv) for fv in flux],
        interior_contribution=interior,
        area_flux_max_rel_discrepancy=max_rel,
        reliable=reliable,
        diagnostics={
            "aitken_limit": aitken,
            "growth_exponent": growth_p,
            "sign_consistent": sign_consistent,
            "cauchy": cauchy,
            "blend_s": s,
            "interior_scale": blend.interior_scale,
            "seam_jacobian_discrepancy": blend.seam_jacobian_discrepancy(),
            "min_seam_det": blend.min_seam_det(),
        },
    )
    if ctrl.area_check and not reliable and classification != "unreliable":
        raise InconsistencyError(
            f"flux and area quadrature disagree (rel {max_rel:.3e}); "
            "index estimate is unreliable")
    return est


@dataclass
class IndependenceProbe:
    values: list[dict]
    max_finite_discrepancy: float
    classifications_agree: bool

    def to_dict(self) -> dict:
        from .reporting import encode_float
        return {
            "values": [
                {**v, "value": encode_float(v["value"])} for v in self.values
            ],
            "max_finite_discrepancy": self.max_finite_discrepancy,
            "classifications_agree": self.classifications_agree,
        }


def extension_independence_probe(field: VectorField, s_values,
                                 interior_scales=(1.0, 2.0),
                                 controls: IndexControls | None = None) -> IndependenceProbe:
    """Recompute the index for several blend radii and interior models and
    report the largest pairwise discrepancy among finite values."""
    base = controls or IndexControls()
    results = []
    for s in s_values:
        if s < field.sigma:
            raise PreconditionError(f"blend radius {s} below sigma {field.sigma}")
        for lam in interior_scales:
            ctrl = IndexControls(s=float(s), rungs=base.rungs, base_factor=base.base_factor,
                                 growth=base.growth, circle_samples=base.circle_samples,
                                 tol=base.tol, interior_scale=float(lam),
                                 area_check=base.area_check)
            est = compute_index(field, ctrl)
            results.append({"s": float(s), "interior_scale": float(lam),
                            "value": est.value, "classification": est.classification})
    finite = [r["value"] for r in results if np.isfinite(r["value"])]
    max_disc = float(np.max(np.abs(np.subtract.outer(finite, finite)))) if len(finite) >= 2 else 0.0
    classes = {r["classification"] for r in results}
    return IndependenceProbe(values=results, max_finite_discrepancy=max_disc,
                             classifications_agree=len(classes) == 1)
