"""Planar vector fields on the exterior of a disk.

A field X = (f, g) is defined for |z| >= sigma.  Evaluation and Jacobians
are vectorized; Jacobians come either from exact partial-derivative
callables ("analytic") or scale-aware central finite differences ("fd").
Spectral classification of the 2x2 Jacobian uses the closed form
(T +- sqrt(T^2 - 4D)) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import InteriorPointError, NonFiniteError, PreconditionError
from .expressions import CompiledPair

FD_STEP_SCALE = 1e-5  # h = FD_STEP_SCALE * max(1, |z|), central differences


@dataclass(frozen=True, eq=False)
class VectorField:
    """Evaluatable pair X = (f, g) with Jacobian access on {|z| >= sigma}.

    ``sigma == 0`` is reserved for internal global extensions; analysis
    fields constructed from the registry or the expression DSL always
    carry sigma > 0.
    """

    name: str
    sigma: float
    f: Callable
    g: Callable
    fx: Callable | None = None
    fy: Callable | None = None
    gx: Callable | None = None
    gy: Callable | None = None
    jacobian_mode: str = "analytic"
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.sigma < 0:
            raise PreconditionError("sigma must be nonnegative")
        if self.jacobian_mode not in ("analytic", "fd"):
            raise PreconditionError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.jacobian_mode == "analytic" and None in (self.fx, self.fy, self.gx, self.gy):
            raise PreconditionError("analytic mode requires all four partial callables")

    # -- construction -------------------------------------------------

    @classmethod
    def from_expressions(cls, name: str, f_expr: str, g_expr: str, sigma: float,
                         jacobian_mode: str = "analytic", meta: dict | None = None) -> "VectorField":
        pair = CompiledPair.from_strings(f_expr, g_expr)
        meta = dict(meta or {})
        meta.setdefault("f_expr", f_expr)
        meta.setdefault("g_expr", g_expr)
        return cls(name=name, sigma=float(sigma), f=pair.f, g=pair.g,
                   fx=pair.fx, fy=pair.fy, gx=pair.gx, gy=pair.gy,
                   jacobian_mode=jacobian_mode, meta=meta)

    @classmethod
    def from_callables(cls, name: str, f: Callable, g: Callable, sigma: float,
                       partials: tuple | None = None, meta: dict | None = None) -> "VectorField":
        if partials is None:
            return cls(name=name, sigma=float(sigma), f=f, g=g,
                       jacobian_mode="fd", meta=dict(meta or {}))
        fx, fy, gx, gy = partials
        return cls(name=name, sigma=float(sigma), f=f, g=g, fx=fx, fy=fy, gx=gx, gy=gy,
                   jacobian_mode="analytic", meta=dict(meta or {}))

    # -- evaluation ----------------------------------------------------

    def _require_exterior(self, x: np.ndarray, y: np.ndarray, pad: float = 0.0) -> None:
        r = np.hypot(x, y)
        bad = r < self.sigma + pad - 1e-12 * max(1.0, self.sigma)
        if np.any(bad):
            idx = np.argwhere(bad).ravel()[0] if bad.ndim else 0
            raise InteriorPointError(
                f"point with |z| < sigma{'+h' if pad else ''} = {self.sigma + pad:g} "
                f"queried on field {self.name!r}"
            )

    def eval_raw(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (f, g) without the exterior-domain check.

        Integrators probe trial points slightly past the stopping boundary;
        those probes must not raise.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.f(x, y), self.g(x, y)

    def evaluate_array(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._require_exterior(x, y)
        fv, gv = self.eval_raw(x, y)
        if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
            raise NonFiniteError(f"field {self.name!r} produced non-finite values")
        return fv, gv

    def evaluate(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        fv, gv = self.evaluate_array(p[0], p[1])
        return np.array([float(fv), float(gv)])

    # -- Jacobians -----------------------------------------------------

    def fd_step(self, x, y) -> np.ndarray:
        r = np.hypot(np.asarray(x, float), np.asarray(y, float))
        return FD_STEP_SCALE * np.maximum(1.0, r)

    def jacobian_array(self, x, y, mode: str | None = None):
        """Return (fx, fy, gx, gy) arrays at the given points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        mode = mode or self.jacobian_mode
        if mode == "analytic":
            return self.fx(x, y), self.fy(x, y), self.gx(x, y), self.gy(x, y)
        h = self.fd_step(x, y)
        f, g = self.f, self.g
        fx = (f(x + h, y) - f(x - h, y)) / (2 * h)
        fy = (f(x, y + h) - f(x, y - h)) / (2 * h)
        gx = (g(x + h, y) - g(x - h, y)) / (2 * h)
        gy = (g(x, y + h) - g(x, y - h)) / (2 * h)
        return fx, fy, gx, gy

    def jacobian(self, point, mode: str | None = None) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        mode = mode or self.jacobian_mode
        pad = float(self.fd_step(p[0], p[1])) if mode == "fd" else 0.0
        self._require_exterior(np.asarray(p[0]), np.asarray(p[1]), pad=pad)
        fx, fy, gx, gy = self.jacobian_array(p[0], p[1], mode=mode)
        jac = np.array([[float(fx), float(fy)], [float(gx), float(gy)]])
        if not np.all(np.isfinite(jac)):
            raise NonFiniteError(f"non-finite Jacobian on field {self.name!r}")
        return jac

    def gradient_f_array(self, x, y):
        fx, fy, _, _ = self.jacobian_array(x, y)
        return fx, fy

    def hamiltonian_array(self, x, y, component: str = "f"):
        """Tangent field of the level foliation: (-f_y, f_x) or (g_y, -g_x)."""
        fx, fy, gx, gy = self.jacobian_array(x, y)
        if component == "f":
            return -fy, fx
        if component == "g":
            return gy, -gx
        raise PreconditionError(f"component must be 'f' or 'g', got {component!r}")


def evaluate(field: VectorField, point) -> np.ndarray:
    return field.evaluate(point)


def jacobian(field: VectorField, point) -> np.ndarray:
    return field.jacobian(point)


# -- spectral classification -------------------------------------------


@dataclass(frozen=True)
class Spectrum2:
    """Trace/determinant/discriminant and eigenvalues of a 2x2 matrix."""

    trace: float
    det: float
    discriminant: float
    eigenvalues: tuple[complex, complex]
    is_real_pair: bool

    @property
    def hurwitz(self) -> bool:
        """Both eigenvalues in the open left half plane: T < 0 and D > 0."""
        return self.trace < 0.0 and self.det > 0.0

    @property
    def no_nonneg_real(self) -> bool:
        """Spectrum disjoint from [0, +inf)."""
        if not self.is_real_pair:
            return True
        return max(ev.real for ev in self.eigenvalues) < 0.0


def spectrum(jac) -> Spectrum2:
    m = np.asarray(jac, dtype=float)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise NonFiniteError("spectrum requires a finite 2x2 matrix")
    t = float(m[0, 0] + m[1, 1])
    d = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    disc = t * t - 4.0 * d
    if disc >= 0.0:
        root = np.sqrt(disc)
        eig = (complex((t - root) / 2.0), complex((t + root) / 2.0))
        real_pair = True
    else:
        root = np.sqrt(-disc)
        eig = (complex(t / 2.0, -root / 2.0), complex(t / 2.0, root / 2.0))
        real_pair = False
    return Spectrum2(trace=t, det=d, discriminant=disc, eigenvalues=eig, is_real_pair=real_pair)


# -- region scan --------------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    radii: int = 64
    angles: int = 256
    qmc_points: int = 4096
    qmc_seed: int = 0


@dataclass
class Violations:
    """Sample points failing one spectral predicate, with their Jacobians."""

    predicate: str
    points: np.ndarray      # (k, 2)
    jacobians: np.ndarray   # (k, 2, 2)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    @property
    def all_ok(self) -> bool:
        return self.count == 0

    def to_dict(self, max_examples: int = 64) -> dict:
        k = min(self.count, max_examples)
        return {
            "predicate": self.predicate,
            "count": self.count,
            "truncated": self.count > k,
            "examples": [
                {"point": self.points[i].tolist(), "jacobian": self.jacobians[i].tolist()}
                for i in range(k)
            ],
        }


@dataclass
class RegionSpectrumReport:
    annulus: tuple[float, float]
    samples: int
    hurwitz: Violations
    no_nonneg_real: Violations
    det_positive: Violations
    min_real_part: float
    """Spectral stability margin: the sampled real part closest to zero,
    max over samples of max_k Re(lambda_k)."""
    most_negative_real_part: float

    @property
    def hurwitz_all(self) -> bool:
        return self.hurwitz.all_ok

    def to_dict(self) -> dict:
        return {
            "annulus": list(self.annulus),
            "samples": self.samples,
            "hurwitz": "all" if self.hurwitz.all_ok else self.hurwitz.to_dict(),
            "no_nonneg_real": "all" if self.no_nonneg_real.all_ok else self.no_nonneg_real.to_dict(),
            "det_positive": "all" if self.det_positive.all_ok else self.det_positive.to_dict(),
            "min_real_part": self.min_real_part,
            "most_negative_real_part": self.most_negative_real_part,
        }


def _annulus_samples(r_min: float, r_max: float, grid: ScanGrid) -> tuple[np.ndarray, np.ndarray]:
    radii = np.geomspace(r_min, r_max, grid.radii)
    angles = np.linspace(0.0, 2.0 * np.pi, grid.angles, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    x = (rr * np.cos(aa)).ravel()
    y = (rr * np.sin(aa)).ravel()
    if grid.qmc_points > 0:
        sampler = qmc.Halton(d=2, scramble=True, seed=grid.qmc_seed)
        u = sampler.random(grid.qmc_points)
        r = r_min * (r_max / r_min) ** u[:, 0]
        a = 2.0 * np.pi * u[:, 1]
        x = np.concatenate([x, r * np.cos(a)])
        y = np.concatenate([y, r * np.sin(a)])
    return x, y


def scan_region(field: VectorField, annulus: tuple[float, float],
                grid: ScanGrid | None = None) -> RegionSpectrumReport:
    """Classify the Jacobian spectrum on a polar grid plus a quasi-random refinement.

    Violations are data, not errors: the scan always covers the whole grid
    and reports every failing sample.
    """
    r_min, r_max = float(annulus[0]), float(annulus[1])
    if r_min < field.sigma - 1e-12 * max(1.0, field.sigma):
        raise PreconditionError(f"annulus inner radius {r_min} < sigma {field.sigma}")
    if not r_min < r_max:
        raise PreconditionError("annulus must satisfy r_min < r_max")
    grid = grid or ScanGrid()

    x, y = _annulus_samples(r_min, r_max, grid)
    fx, fy, gx, gy = field.jacobian_array(x, y)
    t = fx + gy
    d = fx * gy - fy * gx
    disc = t * t - 4.0 * d

    real_pair = disc >= 0.0
    root = np.sqrt(np.abs(disc))
    # Real part closest to zero per sample.
    top_real = np.where(real_pair, (t + root) / 2.0, t / 2.0)

    hurwitz_ok = (t < 0.0) & (d > 0.0)
    no_nonneg_ok = (~real_pair) | (top_real < 0.0)
    det_ok = d > 0.0

    def collect(mask_ok: np.ndarray, predicate: str) -> Violations:
        idx = np.flatnonzero(~mask_ok)
        pts = np.column_stack([x[idx], y[idx]])
        jacs = np.empty((idx.size, 2, 2))
        jacs[:, 0, 0] = fx[idx]
        jacs[:, 0, 1] = fy[idx]
        jacs[:, 1, 0] = gx[idx]
        jacs[:, 1, 1] = gy[idx]
        return Violations(predicate=predicate, points=pts, jacobians=jacs)

    bottom_real = np.where(real_pair, (t - root) / 2.0, t / 2.0)
    return RegionSpectrumReport(
        annulus=(r_min, r_max),
        samples=int(x.size),
        hurwitz=collect(hurwitz_ok, "hurwitz"),
        no_nonneg_real=collect(no_nonneg_ok, "no_nonneg_real"),
        det_positive=collect(det_ok, "det_positive"),
        min_real_part=float(np.max(top_real)),
        most_negative_real_part=float(np.min(bottom_real)),
    )
