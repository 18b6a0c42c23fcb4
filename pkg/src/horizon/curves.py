"""Closed curves: circles and star-shaped trig-polynomial perturbations.

Every curve is star-shaped about its center, parameterized by the polar
angle, so it is simple by construction once rho(theta) > 0.  Orientation
is positive (counterclockwise) and the outward normal is the tangent
rotated clockwise by 90 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class ClosedCurve:
    """rho(theta) = radius * (1 + sum_k a_k cos(k theta) + b_k sin(k theta))."""

    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    encloses: float | None = None  # inner radius s with D_s inside the curve

    def __post_init__(self):
        if self.radius <= 0:
            raise PreconditionError("curve radius must be positive")
        if self.min_radius() <= 0:
            raise PreconditionError("rho(theta) must stay positive")

    @property
    def is_circle(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def _trig(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rho = np.ones_like(theta)
        drho = np.zeros_like(theta)
        for k, a in enumerate(self.cos_coeffs, start=1):
            rho = rho + a * np.cos(k * theta)
            drho = drho - a * k * np.sin(k * theta)
        for k, b in enumerate(self.sin_coeffs, start=1):
            rho = rho + b * np.sin(k * theta)
            drho = drho + b * k * np.cos(k * theta)
        return self.radius * rho, self.radius * drho

    def rho(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self._trig(theta)[0]

    def min_radius(self, n: int = 4096) -> float:
        theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return float(np.min(self.rho(theta)))

    def max_radius(self, n: int = 4096) -> float:
        theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return float(np.max(self.rho(theta)))

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        rho, _ = self._trig(theta)
        cx, cy = self.center
        return np.stack([cx + rho * np.cos(theta), cy + rho * np.sin(theta)], axis=-1)

    def tangent(self, theta) -> np.ndarray:
        """d/dtheta of the parameterization (not normalized)."""
        theta = np.asarray(theta, dtype=float)
        rho, drho = self._trig(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([drho * c - rho * s, drho * s + rho * c], axis=-1)

    def outward_normal(self, theta) -> np.ndarray:
        t = self.tangent(theta)
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def radial_excess(self, points) -> np.ndarray:
        """Positive outside the curve, negative inside (polar test about center)."""
        p = np.asarray(points, dtype=float)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        r = np.hypot(dx, dy)
        ang = np.arctan2(dy, dx)
        return r - self.rho(ang)

    def arc_lengths(self, theta) -> np.ndarray:
        """|c'(theta)| at the given parameters."""
        return np.linalg.norm(self.tangent(theta), axis=-1)


def circle(radius: float, center: tuple[float, float] = (0.0, 0.0)) -> ClosedCurve:
    return ClosedCurve(radius=radius, center=center, encloses=radius if center == (0.0, 0.0) else None)


def star_curve(radius: float, rng: np.random.Generator, order: int = 4,
               amplitude: float = 0.08, center: tuple[float, float] = (0.0, 0.0),
               keep_enclosing: bool = False) -> ClosedCurve:
    """Random low-order star-shaped perturbation of a circle.

    With ``keep_enclosing`` the perturbation is shifted so min rho equals
    ``radius``, hence the curve still encloses the disk of that radius.
    """
    a = rng.uniform(-1.0, 1.0, order)
    b = rng.uniform(-1.0, 1.0, order)
    scale = amplitude / max(1.0, float(np.sum(np.abs(a)) + np.sum(np.abs(b))))
    a *= scale
    b *= scale
    cur = ClosedCurve(radius=radius, center=center,
                      cos_coeffs=tuple(a), sin_coeffs=tuple(b))
    if keep_enclosing:
        lift = radius / cur.min_radius()
        cur = ClosedCurve(radius=radius * lift, center=center,
                          cos_coeffs=tuple(a), sin_coeffs=tuple(b),
                          encloses=radius if center == (0.0, 0.0) else None)
    return cur
