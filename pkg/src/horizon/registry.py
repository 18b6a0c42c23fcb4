"""Named example fields with their analytic oracle facts.

Each entry documents, in ``meta``, the closed forms used by the tests:
Jacobian trace, radial component of the field, the expected verdict at
infinity and the expected index.  Expressions go through the same DSL as
user-supplied fields, so registry Jacobians are exact.
"""

from __future__ import annotations

from collections.abc import Callable

from .errors import ConfigError
from .field import VectorField


def linear_hurwitz() -> VectorField:
    return VectorField.from_expressions(
        "linear_hurwitz", "-x", "-y", sigma=1.0,
        meta={
            "hurwitz": True,
            "trace_formula": "-2",
            "radial_component": "-r",
            "expected_infinity": "repellor",
            "expected_index": "-inf",
        },
    )


def rot_decay_repel(epsilon: float = 0.5) -> VectorField:
    e = float(epsilon)
    return VectorField.from_expressions(
        "rot_decay_repel",
        f"-y - {e!r}*x/(1 + x^2 + y^2)",
        f"x - {e!r}*y/(1 + x^2 + y^2)",
        sigma=1.0,
        meta={
            "hurwitz": True,
            "epsilon": e,
            "trace_formula": "-2*eps/(1+r^2)^2",
            "radial_component": "-eps*r/(1+r^2)",
            "expected_infinity": "repellor",
            "expected_index": -2.0 * 3.141592653589793 * e,
            "boundary_flux": "-2*pi*eps*R^2/(1+R^2)",
        },
    )


def rot_feed_attract(epsilon: float = 0.5) -> VectorField:
    e = float(epsilon)
    return VectorField.from_expressions(
        "rot_feed_attract",
        f"-y + {e!r}*x/(1 + x^2 + y^2)^2",
        f"x + {e!r}*y/(1 + x^2 + y^2)^2",
        sigma=2.0,
        meta={
            "hurwitz": True,
            "epsilon": e,
            "trace_formula": "2*eps*(1-r^2)/(1+r^2)^3",
            "radial_component": "eps*r/(1+r^2)^2",
            "expected_infinity": "attractor",
            "expected_index": 0.0,
            "boundary_flux": "2*pi*eps*R^2/(1+R^2)^2",
        },
    )


def radial_slow() -> VectorField:
    return VectorField.from_expressions(
        "radial_slow",
        "-x/sqrt(1 + x^2 + y^2)",
        "-y/sqrt(1 + x^2 + y^2)",
        sigma=1.0,
        meta={
            "hurwitz": True,
            "trace_formula": "-(1+r^2)^(-1/2) - (1+r^2)^(-3/2)",
            "radial_component": "-r/sqrt(1+r^2)",
            "expected_infinity": "repellor",
            "expected_index": "-inf",
        },
    )


def model_reeb() -> VectorField:
    return VectorField.from_expressions(
        "model_reeb", "x*y", "(y^2 - x^2)/2", sigma=0.1,
        meta={
            "hurwitz": False,
            "trace_formula": "2*y",
            "eigenvalues": "y +- i*x",
            "expected_infinity": None,
            "expected_index": None,
            "notes": "saddle-type foliation of x*y; image symmetric under z -> -z",
        },
    )


def shifted_zero() -> VectorField:
    return VectorField.from_expressions(
        "shifted_zero", "10 - x", "-y", sigma=1.0,
        meta={
            "hurwitz": True,
            "trace_formula": "-2",
            "expected_infinity": "repellor",
            "expected_index": "-inf",
            "notes": "rest point at (10, 0); exercises the translation search",
        },
    )


REGISTRY: dict[str, Callable[..., VectorField]] = {
    "linear_hurwitz": linear_hurwitz,
    "rot_decay_repel": rot_decay_repel,
    "rot_feed_attract": rot_feed_attract,
    "radial_slow": radial_slow,
    "model_reeb": model_reeb,
    "shifted_zero": shifted_zero,
}

HURWITZ_NAMES = ["linear_hurwitz", "rot_decay_repel", "rot_feed_attract",
                 "radial_slow", "shifted_zero"]


def get_field(name: str, epsilon: float | None = None) -> VectorField:
    try:
        builder = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown registry field {name!r}; choose from "
                          f"{sorted(REGISTRY)}") from None
    if epsilon is not None:
        if name not in ("rot_decay_repel", "rot_feed_attract"):
            raise ConfigError(f"field {name!r} takes no epsilon parameter")
        return builder(epsilon)
    return builder()


def list_fields() -> list[str]:
    return sorted(REGISTRY)
