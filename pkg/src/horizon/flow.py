"""Trajectory integration and limit-behavior classification.

Integration uses an adaptive explicit 5(4) embedded pair (scipy's RK45)
behind this module's contract.  Escape to infinity is always inferred from
a ladder of growing exit radii, never from a compactified chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import PreconditionError
from .field import VectorField

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12


@dataclass(frozen=True)
class FlowControls:
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    t_max: float = 1000.0
    r_max: float | None = None  # default 128 * sigma, the top escape rung

    def resolved_r_max(self, sigma: float) -> float:
        return self.r_max if self.r_max is not None else 128.0 * max(sigma, 1e-12)


@dataclass(frozen=True)
class EscapeLadder:
    """Exit-radius thresholds r0 * factor**k, k = 0..rungs-1."""

    r0: float
    factor: float = 2.0
    rungs: int = 6

    @classmethod
    def default_for(cls, sigma: float) -> "EscapeLadder":
        return cls(r0=4.0 * max(sigma, 1e-12), factor=2.0, rungs=6)

    def thresholds(self) -> np.ndarray:
        return self.r0 * self.factor ** np.arange(self.rungs)


@dataclass(frozen=True)
class Terminal:
    kind: str  # escaped | bounded | left_domain | step_failure
    r_exit: float | None = None
    t_exit: float | None = None


@dataclass
class Trajectory:
    seed: np.ndarray
    direction: str  # forward | backward
    times: np.ndarray   # monotone increasing in the integration direction
    points: np.ndarray  # (n, 2)
    terminal: Terminal

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def to_csv_rows(self):
        r = self.radii
        for i in range(self.times.size):
            yield (self.times[i], self.points[i, 0], self.points[i, 1], r[i])


@dataclass
class LimitVerdict:
    kind: str  # goes_to_infinity | stays_bounded | enters_inner_disk | inconclusive
    evidence: dict = dc_field(default_factory=dict)


def _rhs(field: VectorField, sign: float):
    def rhs(t, y):
        fv, gv = field.eval_raw(y[0], y[1])
        return (sign * fv, sign * gv)

    return rhs


def integrate(field: VectorField, seed, direction: str = "forward",
              controls: FlowControls | None = None) -> Trajectory:
    """Integrate one trajectory until escape, inner-disk entry, t_max or failure."""
    controls = controls or FlowControls()
    seed = np.asarray(seed, dtype=float)
    if np.hypot(seed[0], seed[1]) <= field.sigma:
        raise PreconditionError(f"seed {seed.tolist()} not strictly outside the sigma disk")
    if direction not in ("forward", "backward"):
        raise PreconditionError(f"direction must be forward or backward, got {direction!r}")
    sign = 1.0 if direction == "forward" else -1.0
    r_max = controls.resolved_r_max(field.sigma)

    def hit_r_max(t, y):
        return np.hypot(y[0], y[1]) - r_max

    hit_r_max.terminal = True

    def enter_sigma(t, y):
        return np.hypot(y[0], y[1]) - field.sigma

    enter_sigma.terminal = True

    events = [hit_r_max] + ([enter_sigma] if field.sigma > 0 else [])
    sol = solve_ivp(_rhs(field, sign), (0.0, controls.t_max), seed,
                    method="RK45", rtol=controls.rel_tol, atol=controls.abs_tol,
                    events=events, dense_output=False)

    times = sol.t.copy()
    points = sol.y.T.copy()
    if sol.status == -1:
        terminal = Terminal(kind="step_failure", t_exit=float(times[-1]))
    elif sol.status == 1:
        if sol.t_events[0].size:
            k, kind = 0, "escaped"
            terminal = Terminal(kind=kind, r_exit=r_max, t_exit=float(sol.t_events[0][0]))
        else:
            k, kind = 1, "left_domain"
            terminal = Terminal(kind=kind, t_exit=float(sol.t_events[1][0]))
        t_ev = sol.t_events[k][0]
        if times.size == 0 or times[-1] < t_ev:
            times = np.append(times, t_ev)
            points = np.vstack([points, sol.y_events[k][0]])
    else:
        terminal = Terminal(kind="bounded", t_exit=controls.t_max)
    return Trajectory(seed=seed, direction=direction, times=times, points=points,
                      terminal=terminal)


def integrate_batch(field: VectorField, seeds, direction: str = "forward",
                    controls: FlowControls | None = None,
                    max_stored: int = 2048, chunk_t: float | None = None) -> list[Trajectory]:
    """Integrate many seeds as one stacked system, chunked so finished
    trajectories stop consuming work.

    Stored samples are decimated to at most ``max_stored`` per trajectory;
    terminal crossings are located by interpolation between solver steps.
    """
    controls = controls or FlowControls()
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    n = seeds.shape[0]
    if np.any(np.hypot(seeds[:, 0], seeds[:, 1]) <= field.sigma):
        raise PreconditionError("all seeds must lie strictly outside the sigma disk")
    sign = 1.0 if direction == "forward" else -1.0
    if direction not in ("forward", "backward"):
        raise PreconditionError(f"direction must be forward or backward, got {direction!r}")
    r_max = controls.resolved_r_max(field.sigma)
    sigma = field.sigma

    def rhs(t, y):
        pts = y.reshape(-1, 2)
        fv, gv = field.eval_raw(pts[:, 0], pts[:, 1])
        out = np.empty_like(pts)
        out[:, 0] = sign * fv
        out[:, 1] = sign * gv
        return out.ravel()

    # Chunk cap keeps exponentially growing states well inside float range.
    chunk = chunk_t if chunk_t is not None else max(1.0, min(200.0, controls.t_max / 16.0))
    active = list(range(n))
    state = seeds.copy()
    t_offset = 0.0
    buf_t: list[list[np.ndarray]] = [[] for _ in range(n)]
    buf_p: list[list[np.ndarray]] = [[] for _ in range(n)]
    terminals: dict[int, Terminal] = {}
    for i in range(n):
        buf_t[i].append(np.array([0.0]))
        buf_p[i].append(seeds[i][None, :])

    while active and t_offset < controls.t_max:
        t_end = min(chunk, controls.t_max - t_offset)
        y0 = state[active].ravel()
        sol = solve_ivp(rhs, (0.0, t_end), y0, method="RK45",
                        rtol=controls.rel_tol, atol=controls.abs_tol)
        if sol.status == -1:
            # Step failure applies to the whole stacked system; record and stop.
            for i in active:
                terminals[i] = Terminal(kind="step_failure", t_exit=t_offset + float(sol.t[-1]))
            ys = sol.y.T.reshape(sol.t.size, -1, 2)
            for k, i in enumerate(active):
                buf_t[i].append(t_offset + sol.t[1:])
                buf_p[i].append(ys[1:, k, :])
            active = []
            break
        ys = sol.y.T.reshape(sol.t.size, -1, 2)  # (steps, active, 2)
        radii = np.hypot(ys[:, :, 0], ys[:, :, 1])
        still = []
        for k, i in enumerate(active):
            r = radii[:, k]
            esc = np.flatnonzero(r >= r_max)
            ent = np.flatnonzero(r <= sigma) if sigma > 0 else np.array([], dtype=int)
            stop_idx = None
            if esc.size and (not ent.size or esc[0] <= ent[0]):
                j = esc[0]
                t_exit = _interp_crossing(sol.t, r, j, r_max)
                terminals[i] = Terminal(kind="escaped", r_exit=r_max, t_exit=t_offset + t_exit)
                stop_idx = j
            elif ent.size:
                j = ent[0]
                t_exit = _interp_crossing(sol.t, r, j, sigma)
                terminals[i] = Terminal(kind="left_domain", t_exit=t_offset + t_exit)
                stop_idx = j
            end = sol.t.size if stop_idx is None else stop_idx + 1
            buf_t[i].append(t_offset + sol.t[1:end])
            buf_p[i].append(ys[1:end, k, :])
            if stop_idx is None:
                still.append(i)
        state[still] = ys[-1, [active.index(i) for i in still], :]
        active = still
        t_offset += t_end

    for i in active:
        terminals[i] = Terminal(kind="bounded", t_exit=controls.t_max)

    out = []
    for i in range(n):
        times = np.concatenate(buf_t[i])
        points = np.concatenate(buf_p[i], axis=0)
        if times.size > max_stored:
            idx = np.unique(np.linspace(0, times.size - 1, max_stored).astype(int))
            times, points = times[idx], points[idx]
        out.append(Trajectory(seed=seeds[i], direction=direction, times=times,
                              points=points, terminal=terminals[i]))
    return out


def _interp_crossing(t: np.ndarray, r: np.ndarray, j: int, level: float) -> float:
    if j == 0:
        return float(t[0])
    r0, r1 = r[j - 1], r[j]
    if r1 == r0:
        return float(t[j])
    w = (level - r0) / (r1 - r0)
    return float(t[j - 1] + w * (t[j] - t[j - 1]))


def classify_limit(traj: Trajectory, ladder: EscapeLadder | None = None) -> LimitVerdict:
    """Apply the exit-radius ladder rule to a completed trajectory.

    goes_to_infinity requires crossing every rung in order without
    returning below the previous one; the verdict locks as soon as the
    last rung is crossed, so extending the data never revokes it.
    """
    if ladder is None:
        r_seed = float(np.hypot(traj.seed[0], traj.seed[1]))
        ladder = EscapeLadder.default_for(max(r_seed / 4.0, 1e-12))
    rungs = ladder.thresholds()
    radii = traj.radii
    i = 0
    dipped = False
    for r in radii:
        while i < rungs.size and r >= rungs[i]:
            i += 1
        if i >= rungs.size:
            break
        if i > 0 and r < rungs[i - 1]:
            dipped = True
            break
    evidence = {
        "r_first": float(radii[0]),
        "r_last": float(radii[-1]),
        "r_min": float(radii.min()),
        "r_max": float(radii.max()),
        "rungs_crossed": int(i),
        "rungs_total": int(rungs.size),
        "dipped_below_previous_rung": dipped,
        "terminal": traj.terminal.kind,
    }
    if i >= rungs.size:
        return LimitVerdict(kind="goes_to_infinity", evidence=evidence)
    if traj.terminal.kind == "left_domain":
        return LimitVerdict(kind="enters_inner_disk", evidence=evidence)
    if dipped:
        return LimitVerdict(kind="stays_bounded", evidence=evidence)
    if traj.terminal.kind in ("escaped", "step_failure") or i > 0:
        # Data ended mid-ladder without a decision.
        return LimitVerdict(kind="inconclusive", evidence=evidence)
    return LimitVerdict(kind="stays_bounded", evidence=evidence)


@dataclass
class UniquenessProbe:
    seed: np.ndarray
    delta: float
    t_window: float
    times: np.ndarray
    divergence: np.ndarray
    max_divergence: float
    lipschitz_bound: float
    bound_satisfied: bool


def semi_trajectory_uniqueness_probe(field: VectorField, seed, n_perturbations: int = 8,
                                     delta: float = 1e-6, t_window: float = 5.0,
                                     controls: FlowControls | None = None,
                                     rng_seed: int = 0) -> UniquenessProbe:
    """Forward-integrate a seed and nearby perturbations; report how fast
    they separate.  Numerical evidence of forward uniqueness, not a proof.
    """
    controls = controls or FlowControls()
    seed = np.asarray(seed, dtype=float)
    if np.hypot(seed[0], seed[1]) <= field.sigma:
        raise PreconditionError("seed must lie strictly outside the sigma disk")
    rng = np.random.default_rng(rng_seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, n_perturbations)
    starts = np.vstack([seed, seed + delta * np.column_stack([np.cos(angles), np.sin(angles)])])

    def rhs(t, y):
        pts = y.reshape(-1, 2)
        fv, gv = field.eval_raw(pts[:, 0], pts[:, 1])
        return np.column_stack([fv, gv]).ravel()

    t_eval = np.linspace(0.0, t_window, 201)
    sol = solve_ivp(rhs, (0.0, t_window), starts.ravel(), method="RK45",
                    rtol=controls.rel_tol, atol=controls.abs_tol, t_eval=t_eval)
    ys = sol.y.T.reshape(sol.t.size, -1, 2)
    base = ys[:, 0, :]
    div = np.max(np.hypot(ys[:, 1:, 0] - base[:, None, 0], ys[:, 1:, 1] - base[:, None, 1]), axis=1)

    fx, fy, gx, gy = field.jacobian_array(base[:, 0], base[:, 1])
    jac = np.stack([np.stack([fx, fy], axis=-1), np.stack([gx, gy], axis=-1)], axis=-2)
    lip = float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1))))
    bound = delta * np.exp(lip * sol.t) * (1.0 + 1e-6) + 1e-12
    return UniquenessProbe(
        seed=seed, delta=delta, t_window=t_window, times=sol.t, divergence=div,
        max_divergence=float(div.max()), lipschitz_bound=lip,
        bound_satisfied=bool(np.all(div <= bound)),
    )
