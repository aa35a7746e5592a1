"""Gradient-flow integration and trajectory export."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.integrate import RK45

from . import _kernels
from ._validation import check_int, check_positive
from .energy import EnergySystem, gradient, potential
from .exceptions import InvalidArgumentError
from .geometry import LockedState, Realization


class Method(enum.Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"


class TerminalReason(enum.Enum):
    GRADIENT_BELOW_TOL = "GradientBelowTol"
    HORIZON_REACHED = "HorizonReached"
    STEP_FAILURE = "StepFailure"

    def __str__(self):
        return self.value


_KERNEL_REASONS = {
    _kernels.GRADIENT_BELOW_TOL: TerminalReason.GRADIENT_BELOW_TOL,
    _kernels.HORIZON_REACHED: TerminalReason.HORIZON_REACHED,
    _kernels.STEP_FAILURE: TerminalReason.STEP_FAILURE,
}


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 200.0
    grad_tol: float = 1e-8
    method: Method = Method.RK4_FIXED
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    record_every: int = 100

    def __post_init__(self):
        for name in ("dt", "t_max", "grad_tol", "rel_tol", "abs_tol"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))
        object.__setattr__(self, "record_every", check_int(self.record_every, "record_every", 1))
        object.__setattr__(self, "method", Method(self.method))

    def replace(self, **changes) -> "IntegratorConfig":
        fields = asdict(self)
        fields.update(changes)
        return IntegratorConfig(**fields)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    potentials: np.ndarray
    terminal_reason: TerminalReason
    final_grad_norm: float

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_potential(self) -> float:
        return float(self.potentials[-1])

    def __len__(self):
        return len(self.times)


def locked_initial(planar0: Realization, alpha: float, virtual_vertex: int | None = None) -> LockedState:
    """Start state for the locked flow with the virtual coordinate set to ``alpha``.

    ``alpha = 0`` is rejected: z = 0 is invariant under the flow, so the
    locked system would never leave the plane.
    """
    if planar0.dim != 2:
        raise InvalidArgumentError("locked_initial needs a planar realization")
    if alpha == 0 or not np.isfinite(alpha):
        raise InvalidArgumentError("initial virtual coordinate must be finite and nonzero")
    vv = planar0.num_vertices if virtual_vertex is None else virtual_vertex
    return LockedState(planar0, vv, float(alpha))


def _as_state(sys: EnergySystem, x0) -> np.ndarray:
    if isinstance(x0, LockedState):
        if not sys.is_locked or x0.virtual_vertex != sys.virtual_vertex:
            raise InvalidArgumentError("locked state does not match the system")
        x0 = x0.to_vector()
    elif isinstance(x0, Realization):
        x0 = x0.coords
    return sys.check_state(x0)


def _integrate_rk4(sys, x0, cfg):
    ei, ej, d2 = sys._arrays
    vv = sys.virtual_vertex - 1 if sys.is_locked else -1
    times, states, pots, count, reason, gnorm = _kernels.rk4_flow(
        x0, ei, ej, d2, sys.num_vertices, sys.dim, vv,
        cfg.dt, cfg.t_max, cfg.grad_tol, cfg.record_every)
    return Trajectory(times[:count].copy(), states[:count].copy(), pots[:count].copy(),
                      _KERNEL_REASONS[reason], float(gnorm))


class _CappedRK45(RK45):
    # step size may at most double between accepted steps
    MAX_FACTOR = 2.0


def _integrate_rk45(sys, x0, cfg):
    solver = _CappedRK45(lambda t, y: -gradient(sys, y), 0.0, x0, cfg.t_max,
                         first_step=min(cfg.dt, cfg.t_max), rtol=cfg.rel_tol, atol=cfg.abs_tol)
    times, states, pots = [0.0], [x0.copy()], [potential(sys, x0)]
    t, x = 0.0, x0.copy()
    reason = TerminalReason.HORIZON_REACHED
    steps = 0
    while True:
        gnorm = float(np.linalg.norm(gradient(sys, x)))
        if gnorm <= cfg.grad_tol:
            reason = TerminalReason.GRADIENT_BELOW_TOL
            break
        if solver.status == "finished":
            break
        solver.step()
        if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
            reason = TerminalReason.STEP_FAILURE
            break
        t, x = solver.t, solver.y.copy()
        steps += 1
        if steps % cfg.record_every == 0:
            times.append(t)
            states.append(x)
            pots.append(potential(sys, x))
    if times[-1] != t:
        times.append(t)
        states.append(x)
        pots.append(potential(sys, x))
    return Trajectory(np.array(times), np.array(states), np.array(pots), reason, gnorm)


def integrate(sys: EnergySystem, x0, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Follow ``x' = -grad V(x)`` from ``x0``.

    Stops once the gradient norm drops to ``cfg.grad_tol`` or at ``cfg.t_max``.
    The first and last samples are always recorded; a non-finite step ends the
    run with ``StepFailure`` and keeps the last finite state.
    """
    cfg = cfg or IntegratorConfig()
    x0 = _as_state(sys, x0)
    if cfg.method is Method.RK4_FIXED:
        return _integrate_rk4(sys, x0, cfg)
    return _integrate_rk45(sys, x0, cfg)


def csv_header(sys: EnergySystem) -> list[str]:
    axes = "xyz"[: sys.dim]
    cols = ["t"] + [f"p{i}{a}" for i in range(1, sys.num_vertices + 1) for a in axes]
    if sys.is_locked:
        cols.append(f"p{sys.virtual_vertex}z")
    return cols + ["V"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_to_csv(sys: EnergySystem, traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(sys))
    for t, x, v in zip(traj.times, traj.states, traj.potentials):
        writer.writerow([_fmt(t), *map(_fmt, x), _fmt(v)])
    return buf.getvalue()


def write_trajectory_csv(sys: EnergySystem, traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trajectory_to_csv(sys, traj))
    return path


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    return rows[0], np.array([[float(v) for v in row] for row in rows[1:]])
