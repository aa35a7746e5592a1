"""Equilibrium refinement, stability classification and basin estimates."""
from __future__ import annotations

import enum
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import check_int
from .dynamics import IntegratorConfig, TerminalReason, Trajectory, integrate, locked_initial
from .energy import EnergySystem, gradient, hessian, lifted_gradient, lifted_hessian, potential
from .exceptions import InvalidArgumentError, NumericalError, RefinementFailedError
from .geometry import DistanceSpec, LockedState, Realization, are_congruent

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-11
POT_TOL = 1e-10
EIG_REL_TOL = 1e-7
SPAN_REL_TOL = 1e-6
PINV_RCOND = 1e-8


class Classification(enum.Enum):
    CORRECT = "Correct"
    SADDLE_OR_UNSTABLE = "IncorrectSaddleOrUnstable"
    NO_NEGATIVE_EIGENVALUE = "IncorrectNoNegativeEigenvalue"
    DEGENERATE = "Degenerate"

    def __str__(self):
        return self.value

    @property
    def is_correct(self) -> bool:
        return self is Classification.CORRECT


@dataclass(frozen=True)
class EquilibriumReport:
    state: np.ndarray
    grad_norm: float
    potential_value: float
    hessian_spectrum: np.ndarray
    classification: Classification
    degenerate: bool
    eig_tol: float

    @property
    def min_eigenvalue(self) -> float:
        return float(self.hessian_spectrum[0])

    @property
    def num_null(self) -> int:
        return int(np.sum(np.abs(self.hessian_spectrum) <= self.eig_tol))

    def to_dict(self) -> dict:
        return {
            "state": [float(v) for v in self.state],
            "grad_norm": float(self.grad_norm),
            "potential": float(self.potential_value),
            "spectrum": [float(v) for v in self.hessian_spectrum],
            "classification": self.classification.value,
            "degenerate": bool(self.degenerate),
        }


def _as_vector(sys: EnergySystem, x) -> np.ndarray:
    if isinstance(x, LockedState):
        x = x.to_vector()
    elif isinstance(x, Realization):
        x = x.coords
    return sys.check_state(x)


def refine_equilibrium(sys: EnergySystem, x_guess, newton_tol: float = NEWTON_TOL,
                       max_iter: int = 50, start_tol: float = 1e-3) -> np.ndarray:
    """Sharpen an approximate critical point with Newton steps on the gradient.

    The Hessian is singular along rigid motions at every critical point, so
    steps use a pseudo-inverse with small singular values cut.  A step that
    blows the gradient up is replaced by a short stretch of gradient flow.
    """
    x = _as_vector(sys, x_guess)
    g = gradient(sys, x)
    gn = float(np.linalg.norm(g))
    if gn > start_tol:
        raise InvalidArgumentError(
            f"gradient norm {gn:.3g} too large to refine (needs <= {start_tol:g})")
    best, best_gn = x, gn
    for _ in range(max_iter):
        if gn <= newton_tol:
            return x
        step = np.linalg.pinv(hessian(sys, x), rcond=PINV_RCOND, hermitian=True) @ g
        x_new = x - step
        g_new = gradient(sys, x_new) if np.all(np.isfinite(x_new)) else None
        if g_new is None or np.linalg.norm(g_new) > 10.0 * gn:
            flow = integrate(sys, x, IntegratorConfig(t_max=1.0, grad_tol=newton_tol,
                                                      record_every=10 ** 6))
            x_new = flow.final_state
            g_new = gradient(sys, x_new)
        x, g = x_new, g_new
        gn = float(np.linalg.norm(g))
        if gn < best_gn:
            best, best_gn = x, gn
    if best_gn <= newton_tol:
        return best
    raise RefinementFailedError(
        f"no convergence to {newton_tol:g} in {max_iter} iterations", best, best_gn)


def is_degenerate(points, rel_tol: float = SPAN_REL_TOL, ambient_dim: int | None = None) -> bool:
    """Whether the points span fewer dimensions than their ambient space."""
    pts = np.asarray(points, dtype=np.float64)
    dim = pts.shape[1] if ambient_dim is None else ambient_dim
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return True
    return int(np.sum(sv > rel_tol * sv[0])) < dim


def classify(sys: EnergySystem, x_eq, pot_tol: float = POT_TOL,
             eig_rel_tol: float = EIG_REL_TOL, grad_tol: float = 1e-8) -> EquilibriumReport:
    x = _as_vector(sys, x_eq)
    gn = float(np.linalg.norm(gradient(sys, x)))
    if gn > grad_tol:
        raise InvalidArgumentError(f"not an equilibrium: gradient norm {gn:.3g} > {grad_tol:g}")
    try:
        spectrum = np.linalg.eigvalsh(hessian(sys, x))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Hessian eigensolve failed") from exc
    eig_tol = eig_rel_tol * float(np.max(np.abs(spectrum)))
    value = potential(sys, x)
    degenerate = is_degenerate(sys.lift(x))
    if value <= pot_tol:
        label = Classification.CORRECT
    elif spectrum[0] < -eig_tol:
        label = Classification.SADDLE_OR_UNSTABLE
    elif degenerate:
        label = Classification.DEGENERATE
    else:
        label = Classification.NO_NEGATIVE_EIGENVALUE
    return EquilibriumReport(x, gn, value, spectrum, label, degenerate, eig_tol)


def _rigid_motion_basis(points: np.ndarray) -> np.ndarray:
    """Orthonormal basis of infinitesimal rigid motions of a 3-D point set."""
    n = points.shape[0]
    fields = []
    for axis in np.eye(3):
        fields.append(np.tile(axis, n))
        fields.append(np.cross(axis, points).ravel())
    u, s, _ = np.linalg.svd(np.array(fields).T, full_matrices=False)
    return u[:, s > 1e-10 * s[0]]


def lift_correspondence_clauses(q_eq, spec3d: DistanceSpec, virtual_vertex: int | None = None,
                   newton_tol: float = 1e-9, eig_rel_tol: float = EIG_REL_TOL) -> dict:
    """Check the locked/tetrahedral correspondence at a locked critical point.

    Returns the three clause verdicts (equal potentials, lifted state critical
    for the 3-D potential, matching negative-eigenvalue presence) with the
    numbers behind them.
    """
    if isinstance(q_eq, LockedState):
        virtual_vertex = q_eq.virtual_vertex
        q_eq = q_eq.to_vector()
    locked = EnergySystem.locked(spec3d, virtual_vertex)
    q = locked.check_state(q_eq)
    gn = float(np.linalg.norm(gradient(locked, q)))
    if gn > newton_tol:
        raise InvalidArgumentError(f"not a refined equilibrium: gradient norm {gn:.3g}")
    tetra = EnergySystem.plain(spec3d)
    pts = locked.lift(q)
    p = pts.ravel()

    v_locked, v_tetra = potential(locked, q), potential(tetra, p)
    scale = max(abs(v_locked), abs(v_tetra))
    values_match = abs(v_locked - v_tetra) <= 1e-12 * scale

    g3 = lifted_gradient(tetra, p)
    basis = _rigid_motion_basis(pts)
    residual = float(np.linalg.norm(g3 - basis @ (basis.T @ g3)))
    lifted_critical = residual <= newton_tol

    spec_locked = np.linalg.eigvalsh(hessian(locked, q))
    spec_tetra = np.linalg.eigvalsh(lifted_hessian(tetra, p))
    neg_locked = spec_locked[0] < -eig_rel_tol * np.max(np.abs(spec_locked))
    neg_tetra = spec_tetra[0] < -eig_rel_tol * np.max(np.abs(spec_tetra))
    return {
        "values_match": bool(values_match),
        "lifted_critical": bool(lifted_critical),
        "spectra_agree": bool(neg_locked == neg_tetra),
        "potential_locked": v_locked,
        "potential_tetra": v_tetra,
        "lifted_grad_residual": residual,
        "min_eig_locked": float(spec_locked[0]),
        "min_eig_tetra": float(spec_tetra[0]),
    }


def verify_lift_correspondence(q_eq, spec3d: DistanceSpec, virtual_vertex: int | None = None,
                                 newton_tol: float = 1e-9, eig_rel_tol: float = EIG_REL_TOL) -> bool:
    clauses = lift_correspondence_clauses(q_eq, spec3d, virtual_vertex, newton_tol, eig_rel_tol)
    ok = clauses["values_match"] and clauses["lifted_critical"] and clauses["spectra_agree"]
    if not ok:
        failed = [k for k in ("values_match", "lifted_critical", "spectra_agree") if not clauses[k]]
        logger.info("correspondence check failed on %s: %s", ", ".join(failed), clauses)
    return ok


# -- initial-condition samplers ------------------------------------------------

@dataclass(frozen=True)
class InitSampler:
    """Draws initial states for a system from a numpy Generator.

    ``kind`` is ``"box"`` (every coordinate uniform in [lo, hi]),
    ``"collinear"`` (agents on the x-axis, other axes exactly zero) or
    ``"flat"`` (3-D agents with z = 0; locked states with a zero virtual
    coordinate).  The last two start on invariant sets of the flow and are
    meant for hunting incorrect equilibria.
    """

    lo: float
    hi: float
    virtual_value: float | None = None
    kind: str = "box"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise InvalidArgumentError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.kind not in ("box", "collinear", "flat"):
            raise InvalidArgumentError(f"unknown sampler kind {self.kind!r}")

    def _virtual(self, sys):
        z = self.virtual_value if self.virtual_value is not None else sys.alpha
        if z is None:
            z = 1.0
        return z

    def __call__(self, sys: EnergySystem, rng: np.random.Generator) -> np.ndarray:
        n, dim = sys.num_vertices, sys.dim
        if self.kind == "box":
            pos = rng.uniform(self.lo, self.hi, size=n * dim)
        else:
            pts = np.zeros((n, dim))
            if self.kind == "collinear":
                pts[:, 0] = rng.uniform(self.lo, self.hi, size=n)
            else:
                if dim != 3 and not sys.is_locked:
                    raise InvalidArgumentError("flat sampler needs a 3-D or locked system")
                pts[:, :2] = rng.uniform(self.lo, self.hi, size=(n, 2))
            pos = pts.ravel()
        if not sys.is_locked:
            return pos
        if self.kind == "flat":
            return np.append(pos, 0.0)
        planar = Realization(pos, 2, n)
        return locked_initial(planar, self._virtual(sys), sys.virtual_vertex).to_vector()


def sampler_uniform_box(lo: float, hi: float, virtual_value: float | None = None) -> InitSampler:
    return InitSampler(lo, hi, virtual_value)


@dataclass(frozen=True)
class FixedSampler:
    """Always returns the same initial state."""

    state: tuple

    def __call__(self, sys, rng):
        return np.array(self.state, dtype=np.float64)


def sampler_fixed(x) -> FixedSampler:
    return FixedSampler(tuple(float(v) for v in np.ravel(x)))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (seed, trial index)."""
    return np.random.default_rng([seed, trial])


# -- Monte Carlo basin estimate -------------------------------------------------

@dataclass
class TrialOutcome:
    index: int
    initial_state: np.ndarray
    outcome: str  # "correct", "incorrect" or "unresolved"
    report: EquilibriumReport | None
    retried: bool
    trajectories: list = field(default_factory=list)


@dataclass
class BasinStats:
    n_trials: int
    n_correct: int
    n_incorrect: int
    n_unresolved: int
    incorrect_witnesses: list
    seed: int
    n_retried: int = 0
    outcomes: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "n_correct": self.n_correct,
            "n_incorrect": self.n_incorrect,
            "n_unresolved": self.n_unresolved,
            "n_retried": self.n_retried,
            "seed": self.seed,
            "witnesses": [w.to_dict() for w in self.incorrect_witnesses],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _settle(sys, x0, cfg, newton_tol):
    traj = integrate(sys, x0, cfg)
    if traj.terminal_reason is not TerminalReason.GRADIENT_BELOW_TOL:
        return traj, None
    try:
        x_eq = refine_equilibrium(sys, traj.final_state, newton_tol)
    except RefinementFailedError as exc:
        logger.debug("refinement failed (%.3g), using integrator endpoint", exc.grad_norm)
        x_eq = exc.best
    return traj, classify(sys, x_eq, grad_tol=max(cfg.grad_tol, newton_tol))


def run_trial(sys: EnergySystem, sampler: Callable, cfg: IntegratorConfig, seed: int, index: int,
              retry_factor: float | None = 10.0, newton_tol: float = NEWTON_TOL,
              keep_trajectories: bool = False) -> TrialOutcome:
    x0 = np.asarray(sampler(sys, trial_rng(seed, index)), dtype=np.float64)
    traj, report = _settle(sys, x0, cfg, newton_tol)
    trajs = [traj]
    retried = False
    if report is None and retry_factor and traj.terminal_reason is TerminalReason.HORIZON_REACHED:
        retried = True
        traj, report = _settle(sys, x0, cfg.replace(t_max=cfg.t_max * retry_factor), newton_tol)
        trajs.append(traj)
    if report is None:
        outcome = "unresolved"
    else:
        outcome = "correct" if report.classification.is_correct else "incorrect"
    return TrialOutcome(index, x0, outcome, report, retried, trajs if keep_trajectories else [])


def _run_chunk(args):
    sys, sampler, cfg, seed, indices, retry_factor, newton_tol, keep = args
    return [run_trial(sys, sampler, cfg, seed, k, retry_factor, newton_tol, keep) for k in indices]


def _dedupe(sys, reports, tol):
    kept = []
    for rep in reports:
        real = sys.to_realization(rep.state)
        if not any(are_congruent(real, sys.to_realization(k.state), tol) for k in kept):
            kept.append(rep)
    return kept


def monte_carlo_basin(sys: EnergySystem, sampler: Callable, n_trials: int,
                      cfg: IntegratorConfig | None = None, seed: int = 0,
                      retry_factor: float | None = 10.0, newton_tol: float = NEWTON_TOL,
                      dedupe_tol: float = 1e-4, jobs: int = 1,
                      keep_trajectories: bool = False) -> BasinStats:
    """Integrate, refine and classify from ``n_trials`` sampled starts.

    Trial ``k`` draws its start from ``trial_rng(seed, k)``, so tallies do not
    depend on ``jobs``.  Runs that hit the horizon are retried once with
    ``retry_factor`` times the horizon before being counted unresolved.
    Incorrect equilibria are kept as witnesses, one per congruence class.
    """
    n_trials = check_int(n_trials, "n_trials", 1)
    jobs = check_int(jobs, "jobs", 1)
    cfg = cfg or IntegratorConfig()
    indices = list(range(n_trials))
    if jobs == 1:
        outcomes = _run_chunk((sys, sampler, cfg, seed, indices, retry_factor, newton_tol,
                               keep_trajectories))
    else:
        chunks = [indices[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_chunk, [(sys, sampler, cfg, seed, c, retry_factor, newton_tol,
                                           keep_trajectories) for c in chunks if c])
            outcomes = sorted((o for part in parts for o in part), key=lambda o: o.index)
    counts = {"correct": 0, "incorrect": 0, "unresolved": 0}
    for o in outcomes:
        counts[o.outcome] += 1
    witnesses = _dedupe(sys, [o.report for o in outcomes if o.outcome == "incorrect"], dedupe_tol)
    return BasinStats(n_trials, counts["correct"], counts["incorrect"], counts["unresolved"],
                      witnesses, seed, sum(o.retried for o in outcomes), outcomes)


def perturbation_escape(sys: EnergySystem, x_eq, eps: float = 1e-3, seed: int = 0,
                        cfg: IntegratorConfig | None = None) -> Trajectory:
    """Flow from a random ``eps``-perturbation of an equilibrium.

    At an unstable equilibrium the returned trajectory ends well below the
    equilibrium's potential.
    """
    x = _as_vector(sys, x_eq)
    rng = trial_rng(seed, 0)
    delta = rng.normal(size=x.size)
    delta *= eps / np.linalg.norm(delta)
    return integrate(sys, x + delta, cfg)
