"""Hybrid flux limiter, correction term, and the decoupled step drivers.

The convective flux through an interior edge blends central differencing
(small chemoattractant jumps) with first-order upwinding (large jumps) via
the piecewise limiter S. The corrected decoupled step adds a lagged
increment of the chemoattractant source, scaled by a safety factor, to the
chem-equation right-hand side; the plain decoupled step omits it; the
lagged step solves the cell equation first against the old chemoattractant
field; the coupled oracle iterates the two solves to a fixed point and
serves as the accuracy reference in tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import model as _model
from .linalg import LinearSolver, SparseMatrix, check_m_matrix_pattern
from .mesh import Mesh
from .model import ModelSpec, chem_source_value
from .state import State

log = logging.getLogger(__name__)

VARIANT_CORRECTED = "corrected-decoupled"
VARIANT_PLAIN = "plain-decoupled"
VARIANT_LAGGED = "lagged"
VARIANT_ORACLE = "coupled-oracle"
VARIANT_KINDS = (VARIANT_CORRECTED, VARIANT_PLAIN, VARIANT_LAGGED, VARIANT_ORACLE)

BETA_FIXED = "fixed1"
BETA_FORMULA = "formula"

DEFAULT_ORACLE_CELL_LIMIT = 4096


class SchemeError(RuntimeError):
    """Assembly or stepping violated a scheme precondition or invariant."""


@dataclass(frozen=True)
class FluxLimiter:
    """Piecewise flux map S with hybridization constant eps.

    S(x) = 0 for x < -t, x/2 for |x| <= t, x for x > t, with threshold
    t = 2(mu - eps)/a. Requires 0 <= eps <= mu so that mu + a*S(x) >= eps,
    which keeps the assembled off-diagonals nonpositive.
    """

    mu: float
    a: float
    eps: float = 0.0

    def __post_init__(self):
        if self.mu <= 0 or self.a <= 0:
            raise ValueError("mu and a must be positive")
        if not 0.0 <= self.eps <= self.mu:
            raise ValueError(f"eps must lie in [0, mu], got {self.eps}")
        object.__setattr__(self, "threshold", 2.0 * (self.mu - self.eps) / self.a)


def limiter_S(lim: FluxLimiter, x):
    """Evaluate the limiter on a scalar or array."""
    arr = np.asarray(x, dtype=float)
    t = lim.threshold
    out = np.where(arr < -t, 0.0, np.where(arr > t, arr, 0.5 * arr))
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SchemeVariant:
    """Which step driver to run and how to pick the correction factor.

    ``chem_dynamics`` normally stays None and is inherited from the model;
    setting it to a value that disagrees with the model is an error.
    """

    kind: str = VARIANT_CORRECTED
    beta_policy: str = BETA_FIXED
    chem_dynamics: str | None = None

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown scheme variant {self.kind!r}")
        if self.beta_policy not in (BETA_FIXED, BETA_FORMULA):
            raise ValueError(f"unknown beta policy {self.beta_policy!r}")

    def dynamics(self, model: ModelSpec) -> str:
        if self.chem_dynamics is not None and self.chem_dynamics != model.chem_dynamics:
            raise SchemeError(
                f"variant pins {self.chem_dynamics} chem dynamics but the model "
                f"is {model.chem_dynamics}"
            )
        return model.chem_dynamics


def correction_term(state: State, model: ModelSpec, mesh: Mesh) -> np.ndarray:
    """Lagged chem-source increment T_K = m(K)(src(u^n) - src(u^{n-1})).

    Zero at step 0 because u_prev equals u there.
    """
    if state.n_cells != mesh.n_cells:
        raise ValueError("state and mesh sizes differ")
    src_now = chem_source_value(model, state.u)
    src_prev = chem_source_value(model, state.u_prev)
    return mesh.cell_measures * (src_now - src_prev)


def beta_n(state: State, mesh: Mesh) -> float:
    """Safety factor keeping the corrected chem right-hand side nonnegative.

    Uses the saturated g(u) = u/(u+1) (the form the factor was derived
    for) regardless of the model's source kind; models with a linear source
    run with the fixed policy beta = 1 in practice. Over the cells where
    2 g(u^n) - g(u^{n-1}) < 0 the factor is the minimum of
    g(u^n) / (g(u^{n-1}) - g(u^n)); it is 1 when no such cell exists,
    including at step 0.
    """
    if state.n_cells != mesh.n_cells:
        raise ValueError("state and mesh sizes differ")
    g_now = state.u / (state.u + 1.0)
    g_prev = state.u_prev / (state.u_prev + 1.0)
    mask = 2.0 * g_now - g_prev < 0.0
    if not mask.any():
        return 1.0
    denom = g_prev[mask] - g_now[mask]
    assert np.all(denom > 0.0)  # membership forces g_prev > 2 g_now >= g_now
    return float(min(1.0, np.min(g_now[mask] / denom)))


def assemble_chem_system(
    state: State,
    model: ModelSpec,
    mesh: Mesh,
    lim: FluxLimiter,
    variant: SchemeVariant,
    beta: float = 1.0,
    u_source: np.ndarray | None = None,
) -> tuple[SparseMatrix, np.ndarray]:
    """Assemble the chemoattractant system B c^{n+1} = G.

    B has diagonal sum(tau) + gamma*m(K) (plus m(K)/dt for parabolic
    dynamics) and off-diagonal -tau per neighbor. G carries the source from
    u^n, the correction term for the corrected variant, and m(K) c^n / dt
    for parabolic dynamics. The lagged variant and the coupled oracle pass
    the freshly solved density as ``u_source``. ``lim`` is unused here (the
    chem operator has no convective flux) and kept for assembly-call
    symmetry.
    """
    del lim
    dynamics = variant.dynamics(model)
    m = mesh.cell_measures
    pattern = mesh.adjacency_csr()

    diag = mesh.tau_sum_interior + model.chem_decay * m
    rhs = m * chem_source_value(model, state.u if u_source is None else u_source)
    if dynamics == _model.CHEM_PARABOLIC:
        if state.dt <= 0:
            raise SchemeError("parabolic chem dynamics needs a positive dt")
        diag = diag + m / state.dt
        rhs = rhs + m * state.c / state.dt
    if variant.kind == VARIANT_CORRECTED:
        rhs = rhs + beta * correction_term(state, model, mesh)

    data = np.zeros(pattern.nnz)
    data[pattern.diag_slots] = diag
    data[pattern.kl_slots] = -mesh.interior_tau
    data[pattern.lk_slots] = -mesh.interior_tau
    return SparseMatrix(mesh.n_cells, pattern.indptr, pattern.indices, data), rhs


def assemble_cell_system(
    state: State,
    c_new: np.ndarray,
    model: ModelSpec,
    mesh: Mesh,
    lim: FluxLimiter,
    variant: SchemeVariant,
) -> tuple[SparseMatrix, np.ndarray]:
    """Assemble the cell-density system A u^{n+1} = F.

    ``c_new`` is the freshly solved chemoattractant field for the corrected
    and plain variants, or c^n for the lagged variant. Growth terms follow
    the semi-implicit splits: quadratic logistic adds r*m*u^n to both the
    diagonal and F; the cubic kind adds -m*u^n(1-u^n) to the diagonal only
    and requires the diagonal to stay positive.
    """
    if state.dt <= 0:
        raise SchemeError("cell system needs a positive dt")
    m = mesh.cell_measures
    u = state.u
    pattern = mesh.adjacency_csr()
    ka, kb = mesh.interior_cell_a, mesh.interior_cell_b
    tau = mesh.interior_tau

    dc = c_new[kb] - c_new[ka]
    w_plus = tau * (model.cell_diffusion + model.chemo_sensitivity * limiter_S(lim, dc))
    w_minus = tau * (
        model.cell_diffusion + model.chemo_sensitivity * limiter_S(lim, -dc)
    )

    diag = (
        m / state.dt
        + np.bincount(ka, weights=w_plus, minlength=mesh.n_cells)
        + np.bincount(kb, weights=w_minus, minlength=mesh.n_cells)
    )
    rhs = m * u / state.dt
    if model.growth == _model.GROWTH_QUADRATIC:
        growth = model.growth_rate * m * u
        diag = diag + growth
        rhs = rhs + growth
    elif model.growth == _model.GROWTH_CUBIC:
        diag = diag - m * u * (1.0 - u)
        if np.any(diag <= 0):
            raise SchemeError(
                "cubic growth made a diagonal entry nonpositive; reduce dt"
            )

    data = np.zeros(pattern.nnz)
    data[pattern.diag_slots] = diag
    data[pattern.kl_slots] = -w_minus
    data[pattern.lk_slots] = -w_plus
    return SparseMatrix(mesh.n_cells, pattern.indptr, pattern.indices, data), rhs


def _require_nonnegative(field: np.ndarray, name: str):
    floor = -1e-12 * max(float(field.max()), 0.0)
    worst = float(field.min())
    if worst < floor:
        raise SchemeError(
            f"{name} went negative beyond tolerance: min={worst:.3e}, "
            f"allowed {floor:.3e} (assembly bug?)"
        )


def _check_chem_positivity(c_new: np.ndarray, g_vec: np.ndarray):
    # A nonnegative right-hand side makes c >= 0 a hard guarantee (M-matrix
    # inverse is positive); breaking it then means an assembly/solver bug.
    # With the fixed beta = 1 policy the corrected right-hand side can dip
    # below zero under violent density drops, and a transiently negative c
    # is then the scheme's true output, not a defect.
    if float(g_vec.min()) >= -1e-15 * max(float(np.abs(g_vec).max()), 1.0):
        _require_nonnegative(c_new, "c")
    elif float(c_new.min()) < 0.0:
        log.warning(
            "chem right-hand side had negative entries (min %.3e); "
            "c dips to %.3e this step",
            float(g_vec.min()),
            float(c_new.min()),
        )


def _check_structure(matrix, expected_slack, by, what):
    report = check_m_matrix_pattern(matrix)
    if not report.diag_positive or not report.offdiag_nonpositive:
        raise SchemeError(f"{what} lost the M-matrix sign pattern")
    slack = report.row_slack if by == "rows" else report.col_slack
    if np.any(slack < (1.0 - 1e-12) * expected_slack):
        raise SchemeError(f"{what} dominance slack fell below the assembled value")


def step(
    state: State,
    model: ModelSpec,
    mesh: Mesh,
    lim: FluxLimiter,
    variant: SchemeVariant,
    solver: LinearSolver,
    *,
    check_matrices: bool = False,
    debug_checks: bool = False,
) -> State:
    """Advance one time step with the requested decoupled variant.

    Corrected/plain: chem solve first, then the cell solve against the new
    field. Lagged: cell solve against c^n first, then the chem solve with
    the u^{n+1} source. Returns a new State with u_prev <- u^n.
    """
    if variant.kind == VARIANT_ORACLE:
        return step_coupled_oracle(state, model, mesh, lim, solver)
    if state.dt <= 0:
        raise SchemeError("step needs a positive dt")

    if variant.kind in (VARIANT_CORRECTED, VARIANT_PLAIN):
        if variant.kind == VARIANT_CORRECTED and variant.beta_policy == BETA_FORMULA:
            beta = beta_n(state, mesh)
        else:
            beta = 1.0
        b_mat, g_vec = assemble_chem_system(state, model, mesh, lim, variant, beta)
        c_new, _ = solver.solve(b_mat, g_vec)
        a_mat, f_vec = assemble_cell_system(state, c_new, model, mesh, lim, variant)
        u_new, _ = solver.solve(a_mat, f_vec)
    elif variant.kind == VARIANT_LAGGED:
        a_mat, f_vec = assemble_cell_system(state, state.c, model, mesh, lim, variant)
        u_new, _ = solver.solve(a_mat, f_vec)
        b_mat, g_vec = assemble_chem_system(
            state, model, mesh, lim, variant, 1.0, u_source=u_new
        )
        c_new, _ = solver.solve(b_mat, g_vec)
    else:  # pragma: no cover - guarded by SchemeVariant validation
        raise SchemeError(f"unhandled variant {variant.kind!r}")

    if check_matrices:
        m = mesh.cell_measures
        expected_b = model.chem_decay * m
        if variant.dynamics(model) == _model.CHEM_PARABOLIC:
            expected_b = expected_b + m / state.dt
        _check_structure(b_mat, expected_b, "rows", "chem matrix")
        expected_a = m / state.dt
        if model.growth == _model.GROWTH_QUADRATIC:
            expected_a = expected_a + model.growth_rate * m * state.u
        elif model.growth == _model.GROWTH_CUBIC:
            expected_a = expected_a - m * state.u * (1.0 - state.u)
        _check_structure(a_mat, expected_a, "cols", "cell matrix")

    _require_nonnegative(u_new, "u")
    _check_chem_positivity(c_new, g_vec)
    if debug_checks and model.growth == _model.GROWTH_NONE:
        m = mesh.cell_measures
        mass_new = float(m @ u_new)
        mass_old = float(m @ state.u)
        if abs(mass_new - mass_old) > 1e-10 * max(abs(mass_old), 1e-300):
            raise SchemeError(
                f"mass drifted within one step: {mass_old} -> {mass_new}"
            )

    return State(
        u=u_new, c=c_new, u_prev=state.u, step_index=state.step_index + 1, dt=state.dt
    )


def step_coupled_oracle(
    state: State,
    model: ModelSpec,
    mesh: Mesh,
    lim: FluxLimiter,
    solver: LinearSolver,
    tol: float = 1e-12,
    max_iter: int = 200,
    cell_limit: int = DEFAULT_ORACLE_CELL_LIMIT,
) -> State:
    """One step of the fully coupled scheme via fixed-point iteration.

    Starts from the plain decoupled chem solve, then alternates cell and
    chem solves (the latter sourced from the current u iterate) until the
    max-norm change of (u, c) drops to ``tol``. Intended as a small-scale
    accuracy reference; refuses meshes above ``cell_limit`` cells.
    """
    if mesh.n_cells > cell_limit:
        raise SchemeError(
            f"coupled oracle limited to {cell_limit} cells, mesh has {mesh.n_cells}"
        )
    if tol <= 0:
        raise ValueError("tol must be positive")
    if state.dt <= 0:
        raise SchemeError("step needs a positive dt")
    plain = SchemeVariant(kind=VARIANT_PLAIN)
    b_mat, g_vec = assemble_chem_system(state, model, mesh, lim, plain, 1.0)
    c_k, _ = solver.solve(b_mat, g_vec)
    u_k = state.u
    delta = np.inf
    for _ in range(max_iter):
        a_mat, f_vec = assemble_cell_system(state, c_k, model, mesh, lim, plain)
        u_next, _ = solver.solve(a_mat, f_vec)
        b_mat, g_vec = assemble_chem_system(
            state, model, mesh, lim, plain, 1.0, u_source=u_next
        )
        c_next, _ = solver.solve(b_mat, g_vec)
        delta = max(
            float(np.max(np.abs(u_next - u_k))), float(np.max(np.abs(c_next - c_k)))
        )
        u_k, c_k = u_next, c_next
        if delta <= tol:
            _require_nonnegative(u_k, "u")
            _require_nonnegative(c_k, "c")
            return State(
                u=u_k,
                c=c_k,
                u_prev=state.u,
                step_index=state.step_index + 1,
                dt=state.dt,
            )
    raise SchemeError(
        f"coupled oracle did not converge in {max_iter} iterations "
        f"(last change {delta:.3e}, tol {tol:.3e})"
    )
