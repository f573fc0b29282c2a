"""Backend-neutral conic program container and its two interpreters.

Programs are assembled as named variables (Hermitian matrix blocks or
real scalars, each with a cone tag) plus constraints whose left sides
are sums of structured linear maps applied to single variables; each
constraint either equals its right side or dominates it in PSD order.
The same description is consumed twice:

* :func:`solve` lowers it to cvxpy (Hermitian variables, native complex
  equalities) and runs CLARABEL, falling back to SCS on failure.
* :func:`evaluate` recomputes every constraint residual and cone
  violation with plain numpy so returned solutions can be verified
  independently of the solver's own reporting.

Supported linear-map tags on a matrix variable X (left factor size dL,
right factor size dR where applicable):

* ``("id",)``: X itself.
* ``("ptrace", axis, dL, dR)``: partial trace, axis 0 removes the left
  factor, axis 1 the right.
* ``("pt", axis, dL, dR)``: partial transpose of one factor.
* ``("trace",)``: full trace (scalar).
* ``("reduction", s, dL, dR)``: ``1 (x) tr_left(X) - X/s``.

And on a scalar variable:

* ``("value",)``: the scalar itself.
* ``("scalar_matrix", C)``: the scalar times the constant matrix C.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "VarSpec",
    "Term",
    "Constraint",
    "ObjectiveTerm",
    "ConicProblem",
    "SolveOutcome",
    "solve",
    "evaluate",
    "SOLVE_TOL",
]

SOLVE_TOL = 1e-8

PSD = "psd"
FREE = "free"
NONNEG = "nonneg"


@dataclass(frozen=True)
class VarSpec:
    name: str
    side: int  # matrix side length; 1 means scalar
    cone: str  # "psd" | "free" | "nonneg"

    def __post_init__(self):
        if self.cone not in (PSD, FREE, NONNEG):
            raise ValueError(f"unknown cone {self.cone!r}")
        if self.side < 1:
            raise ValueError(f"side must be >= 1, got {self.side}")
        if self.cone == NONNEG and self.side != 1:
            raise ValueError("nonneg cone is only supported for scalars")


@dataclass(frozen=True)
class Term:
    var: str
    coeff: complex
    op: tuple


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[Term, ...]
    rhs: Any  # ndarray for matrix-valued, float for scalar-valued
    kind: str = "eq"  # "eq": lhs == rhs; "psd": lhs - rhs >= 0 in PSD order


@dataclass(frozen=True)
class ObjectiveTerm:
    var: str
    coeff: float
    op: tuple  # ("value",) for scalars, ("inner", C) for Re tr(C @ X)


@dataclass
class ConicProblem:
    """A conic feasibility/optimisation problem over Hermitian blocks."""

    variables: dict[str, VarSpec] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: tuple[str, tuple[ObjectiveTerm, ...]] = ("feas", ())

    def add_var(self, name: str, side: int, cone: str) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        self.variables[name] = VarSpec(name, side, cone)
        return name

    def add_constraint(self, name: str, terms: list[Term], rhs, kind: str = "eq") -> None:
        if kind not in ("eq", "psd"):
            raise ValueError(f"unknown constraint kind {kind!r}")
        for t in terms:
            if t.var not in self.variables:
                raise ValueError(f"constraint {name!r} uses unknown variable {t.var!r}")
        self.constraints.append(Constraint(name, tuple(terms), rhs, kind))

    def set_objective(self, sense: str, terms: list[ObjectiveTerm]) -> None:
        if sense not in ("max", "min", "feas"):
            raise ValueError(f"unknown sense {sense!r}")
        self.objective = (sense, tuple(terms))


@dataclass
class SolveOutcome:
    status: str  # "optimal" | "infeasible" | "trouble"
    values: dict[str, Any]
    objective: float | None
    stats: dict[str, Any]


# ===== numpy interpreter =====


def _apply_op(op: tuple, x):
    tag = op[0]
    if tag == "id":
        return x
    if tag == "value":
        return float(np.real(x))
    if tag == "trace":
        return complex(np.trace(x))
    if tag == "ptrace":
        _, axis, dl, dr = op
        t = np.asarray(x).reshape(dl, dr, dl, dr)
        return np.einsum("ijil->jl", t) if axis == 0 else np.einsum("ijkj->ik", t)
    if tag == "pt":
        _, axis, dl, dr = op
        t = np.asarray(x).reshape(dl, dr, dl, dr)
        out = t.transpose(2, 1, 0, 3) if axis == 0 else t.transpose(0, 3, 2, 1)
        return out.reshape(dl * dr, dl * dr)
    if tag == "reduction":
        _, s, dl, dr = op
        t = np.asarray(x).reshape(dl, dr, dl, dr)
        marg = np.einsum("ijil->jl", t)
        return np.kron(np.eye(dl), marg) - np.asarray(x) / float(s)
    if tag == "scalar_matrix":
        return float(np.real(x)) * op[1]
    raise ValueError(f"unknown op tag {tag!r}")


def evaluate(problem: ConicProblem, values: dict[str, Any]) -> dict[str, float]:
    """Constraint residuals and cone violations of a candidate solution.

    Returns a dict mapping ``constraint:<name>`` to the max-abs equality
    residual and ``cone:<var>`` to the cone violation (0 when satisfied).
    """
    out: dict[str, float] = {}
    for name, spec in problem.variables.items():
        v = values[name]
        if spec.side == 1:
            val = float(np.real(v))
            out[f"cone:{name}"] = max(0.0, -val) if spec.cone == NONNEG else 0.0
        else:
            m = np.asarray(v)
            herm_dev = float(np.max(np.abs(m - m.conj().T)))
            if spec.cone == PSD:
                lam = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
                out[f"cone:{name}"] = max(0.0, -lam, herm_dev)
            else:
                out[f"cone:{name}"] = herm_dev
    for con in problem.constraints:
        acc = None
        for t in con.terms:
            val = _apply_op(t.op, values[t.var])
            contrib = t.coeff * val if not isinstance(val, float) else float(
                np.real(t.coeff)
            ) * val
            acc = contrib if acc is None else acc + contrib
        diff = np.asarray(acc) - np.asarray(con.rhs)
        if con.kind == "psd":
            m = (diff + diff.conj().T) / 2
            herm_dev = float(np.max(np.abs(diff - diff.conj().T)))
            lam = float(np.linalg.eigvalsh(m)[0])
            out[f"constraint:{con.name}"] = max(0.0, -lam, herm_dev)
        else:
            out[f"constraint:{con.name}"] = float(np.max(np.abs(diff)))
    return out


def objective_value(problem: ConicProblem, values: dict[str, Any]) -> float:
    sense, terms = problem.objective
    total = 0.0
    for t in terms:
        if t.op[0] == "value":
            total += t.coeff * float(np.real(values[t.var]))
        elif t.op[0] == "inner":
            total += t.coeff * float(np.real(np.trace(t.op[1] @ np.asarray(values[t.var]))))
        else:
            raise ValueError(f"unknown objective op {t.op!r}")
    return total


# ===== cvxpy interpreter =====


def _build_cvxpy(problem: ConicProblem):
    import cvxpy as cp

    cvars: dict[str, Any] = {}
    cons = []
    for name, spec in problem.variables.items():
        if spec.side == 1:
            v = cp.Variable(nonneg=(spec.cone == NONNEG), name=name)
        else:
            v = cp.Variable((spec.side, spec.side), hermitian=True, name=name)
            if spec.cone == PSD:
                cons.append(v >> 0)
        cvars[name] = v

    def lower_term(t: Term):
        x = cvars[t.var]
        tag = t.op[0]
        if tag == "id":
            expr = x
        elif tag == "value":
            expr = x
        elif tag == "trace":
            expr = cp.trace(x)
        elif tag == "ptrace":
            _, axis, dl, dr = t.op
            expr = cp.partial_trace(x, [dl, dr], axis=axis)
        elif tag == "pt":
            _, axis, dl, dr = t.op
            expr = cp.partial_transpose(x, [dl, dr], axis=axis)
        elif tag == "reduction":
            _, s, dl, dr = t.op
            marg = cp.partial_trace(x, [dl, dr], axis=0)
            expr = cp.kron(np.eye(dl), marg) - x / float(s)
        elif tag == "scalar_matrix":
            expr = x * t.op[1]
        else:
            raise ValueError(f"unknown op tag {tag!r}")
        return t.coeff * expr if t.coeff != 1 else expr

    for con in problem.constraints:
        lhs = None
        for t in con.terms:
            e = lower_term(t)
            lhs = e if lhs is None else lhs + e
        if con.kind == "psd":
            cons.append(lhs - con.rhs >> 0 if np.any(con.rhs) else lhs >> 0)
        else:
            cons.append(lhs == con.rhs)

    sense, terms = problem.objective
    if sense == "feas" or not terms:
        obj = cp.Minimize(0)
    else:
        expr = 0
        for t in terms:
            if t.op[0] == "value":
                expr = expr + t.coeff * cvars[t.var]
            elif t.op[0] == "inner":
                expr = expr + t.coeff * cp.real(cp.trace(t.op[1] @ cvars[t.var]))
            else:
                raise ValueError(f"unknown objective op {t.op!r}")
        obj = cp.Maximize(expr) if sense == "max" else cp.Minimize(expr)
    return cp.Problem(obj, cons), cvars


def _extract(problem: ConicProblem, cvars) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for name, spec in problem.variables.items():
        raw = cvars[name].value
        if spec.side == 1:
            values[name] = float(raw) if raw is not None else 0.0
        else:
            m = np.asarray(raw, dtype=np.complex128)
            values[name] = (m + m.conj().T) / 2
    return values


def solve(
    problem: ConicProblem,
    tol: float = SOLVE_TOL,
    residual_tol: float | None = None,
) -> SolveOutcome:
    """Solve with CLARABEL, retrying with SCS on failure or inaccuracy.

    When ``residual_tol`` is given, an optimal solution whose replayed
    constraint residuals exceed it triggers the next solver; the best
    optimal solution found is returned if none meets the tolerance.
    """
    import cvxpy as cp

    prob, cvars = _build_cvxpy(problem)
    attempts = [
        ("CLARABEL", dict(solver="CLARABEL")),
        (
            "SCS",
            dict(solver="SCS", eps_abs=tol, eps_rel=tol, max_iters=50_000),
        ),
        # Degenerate optima can leave both defaults short of certification;
        # a slightly looser gap still beats any uncertified point.
        (
            "CLARABEL",
            dict(
                solver="CLARABEL",
                tol_gap_abs=3e-8,
                tol_gap_rel=3e-8,
                tol_feas=3e-8,
            ),
        ),
    ]
    sense = problem.objective[0]
    last_status = "trouble"
    stats: dict[str, Any] = {}
    candidates: list[SolveOutcome] = []
    for label, kwargs in attempts:
        try:
            prob.solve(**kwargs)
        except (KeyboardInterrupt, SystemExit, GeneratorExit):
            raise
        except BaseException as exc:  # noqa: BLE001
            # Rust-based solvers raise panics that do not derive from
            # Exception; treat any such escape as a failed attempt.
            stats = {"solver": label, "error": str(exc)}
            last_status = "trouble"
            continue
        status = prob.status
        stats = {"solver": label, "solver_status": status}
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            values = _extract(problem, cvars)
            residuals = evaluate(problem, values)
            worst = max(residuals.values(), default=0.0)
            stats["max_residual"] = worst
            verified = residual_tol is None or worst <= residual_tol
            outcome = SolveOutcome(
                "optimal",
                values,
                None if prob.value is None else float(prob.value),
                stats,
            )
            if verified and status == cp.OPTIMAL:
                return outcome
            if verified and sense == "feas":
                # For pure feasibility an inaccurate flag is irrelevant:
                # the replayed residuals are the whole proof.
                return outcome
            candidates.append(outcome)
            continue
        if status == cp.INFEASIBLE:
            return SolveOutcome("infeasible", {}, None, stats)
        if status == cp.UNBOUNDED:
            # An unbounded max-visibility program signals a modelling bug,
            # not a numerical accident; surface it as trouble.
            last_status = "trouble"
            continue
        last_status = "trouble"
    if candidates:
        # Every verified candidate is feasible, so for max problems the
        # largest objective is the tightest valid bound (and vice versa).
        verified = [
            o
            for o in candidates
            if residual_tol is None or o.stats["max_residual"] <= residual_tol
        ]
        pool = verified or candidates
        if sense == "min":
            return min(pool, key=lambda o: (o.objective is None, o.objective))
        return max(
            pool,
            key=lambda o: (o.objective is not None, o.objective if o.objective is not None else 0.0),
        )
    return SolveOutcome(last_status, {}, None, stats)
