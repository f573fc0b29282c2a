"""Semidefinite tests for projective simulability of instruments.

The central object is the rank-vector decomposition: an instrument is
projectively simulable at visibility ``v`` when every noisy Choi operator
splits as ``v eta_a + (1-v) eta_a^noise = sum_r sigma_{a|r}`` with one
positive block per rank vector ``r``, block traces ``q_r r_a / d``,
outcome-summed input marginals ``q_r 1/d``, and each block's Schmidt
number bounded by ``r_a``.  The Schmidt-number cone is replaced by
partial transposition on the input factor (exact for qubit input and
output) or by the reduction-map relaxation (any dimensions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from ._conic import (
    ConicProblem,
    ObjectiveTerm,
    SolveOutcome,
    Term,
    evaluate,
    solve,
)
from .instruments import ChoiInstrument, RankVector, rank_vectors
from .matcore import BipartiteOp, HermOp, min_eigenvalue, partial_trace

if TYPE_CHECKING:
    from .instruments import PiDescription

__all__ = [
    "ConicProblem",
    "SimResult",
    "DualCertificate",
    "qubit_pi_feasible",
    "qubit_critical_visibility",
    "relaxed_pi_feasible",
    "relaxed_critical_visibility",
    "worst_case_visibility",
    "povm_critical_visibility",
    "visibility_by_bisection",
    "verify_dual_certificate",
    "extract_pi_description",
    "RESIDUAL_TOL",
]

RESIDUAL_TOL = 1e-7

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
OPTIMAL = "Optimal"
TROUBLE = "NumericalTrouble"


@dataclass
class SimResult:
    """Outcome of a simulability program.

    ``decomposition`` maps each rank vector to one operator per outcome
    (zero operators where the rank vanishes).  ``exact`` records whether
    the program solved was an exact characterisation or a relaxation for
    the given dimensions.
    """

    status: str
    visibility: float | None = None
    decomposition: dict[RankVector, list[BipartiteOp]] | None = None
    q_r: dict[RankVector, float] | None = None
    dual_bound: float | None = None
    solver_stats: dict = field(default_factory=dict)
    exact: bool = True

    def to_json(self) -> dict:
        payload: dict = {
            "status": self.status,
            "visibility": self.visibility,
            "q_r": None,
            "residuals": {
                k: v for k, v in self.solver_stats.items() if k.startswith("residual")
            },
        }
        if self.q_r is not None:
            payload["q_r"] = {
                ",".join(str(x) for x in r): val for r, val in self.q_r.items()
            }
        return payload


@dataclass
class DualCertificate:
    """A feasible point of the dual visibility program.

    ``W`` holds one bipartite operator per outcome; ``B`` one input-space
    operator per rank vector; ``Z`` and ``t`` one bipartite operator and
    one scalar per (outcome, rank vector) pair.  ``bound`` is the upper
    bound on the critical visibility the point certifies.
    """

    W: list[BipartiteOp]
    B: dict[RankVector, HermOp]
    Z: dict[tuple[int, RankVector], BipartiteOp]
    t: dict[tuple[int, RankVector], float]
    bound: float


# ===== program assembly =====

_PPT = "ppt"
_REDUCTION = "reduction"


def _rv_key(r: RankVector) -> str:
    return ",".join(str(x) for x in r)


def _build_program(
    etas: Sequence[np.ndarray],
    dA: int,
    dAp: int,
    mode: str,
    task: str,
    noise_etas: Sequence[np.ndarray] | None = None,
) -> tuple[ConicProblem, list[RankVector]]:
    """Assemble the decomposition program.

    ``task``: ``feasibility`` fixes the target to ``etas``; ``visibility``
    maximises v in ``v etas + (1-v) noise_etas``; ``worst`` maximises v
    while optimising over the noise instrument itself.
    """
    n = len(etas)
    side = dAp * dA
    prob = ConicProblem()
    rvs = rank_vectors(dA, n)

    if task in ("visibility", "worst"):
        prob.add_var("v", 1, "nonneg")
        prob.add_var("v_slack", 1, "nonneg")
        prob.add_constraint(
            "v_cap",
            [Term("v", 1.0, ("value",)), Term("v_slack", 1.0, ("value",))],
            1.0,
        )
        prob.set_objective("max", [ObjectiveTerm("v", 1.0, ("value",))])

    for r in rvs:
        key = _rv_key(r)
        prob.add_var(f"q:{key}", 1, "nonneg")
        marg_terms: list[Term] = []
        for a, ra in enumerate(r):
            if ra == 0:
                continue
            name = f"sigma:{a}:{key}"
            prob.add_var(name, side, "psd")
            prob.add_constraint(
                f"trace:{a}:{key}",
                [
                    Term(name, 1.0, ("trace",)),
                    Term(f"q:{key}", -ra / dA, ("value",)),
                ],
                0.0,
            )
            marg_terms.append(Term(name, 1.0, ("ptrace", 0, dAp, dA)))
            if mode == _PPT:
                if ra == 1:
                    prob.add_constraint(
                        f"ppt:{a}:{key}",
                        [Term(name, 1.0, ("pt", 1, dAp, dA))],
                        np.zeros((side, side), dtype=complex),
                        kind="psd",
                    )
            elif mode == _REDUCTION:
                if ra < min(dA, dAp):
                    prob.add_constraint(
                        f"red:{a}:{key}",
                        [Term(name, 1.0, ("reduction", ra, dAp, dA))],
                        np.zeros((side, side), dtype=complex),
                        kind="psd",
                    )
            else:
                raise ValueError(f"unknown mode {mode!r}")
        marg_terms.append(
            Term(f"q:{key}", -1.0, ("scalar_matrix", np.eye(dA, dtype=complex) / dA))
        )
        prob.add_constraint(f"marginal:{key}", marg_terms, np.zeros((dA, dA), dtype=complex))

    prob.add_constraint(
        "total_prior",
        [Term(f"q:{_rv_key(r)}", 1.0, ("value",)) for r in rvs],
        1.0,
    )

    if task == "worst":
        noise_marg_terms: list[Term] = []
        for a in range(n):
            prob.add_var(f"xi:{a}", side, "psd")
            noise_marg_terms.append(Term(f"xi:{a}", 1.0, ("ptrace", 0, dAp, dA)))
        noise_marg_terms.append(
            Term("v", 1.0, ("scalar_matrix", np.eye(dA, dtype=complex) / dA))
        )
        prob.add_constraint(
            "noise_marginal", noise_marg_terms, np.eye(dA, dtype=complex) / dA
        )

    for a in range(n):
        terms = [
            Term(f"sigma:{a}:{_rv_key(r)}", -1.0, ("id",))
            for r in rvs
            if r[a] > 0
        ]
        if task == "feasibility":
            prob.add_constraint(f"recon:{a}", terms, -np.asarray(etas[a]))
        elif task == "visibility":
            assert noise_etas is not None
            delta = np.asarray(etas[a]) - np.asarray(noise_etas[a])
            terms.append(Term("v", 1.0, ("scalar_matrix", delta)))
            prob.add_constraint(f"recon:{a}", terms, -np.asarray(noise_etas[a]))
        else:  # worst
            terms.append(Term("v", 1.0, ("scalar_matrix", np.asarray(etas[a]))))
            terms.append(Term(f"xi:{a}", 1.0, ("id",)))
            prob.add_constraint(
                f"recon:{a}", terms, np.zeros((side, side), dtype=complex)
            )

    return prob, rvs


def _residual_summary(residuals: dict[str, float]) -> dict[str, float]:
    recon = max(
        (v for k, v in residuals.items() if k.startswith("constraint:recon")),
        default=0.0,
    )
    other = max(
        (
            v
            for k, v in residuals.items()
            if k.startswith("constraint:") and not k.startswith("constraint:recon")
        ),
        default=0.0,
    )
    cone = max((v for k, v in residuals.items() if k.startswith("cone:")), default=0.0)
    return {
        "residual_reconstruction": recon,
        "residual_constraints": other,
        "residual_cone": cone,
    }


def _package(
    outcome: SolveOutcome,
    prob: ConicProblem,
    rvs: list[RankVector],
    n: int,
    dA: int,
    dAp: int,
    task: str,
    exact: bool,
) -> SimResult:
    side = dAp * dA
    if outcome.status == "infeasible":
        return SimResult(
            status=INFEASIBLE, solver_stats=dict(outcome.stats), exact=exact
        )
    if outcome.status != "optimal":
        return SimResult(status=TROUBLE, solver_stats=dict(outcome.stats), exact=exact)

    residuals = evaluate(prob, outcome.values)
    stats = dict(outcome.stats)
    stats.update(_residual_summary(residuals))
    worst = max(stats["residual_reconstruction"], stats["residual_constraints"])
    if worst > RESIDUAL_TOL:
        stats["note"] = "solution residuals exceed tolerance"
        return SimResult(status=TROUBLE, solver_stats=stats, exact=exact)

    decomposition: dict[RankVector, list[BipartiteOp]] = {}
    q_r: dict[RankVector, float] = {}
    for r in rvs:
        key = _rv_key(r)
        q_r[r] = float(outcome.values[f"q:{key}"])
        ops = []
        for a, ra in enumerate(r):
            if ra == 0:
                ops.append(BipartiteOp(np.zeros((side, side), dtype=complex), dAp, dA))
            else:
                ops.append(BipartiteOp(outcome.values[f"sigma:{a}:{key}"], dAp, dA))
        decomposition[r] = ops

    vis = None
    if task in ("visibility", "worst"):
        vis = float(outcome.values["v"])
        vis = min(max(vis, 0.0), 1.0)

    return SimResult(
        status=OPTIMAL if task != "feasibility" else FEASIBLE,
        visibility=vis,
        decomposition=decomposition,
        q_r=q_r,
        solver_stats=stats,
        exact=exact,
    )


def _etas(c: ChoiInstrument) -> list[np.ndarray]:
    return [e.mat for e in c.etas]


def _run(
    c: ChoiInstrument,
    mode: str,
    task: str,
    noise: ChoiInstrument | None = None,
    exact: bool = True,
) -> SimResult:
    noise_etas = None
    if noise is not None:
        if (noise.dA, noise.dA_prime, noise.n_outcomes) != (
            c.dA,
            c.dA_prime,
            c.n_outcomes,
        ):
            raise ValueError("noise shape does not match instrument shape")
        noise_etas = _etas(noise)
    prob, rvs = _build_program(_etas(c), c.dA, c.dA_prime, mode, task, noise_etas)
    outcome = solve(prob, residual_tol=RESIDUAL_TOL)
    return _package(outcome, prob, rvs, c.n_outcomes, c.dA, c.dA_prime, task, exact)


# ===== public programs =====


def qubit_pi_feasible(c: ChoiInstrument) -> SimResult:
    """Exact projective-simulability test for qubit-input instruments.

    Rank-one blocks carry a partial-transposition constraint, which is
    equivalent to the Schmidt-number condition when the output is also a
    qubit.  For larger outputs the test is only necessary, and the result
    is flagged as not exact.
    """
    if c.dA != 2:
        raise ValueError("qubit_pi_feasible requires dA == 2; use relaxed_pi_feasible")
    return _run(c, _PPT, "feasibility", exact=(c.dA_prime == 2))


def qubit_critical_visibility(c: ChoiInstrument, noise: ChoiInstrument) -> SimResult:
    """Largest v with ``v c + (1-v) noise`` projectively simulable (qubit input)."""
    if c.dA != 2:
        raise ValueError(
            "qubit_critical_visibility requires dA == 2; use relaxed_critical_visibility"
        )
    return _run(c, _PPT, "visibility", noise=noise, exact=(c.dA_prime == 2))


def relaxed_pi_feasible(c: ChoiInstrument) -> SimResult:
    """Reduction-map relaxation of the simulability test, any dimensions."""
    return _run(c, _REDUCTION, "feasibility", exact=(c.dA == 2 and c.dA_prime == 2))


def relaxed_critical_visibility(c: ChoiInstrument, noise: ChoiInstrument) -> SimResult:
    """Reduction-map relaxation of the visibility program, any dimensions.

    The returned visibility upper-bounds the exact critical visibility;
    for qubit input and output the relaxation is tight.
    """
    return _run(c, _REDUCTION, "visibility", noise=noise, exact=(c.dA == 2 and c.dA_prime == 2))


def worst_case_visibility(c: ChoiInstrument) -> SimResult:
    """Critical visibility minimised over all valid noise instruments.

    The noise Choi operators enter as free PSD blocks constrained only by
    the instrument marginal, scaled by ``1 - v``.
    """
    mode = _PPT if c.dA == 2 else _REDUCTION
    return _run(c, mode, "worst", exact=(c.dA == 2 and c.dA_prime == 2))


def povm_critical_visibility(
    povm: Sequence[HermOp | np.ndarray],
    noise_povm: Sequence[HermOp | np.ndarray],
) -> SimResult:
    """Critical visibility for simulating a POVM with projective ones.

    Same decomposition structure as the instrument program with the
    output space dropped: blocks ``F_{a|r}`` with traces ``q_r r_a`` that
    sum to ``q_r 1`` over outcomes.  Exact for qubits.
    """
    effects = [np.asarray(HermOp(m)) for m in povm]
    noise_effects = [np.asarray(HermOp(m)) for m in noise_povm]
    if len(effects) != len(noise_effects):
        raise ValueError("POVM and noise POVM must have the same number of effects")
    d = effects[0].shape[0]
    for group in (effects, noise_effects):
        total = sum(group)
        if np.max(np.abs(total - np.eye(d))) > 1e-8:
            raise ValueError("effects do not sum to the identity")
        for i, m in enumerate(group):
            if m.shape[0] != d:
                raise ValueError("effects have mismatched dimensions")
            if min_eigenvalue(m) < -1e-9:
                raise ValueError(f"effect {i} is not PSD")
    n = len(effects)
    prob = ConicProblem()
    rvs = rank_vectors(d, n)
    prob.add_var("v", 1, "nonneg")
    prob.add_var("v_slack", 1, "nonneg")
    prob.add_constraint(
        "v_cap", [Term("v", 1.0, ("value",)), Term("v_slack", 1.0, ("value",))], 1.0
    )
    prob.set_objective("max", [ObjectiveTerm("v", 1.0, ("value",))])
    for r in rvs:
        key = _rv_key(r)
        prob.add_var(f"q:{key}", 1, "nonneg")
        sum_terms: list[Term] = []
        for a, ra in enumerate(r):
            if ra == 0:
                continue
            name = f"F:{a}:{key}"
            prob.add_var(name, d, "psd")
            prob.add_constraint(
                f"trace:{a}:{key}",
                [Term(name, 1.0, ("trace",)), Term(f"q:{key}", -float(ra), ("value",))],
                0.0,
            )
            sum_terms.append(Term(name, 1.0, ("id",)))
        sum_terms.append(
            Term(f"q:{key}", -1.0, ("scalar_matrix", np.eye(d, dtype=complex)))
        )
        prob.add_constraint(f"complete:{key}", sum_terms, np.zeros((d, d), dtype=complex))
    prob.add_constraint(
        "total_prior", [Term(f"q:{_rv_key(r)}", 1.0, ("value",)) for r in rvs], 1.0
    )
    for a in range(n):
        terms = [
            Term(f"F:{a}:{_rv_key(r)}", -1.0, ("id",)) for r in rvs if r[a] > 0
        ]
        delta = effects[a] - noise_effects[a]
        terms.append(Term("v", 1.0, ("scalar_matrix", delta)))
        prob.add_constraint(f"recon:{a}", terms, -noise_effects[a])
    outcome = solve(prob, residual_tol=RESIDUAL_TOL)
    if outcome.status == "infeasible":
        return SimResult(status=INFEASIBLE, solver_stats=dict(outcome.stats), exact=(d == 2))
    if outcome.status != "optimal":
        return SimResult(status=TROUBLE, solver_stats=dict(outcome.stats), exact=(d == 2))
    residuals = evaluate(prob, outcome.values)
    stats = dict(outcome.stats)
    stats.update(_residual_summary(residuals))
    q_r = {r: float(outcome.values[f"q:{_rv_key(r)}"]) for r in rvs}
    vis = min(max(float(outcome.values["v"]), 0.0), 1.0)
    return SimResult(
        status=OPTIMAL,
        visibility=vis,
        q_r=q_r,
        solver_stats=stats,
        exact=(d == 2),
    )


def visibility_by_bisection(
    c: ChoiInstrument,
    noise: ChoiInstrument,
    feasible: Callable[[ChoiInstrument], SimResult] | None = None,
    tol: float = 1e-5,
) -> float:
    """Critical visibility located by bisecting the feasibility test.

    Validation path for the direct visibility programs; slower but
    independent of how v enters the conic model.
    """
    from .instruments import mix

    if feasible is None:
        feasible = qubit_pi_feasible if c.dA == 2 else relaxed_pi_feasible
    lo, hi = 0.0, 1.0
    if feasible(mix(c, noise, 1.0)).status == FEASIBLE:
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mix(c, noise, mid)).status == FEASIBLE:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ===== dual certificates =====


def verify_dual_certificate(
    cert: DualCertificate,
    c: ChoiInstrument,
    noise: ChoiInstrument,
    tol: float = 1e-8,
) -> tuple[bool, float]:
    """Numerically check a dual point and return (valid, certified bound).

    Checks, for every rank vector of the instrument's shape and every
    outcome with nonzero rank: positivity of the dual combination, plus
    positivity of every Z block and the normalisation equality tying the
    instrument and noise values together.  All traces are computed from
    the operators; no shortcut formulas.
    """
    d, n = c.dA, c.n_outcomes
    dAp = c.dA_prime
    side = dAp * d
    rvs = rank_vectors(d, n)
    if len(cert.W) != n:
        raise ValueError(f"certificate has {len(cert.W)} W blocks, expected {n}")
    ident = np.eye(side, dtype=complex)

    value_inst = sum(
        float(np.real(np.trace(cert.W[a].mat @ c.etas[a].mat))) for a in range(n)
    )
    value_noise = sum(
        float(np.real(np.trace(cert.W[a].mat @ noise.etas[a].mat))) for a in range(n)
    )
    bound = 1.0 + value_inst
    ok = abs(bound - value_noise) <= tol

    for r in rvs:
        if r not in cert.B:
            raise ValueError(f"certificate is missing B for rank vector {tuple(r)}")
        B = cert.B[r].mat
        tr_B = float(np.real(np.trace(B)))
        t_vals = [cert.t.get((a, r), 0.0) for a in range(n)]
        t_weighted = sum(r[a] * t_vals[a] for a in range(n))
        for a, ra in enumerate(r):
            if ra == 0:
                continue
            if (a, r) not in cert.Z:
                raise ValueError(
                    f"certificate is missing Z for outcome {a}, rank vector {tuple(r)}"
                )
            Z = cert.Z[(a, r)].mat
            if min_eigenvalue(Z) < -tol:
                ok = False
            z_marg = partial_trace(cert.Z[(a, r)], "A_prime").mat
            O = (
                cert.W[a].mat
                + (tr_B / d) * ident
                + Z / ra
                + (t_weighted / d) * ident
                - np.kron(np.eye(dAp), B)
                - t_vals[a] * ident
                - np.kron(np.eye(dAp), z_marg)
            )
            if float(np.linalg.eigvalsh((O + O.conj().T) / 2)[0]) < -tol:
                ok = False
    return ok, bound


# ===== explicit description extraction (qubit input) =====


def _bloch_proj(n_vec: np.ndarray) -> np.ndarray:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return 0.5 * (np.eye(2) + n_vec[0] * sx + n_vec[1] * sy + n_vec[2] * sz)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count, dtype=float) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / count
    rad = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=1)


def _choi_to_kraus(choi: np.ndarray, dAp: int, dA: int) -> list[np.ndarray]:
    """Kraus operators of a channel given as a trace-one Choi operator."""
    w, vecs = np.linalg.eigh((choi + choi.conj().T) / 2)
    ops = []
    for lam, v in zip(w, vecs.T):
        if lam > 1e-12:
            ops.append(math.sqrt(lam * dA) * v.reshape(dAp, dA))
    return ops


def _axis_rep(n_vec: np.ndarray) -> np.ndarray:
    """Canonical representative of the axis {n, -n}."""
    v = np.asarray(n_vec, dtype=float)
    v = v / np.linalg.norm(v)
    if v[2] < -1e-12:
        return -v
    if abs(v[2]) <= 1e-12:
        if v[0] < -1e-12:
            return -v
        if abs(v[0]) <= 1e-12 and v[1] < 0.0:
            return -v
    return v


def _marginal_axes(block: np.ndarray, dAp: int) -> list[np.ndarray]:
    """Bloch axes of a bipartite block's input marginal eigenvectors."""
    marg = np.einsum("iaib->ab", block.reshape(dAp, 2, dAp, 2))
    _, vecs = np.linalg.eigh((marg + marg.conj().T) / 2)
    axes = []
    for v in vecs.T:
        proj = np.outer(v, v.conj())
        n_vec = np.real(
            [
                2 * proj[0, 1].real,
                -2 * proj[0, 1].imag,
                proj[0, 0].real - proj[1, 1].real,
            ]
        )
        if np.linalg.norm(n_vec) > 1e-9:
            axes.append(_axis_rep(n_vec))
    return axes


def _strategy_decomposition(
    etas: list[np.ndarray],
    dAp: int,
    seeds: list[np.ndarray],
    max_rounds: int = 40,
) -> tuple[list[np.ndarray], list[tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]]]:
    """Split Choi operators into trivial and sharp-binning strategy blocks.

    Finds, for the whole instrument at once, operators with
    ``eta_a = Theta_a + sum_p [Xi+_{a,p} (x) proj(n_p)^T
    + Xi-_{a,p} (x) (1 - proj(n_p))^T]`` where every ``Theta_a`` is PSD
    with an input marginal proportional to the identity and, per
    direction, the outcome-summed traces of the + and - blocks agree.
    Any such point assembles into classical mixing of sharp strategies
    with stochastic relabeling, and conversely every mixture has this
    form, so the program is feasible exactly when the instrument is.
    Directions are generated on demand: the slack program's duals score
    candidate axes and the worst violator joins the set.

    Returns ``(thetas, parts)`` with ``parts`` entries
    ``(n_p, [Xi+_{a,p}], [Xi-_{a,p}])``.
    """
    import cvxpy as cp

    n = len(etas)
    side = 2 * dAp
    eye2 = np.eye(2)

    directions: list[np.ndarray] = [
        np.array([0.0, 0.0, 1.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
    ]
    for ax in seeds:
        if min(np.linalg.norm(ax - d0) for d0 in directions) > 1e-7:
            directions.append(ax)
    candidates = [_axis_rep(v) for v in _fibonacci_sphere(600)]

    for _ in range(max_rounds):
        k = len(directions)
        theta = [cp.Variable((side, side), hermitian=True) for _ in range(n)]
        iso = cp.Variable(n, nonneg=True)
        xi_p = [[cp.Variable((dAp, dAp), hermitian=True) for _ in range(k)] for _ in range(n)]
        xi_m = [[cp.Variable((dAp, dAp), hermitian=True) for _ in range(k)] for _ in range(n)]
        pos = [cp.Variable((side, side), hermitian=True) for _ in range(n)]
        neg = [cp.Variable((side, side), hermitian=True) for _ in range(n)]
        cons = []
        for a in range(n):
            cons += [theta[a] >> 0, pos[a] >> 0, neg[a] >> 0]
            cons += [x >> 0 for x in xi_p[a] + xi_m[a]]
            cons.append(
                cp.partial_trace(theta[a], [dAp, 2], 0) == iso[a] * eye2 / 2.0
            )
        for p in range(k):
            cons.append(
                sum(cp.trace(xi_p[a][p]) for a in range(n))
                == sum(cp.trace(xi_m[a][p]) for a in range(n))
            )
        eqs = []
        for a in range(n):
            acc = theta[a] + pos[a] - neg[a]
            for p, n_vec in enumerate(directions):
                proj_t = _bloch_proj(n_vec).T
                acc = acc + cp.kron(xi_p[a][p], proj_t)
                acc = acc + cp.kron(xi_m[a][p], np.eye(2) - proj_t)
            eq = acc == etas[a]
            eqs.append(eq)
            cons.append(eq)
        problem = cp.Problem(
            cp.Minimize(cp.real(sum(cp.trace(pos[a] + neg[a]) for a in range(n)))),
            cons,
        )
        try:
            problem.solve(solver="CLARABEL")
        except BaseException as exc:  # CLARABEL's Rust layer can panic
            if isinstance(exc, (KeyboardInterrupt, SystemExit, GeneratorExit)):
                raise
            problem.solve(solver="SCS", eps_abs=1e-9, eps_rel=1e-9, max_iters=200_000)
        if problem.status != "optimal":
            problem.solve(solver="SCS", eps_abs=1e-9, eps_rel=1e-9, max_iters=200_000)
        gap = float(problem.value)
        if gap < 1e-8:
            thetas = []
            for a in range(n):
                t = np.asarray(theta[a].value)
                thetas.append((t + t.conj().T) / 2)
            parts = []
            for p, n_vec in enumerate(directions):
                plus = []
                minus = []
                mass = 0.0
                for a in range(n):
                    xp = np.asarray(xi_p[a][p].value)
                    xm = np.asarray(xi_m[a][p].value)
                    plus.append((xp + xp.conj().T) / 2)
                    minus.append((xm + xm.conj().T) / 2)
                    mass += float(np.real(np.trace(plus[-1] + minus[-1])))
                if mass > 1e-9:
                    parts.append((n_vec, plus, minus))
            return thetas, parts

        duals = []
        for eq in eqs:
            y = np.asarray(eq.dual_value)
            duals.append((y + y.conj().T) / 2)

        def score(n_vec: np.ndarray) -> float:
            proj = _bloch_proj(n_vec)
            best_p = -np.inf
            best_m = -np.inf
            for y in duals:
                s_p = np.einsum("iajb,ab->ij", y.reshape(dAp, 2, dAp, 2), proj)
                s_m = np.einsum(
                    "iajb,ab->ij", y.reshape(dAp, 2, dAp, 2), np.eye(2) - proj
                )
                best_p = max(best_p, float(np.linalg.eigvalsh((s_p + s_p.conj().T) / 2)[-1]))
                best_m = max(best_m, float(np.linalg.eigvalsh((s_m + s_m.conj().T) / 2)[-1]))
            return best_p + best_m

        best = max(candidates, key=score)
        # Local polish on the sphere around the best grid candidate.
        from scipy.optimize import minimize

        def neg_score(angles: np.ndarray) -> float:
            th, ph = angles
            n_vec = np.array(
                [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]
            )
            return -score(n_vec)

        th0 = math.acos(max(-1.0, min(1.0, best[2])))
        ph0 = math.atan2(best[1], best[0])
        res = minimize(neg_score, np.array([th0, ph0]), method="Nelder-Mead")
        th, ph = res.x
        new_dir = _axis_rep(
            np.array(
                [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]
            )
        )
        if min(np.linalg.norm(new_dir - d0) for d0 in directions) < 1e-7:
            # No new direction helps; accept the best grid candidate or stop.
            if min(np.linalg.norm(best - d0) for d0 in directions) < 1e-7:
                raise RuntimeError(
                    f"direction generation stalled with residual {gap:.3e}"
                )
            new_dir = best
        directions.append(new_dir)
    raise RuntimeError("direction generation did not converge")


def _transport(rows: np.ndarray, cols: np.ndarray) -> list[tuple[int, int, float]]:
    """Nonnegative matrix with the given row and column sums (northwest rule)."""
    r = rows.astype(float).copy()
    c = cols.astype(float).copy()
    total_r, total_c = r.sum(), c.sum()
    if total_r <= 0.0 or total_c <= 0.0:
        return []
    c *= total_r / total_c
    out = []
    i = j = 0
    while i < len(r) and j < len(c):
        w = min(r[i], c[j])
        if w > 1e-12:
            out.append((i, j, w))
        r[i] -= w
        c[j] -= w
        if r[i] <= 1e-14:
            i += 1
        if c[j] <= 1e-14:
            j += 1
    return out


def _psd_part(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.maximum(w, 0.0)
    return (v * w) @ v.conj().T


def _prep_kraus(
    state_plus: np.ndarray, state_minus: np.ndarray, pvec: np.ndarray, pbar: np.ndarray
) -> list[np.ndarray]:
    """Measure-and-prepare Kraus list: emit one unit-trace state per branch."""
    kraus = []
    for state, branch in ((state_plus, pvec), (state_minus, pbar)):
        vals, vecs = np.linalg.eigh((state + state.conj().T) / 2)
        vals = np.maximum(vals, 0.0)
        vals = vals / vals.sum()
        for lam, v in zip(vals, vecs.T):
            if lam > 1e-14:
                kraus.append(math.sqrt(lam) * np.outer(v, branch.conj()))
    return kraus


def extract_pi_description(c: ChoiInstrument, result: SimResult) -> "PiDescription":
    """Turn a feasible qubit instrument into an explicit description.

    The feasibility decomposition certifies simulability but its blocks
    are not used directly: a feasible point's paired rank-one blocks need
    not split into antipodal directions with matched weights (strategies
    that send both sharp results to one label realise block pairs no
    aligned split can).  Instead the instrument is re-decomposed in
    strategy form: trivial-measurement blocks plus per-direction blocks
    for every (outcome, branch) combination, which convert directly into
    classical mixing labels with stochastic relabeling.  The returned
    description realises the instrument's Choi operators up to solver
    residuals.
    """
    from .instruments import PiDescription

    if c.dA != 2:
        raise ValueError("extraction requires a qubit input space")
    if result.decomposition is None or result.q_r is None:
        raise ValueError("result carries no decomposition")
    dAp = c.dA_prime
    d = 2
    n = c.n_outcomes
    etas = _etas(c)
    if n == 1:
        kraus = _choi_to_kraus(etas[0], dAp, d)
        return PiDescription(
            [1.0], [[np.eye(2, dtype=complex)]], [[kraus]], [np.eye(1)]
        )

    seeds = []
    for eta in etas:
        seeds.extend(_marginal_axes(eta, dAp))
    for ops in result.decomposition.values():
        for op in ops:
            seeds.extend(_marginal_axes(op.mat, dAp))
    thetas, parts = _strategy_decomposition(etas, dAp, seeds)

    labels_q: list[float] = []
    labels_proj = []
    labels_chan = []
    labels_post = []
    ident_post = np.eye(n)
    zero2 = np.zeros((2, 2), dtype=complex)
    eye2 = np.eye(2, dtype=complex)

    for a in range(n):
        block = _psd_part(thetas[a])
        mass = float(np.real(np.trace(block)))
        if mass < 1e-7:
            continue
        kraus = _choi_to_kraus(block / mass, dAp, d)
        # Tiny marginal residuals would violate trace preservation once
        # normalised, so the Kraus family is polished back onto it.
        s = sum(kk.conj().T @ kk for kk in kraus)
        w_s, v_s = np.linalg.eigh(s)
        s_isqrt = (v_s * (1.0 / np.sqrt(w_s))) @ v_s.conj().T
        kraus = [kk @ s_isqrt for kk in kraus]
        projs = [eye2 if b == a else zero2 for b in range(n)]
        labels_q.append(mass)
        labels_proj.append(projs)
        labels_chan.append([kraus for _ in range(n)])
        labels_post.append(ident_post)

    for n_vec, plus, minus in parts:
        plus = [_psd_part(x) for x in plus]
        minus = [_psd_part(x) for x in minus]
        t_plus = np.array([float(np.real(np.trace(x))) for x in plus])
        t_minus = np.array([float(np.real(np.trace(x))) for x in minus])
        proj = _bloch_proj(n_vec)
        proj_vecs = np.linalg.eigh(proj)[1]
        pvec = proj_vecs[:, -1]
        pbar = proj_vecs[:, 0]
        for a, b, w in _transport(t_plus, t_minus):
            kraus = _prep_kraus(plus[a] / t_plus[a], minus[b] / t_minus[b], pvec, pbar)
            projs = [zero2] * n
            post = ident_post
            if a == b:
                # Both sharp results map to one label; park the second
                # branch in a spare slot and relabel it back.
                spare = (a + 1) % n
                projs[a] = proj
                projs[spare] = eye2 - proj
                post = ident_post.copy()
                post[:, spare] = 0.0
                post[a, spare] = 1.0
            else:
                projs[a] = proj
                projs[b] = eye2 - proj
            labels_q.append(d * w)
            labels_proj.append(projs)
            labels_chan.append([kraus for _ in range(n)])
            labels_post.append(post)

    total = sum(labels_q)
    labels_q = [x / total for x in labels_q]
    return PiDescription(labels_q, labels_proj, labels_chan, labels_post)
