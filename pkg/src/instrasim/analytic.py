"""Closed-form visibilities and explicit simulation models.

Everything in this module is a formula or a finite construction: critical
visibilities of the unsharp qubit instrument under dephasing, worst-case
and white noise, the d-dimensional dephasing bound together with the
projective model that attains it and a dual certificate that matches it,
the worst-case model in any dimension, and integer coefficients of the
polynomial that certifies positivity of the dual certificate blocks.
No solver is invoked here; the numeric programs live in ``simulability``
and are used by the tests as independent cross-checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .instruments import ChoiInstrument, RankVector, rank_vectors
from .matcore import BipartiteOp, HermOp, max_entangled
from .simulability import DualCertificate

logger = logging.getLogger(__name__)

__all__ = [
    "DephasingModelParams",
    "WorstCaseModelParams",
    "WhiteQubitParams",
    "v_deph_qubit",
    "v_worst_qubit",
    "v_white_qubit",
    "v_deph_highd_bound",
    "dephasing_pi_model",
    "worst_case_pi_model",
    "dual_feasible_point",
    "char_poly_coeffs",
]


# ===== small shared helpers =====


def _coherence(gamma: float) -> float:
    """sqrt(1 - gamma^2), factored to avoid cancellation near gamma = 1."""
    return math.sqrt((1.0 - gamma) * (1.0 + gamma))


def _check_gamma(gamma: float, lo_open: bool = False, hi_open: bool = False) -> float:
    g = float(gamma)
    if math.isnan(g) or g < 0.0 or g > 1.0:
        raise ValueError(f"sharpness must lie in [0, 1], got {gamma}")
    if lo_open and g == 0.0:
        raise ValueError("sharpness 0 is outside the domain of this formula")
    if hi_open and g == 1.0:
        raise ValueError("sharpness 1 is outside the domain of this formula")
    return g


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")
    return int(d)


def _basis_proj(d: int, a: int) -> np.ndarray:
    """|aa><aa| on the doubled space, indexed output-major."""
    m = np.zeros((d * d, d * d), dtype=np.complex128)
    m[a * d + a, a * d + a] = 1.0
    return m


def _luders_choi(d: int, gamma: float) -> list[np.ndarray]:
    """Choi operators of the unsharp basis instrument, written entrywise."""
    c = _coherence(gamma)
    etas = []
    for a in range(d):
        m = np.zeros((d * d, d * d), dtype=np.complex128)
        aa = a * d + a
        m[aa, aa] = (1.0 + gamma) / (2.0 * d)
        off = c / (2.0 * d * math.sqrt(d - 1.0))
        bulk = (1.0 - gamma) / (2.0 * d * (d - 1.0))
        for k in range(d):
            if k == a:
                continue
            kk = k * d + k
            m[aa, kk] = off
            m[kk, aa] = off
            for l in range(d):
                if l != a:
                    m[kk, l * d + l] = bulk
        etas.append(m)
    return etas


# ===== qubit closed forms =====


def v_deph_qubit(gamma: float) -> float:
    """Critical visibility of the unsharp qubit instrument under dephasing noise.

    Equals ``1 / (gamma + sqrt(1 - gamma^2))``; it is 1 at both endpoints
    and reaches its minimum ``1/sqrt(2)`` at ``gamma = 1/sqrt(2)``.
    """
    g = _check_gamma(gamma)
    return 1.0 / (g + _coherence(g))


def v_worst_qubit(
    gamma: float, with_internals: bool = False
) -> float | tuple[float, dict[str, float]]:
    """Critical visibility of the unsharp qubit instrument when the noise
    itself is chosen adversarially (best simulation over all noise).

    With ``with_internals=True`` also returns the parameters of the model
    that attains the value: the prior ``q11`` on the balanced rank split
    and the two entries ``x1``, ``x2`` of the optimal noise operators.
    """
    g = _check_gamma(gamma)
    c = _coherence(g)
    v = 1.0 / (2.0 - g - c + 2.0 * math.sqrt((1.0 - g) * (1.0 - c)))
    if not with_internals:
        return v
    q11 = ((g - c) * v + 1.0) / 2.0
    if 1.0 - v < 1e-12:
        # The noise carries zero weight here; report the degenerate limit.
        x1, x2 = 0.5, 0.0
    else:
        x1 = (3.0 - (c + g + 2.0) * v) / (8.0 * (1.0 - v))
        x2 = ((c + g - 2.0) * v + 1.0) / (8.0 * (1.0 - v))
    return v, {"q11": q11, "x1": x1, "x2": x2}


@dataclass(frozen=True)
class WhiteQubitParams:
    """Block entries of the qubit simulation at the white-noise threshold.

    ``y1..y4`` parametrise the block on the balanced rank split and
    ``z1..z3`` the block on the concentrated split; ``valid`` records
    whether the reconstruction checks passed.
    """

    y1: float
    y2: float
    y3: float
    y4: float
    z1: float
    z2: float
    z3: float
    valid: bool


def _white_polynomial(gamma: float) -> np.ndarray:
    """Degree-8 polynomial (descending powers) whose largest root in [0, 1]
    is the white-noise critical visibility of the unsharp qubit instrument."""
    g = gamma
    return np.array(
        [
            ((((((16384 * g - 12288) * g - 17408) * g + 18496) * g + 448) * g - 4624)
             * g + 1768) * g * g - 375 * g,
            (((((-4096 * g - 14336) * g - 1728) * g + 20160) * g - 1392) * g - 9280)
            * g * g + 3065 * g - 625,
            ((((-1024 * g + 10432) * g + 832) * g - 992) * g + 3176) * g * g
            - 4787 * g + 1575,
            (((5568 * g - 3520) * g - 8480) * g + 3328) * g * g + 1645 * g - 1061,
            ((-1536 * g - 1552) * g + 888) * g * g + 795 * g - 29,
            (656 * g * g + 64 * g - 437) * g + 77,
            (56 * g + 79) * g + 53,
            15 * g + 9,
            1.0,
        ],
        dtype=float,
    )


def _white_qubit_blocks(
    gamma: float, v: float
) -> tuple[WhiteQubitParams, np.ndarray, np.ndarray]:
    """Reconstruct the two decomposition blocks at the white-noise threshold.

    The scalar equation pinning the inner parameter has a double root at
    the critical visibility (the threshold is exactly the point where its
    two solutions coalesce), so it is located by bounded minimisation of
    the defining gap rather than by bracketing.  The remaining parameters
    follow from root-pair relations, taking the branch that rebuilds the
    noisy Choi operator; the opposite branch overshoots the total trace.
    Validation is soft: failures are logged and flagged, not raised.
    """
    g = gamma
    c2 = (1.0 - g) * (1.0 + g)  # 1 - gamma^2

    def xi(y2: float) -> float:
        rad = (
            64.0 * y2 * y2
            - v * (32.0 * math.sqrt(2.0) * math.sqrt(max(y2 * c2 * (1.0 - v), 0.0))
                   + 16.0 * g * g * v - 17.0 * v + 2.0)
            - 16.0 * y2 * (v - 1.0)
            + 1.0
        )
        return math.sqrt(max(rad, 0.0))

    def gap(y2: float) -> float:
        quad = (
            64.0 * y2 * y2
            + 16.0 * y2 * (4.0 * g * v + 1.0 - v)
            + (4.0 * g * v + v - 1.0) ** 2
        )
        return xi(y2) + math.sqrt(max(quad, 0.0)) - 2.0 * (1.0 + v)

    hi = (1.0 - v) / 8.0
    res = minimize_scalar(gap, bounds=(0.0, hi), method="bounded",
                          options={"xatol": 1e-14})
    y2 = float(res.x)
    flat = float(gap(y2))
    if abs(flat) > 1e-6:
        logger.warning(
            "gap equation for the inner block parameter did not close at "
            "sharpness %.6g (visibility %.6g, residual gap %.3e)", g, v, flat
        )
        params = WhiteQubitParams(
            math.nan, math.nan, math.nan, math.nan,
            math.nan, math.nan, math.nan, valid=False,
        )
        return params, np.zeros((4, 4)), np.zeros((4, 4))

    x = xi(y2)
    y3 = (1.0 - v) / 8.0
    z2 = (1.0 - 8.0 * y2 - v) / 8.0
    y1 = (-x + 8.0 * y2 + 4.0 * g * v + 3.0 * v + 1.0) / 16.0
    y4 = (-x - 8.0 * y2 - 4.0 * g * v + v + 3.0) / 16.0
    z1 = (x - 8.0 * y2 - v + 1.0) / 16.0
    z3 = 0.5 - (y1 + y2 + y3 + y4 + z1 + z2)

    vals = (y1, y2, y3, y4, z1, z2, z3)
    valid = all(t >= -1e-9 for t in vals)

    def _root(p: float, q: float) -> float:
        return math.sqrt(max(p, 0.0) * max(q, 0.0))

    balanced = np.array(
        [
            [y1, 0.0, 0.0, _root(y2, y3)],
            [0.0, y2, 0.0, 0.0],
            [0.0, 0.0, y3, 0.0],
            [_root(y2, y3), 0.0, 0.0, y4],
        ]
    )
    concentrated = np.array(
        [
            [z1, 0.0, 0.0, _root(z1, z3)],
            [0.0, z2, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [_root(z1, z3), 0.0, 0.0, z3],
        ]
    )

    # Consistency: the two blocks must rebuild the noisy Choi operator of
    # outcome 0, which also pins z3 against the trace it was solved from.
    eta0 = np.array(
        [
            [(1.0 + g) / 4.0, 0.0, 0.0, _coherence(g) / 4.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [_coherence(g) / 4.0, 0.0, 0.0, (1.0 - g) / 4.0],
        ]
    )
    mixture = v * eta0 + (1.0 - v) * np.eye(4) / 8.0
    resid = float(np.max(np.abs(balanced + concentrated - mixture)))
    if resid > 1e-7:
        valid = False
    if not valid:
        logger.warning(
            "block reconstruction at sharpness %.6g failed validation "
            "(min entry %.3e, rebuild residual %.3e)",
            g, min(vals), resid,
        )
    params = WhiteQubitParams(y1, y2, y3, y4, z1, z2, z3, valid=valid)
    return params, balanced, concentrated


def v_white_qubit(
    gamma: float, with_params: bool = False
) -> float | tuple[float, WhiteQubitParams]:
    """Critical visibility of the unsharp qubit instrument under white noise.

    The value is the largest root in [0, 1] of a fixed degree-8 polynomial
    in the visibility.  Roots come from the companion matrix, the selected
    root gets one Newton polish, and the block parameters of the attaining
    decomposition are rebuilt and validated.  With ``with_params=True`` the
    reconstructed :class:`WhiteQubitParams` are returned alongside.

    :raises ValueError: if the polynomial has no real root in [0, 1]; the
        message carries the offending sharpness and the root list.
    """
    g = _check_gamma(gamma, lo_open=True, hi_open=True)
    coeffs = _white_polynomial(g)
    roots = np.roots(coeffs)
    real = [
        float(z.real)
        for z in roots
        if abs(z.imag) < 1e-8 and -1e-10 <= z.real <= 1.0 + 1e-10
    ]
    if not real:
        raise ValueError(
            f"no real root in [0, 1] for sharpness {g}; roots were "
            f"{np.sort_complex(roots)}"
        )
    v = max(real)
    deriv = np.polyder(coeffs)
    slope = float(np.polyval(deriv, v))
    if abs(slope) > 1e-30:
        polished = v - float(np.polyval(coeffs, v)) / slope
        if abs(np.polyval(coeffs, polished)) <= abs(np.polyval(coeffs, v)):
            v = polished
    v = min(max(v, 0.0), 1.0)
    params, _, _ = _white_qubit_blocks(g, v)
    if with_params:
        return v, params
    return v


# ===== d-dimensional dephasing bound, model and certificate =====


def v_deph_highd_bound(d: int, gamma: float) -> float:
    """Upper bound on the dephasing-noise critical visibility in dimension d.

    Evaluates ``2(d-1) / (d(1 + gamma + sqrt((1-gamma^2)(d-1))) - 2)``.
    At d = 2 this reduces algebraically to :func:`v_deph_qubit`, and the
    bound is attained by :func:`dephasing_pi_model` whenever
    ``gamma >= (d-2)/d``.
    """
    d = _check_dim(d)
    g = _check_gamma(gamma)
    c = _coherence(g)
    return 2.0 * (d - 1.0) / (d * (1.0 + g + c * math.sqrt(d - 1.0)) - 2.0)


@dataclass(frozen=True)
class DephasingModelParams:
    """Priors of the three-class projective model for dephasing noise.

    ``alpha`` weights each of the d sharp basis measurements, ``delta``
    each of the d(d-1) split measurements, and ``beta`` the trivial one.
    ``valid`` records ``gamma >= (d-2)/d``, the sign condition on
    ``beta``.  For d <= 3 that is equivalent to all three priors being
    nonnegative; for d >= 4 ``alpha`` can still be negative inside the
    flagged region, so there the flag does not certify a proper mixture.
    """

    alpha: float
    beta: float
    delta: float
    valid: bool


def dephasing_pi_model(
    d: int, gamma: float
) -> tuple[DephasingModelParams, ChoiInstrument]:
    """Projective simulation of the unsharp instrument mixed with dephasing
    noise at visibility :func:`v_deph_highd_bound`.

    Returns the class priors and the simulated Choi instrument.  The
    returned operators always rebuild the target mixture exactly (the
    defining linear identity holds for every sharpness); the ``valid``
    flag records the threshold ``gamma >= (d-2)/d`` at which ``beta``
    changes sign.  See :class:`DephasingModelParams` for the d >= 4
    caveat about ``alpha``.
    """
    d = _check_dim(d)
    g = _check_gamma(gamma)
    c = _coherence(g)
    rt = math.sqrt(d - 1.0)
    den = c * d * d + d * (-c + g * rt + rt) - 2.0 * rt
    alpha = (
        -3.0 * c - c * d * d + d * (4.0 * c - g * rt + rt) + 2.0 * g * rt - 2.0 * rt
    ) / den
    beta = (d - 1.0) * (2.0 * rt - c * d) / den
    delta = (-c + c * d + g * rt - rt) / den
    valid = g >= (d - 2.0) / d - 1e-12
    params = DephasingModelParams(alpha, beta, delta, valid)

    phi = max_entangled(d).mat
    # Diagonal-pair projectors with one basis index struck out.
    punctured = []
    for k in range(d):
        u = np.zeros(d * d, dtype=np.complex128)
        for i in range(d):
            if i != k:
                u[i * d + i] = 1.0 / math.sqrt(d)
        punctured.append(np.outer(u, u.conj()))
    mus = []
    for a in range(d):
        m = alpha * phi + (beta / d) * _basis_proj(d, a)
        for k in range(d):
            if k != a:
                m = m + delta * punctured[k]
        m = m + delta * (d - 1.0) / d * _basis_proj(d, a)
        mus.append(m)
    return params, ChoiInstrument(d, d, mus)


@dataclass(frozen=True)
class WorstCaseModelParams:
    """Parameters of the worst-case simulation model in dimension d.

    ``alpha`` and ``beta`` build the simulated operators, ``x1`` and
    ``x2`` the optimal noise, and ``v`` is the achieved visibility.
    ``valid`` is false if any parameter is negative beyond tolerance or
    the rebuild identity fails.
    """

    alpha: float
    beta: float
    x1: float
    x2: float
    v: float
    valid: bool


def worst_case_pi_model(
    d: int, gamma: float
) -> tuple[WorstCaseModelParams, ChoiInstrument]:
    """Simulation model and optimal noise for adversarially chosen noise.

    Returns the model parameters (including the achieved visibility) and
    the noise instrument itself.  The simulated operators
    ``alpha * phi + beta |aa><aa|`` rebuild ``v * eta_a + (1-v) * noise_a``
    to high accuracy; a residual beyond 1e-9 or parameter negativity
    beyond 1e-9 flips the ``valid`` flag.
    """
    d = _check_dim(d)
    g = _check_gamma(gamma)
    c = _coherence(g)
    s = c * math.sqrt(d - 1.0)
    inner = d * (1.0 - g) * ((g + 1.0) * d - 2.0 * (g + s))
    v = (d - 1.0) / (-g - s + math.sqrt(max(inner, 0.0)) + d)
    alpha = (v * s + (d - 1.0) * (1.0 - v * g)) / (2.0 * d * (d - 1.0))
    beta = (-v * s + (d - 1.0) * (1.0 + v * g)) / (2.0 * d * (d - 1.0))
    if 1.0 - v < 1e-12:
        # Zero noise weight; any valid noise works, use the sharp limit.
        x1, x2 = 1.0 / d, 0.0
    else:
        x1 = (-v * s - v * g + d * (1.0 - v) + 1.0) / (2.0 * d * d * (1.0 - v))
        x2 = (v * s + v * g + d * (1.0 - v) - 1.0) / (
            2.0 * (d - 1.0) * d * d * (1.0 - v)
        )

    cross = math.sqrt(max(x1, 0.0) * max(x2, 0.0))
    noise_etas = []
    for a in range(d):
        m = x1 * _basis_proj(d, a)
        aa = a * d + a
        for j in range(d):
            if j == a:
                continue
            jj = j * d + j
            m[aa, jj] -= cross
            m[jj, aa] -= cross
            for l in range(d):
                if l != a:
                    m[jj, l * d + l] += x2
        noise_etas.append(m)

    phi = max_entangled(d).mat
    etas = _luders_choi(d, g)
    resid = 0.0
    for a in range(d):
        mu = alpha * phi + beta * _basis_proj(d, a)
        resid = max(
            resid,
            float(np.max(np.abs(mu - v * etas[a] - (1.0 - v) * noise_etas[a]))),
        )
    valid = min(alpha, beta, x1, x2) >= -1e-9 and resid <= 1e-9
    if not valid:
        logger.warning(
            "worst-case model at (d=%d, sharpness %.6g) failed validation "
            "(min parameter %.3e, rebuild residual %.3e)",
            d, g, min(alpha, beta, x1, x2), resid,
        )
    params = WorstCaseModelParams(alpha, beta, x1, x2, v, valid)
    return params, ChoiInstrument(d, d, noise_etas)


def dual_feasible_point(d: int, gamma: float) -> DualCertificate:
    """Explicit dual point certifying :func:`v_deph_highd_bound`.

    The point uses one fixed bipartite operator per outcome, a rescaled
    maximally entangled block for every (outcome, rank vector) pair,
    diagonal traceless input-space blocks, and zero scalars.  Feed it to
    :func:`instrasim.simulability.verify_dual_certificate` together with
    the unsharp instrument and dephasing noise to check it numerically.
    """
    d = _check_dim(d)
    g = _check_gamma(gamma)
    c = _coherence(g)
    den = (d - 2.0) + d * g + d * c * math.sqrt(d - 1.0)
    alpha = -d / den
    beta = -2.0 * alpha
    sprime = d * d / den

    W = []
    for a in range(d):
        aa = a * d + a
        m = beta * np.eye(d * d, dtype=np.complex128)
        m[aa, aa] = 0.0
        for j in range(d):
            if j != a:
                jj = j * d + j
                m[jj, aa] = alpha
                m[aa, jj] = alpha
        W.append(BipartiteOp(m, d, d))

    phi = max_entangled(d)
    z_block = BipartiteOp(sprime * phi.mat, d, d)
    B: dict[RankVector, HermOp] = {}
    Z: dict[tuple[int, RankVector], BipartiteOp] = {}
    t: dict[tuple[int, RankVector], float] = {}
    for r in rank_vectors(d, d):
        B[r] = HermOp(alpha * np.diag(np.asarray(r, dtype=float) - 1.0))
        for a, ra in enumerate(r):
            if ra >= 1:
                Z[(a, r)] = z_block
                t[(a, r)] = 0.0
    bound = 2.0 * (d - 1.0) / den
    return DualCertificate(W=W, B=B, Z=Z, t=t, bound=bound)


def _certificate_block(d: int, gamma: float, a: int, r: RankVector) -> np.ndarray:
    """The single PSD block of the dual point at (a, r), assembled directly."""
    d = _check_dim(d)
    g = _check_gamma(gamma)
    if not 0 <= a < d:
        raise ValueError(f"outcome index must lie in [0, {d}), got {a}")
    if len(r) != d or r[a] < 1:
        raise ValueError(f"rank vector {tuple(r)} has no block for outcome {a}")
    c = _coherence(g)
    den = (d - 2.0) + d * g + d * c * math.sqrt(d - 1.0)
    alpha = -d / den
    beta = -2.0 * alpha
    sprime = d * d / den
    aa = a * d + a
    m = beta * np.eye(d * d, dtype=np.complex128)
    m[aa, aa] = 0.0
    for j in range(d):
        if j != a:
            jj = j * d + j
            m[jj, aa] = alpha
            m[aa, jj] = alpha
    m = m + (sprime / r[a]) * max_entangled(d).mat
    m = m - (sprime / d - alpha) * np.eye(d * d)
    m = m - alpha * np.kron(np.eye(d), np.diag(np.asarray(r, dtype=float)))
    return m


# ===== characteristic-polynomial certification =====


def char_poly_coeffs(d: int, a: int, r: RankVector | tuple[int, ...]) -> list[int]:
    """Integer coefficients A_0..A_d of the nontrivial factor of the dual
    block's characteristic polynomial at (outcome a, rank vector r).

    The block's spectrum splits into d known nonnegative eigenvalues of
    multiplicity d-1 each and the d roots of this degree-d factor, taken
    in the rescaled variable ``(d * r_a / s') * lambda``.  A_0 is always
    exactly zero and the nonzero coefficients alternate in sign, which
    pins all remaining roots nonnegative by the rule of signs.
    """
    d = _check_dim(d)
    ranks = tuple(int(x) for x in r)
    if len(ranks) != d:
        raise ValueError(f"rank vector must have {d} entries, got {len(ranks)}")
    if any(x < 0 for x in ranks) or sum(ranks) != d:
        raise ValueError(
            f"rank vector must be nonnegative and sum to {d}, got {ranks}"
        )
    if not 0 <= a < d:
        raise ValueError(f"outcome index must lie in [0, {d}), got {a}")
    ra = ranks[a]
    if ra < 1:
        raise ValueError(
            f"outcome {a} has rank 0 in {ranks}; no polynomial factor exists"
        )

    others = [ranks[j] for j in range(d) if j != a]
    elem = [1] + [0] * len(others)
    for x in others:
        for p in range(len(others), 0, -1):
            elem[p] += x * elem[p - 1]

    def sym(p: int) -> int:
        if p < 0 or p >= d:
            return 0
        return elem[p]

    coeffs = []
    for n in range(d + 1):
        p1 = d - n - 1
        term1 = ra ** p1 * (ra * ra - 2 * ra + (n + 1)) * sym(p1) if p1 >= 0 else 0
        term2 = ra ** (d - n) * sym(d - n)
        coeffs.append((-1) ** (d + n) * (term1 + term2))
    return coeffs
