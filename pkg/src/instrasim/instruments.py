"""Quantum instruments, reference families, noise models, and projective
descriptions.

An instrument with ``N`` outcomes maps an input state on a ``dA``-level
system to ``N`` subnormalised output states on a ``dA_prime``-level
system.  Instruments are represented either by Kraus operators grouped
per outcome or by the corresponding Choi operators; the Choi convention
is fixed by :func:`kraus_to_choi` (output factor on the left, input on
the right, maximally entangled reference state normalised to trace one).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .matcore import (
    ASYM_TOL,
    BipartiteOp,
    HermOp,
    is_psd,
    max_entangled,
    min_eigenvalue,
    partial_trace,
)

__all__ = [
    "KrausInstrument",
    "ChoiInstrument",
    "RankVector",
    "NoiseModel",
    "PiDescription",
    "kraus_to_choi",
    "choi_apply",
    "induced_povm",
    "luders_unsharp",
    "sic_instrument",
    "noise_instrument",
    "mix",
    "pi_to_choi",
    "canonicalize_pi",
    "rank_vectors",
    "kraus_to_json",
    "kraus_from_json",
    "choi_to_json",
    "choi_from_json",
    "ZERO_PROB",
]

# Outcome probabilities below this are reported with a zero-state marker.
ZERO_PROB = 1e-12

_COMPLETENESS_TOL = 1e-10
_CHOI_TOL = 1e-9


def _as_complex(m, shape=None, what: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=np.complex128)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{what} has shape {a.shape}, expected {shape}")
    a.setflags(write=False)
    return a


class KrausInstrument:
    """An instrument given by Kraus operators grouped per outcome.

    ``outcomes[a]`` is the list of Kraus matrices (each ``dA_prime x dA``)
    implementing outcome ``a``.  The summed completeness relation
    ``sum_a sum_i K^dag K = 1`` is enforced at construction.
    """

    __slots__ = ("_dA", "_dAp", "_outcomes")

    def __init__(self, dA: int, dA_prime: int, outcomes: Sequence[Sequence[np.ndarray]]):
        if dA < 1 or dA_prime < 1:
            raise ValueError(f"dimensions must be positive, got ({dA_prime}, {dA})")
        if len(outcomes) < 1:
            raise ValueError("an instrument needs at least one outcome")
        packed = []
        acc = np.zeros((dA, dA), dtype=np.complex128)
        for a, kraus_list in enumerate(outcomes):
            if len(kraus_list) < 1:
                raise ValueError(f"outcome {a} has no Kraus operators")
            cleaned = tuple(
                _as_complex(k, (dA_prime, dA), f"Kraus operator {i} of outcome {a}")
                for i, k in enumerate(kraus_list)
            )
            for k in cleaned:
                acc += k.conj().T @ k
            packed.append(cleaned)
        dev = np.max(np.abs(acc - np.eye(dA)))
        if dev > _COMPLETENESS_TOL:
            raise ValueError(
                f"Kraus completeness violated: max|sum K^dag K - 1| = {dev:.3e}"
            )
        self._dA = int(dA)
        self._dAp = int(dA_prime)
        self._outcomes = tuple(packed)

    @property
    def dA(self) -> int:
        return self._dA

    @property
    def dA_prime(self) -> int:
        return self._dAp

    @property
    def outcomes(self) -> tuple[tuple[np.ndarray, ...], ...]:
        return self._outcomes

    @property
    def n_outcomes(self) -> int:
        return len(self._outcomes)

    def __repr__(self) -> str:
        return (
            f"KrausInstrument(dA={self._dA}, dA_prime={self._dAp}, "
            f"n_outcomes={self.n_outcomes})"
        )


class ChoiInstrument:
    """An instrument given by one Choi operator per outcome.

    Each ``eta_a`` must be positive semidefinite and the input marginal
    ``sum_a tr_out(eta_a)`` must equal ``1/dA`` (trace-one convention).
    """

    __slots__ = ("_dA", "_dAp", "_etas")

    def __init__(self, dA: int, dA_prime: int, etas: Sequence[BipartiteOp | np.ndarray]):
        if dA < 1 or dA_prime < 1:
            raise ValueError(f"dimensions must be positive, got ({dA_prime}, {dA})")
        if len(etas) < 1:
            raise ValueError("an instrument needs at least one outcome")
        ops = []
        for a, e in enumerate(etas):
            op = e if isinstance(e, BipartiteOp) else BipartiteOp(e, dA_prime, dA)
            if (op.dA_prime, op.dA) != (dA_prime, dA):
                raise ValueError(
                    f"outcome {a} has dims ({op.dA_prime}, {op.dA}), "
                    f"expected ({dA_prime}, {dA})"
                )
            lam = min_eigenvalue(op)
            if lam < -_CHOI_TOL:
                raise ValueError(
                    f"Choi operator of outcome {a} is not PSD (min eig {lam:.3e})"
                )
            ops.append(op)
        marg = sum(partial_trace(op, "A_prime").mat for op in ops)
        dev = np.max(np.abs(marg - np.eye(dA) / dA))
        if dev > _CHOI_TOL:
            raise ValueError(
                f"instrument marginal deviates from 1/dA by {dev:.3e}"
            )
        self._dA = int(dA)
        self._dAp = int(dA_prime)
        self._etas = tuple(ops)

    @property
    def dA(self) -> int:
        return self._dA

    @property
    def dA_prime(self) -> int:
        return self._dAp

    @property
    def etas(self) -> tuple[BipartiteOp, ...]:
        return self._etas

    @property
    def n_outcomes(self) -> int:
        return len(self._etas)

    def __repr__(self) -> str:
        return (
            f"ChoiInstrument(dA={self._dA}, dA_prime={self._dAp}, "
            f"n_outcomes={self.n_outcomes})"
        )


class RankVector(tuple):
    """Per-outcome projector ranks of a projective measurement on a d-level space."""

    def __new__(cls, ranks):
        vals = tuple(int(r) for r in ranks)
        if any(r < 0 for r in vals):
            raise ValueError(f"ranks must be nonnegative, got {vals}")
        return super().__new__(cls, vals)

    @property
    def total(self) -> int:
        return sum(self)

    def __repr__(self) -> str:
        return f"RankVector{tuple(self)}"


def rank_vectors(d: int, n_outcomes: int) -> list[RankVector]:
    """All rank vectors of a rank-complete projective measurement.

    Enumerates the compositions of ``d`` into ``n_outcomes`` nonnegative
    parts in lexicographic order.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if n_outcomes < 1:
        raise ValueError(f"n_outcomes must be >= 1, got {n_outcomes}")

    def gen(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for k in range(remaining + 1):
            yield from gen(prefix + (k,), remaining - k, slots - 1)

    return [RankVector(t) for t in gen((), d, n_outcomes)]


class NoiseModel:
    """Tagged family of reference noise instruments.

    ``dephasing``: output pinned to the measured basis state, input
    dephased uniformly over outcomes.  ``white``: maximally mixed Choi
    operators.  ``worst_case``: placeholder tag for noise that is itself
    optimised inside a program (it cannot be instantiated directly).
    ``custom``: wraps an explicit instrument.
    """

    DEPHASING = "dephasing"
    WHITE = "white"
    WORST_CASE = "worst_case"
    CUSTOM = "custom"

    __slots__ = ("tag", "instrument")

    def __init__(self, tag: str, instrument: ChoiInstrument | None = None):
        if tag not in (self.DEPHASING, self.WHITE, self.WORST_CASE, self.CUSTOM):
            raise ValueError(f"unknown noise tag {tag!r}")
        if tag == self.CUSTOM and instrument is None:
            raise ValueError("custom noise requires an instrument")
        if tag != self.CUSTOM and instrument is not None:
            raise ValueError(f"noise tag {tag!r} does not take an instrument")
        self.tag = tag
        self.instrument = instrument

    @classmethod
    def dephasing(cls) -> "NoiseModel":
        return cls(cls.DEPHASING)

    @classmethod
    def white(cls) -> "NoiseModel":
        return cls(cls.WHITE)

    @classmethod
    def worst_case(cls) -> "NoiseModel":
        return cls(cls.WORST_CASE)

    @classmethod
    def custom(cls, instrument: ChoiInstrument) -> "NoiseModel":
        return cls(cls.CUSTOM, instrument)

    def __repr__(self) -> str:
        return f"NoiseModel({self.tag!r})"


def kraus_to_choi(k: KrausInstrument) -> ChoiInstrument:
    """Choi operators ``eta_a = sum_i (K_i (x) 1) phi+ (K_i (x) 1)^dag``."""
    d = k.dA
    etas = []
    for kraus_list in k.outcomes:
        eta = np.zeros((k.dA_prime * d, k.dA_prime * d), dtype=np.complex128)
        for kk in kraus_list:
            # (K (x) 1)|phi+> has amplitudes K[i', j]/sqrt(d) at index i'*d + j,
            # which is exactly the row-major flattening of K.
            w = kk.reshape(-1) / math.sqrt(d)
            eta += np.outer(w, w.conj())
        etas.append(BipartiteOp(eta, k.dA_prime, d))
    return ChoiInstrument(d, k.dA_prime, etas)


def choi_apply(
    c: ChoiInstrument, rho: HermOp | np.ndarray
) -> list[tuple[float, HermOp | None]]:
    """Apply an instrument to a state.

    Returns one ``(probability, normalised post-state)`` pair per outcome.
    Outcomes with probability below ``ZERO_PROB`` carry ``None`` in place
    of a state.
    """
    r = rho.mat if isinstance(rho, HermOp) else HermOp(rho).mat
    if r.shape[0] != c.dA:
        raise ValueError(f"state dim {r.shape[0]} does not match instrument dA={c.dA}")
    lam = min_eigenvalue(r)
    if lam < -1e-8:
        raise ValueError(f"state is not PSD (min eig {lam:.3e})")
    tr = float(np.real(np.trace(r)))
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"state trace {tr} deviates from 1 beyond 1e-8")
    out: list[tuple[float, HermOp | None]] = []
    for eta in c.etas:
        t4 = eta.mat.reshape(c.dA_prime, c.dA, c.dA_prime, c.dA)
        mapped = c.dA * np.einsum("mj,imkj->ik", r, t4)
        p = float(np.real(np.trace(mapped)))
        if p < ZERO_PROB:
            out.append((max(p, 0.0), None))
        else:
            out.append((p, HermOp(mapped / p)))
    return out


def induced_povm(c: ChoiInstrument) -> list[HermOp]:
    """The measurement effects ``M_a = dA * tr_out(eta_a)^T``."""
    return [
        HermOp(c.dA * partial_trace(eta, "A_prime").mat.T) for eta in c.etas
    ]


def luders_unsharp(d: int, gamma: float) -> KrausInstrument:
    """Unsharp basis measurement with gentle state update.

    One Kraus operator per outcome ``a``:
    ``K_a = sqrt((1+gamma)/2) |a><a| + sqrt((1-gamma)/(2(d-1))) (1 - |a><a|)``.
    ``gamma = 1`` is the sharp basis measurement, ``gamma = 0`` is trivial.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    hi = math.sqrt((1.0 + gamma) / 2.0)
    lo = math.sqrt((1.0 - gamma) / (2.0 * (d - 1)))
    outcomes = []
    for a in range(d):
        k = lo * np.eye(d, dtype=np.complex128)
        k[a, a] = hi
        outcomes.append([k])
    return KrausInstrument(d, d, outcomes)


def sic_instrument() -> KrausInstrument:
    """Qubit instrument measuring a symmetric four-outcome tetrahedral POVM.

    Kraus operators ``K_a = |phi_a><phi_a| / sqrt(2)`` built from the
    tetrahedral Bloch directions; the induced POVM has four effects of
    trace one half with pairwise overlaps ``tr(phi_a phi_b) = 1/3``.
    """
    dirs = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    ) / math.sqrt(3.0)
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    outcomes = []
    for n in dirs:
        proj = 0.5 * (np.eye(2) + n[0] * sx + n[1] * sy + n[2] * sz)
        outcomes.append([proj / math.sqrt(2.0)])
    return KrausInstrument(2, 2, outcomes)


def noise_instrument(
    model: NoiseModel, n_outcomes: int, dA: int, dA_prime: int
) -> ChoiInstrument:
    """Instantiate a reference noise instrument of the given shape."""
    if n_outcomes < 1:
        raise ValueError(f"n_outcomes must be >= 1, got {n_outcomes}")
    if model.tag == NoiseModel.WORST_CASE:
        raise ValueError(
            "worst-case noise is optimised inside a program and has no fixed instrument"
        )
    if model.tag == NoiseModel.CUSTOM:
        c = model.instrument
        assert c is not None
        if (c.n_outcomes, c.dA, c.dA_prime) != (n_outcomes, dA, dA_prime):
            raise ValueError(
                f"custom noise has shape ({c.n_outcomes}, {c.dA}, {c.dA_prime}), "
                f"expected ({n_outcomes}, {dA}, {dA_prime})"
            )
        return c
    if model.tag == NoiseModel.DEPHASING:
        if dA_prime != dA:
            raise ValueError(
                f"dephasing noise requires dA_prime == dA, got ({dA_prime}, {dA})"
            )
        eta = np.zeros((dA * dA, dA * dA), dtype=np.complex128)
        for i in range(dA):
            idx = i * dA + i
            eta[idx, idx] = 1.0 / (n_outcomes * dA)
        return ChoiInstrument(dA, dA_prime, [eta.copy() for _ in range(n_outcomes)])
    # white
    side = dA * dA_prime
    eta = np.eye(side, dtype=np.complex128) / (n_outcomes * dA * dA_prime)
    return ChoiInstrument(dA, dA_prime, [eta.copy() for _ in range(n_outcomes)])


def mix(c: ChoiInstrument, noise: ChoiInstrument, v: float) -> ChoiInstrument:
    """Convex mixture ``v * c + (1 - v) * noise`` taken outcome by outcome."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    if (c.dA, c.dA_prime, c.n_outcomes) != (noise.dA, noise.dA_prime, noise.n_outcomes):
        raise ValueError(
            f"instrument shape ({c.n_outcomes}, {c.dA}, {c.dA_prime}) does not match "
            f"noise shape ({noise.n_outcomes}, {noise.dA}, {noise.dA_prime})"
        )
    etas = [
        BipartiteOp(v * e.mat + (1.0 - v) * n.mat, c.dA_prime, c.dA)
        for e, n in zip(c.etas, noise.etas)
    ]
    return ChoiInstrument(c.dA, c.dA_prime, etas)


# ===== projective-instrument descriptions =====


class PiDescription:
    """Classical mixture of projective measurements with outcome postprocessing.

    Fields, indexed by mixing label ``lam``:

    * ``q[lam]``: prior probability of the label.
    * ``projectors[lam][ap]``: complete set of mutually orthogonal
      projectors on the input space (ranks may be zero).
    * ``channels[lam][ap]``: Kraus operators of the channel applied after
      projective outcome ``ap`` (input to output space).
    * ``post[lam]``: column-stochastic matrix ``p(a | ap)`` mapping
      projective outcomes to final outcomes.

    All labels must agree on the number of final outcomes and on both
    dimensions.
    """

    __slots__ = ("_q", "_projectors", "_channels", "_post", "_dA", "_dAp", "_n")

    def __init__(self, q, projectors, channels, post):
        n_lam = len(q)
        if n_lam < 1:
            raise ValueError("at least one mixing label is required")
        if not (len(projectors) == len(channels) == len(post) == n_lam):
            raise ValueError("q, projectors, channels, post must have equal length")
        qv = tuple(float(x) for x in q)
        if min(qv) < -1e-12:
            raise ValueError(f"negative prior {min(qv)}")
        if abs(sum(qv) - 1.0) > 1e-9:
            raise ValueError(f"priors sum to {sum(qv)}, expected 1")

        dA = np.asarray(projectors[0][0]).shape[0]
        dAp: int | None = None
        n_out: int | None = None
        all_proj = []
        all_chan = []
        all_post = []
        for lam in range(n_lam):
            projs = [
                _as_complex(p, (dA, dA), f"projector {ap} of label {lam}")
                for ap, p in enumerate(projectors[lam])
            ]
            if len(projs) != len(channels[lam]):
                raise ValueError(
                    f"label {lam}: {len(projs)} projectors but "
                    f"{len(channels[lam])} channels"
                )
            acc = np.zeros((dA, dA), dtype=np.complex128)
            for ap, p in enumerate(projs):
                if np.max(np.abs(p - p.conj().T)) > ASYM_TOL:
                    raise ValueError(f"projector {ap} of label {lam} is not Hermitian")
                if np.max(np.abs(p @ p - p)) > _COMPLETENESS_TOL:
                    raise ValueError(f"projector {ap} of label {lam} is not idempotent")
                for other in projs[:ap]:
                    if np.max(np.abs(other @ p)) > _COMPLETENESS_TOL:
                        raise ValueError(
                            f"projectors of label {lam} are not mutually orthogonal"
                        )
                acc += p
            if np.max(np.abs(acc - np.eye(dA))) > _COMPLETENESS_TOL:
                raise ValueError(f"projectors of label {lam} do not sum to identity")

            chans = []
            for ap, kraus_list in enumerate(channels[lam]):
                if len(kraus_list) < 1:
                    raise ValueError(f"label {lam}, outcome {ap}: empty channel")
                ks = []
                tp = np.zeros((dA, dA), dtype=np.complex128)
                for i, kk in enumerate(kraus_list):
                    a = np.array(kk, dtype=np.complex128)
                    if a.ndim != 2 or a.shape[1] != dA:
                        raise ValueError(
                            f"label {lam}, outcome {ap}: Kraus {i} has shape {a.shape}"
                        )
                    if dAp is None:
                        dAp = a.shape[0]
                    elif a.shape[0] != dAp:
                        raise ValueError(
                            f"label {lam}, outcome {ap}: output dim {a.shape[0]} "
                            f"differs from {dAp}"
                        )
                    a.setflags(write=False)
                    ks.append(a)
                    tp += a.conj().T @ a
                if np.max(np.abs(tp - np.eye(dA))) > _CHOI_TOL:
                    raise ValueError(
                        f"label {lam}, outcome {ap}: channel is not trace preserving"
                    )
                chans.append(tuple(ks))

            pm = np.array(post[lam], dtype=float)
            if pm.ndim != 2 or pm.shape[1] != len(projs):
                raise ValueError(
                    f"label {lam}: postprocessing shape {pm.shape} does not match "
                    f"{len(projs)} projective outcomes"
                )
            if n_out is None:
                n_out = pm.shape[0]
            elif pm.shape[0] != n_out:
                raise ValueError(
                    f"label {lam}: {pm.shape[0]} final outcomes, expected {n_out}"
                )
            if pm.min() < -1e-12:
                raise ValueError(f"label {lam}: negative postprocessing entry")
            colsums = pm.sum(axis=0)
            if np.max(np.abs(colsums - 1.0)) > 1e-9:
                raise ValueError(f"label {lam}: postprocessing columns must sum to 1")
            pm.setflags(write=False)

            all_proj.append(tuple(projs))
            all_chan.append(tuple(chans))
            all_post.append(pm)

        assert dAp is not None and n_out is not None
        self._q = qv
        self._projectors = tuple(all_proj)
        self._channels = tuple(all_chan)
        self._post = tuple(all_post)
        self._dA = dA
        self._dAp = dAp
        self._n = n_out

    @property
    def q(self) -> tuple[float, ...]:
        return self._q

    @property
    def projectors(self):
        return self._projectors

    @property
    def channels(self):
        return self._channels

    @property
    def post(self):
        return self._post

    @property
    def dA(self) -> int:
        return self._dA

    @property
    def dA_prime(self) -> int:
        return self._dAp

    @property
    def n_outcomes(self) -> int:
        return self._n

    @property
    def n_labels(self) -> int:
        return len(self._q)

    def __repr__(self) -> str:
        return (
            f"PiDescription(labels={self.n_labels}, n_outcomes={self._n}, "
            f"dA={self._dA}, dA_prime={self._dAp})"
        )


def pi_to_choi(p: PiDescription) -> ChoiInstrument:
    """Choi operators of the instrument a description realises."""
    d = p.dA
    side = p.dA_prime * d
    etas = [np.zeros((side, side), dtype=np.complex128) for _ in range(p.n_outcomes)]
    for lam in range(p.n_labels):
        ql = p.q[lam]
        if ql <= 0.0:
            continue
        for ap, proj in enumerate(p.projectors[lam]):
            # Choi of (channel after projection) against the reference state.
            block = np.zeros((side, side), dtype=np.complex128)
            for kk in p.channels[lam][ap]:
                w = (kk @ proj).reshape(-1) / math.sqrt(d)
                block += np.outer(w, w.conj())
            for a in range(p.n_outcomes):
                weight = ql * p.post[lam][a, ap]
                if weight > 0.0:
                    etas[a] += weight * block
    return ChoiInstrument(d, p.dA_prime, etas)


def _deterministic_decomposition(pm: np.ndarray) -> list[tuple[tuple[int, ...], float]]:
    """Split a column-stochastic matrix into deterministic relabelings.

    Greedy peeling: repeatedly pick, per projective outcome, the final
    outcome with the largest residual mass, and subtract the largest
    weight that keeps the residual nonnegative.  Each round zeroes at
    least one residual entry, so at most ``size(pm)`` rounds run.
    """
    residual = pm.astype(float).copy()
    parts: list[tuple[tuple[int, ...], float]] = []
    for _ in range(residual.size + 1):
        if residual.sum() < 1e-12:
            break
        f = tuple(int(np.argmax(residual[:, ap])) for ap in range(residual.shape[1]))
        w = float(min(residual[f[ap], ap] for ap in range(residual.shape[1])))
        if w <= 0.0:
            break
        for ap in range(residual.shape[1]):
            residual[f[ap], ap] -= w
        parts.append((f, w))
    total = sum(w for _, w in parts)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(
            f"postprocessing decomposition mass {total} deviates from 1"
        )
    return parts


def canonicalize_pi(p: PiDescription) -> PiDescription:
    """Rewrite a description into canonical form.

    The canonical form has identity postprocessing, exactly one channel
    shared by all projective outcomes of a label, and one label per
    (original label, deterministic relabeling) pair.  The realised
    instrument is unchanged; outcome ``a`` of the new label measures the
    coarse-grained projector and applies the original outcome-dependent
    channels inside one projective-measure-then-evolve channel.
    """
    new_q: list[float] = []
    new_proj = []
    new_chan = []
    new_post = []
    n = p.n_outcomes
    d = p.dA
    ident = np.eye(n)
    for lam in range(p.n_labels):
        ql = p.q[lam]
        if ql <= 0.0:
            continue
        # One shared channel: project, then apply the outcome's channel.
        shared: list[np.ndarray] = []
        for ap, proj in enumerate(p.projectors[lam]):
            for kk in p.channels[lam][ap]:
                shared.append(kk @ proj)
        shared_t = tuple(shared)
        for f, w in _deterministic_decomposition(p.post[lam]):
            coarse = [np.zeros((d, d), dtype=np.complex128) for _ in range(n)]
            for ap, proj in enumerate(p.projectors[lam]):
                coarse[f[ap]] = coarse[f[ap]] + proj
            new_q.append(ql * w)
            new_proj.append(tuple(coarse))
            new_chan.append(tuple(shared_t for _ in range(n)))
            new_post.append(ident)
    return PiDescription(new_q, new_proj, new_chan, new_post)


# ===== serialization =====


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _decode_matrix(rows: list) -> np.ndarray:
    return np.array(
        [[complex(cell[0], cell[1]) for cell in row] for row in rows],
        dtype=np.complex128,
    )


def choi_to_json(c: ChoiInstrument) -> dict:
    """JSON-ready dict with one Choi matrix per outcome (row-major, [re, im] cells)."""
    return {
        "dA": c.dA,
        "dA_prime": c.dA_prime,
        "outcomes": [_encode_matrix(eta.mat) for eta in c.etas],
    }


def choi_from_json(data: dict) -> ChoiInstrument:
    etas = [_decode_matrix(m) for m in data["outcomes"]]
    return ChoiInstrument(int(data["dA"]), int(data["dA_prime"]), etas)


def kraus_to_json(k: KrausInstrument) -> dict:
    """JSON-ready dict with the per-outcome lists of Kraus matrices."""
    return {
        "dA": k.dA,
        "dA_prime": k.dA_prime,
        "outcomes": [
            [_encode_matrix(kk) for kk in kraus_list] for kraus_list in k.outcomes
        ],
    }


def kraus_from_json(data: dict) -> KrausInstrument:
    outcomes = [
        [_decode_matrix(m) for m in kraus_list] for kraus_list in data["outcomes"]
    ]
    return KrausInstrument(int(data["dA"]), int(data["dA_prime"]), outcomes)
