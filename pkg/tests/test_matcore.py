import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instrasim.matcore import (
    ASYM_TOL,
    BipartiteOp,
    HermOp,
    is_psd,
    max_entangled,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    real_embedding,
    reduction_map,
    tensor,
)
from randgen import random_hermitian, random_psd


def test_hermop_symmetrises_roundoff():
    m = np.array([[1.0, 0.5 + 1e-12j], [0.5, 2.0]])
    op = HermOp(m)
    assert np.max(np.abs(op.mat - op.mat.conj().T)) == 0.0


def test_hermop_rejects_asymmetry():
    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="not Hermitian"):
        HermOp(m)


def test_hermop_is_immutable():
    op = HermOp(np.eye(2))
    with pytest.raises(ValueError):
        op.mat[0, 0] = 5.0


def test_bipartite_dimension_check():
    with pytest.raises(ValueError, match="does not match"):
        BipartiteOp(np.eye(5), 2, 2)


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = random_hermitian(rng, 3)
        b = random_hermitian(rng, 2)
        m = BipartiteOp(np.kron(a, b), 3, 2)
        # tracing out the input leaves tr(b) * a on the output space
        left = partial_trace(m, "A").mat
        assert np.allclose(left, a * np.trace(b).real, atol=1e-12)
        right = partial_trace(m, "A_prime").mat
        assert np.allclose(right, b * np.trace(a).real, atol=1e-12)


def test_partial_transpose_of_product():
    rng = np.random.default_rng(1)
    a = random_hermitian(rng, 2)
    b = random_hermitian(rng, 3)
    m = BipartiteOp(np.kron(a, b), 2, 3)
    pt_in = partial_transpose(m, "A").mat
    assert np.allclose(pt_in, np.kron(a, b.T), atol=1e-12)
    pt_out = partial_transpose(m, "A_prime").mat
    assert np.allclose(pt_out, np.kron(a.T, b), atol=1e-12)


def test_partial_transpose_involution_and_trace():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = BipartiteOp(random_hermitian(rng, 6), 2, 3)
        back = partial_transpose(partial_transpose(m, "A"), "A")
        assert np.allclose(back.mat, m.mat, atol=1e-14)
        # the partial transpose is trace preserving
        assert np.isclose(
            np.trace(partial_transpose(m, "A_prime").mat),
            np.trace(m.mat),
            atol=1e-13,
        )


def test_max_entangled_properties():
    for d in (2, 3, 5):
        phi = max_entangled(d)
        m = phi.mat
        assert np.isclose(np.trace(m).real, 1.0, atol=1e-14)
        assert np.allclose(m @ m, m, atol=1e-13)  # rank-1 projector
        marg = partial_trace(phi, "A_prime").mat
        assert np.allclose(marg, np.eye(d) / d, atol=1e-14)
        # partial transpose has negative eigenvalue -1/d
        assert np.isclose(
            min_eigenvalue(partial_transpose(phi, "A")), -1.0 / d, atol=1e-12
        )


def test_max_entangled_pt_is_swap_over_d():
    d = 3
    pt = partial_transpose(max_entangled(d), "A").mat * d
    swap = pt @ pt
    assert np.allclose(swap, np.eye(d * d), atol=1e-13)


def test_reduction_map_on_max_entangled():
    # the reduction criterion detects the maximally entangled state for
    # s below d and passes at s = d
    for d in (2, 3):
        phi = max_entangled(d)
        assert min_eigenvalue(reduction_map(1, phi)) < -1e-3
        assert min_eigenvalue(reduction_map(d, phi)) >= -1e-12


def test_reduction_map_matches_definition():
    rng = np.random.default_rng(3)
    m = BipartiteOp(random_hermitian(rng, 6), 3, 2)
    out = reduction_map(2, m).mat
    marg = partial_trace(m, "A_prime").mat
    assert np.allclose(out, np.kron(np.eye(3), marg) - m.mat / 2.0, atol=1e-13)


def test_tensor_index_order():
    # left factor varies slowest: entry (i_out*dA + i_in) convention
    a = np.diag([1.0, 2.0])
    b = np.diag([3.0, 5.0])
    t = tensor(a, b).mat
    assert np.allclose(np.diag(t), [3.0, 5.0, 6.0, 10.0])


def test_is_psd_and_min_eigenvalue():
    rng = np.random.default_rng(4)
    p = random_psd(rng, 4)
    assert is_psd(p)
    w = np.linalg.eigvalsh(p)
    assert np.isclose(min_eigenvalue(p), w[0], atol=1e-12)
    assert not is_psd(p - np.eye(4) * (w[0] + 1.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(2, 4))
def test_real_embedding_preserves_spectrum(seed, d):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, d)
    emb = real_embedding(m)
    assert np.allclose(emb, emb.T, atol=1e-13)
    w = np.linalg.eigvalsh(m)
    we = np.linalg.eigvalsh(emb)
    assert np.allclose(we, np.repeat(np.sort(w), 2), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_partial_trace_linearity(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 4)
    b = random_hermitian(rng, 4)
    c = rng.normal()
    lhs = partial_trace(BipartiteOp(a + c * b, 2, 2), "A").mat
    rhs = (
        partial_trace(BipartiteOp(a, 2, 2), "A").mat
        + c * partial_trace(BipartiteOp(b, 2, 2), "A").mat
    )
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_asymmetry_tolerance_boundary():
    m = np.eye(2, dtype=complex)
    m[0, 1] = 0.5 * ASYM_TOL * 1j
    HermOp(m)  # inside tolerance: symmetrised silently
    m[0, 1] = 3.0 * ASYM_TOL * 1j
    with pytest.raises(ValueError):
        HermOp(m)
