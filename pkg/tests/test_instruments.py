import math

import numpy as np
import pytest

from instrasim.instruments import (
    ChoiInstrument,
    KrausInstrument,
    NoiseModel,
    RankVector,
    canonicalize_pi,
    choi_apply,
    choi_from_json,
    choi_to_json,
    induced_povm,
    kraus_from_json,
    kraus_to_choi,
    kraus_to_json,
    luders_unsharp,
    mix,
    noise_instrument,
    pi_to_choi,
    rank_vectors,
    sic_instrument,
)
from instrasim.matcore import is_psd, partial_trace
from randgen import (
    random_density,
    random_kraus_instrument,
    random_pi_description,
)

SZ = np.diag([1.0, -1.0]).astype(np.complex128)


def test_kraus_completeness_enforced():
    k = np.eye(2) * 0.9
    with pytest.raises(ValueError, match="completeness"):
        KrausInstrument(2, 2, [[k]])


def test_choi_marginal_enforced():
    eta = np.eye(4) / 4.0
    ChoiInstrument(2, 2, [eta])  # marginal is exactly 1/2
    with pytest.raises(ValueError, match="marginal"):
        ChoiInstrument(2, 2, [eta * 1.1])


def test_choi_psd_enforced():
    eta = np.diag([0.5, -0.01, 0.005, 0.005])
    with pytest.raises(ValueError, match="not PSD"):
        ChoiInstrument(2, 2, [eta])


def test_kraus_to_choi_marginal_and_trace():
    rng = np.random.default_rng(0)
    for dA, dAp, n in ((2, 2, 2), (3, 2, 4), (2, 4, 3)):
        k = random_kraus_instrument(rng, dA, dAp, n, kraus_per_outcome=2)
        c = kraus_to_choi(k)
        total = sum(np.real(np.trace(eta.mat)) for eta in c.etas)
        assert np.isclose(total, 1.0, atol=1e-10)
        marg = sum(partial_trace(eta, "A_prime").mat for eta in c.etas)
        assert np.allclose(marg, np.eye(dA) / dA, atol=1e-10)
        for eta in c.etas:
            assert is_psd(eta)


def test_choi_apply_matches_kraus_action():
    rng = np.random.default_rng(1)
    for _ in range(10):
        k = random_kraus_instrument(rng, 3, 2, 2, kraus_per_outcome=2)
        c = kraus_to_choi(k)
        rho = random_density(rng, 3)
        results = choi_apply(c, rho)
        for a, (p, post) in enumerate(results):
            direct = sum(kk @ rho @ kk.conj().T for kk in k.outcomes[a])
            p_direct = np.real(np.trace(direct))
            assert np.isclose(p, p_direct, atol=1e-10)
            if post is not None:
                assert np.allclose(post.mat, direct / p_direct, atol=1e-9)
        assert np.isclose(sum(p for p, _ in results), 1.0, atol=1e-10)


def test_induced_povm_matches_kraus():
    rng = np.random.default_rng(2)
    k = random_kraus_instrument(rng, 3, 4, 2, kraus_per_outcome=1)
    c = kraus_to_choi(k)
    povm = induced_povm(c)
    for a, effect in enumerate(povm):
        direct = sum(kk.conj().T @ kk for kk in k.outcomes[a])
        assert np.allclose(effect.mat, direct, atol=1e-10)
    assert np.allclose(sum(e.mat for e in povm), np.eye(3), atol=1e-10)


def test_luders_unsharp_endpoints():
    sharp = luders_unsharp(2, 1.0)
    assert np.allclose(sharp.outcomes[0][0], np.diag([1.0, 0.0]), atol=1e-14)
    trivial = luders_unsharp(2, 0.0)
    k0 = trivial.outcomes[0][0]
    assert np.allclose(k0, np.eye(2) / math.sqrt(2.0), atol=1e-14)
    with pytest.raises(ValueError):
        luders_unsharp(2, 1.5)
    with pytest.raises(ValueError):
        luders_unsharp(1, 0.5)


def test_luders_unsharp_povm():
    gamma = 0.3
    c = kraus_to_choi(luders_unsharp(2, gamma))
    povm = induced_povm(c)
    assert np.allclose(povm[0].mat, (np.eye(2) + gamma * SZ) / 2.0, atol=1e-12)
    assert np.allclose(povm[1].mat, (np.eye(2) - gamma * SZ) / 2.0, atol=1e-12)


def test_sic_instrument_geometry():
    c = kraus_to_choi(sic_instrument())
    povm = induced_povm(c)
    assert len(povm) == 4
    projs = [2.0 * e.mat for e in povm]
    for i in range(4):
        assert np.isclose(np.real(np.trace(povm[i].mat)), 0.5, atol=1e-12)
        assert np.allclose(projs[i] @ projs[i], projs[i], atol=1e-12)
        for j in range(i + 1, 4):
            overlap = np.real(np.trace(projs[i] @ projs[j]))
            assert np.isclose(overlap, 1.0 / 3.0, atol=1e-12)


def test_rank_vectors_enumeration():
    rvs = rank_vectors(2, 2)
    assert rvs == [RankVector((0, 2)), RankVector((1, 1)), RankVector((2, 0))]
    rvs = rank_vectors(3, 3)
    assert len(rvs) == math.comb(3 + 2, 2)
    assert all(r.total == 3 for r in rvs)
    assert rvs == sorted(rvs)


def test_rank_vector_validation():
    with pytest.raises(ValueError):
        RankVector((1, -1))


def test_noise_models():
    deph = noise_instrument(NoiseModel.dephasing(), 2, 2, 2)
    for eta in deph.etas:
        assert np.allclose(
            eta.mat, np.diag([0.25, 0.0, 0.0, 0.25]), atol=1e-14
        )
    white = noise_instrument(NoiseModel.white(), 2, 2, 2)
    for eta in white.etas:
        assert np.allclose(eta.mat, np.eye(4) / 8.0, atol=1e-14)
    with pytest.raises(ValueError):
        noise_instrument(NoiseModel.worst_case(), 2, 2, 2)
    with pytest.raises(ValueError):
        NoiseModel("purple")
    with pytest.raises(ValueError):
        NoiseModel.custom(None)  # type: ignore[arg-type]


def test_mix_interpolates():
    rng = np.random.default_rng(3)
    k = random_kraus_instrument(rng, 2, 2, 2)
    c = kraus_to_choi(k)
    noise = noise_instrument(NoiseModel.white(), 2, 2, 2)
    mixed = mix(c, noise, 0.25)
    for a in range(2):
        expect = 0.25 * c.etas[a].mat + 0.75 * noise.etas[a].mat
        assert np.allclose(mixed.etas[a].mat, expect, atol=1e-14)
    with pytest.raises(ValueError):
        mix(c, noise, 1.5)


def test_pi_description_realises_valid_instrument():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = random_pi_description(rng, 3, 2, n_outcomes=3)
        c = pi_to_choi(p)
        assert c.dA == 3 and c.dA_prime == 2 and c.n_outcomes == 3


def test_canonicalize_preserves_choi():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = random_pi_description(rng, 2, 2, n_outcomes=2)
        before = pi_to_choi(p)
        after = pi_to_choi(canonicalize_pi(p))
        for a in range(2):
            assert np.allclose(
                before.etas[a].mat, after.etas[a].mat, atol=1e-10
            )


def test_canonical_form_structure():
    rng = np.random.default_rng(6)
    p = random_pi_description(rng, 3, 2, n_outcomes=2)
    canon = canonicalize_pi(p)
    n = canon.n_outcomes
    for lam in range(canon.n_labels):
        assert np.allclose(canon.post[lam], np.eye(n), atol=0)
        # outcome channels within a label share the same Kraus family
        first = canon.channels[lam][0]
        for ap in range(1, n):
            assert len(canon.channels[lam][ap]) == len(first)
    assert np.isclose(sum(canon.q), 1.0, atol=1e-10)


def test_choi_json_roundtrip():
    rng = np.random.default_rng(7)
    c = kraus_to_choi(random_kraus_instrument(rng, 2, 3, 2))
    back = choi_from_json(choi_to_json(c))
    assert (back.dA, back.dA_prime, back.n_outcomes) == (2, 3, 2)
    for a in range(2):
        assert np.allclose(back.etas[a].mat, c.etas[a].mat, atol=0)


def test_kraus_json_roundtrip():
    rng = np.random.default_rng(8)
    k = random_kraus_instrument(rng, 2, 2, 2, kraus_per_outcome=2)
    back = kraus_from_json(kraus_to_json(k))
    for a in range(2):
        for i, kk in enumerate(k.outcomes[a]):
            assert np.allclose(back.outcomes[a][i], kk, atol=0)
