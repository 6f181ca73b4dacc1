import itertools

import numpy as np
import pytest

from telegap.ground_state import assemble_ground_state, psi0
from telegap.model import (
    IDLE,
    ModelParams,
    basis_ket,
    bell_vector,
    build_chain,
    build_create_pair,
    build_projection,
    build_unit,
    dump_operator,
    load_operator,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-0.1)
    with pytest.raises(ValueError):
        ModelParams(2.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, 0)
    assert ModelParams(np.pi / 2).theta == np.pi / 2


def test_create_pair_qubits():
    blk = build_create_pair(1.0, 2, 2).block
    w, v = np.linalg.eigh(blk)
    np.testing.assert_allclose(w, [0, 1, 1, 1], atol=1e-15)
    assert abs(abs(v[:, 0] @ bell_vector()) - 1) < 1e-14
    np.testing.assert_allclose(blk, np.eye(4) - np.outer(bell_vector(), bell_vector()), atol=1e-15)


def test_create_pair_idle_kernel():
    blk = build_create_pair(2.5, 3, 3).block
    w = np.linalg.eigvalsh(blk)
    np.testing.assert_allclose(w[:6], 0, atol=1e-14)
    np.testing.assert_allclose(w[6:], 2.5)
    for a, b in itertools.product(range(3), repeat=2):
        if IDLE in (a, b):
            v = basis_ket(a, b, dims=(3, 3))
            assert np.abs(blk @ v).max() == 0


def test_create_pair_triplet_state():
    v = (basis_ket(1, 0, dims=(2, 2)) + basis_ket(0, 1, dims=(2, 2))) / np.sqrt(2)
    np.testing.assert_allclose(build_create_pair(1.0).block @ v, v, atol=1e-15)


def test_create_pair_bad_dims():
    with pytest.raises(ValueError):
        build_create_pair(1.0, 4, 2)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.0, 1.56, np.pi / 2])
def test_projection_spectrum(theta):
    blk = build_projection(theta, 1.0).block
    w = np.linalg.eigvalsh(blk)
    np.testing.assert_allclose(w[:4], 0, atol=1e-14)
    np.testing.assert_allclose(w[4:], 1, atol=1e-14)


def test_projection_endpoints():
    bell33 = bell_vector(3, 3)
    assert np.abs(build_projection(0.0).block @ bell33).max() < 1e-15
    ii = basis_ket(IDLE, IDLE, dims=(3, 3))
    assert np.abs(build_projection(np.pi / 2).block @ ii).max() < 1e-15
    with pytest.raises(ValueError):
        build_projection(1.7)


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, 1.56, np.pi / 2])
def test_unit_kernel_is_psi0_pair(theta):
    unit = build_unit(theta, 1.0, 2)
    H = unit.to_dense()
    w, v = np.linalg.eigh(H)
    assert np.sum(w < 1e-12) == 2
    kernel = v[:, :2]
    for b in (0, 1):
        p = psi0(b, theta).amplitudes.real
        assert np.linalg.norm(H @ p) < 1e-13
        assert abs(np.linalg.norm(kernel.T @ p) - 1) < 1e-12


def test_unit_gap_at_zero_angle():
    # frozen from dense diagonalization of the 18-dim block
    w = np.linalg.eigvalsh(build_unit(0.0, 1.0, 2).to_dense())
    assert w[2] == pytest.approx(1.0, abs=1e-12)


def test_chain_structure():
    for ell in (1, 2, 4):
        op = build_chain(ModelParams(1.1, 1.0, ell))
        assert len(op.terms) == 2 * ell + 1
        assert op.dim == 4 * 9 ** ell
        assert op.terms[0].site_dims == (2, 3)
        assert op.terms[-1].site_dims == (3, 2)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.56])
@pytest.mark.parametrize("ell", [1, 2])
def test_chain_psd(theta, ell):
    H = build_chain(ModelParams(theta, 1.0, ell)).to_dense()
    assert np.abs(H - H.T).max() == 0
    assert np.linalg.eigvalsh(H).min() >= -1e-12


def test_chain_ell1_ground_energy():
    w = np.linalg.eigvalsh(build_chain(ModelParams(1.56, 1.0, 1)).to_dense())
    assert abs(w[0]) < 1e-13


@pytest.mark.parametrize("theta", [0.3, 1.0, 1.56])
@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_chain_annihilates_ground_state(theta, ell):
    params = ModelParams(theta, 1.0, ell)
    psi = assemble_ground_state(params)
    assert np.linalg.norm(build_chain(params).apply(psi.amplitudes)) < 1e-12


def _zero_angle_spectrum(ell):
    """Independent enumeration at theta = 0.

    There the projection is diagonal in the product basis (|IDLE,IDLE> and the
    four mismatches cost 1) and every site's IDLE flag is conserved, so each
    flag pattern contributes its projection cost plus the Minkowski sum of the
    pair terms: {0, 1, 1, 1} for a pair with no IDLE, and a zero-energy
    multiplicity of 2 (one IDLE) or 1 (two IDLEs) otherwise.
    """
    n_q = 2 * ell
    levels = []
    for flags in itertools.product((0, 1), repeat=n_q):
        site_idle = (0,) + flags + (0,)
        offset = sum(1 for j in range(ell) if flags[2 * j] or flags[2 * j + 1])
        spec = np.array([float(offset)])
        for a in range(0, n_q + 2, 2):  # pairs (cap, q1), (q2, q3), ..., (q_last, cap)
            ia, ib = site_idle[a], site_idle[a + 1]
            piece = np.array([0.0, 1, 1, 1]) if not (ia or ib) else np.zeros(2 if ia != ib else 1)
            spec = (spec[:, None] + piece[None, :]).ravel()
        levels.append(spec)
    return np.sort(np.concatenate(levels))


def test_zero_angle_spectrum_is_minkowski_sum():
    H = build_chain(ModelParams(0.0, 1.0, 2)).to_dense()
    w = np.linalg.eigvalsh(H)
    ref = _zero_angle_spectrum(2)
    assert ref.size == w.size
    np.testing.assert_allclose(w, ref, atol=1e-12)


def test_dump_roundtrip():
    params = ModelParams(1.3, 2.0, 1)
    op = build_chain(params)
    text = dump_operator(op, epsilon=2.0)
    back = load_operator(text, epsilon=2.0)
    np.testing.assert_allclose(back.to_dense(), op.to_dense(), atol=1e-15)
    assert '"units":"epsilon"' in text
    # entries are in units of epsilon
    assert max(np.abs(t.block).max() for t in load_operator(text).terms) <= 1.0 + 1e-15
