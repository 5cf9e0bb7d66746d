import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codmr.errors import FrameError, ValidationError
from codmr.spin import (
    MU_B_MHZ_PER_T,
    GTensor,
    MagneticField,
    ZfsParams,
    assemble_hamiltonian,
    eigensystem,
    spin1_operators,
    transitions,
    zero_like_index,
)

S = spin1_operators()
PLUS, ZERO, MINUS = np.eye(3)


def defect_field(bx, by, bz):
    return MagneticField(bx, by, bz, "defect")


def test_sz_is_diagonal():
    assert np.array_equal(S.sz, np.diag([1, 0, -1]))


def test_ladder_action():
    assert np.allclose(S.splus @ MINUS, np.sqrt(2) * ZERO, atol=1e-15)
    assert np.allclose(S.splus @ ZERO, np.sqrt(2) * PLUS, atol=1e-15)
    assert np.allclose(S.splus @ PLUS, 0)


def test_commutators():
    comm = lambda a, b: a @ b - b @ a
    assert np.abs(comm(S.sx, S.sy) - 1j * S.sz).max() < 1e-12
    assert np.abs(comm(S.sy, S.sz) - 1j * S.sx).max() < 1e-12
    assert np.abs(comm(S.sz, S.sx) - 1j * S.sy).max() < 1e-12


def test_casimir_and_spectra():
    assert np.abs(S.sx @ S.sx + S.sy @ S.sy + S.sz @ S.sz - 2 * np.eye(3)).max() < 1e-12
    for op in (S.sx, S.sy, S.sz):
        assert np.allclose(np.linalg.eigvalsh(op), [-1, 0, 1], atol=1e-12)


def test_zero_field_eigenvalues():
    # -2D/3 and D/3 -+ E
    h = assemble_hamiltonian(ZfsParams(987, 22), GTensor(), defect_field(0, 0, 0))
    es = eigensystem(h)
    assert np.allclose(es.eigenvalues, [-658.0, 307.0, 351.0], atol=1e-9)


def test_all_zero_gives_zero_matrix():
    h = assemble_hamiltonian(ZfsParams(0, 0), GTensor(), defect_field(0, 0, 0))
    assert np.array_equal(h, np.zeros((3, 3)))


def test_axial_field_closed_form():
    d, e, gpar, b = 987.0, 22.0, 2.0023, 3e-3
    h = assemble_hamiltonian(ZfsParams(d, e), GTensor(2.0023, gpar), defect_field(0, 0, b))
    es = eigensystem(h)
    iz = zero_like_index(es)
    from_zero = sorted(abs(es.eigenvalues[j] - es.eigenvalues[iz]) for j in range(3) if j != iz)
    root = np.hypot(e, gpar * MU_B_MHZ_PER_T * b)
    assert np.allclose(from_zero, [d - root, d + root], atol=1e-9)
    # dense diagonalization oracle
    assert np.allclose(np.linalg.eigvalsh(h), es.eigenvalues, atol=1e-9)


def test_frame_tag_enforced():
    with pytest.raises(FrameError):
        assemble_hamiltonian(ZfsParams(), GTensor(), MagneticField(0, 0, 0.001, "lab"))


def test_hamiltonian_hermitian_and_zfs_traceless():
    h = assemble_hamiltonian(ZfsParams(987, 22), GTensor(1.9, 2.1), defect_field(1e-3, -2e-3, 4e-3))
    assert np.abs(h - h.conj().T).max() < 1e-12
    h0 = assemble_hamiltonian(ZfsParams(987, 22), GTensor(), defect_field(0, 0, 0))
    assert abs(np.trace(h0)) < 1e-9


def test_eigensystem_diagonal():
    es = eigensystem(np.diag([1.0, 2.0, 3.0]))
    assert np.array_equal(es.eigenvalues, [1.0, 2.0, 3.0])
    assert np.allclose(es.eigenvectors, np.eye(3))


def test_eigensystem_block_matrix():
    # [[D, E], [E, D]] on {+1, -1}, zero on |0>; written in {+1, 0, -1} order
    d, e = 987.0, 22.0
    h = np.array([[d, 0, e], [0, 0, 0], [e, 0, d]], dtype=complex)
    es = eigensystem(h)
    assert np.allclose(es.eigenvalues, [0.0, d - e, d + e], atol=1e-9)


def test_eigensystem_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        eigensystem(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex))


def random_hermitian(rng, n):
    a = rng.normal(size=(n, 3, 3)) + 1j * rng.normal(size=(n, 3, 3))
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


def test_reconstruction_random():
    rng = np.random.default_rng(7)
    h = random_hermitian(rng, 10_000)
    es = eigensystem(h)
    v, w = es.eigenvectors, es.eigenvalues
    resid = np.linalg.norm(h @ v - v * w[:, None, :], axis=(1, 2))
    assert np.all(resid <= 1e-10 * np.linalg.norm(h, axis=(1, 2)))
    gram = np.conj(np.swapaxes(v, -1, -2)) @ v
    assert np.abs(gram - np.eye(3)).max() <= 1e-12
    assert np.all(np.diff(w, axis=1) >= 0)


def test_phase_convention_deterministic():
    rng = np.random.default_rng(3)
    h = random_hermitian(rng, 50)
    a, b = eigensystem(h), eigensystem(h.copy())
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
    v = a.eigenvectors
    pivot = np.take_along_axis(v, np.argmax(np.abs(v), axis=1)[:, None, :], axis=1)
    assert np.abs(pivot.imag).max() < 1e-14 and pivot.real.min() > 0


def test_zero_field_drive_selection_rules():
    es = eigensystem(assemble_hamiltonian(ZfsParams(987, 22), GTensor(), defect_field(0, 0, 0)))
    by_f = lambda ts: {round(t.f_mhz, 6): t.amplitude for t in ts}
    ax = by_f(transitions(es, [1, 0, 0]))
    ay = by_f(transitions(es, [0, 1, 0]))
    assert ax[1009.0] == pytest.approx(1.0, abs=1e-12) and ax[965.0] == pytest.approx(0.0, abs=1e-12)
    assert ay[965.0] == pytest.approx(1.0, abs=1e-12) and ay[1009.0] == pytest.approx(0.0, abs=1e-12)


def test_degenerate_transitions_index_order():
    es = eigensystem(np.zeros((3, 3)))
    ts = transitions(es, [0, 0, 1])
    assert [(t.from_index, t.to_index) for t in ts] == [(0, 1), (0, 2), (1, 2)]
    assert all(t.f_mhz == 0.0 for t in ts)


def test_transitions_reject_non_unit_drive():
    es = eigensystem(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValidationError):
        transitions(es, [1.0, 1.0, 0.0])


def test_zero_field_transition_set():
    d, e = 987.0, 22.0
    es = eigensystem(assemble_hamiltonian(ZfsParams(d, e), GTensor(), defect_field(0, 0, 0)))
    freqs = [t.f_mhz for t in transitions(es)]
    assert np.allclose(freqs, [2 * e, d - e, d + e], atol=1e-9)


def test_canonicalize():
    z = ZfsParams(987, 400).canonical()
    assert z.is_canonical
    # same principal values, relabeled axes
    pv = lambda p: sorted([-p.d_mhz / 3 + p.e_mhz, -p.d_mhz / 3 - p.e_mhz, 2 * p.d_mhz / 3])
    assert np.allclose(pv(z), pv(ZfsParams(987, 400)))
    assert ZfsParams(987, 22).canonical() == ZfsParams(987, 22)


finite = st.floats(-5e-2, 5e-2, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 3000), st.floats(-500, 500), st.floats(1.5, 2.5), st.floats(1.5, 2.5),
       finite, finite, finite)
def test_trace_equals_eigenvalue_sum(d, e, gp, ga, bx, by, bz):
    h = assemble_hamiltonian(ZfsParams(d, e), GTensor(gp, ga), defect_field(bx, by, bz))
    es = eigensystem(h)
    assert es.eigenvalues.sum() == pytest.approx(np.trace(h).real, abs=1e-9 * max(1, np.abs(h).max()))
    assert abs(np.trace(h)) < 1e-9 * max(1, np.abs(h).max())


@settings(max_examples=100, deadline=None)
@given(st.floats(100, 3000), st.floats(0, 1), st.floats(1.5, 2.5), st.floats(1.5, 2.5), finite, finite, finite)
def test_swap_bx_by_keeps_transition_set(d, efrac, gp, ga, bx, by, bz):
    # with E = 0 the x <-> y swap is a symmetry of the defect frame
    z = ZfsParams(d, 0.0)
    g = GTensor(gp, ga)
    f1 = sorted(t.f_mhz for t in transitions(eigensystem(assemble_hamiltonian(z, g, defect_field(bx, by, bz)))))
    f2 = sorted(t.f_mhz for t in transitions(eigensystem(assemble_hamiltonian(z, g, defect_field(by, bx, bz)))))
    assert np.allclose(f1, f2, atol=1e-8)
