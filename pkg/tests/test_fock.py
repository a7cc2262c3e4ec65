import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qfredkin.fock import (
    EMPTY,
    DetectionPattern,
    ElementTransform,
    ModeRegistry,
    PhotonicEnsemble,
    PhotonicState,
    RegistryError,
    apply,
    apply_all,
    dephase_branches,
    post_select,
    reduce_to_qubits,
    tensor,
)


def permanent(m):
    n = m.shape[0]
    return sum(math.prod(m[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def transition_amplitude(u, occ_in, occ_out):
    """<out| U |in> from the permanent of the repeated-row/column submatrix."""
    rows = [j for j, n in enumerate(occ_out) for _ in range(n)]
    cols = [i for i, n in enumerate(occ_in) for _ in range(n)]
    norm = math.sqrt(math.prod(math.factorial(n) for n in occ_in) * math.prod(math.factorial(n) for n in occ_out))
    return permanent(u[np.ix_(rows, cols)]) / norm


def two_path_registry():
    return ModeRegistry.from_paths(("a", "b"))


def test_registry_lookup():
    reg = ModeRegistry.from_paths(("x", "y"))
    assert len(reg) == 4
    assert reg.index(("y", "H")) == 2
    assert reg.path_modes("x") == (0, 1)
    assert reg.paths == ("x", "y")
    assert reg.relabel({"x": "z"}).labels[0] == ("z", "H")


def test_registry_rejects_duplicates_and_bad_polarization():
    with pytest.raises(ValueError):
        ModeRegistry((("a", "H"), ("a", "H")))
    with pytest.raises(ValueError):
        ModeRegistry((("a", "D"),))
    with pytest.raises(KeyError):
        two_path_registry().index(("c", "H"))


def test_state_rejects_mixed_photon_number():
    reg = two_path_registry()
    with pytest.raises(ValueError):
        PhotonicState(reg, {(1, 0, 0, 0): 1, (1, 1, 0, 0): 1})


def test_state_prunes_tiny_amplitudes_and_merges():
    reg = two_path_registry()
    s = PhotonicState(reg, {(1, 0, 0, 0): 1e-15, (0, 1, 0, 0): 1.0})
    assert len(s) == 1
    s2 = PhotonicState.from_labels(reg, {(("a", "H"),): 0.5}) + PhotonicState.from_labels(reg, {(("a", "H"),): 0.5})
    assert s2.amplitude((("a", "H"),)) == pytest.approx(1.0)


def test_inner_is_conjugate_linear_in_first_argument():
    reg = two_path_registry()
    a = PhotonicState.from_labels(reg, {(("a", "H"),): 1j})
    b = PhotonicState.from_labels(reg, {(("a", "H"),): 1.0, (("b", "V"),): 1.0})
    assert a.inner(b) == pytest.approx(-1j)
    assert b.inner(a) == pytest.approx(1j)


def test_hong_ou_mandel_bunching():
    reg = two_path_registry()
    bs = ElementTransform(reg.indices([("a", "H"), ("b", "H")]), np.array([[1, 1j], [1j, 1]]) / math.sqrt(2))
    out = apply(PhotonicState.from_labels(reg, {(("a", "H"), ("b", "H")): 1.0}), bs)
    assert out.amplitude((("a", "H"), ("b", "H"))) == pytest.approx(0.0, abs=1e-12)
    assert abs(out.amplitude((("a", "H"), ("a", "H")))) == pytest.approx(1 / math.sqrt(2))
    assert abs(out.amplitude((("b", "H"), ("b", "H")))) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("occ_in", [(1, 1, 0), (2, 0, 1), (1, 1, 1), (0, 3, 0), (2, 2, 0)])
def test_apply_matches_permanent_formula(occ_in):
    u = unitary_group.rvs(3, random_state=sum(occ_in) * 7 + occ_in[0])
    reg = ModeRegistry.from_paths(("p", "q"))
    t = ElementTransform((0, 1, 2), u)
    state = PhotonicState(reg, {occ_in + (0,): 1.0})
    out = apply(state, t)
    n = sum(occ_in)
    for occ_out in itertools.product(range(n + 1), repeat=3):
        if sum(occ_out) != n:
            continue
        expected = transition_amplitude(u, occ_in, occ_out)
        assert out.amplitude(occ_out + (0,)) == pytest.approx(expected, abs=1e-12)


def test_element_transform_validation():
    with pytest.raises(ValueError):
        ElementTransform((0, 1), np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        ElementTransform((0, 0), np.eye(2))
    with pytest.raises(ValueError):
        ElementTransform((0, 1), np.eye(3))
    reg = two_path_registry()
    with pytest.raises(IndexError):
        apply(PhotonicState.from_labels(reg, {(("a", "H"),): 1}), ElementTransform((0, 7), np.eye(2)))


def test_dagger_undoes_element():
    reg = two_path_registry()
    u = unitary_group.rvs(4, random_state=3)
    t = ElementTransform((0, 1, 2, 3), u)
    s = PhotonicState.from_labels(reg, {(("a", "H"), ("b", "V")): 0.6, (("a", "V"), ("a", "V")): 0.8})
    assert apply_all(s, [t, t.dagger()]).allclose(s)


def test_tensor_of_disjoint_and_shared_registries():
    a = PhotonicState.from_labels(ModeRegistry.from_paths(("a",)), {(("a", "H"),): 1})
    b = PhotonicState.from_labels(ModeRegistry.from_paths(("b",)), {(("b", "V"),): 1})
    ab = tensor(a, b)
    assert ab.n_photons == 2
    assert ab.registry.paths == ("a", "b")
    reg = two_path_registry()
    x = PhotonicState.from_labels(reg, {(("a", "H"),): 1})
    with pytest.raises(RegistryError):
        tensor(x, x)


def test_post_select_returns_probability_and_conditional():
    reg = two_path_registry()
    s = PhotonicState.from_labels(reg, {(("a", "H"),): math.sqrt(0.3), (("b", "V"),): math.sqrt(0.7)})
    p, cond = post_select(s, DetectionPattern.from_paths(reg, [["b"]]))
    assert p == pytest.approx(0.7)
    assert cond.norm() == pytest.approx(1.0)


def test_post_select_zero_probability_gives_empty_marker():
    reg = two_path_registry()
    s = PhotonicState.from_labels(reg, {(("a", "H"),): 1.0})
    p, cond = post_select(s, DetectionPattern.from_paths(reg, [["b"]]))
    assert p == 0.0
    assert cond is EMPTY
    assert not cond


def test_dephase_branches_scales_coherence():
    reg = two_path_registry()
    s = PhotonicState.from_labels(reg, {(("a", "H"),): 1 / math.sqrt(2), (("b", "H"),): 1 / math.sqrt(2)})
    ens = dephase_branches(s, lambda occ: occ[0] > 0, 0.6)
    rho = reduce_to_qubits(ens, [(0, 2)])
    # H on mode 0 is logical 1, "V" slot (mode 2) is logical 0
    assert rho[0, 1] == pytest.approx(0.5 * 0.6)
    assert np.trace(rho).real == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dephase_branches(s, lambda occ: True, 1.5)


def test_ensemble_weights_must_sum_to_one():
    reg = two_path_registry()
    s = PhotonicState.from_labels(reg, {(("a", "H"),): 1.0})
    with pytest.raises(ValueError):
        PhotonicEnsemble(((0.5, s),))


def test_reduce_to_qubits_logical_encoding():
    reg = ModeRegistry.from_paths(("c", "t"))
    s = PhotonicState.from_labels(reg, {(("c", "H"), ("t", "V")): 1.0})
    vec = reduce_to_qubits(s, [reg.path_modes("c"), reg.path_modes("t")])
    # control H = |1>, target V = |0>  ->  |10>
    assert np.allclose(vec, [0, 0, 1, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_random_unitary_preserves_norm(seed, n_photons):
    rng = np.random.default_rng(seed)
    reg = ModeRegistry.from_paths(("a", "b"))
    u = unitary_group.rvs(4, random_state=rng)
    terms = {}
    for occ in itertools.product(range(n_photons + 1), repeat=4):
        if sum(occ) == n_photons:
            terms[occ] = complex(*rng.normal(size=2))
    s = PhotonicState(reg, terms).normalized()
    assert apply(s, ElementTransform((0, 1, 2, 3), u)).norm() == pytest.approx(1.0, abs=1e-10)
