import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmc.errors import ShapeError, ValidationError
from qmc.generators import ginibre_state
from qmc.linops import (
    DensityOperator,
    Shape,
    kernel_isometry,
    maximally_mixed,
    partial_trace,
    permute_subsystems,
    pure_state,
    spectral_function,
    support_isometry,
    tensor,
    trace_distance,
)


def ptrace_loop(m, dims, keep):
    """Entry-by-entry partial trace oracle."""
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    traced = [i for i in range(n) if i not in keep]
    kd = [dims[i] for i in keep]
    out = np.zeros((int(np.prod(kd)),) * 2, dtype=complex)
    for row in np.ndindex(*kd):
        for col in np.ndindex(*kd):
            s = 0
            for tr in np.ndindex(*[dims[i] for i in traced]):
                ri, ci = [0] * n, [0] * n
                for k, i in enumerate(keep):
                    ri[i], ci[i] = row[k], col[k]
                for k, i in enumerate(traced):
                    ri[i] = ci[i] = tr[k]
                s += t[tuple(ri) + tuple(ci)]
            out[np.ravel_multi_index(row, kd), np.ravel_multi_index(col, kd)] = s
    return out


def test_shape_defaults_and_errors():
    s = Shape([2, 3, 4])
    assert s.labels == ("A", "B", "C") and s.dim == 24
    assert s.sub(["C", "A"]).dims == (2, 4)
    with pytest.raises(ShapeError):
        Shape([2, 2], ["A", "A"])
    with pytest.raises(ShapeError):
        Shape([0])
    with pytest.raises(ShapeError):
        s.index("Z")


@pytest.mark.parametrize("dims,keep", [((2, 3), [0]), ((2, 3), [1]), ((2, 3, 2), [0, 2]), ((3, 2, 2), [1])])
def test_partial_trace_matches_loop(rng, dims, keep):
    rho = ginibre_state(rng, dims)
    traced = [rho.labels[i] for i in range(len(dims)) if i not in keep]
    got = partial_trace(rho.matrix, rho.shape, traced)
    assert np.abs(got - ptrace_loop(rho.matrix, dims, keep)).max() < 1e-13


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    a, b = ginibre_state(rng, [2], ["A"]), ginibre_state(rng, [3], ["B"])
    ab = a @ b
    assert np.abs(ab.reduce("A").matrix - a.matrix).max() < 1e-14
    assert np.abs(ab.ptrace("A").matrix - b.matrix).max() < 1e-14
    assert np.abs(partial_trace(ab.matrix, ab.shape, []) - ab.matrix).max() == 0


def test_permute_swaps_kron_order(rng):
    a, b = ginibre_state(rng, [2]).matrix, ginibre_state(rng, [3]).matrix
    got = permute_subsystems(np.kron(a, b), Shape([2, 3]), ["B", "A"])
    assert np.abs(got - np.kron(b, a)).max() < 1e-14


def test_density_operator_validation():
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([0.5, 0.4]))
    with pytest.raises(ValidationError):
        DensityOperator(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(ShapeError):
        DensityOperator(np.eye(4) / 4, [3])
    rho = maximally_mixed([2, 2])
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_validation_is_relative(rng):
    # a tiny Hermiticity defect below herm_tol is accepted
    m = ginibre_state(rng, [3]).matrix.copy()
    m[0, 1] += 1e-12
    DensityOperator(m)


def test_pure_and_mixed():
    p = pure_state([1, 1j])
    assert abs(np.trace(p.matrix @ p.matrix) - 1) < 1e-14
    assert np.abs(maximally_mixed(3).matrix - np.eye(3) / 3).max() == 0


def test_tensor_and_trace_distance():
    z0, z1 = pure_state([1, 0]), pure_state([0, 1])
    assert abs(trace_distance(z0.matrix, z1.matrix) - 1) < 1e-14
    plus = pure_state([1, 1])
    # pure states: D = sqrt(1 - |<a|b>|^2)
    assert abs(trace_distance(z0.matrix, plus.matrix) - np.sqrt(0.5)) < 1e-14
    assert tensor(np.eye(2), np.eye(3)).shape == (6, 6)


def test_spectral_functions(rng):
    rho = ginibre_state(rng, [3], rank=2).matrix
    r = spectral_function(rho, "sqrt")
    assert np.abs(r @ r - rho).max() < 1e-12
    p = spectral_function(rho, "pinv")
    assert np.abs(rho @ p @ rho - rho).max() < 1e-12
    v, k = support_isometry(rho), kernel_isometry(rho)
    assert v.shape == (3, 2) and k.shape == (3, 1)
    assert np.abs(rho @ k).max() < 1e-12
    with pytest.raises(ValidationError):
        spectral_function(np.diag([1.0, -0.5]), "sqrt")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.integers(1, 3), min_size=2, max_size=3))
def test_reduced_states_are_states(seed, dims):
    rho = ginibre_state(np.random.default_rng(seed), dims)
    for lab in rho.labels:
        red = rho.reduce([lab])
        assert abs(np.trace(red.matrix) - 1) < 1e-12
        assert red.eigenvalues().min() > -1e-12


def test_shape_concatenation_primes_collisions():
    assert (Shape([2]) + Shape([3])).labels == ("A", "A'")
    assert (Shape([2], ["X"]) + Shape([3], ["Y"])).labels == ("X", "Y")
