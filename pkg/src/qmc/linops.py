"""Dense complex linear algebra on composite Hilbert spaces.

Composite indices are row-major with the last subsystem varying fastest, so
``tensor(a, b)`` is ``np.kron(a, b)`` and a state on ``("A", "B")`` with dims
``(dA, dB)`` reshapes to ``(dA, dB, dA, dB)``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ShapeError, ValidationError

#: Relative tolerance for PSD / Hermitian / trace validation of states.
HERM_TOL = 1e-9
#: Relative threshold below which eigenvalues count as zero.
RANK_TOL = 1e-10


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array (accepts DensityOperator)."""
    if isinstance(m, DensityOperator):
        return m.matrix
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Shape:
    """Ordered subsystem dimensions with distinct labels."""

    dims: tuple
    labels: tuple

    def __init__(self, dims: Iterable[int], labels: Iterable[str] | None = None):
        dims = tuple(int(d) for d in dims)
        if labels is None:
            labels = tuple(string.ascii_uppercase[: len(dims)])
        labels = tuple(str(x) for x in labels)
        if not dims:
            raise ShapeError("a shape needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise ShapeError(f"dimensions must be positive, got {dims}")
        if len(labels) != len(dims):
            raise ShapeError(f"{len(labels)} labels for {len(dims)} dims")
        if len(set(labels)) != len(labels):
            raise ShapeError(f"labels must be unique, got {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ShapeError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def sub(self, labels: Iterable[str]) -> "Shape":
        """Shape restricted to ``labels``, kept in this shape's order."""
        keep = set(labels)
        for lab in keep:
            self.index(lab)
        pairs = [(d, lab) for d, lab in zip(self.dims, self.labels) if lab in keep]
        return Shape([d for d, _ in pairs], [lab for _, lab in pairs])

    def __add__(self, other: "Shape") -> "Shape":
        """Concatenation; labels of ``other`` that collide are primed (A -> A')."""
        labels = list(self.labels)
        for i, lab in enumerate(other.labels):
            reserved = set(labels) | set(other.labels[i + 1:])
            while lab in reserved:
                lab += "'"
            labels.append(lab)
        return Shape(self.dims + other.dims, labels)


def _label_set(labels) -> list:
    if isinstance(labels, str):
        return [labels]
    return list(labels)


def _check_shape(m: np.ndarray, shape: Shape) -> None:
    if m.shape != (shape.dim, shape.dim):
        raise ShapeError(f"matrix of shape {m.shape} does not match subsystem dims {shape.dims}")


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def hermitian_eig(m) -> EigenSystem:
    """Eigendecomposition of the Hermitian part of ``m``, eigenvalues ascending."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"eigendecomposition needs a square matrix, got {m.shape}")
    values, vectors = np.linalg.eigh(0.5 * (m + m.conj().T))
    return EigenSystem(values, vectors)


def tensor(*ops) -> np.ndarray:
    """Kronecker product, first operand most significant."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, as_matrix(op))
    return out


def partial_trace(m, shape: Shape, traced) -> np.ndarray:
    """Trace out the subsystems named in ``traced``; the rest keep their order."""
    m = as_matrix(m)
    _check_shape(m, shape)
    traced = _label_set(traced)
    axes = sorted({shape.index(lab) for lab in traced})
    if not axes:
        return m.copy()
    n = len(shape.dims)
    t = m.reshape(shape.dims + shape.dims)
    for k, ax in enumerate(reversed(axes)):
        t = np.trace(t, axis1=ax, axis2=ax + n - k)
    keep = [d for i, d in enumerate(shape.dims) if i not in axes]
    d = int(np.prod(keep)) if keep else 1
    return t.reshape(d, d)


def permute_subsystems(m, shape: Shape, new_order: Sequence[str]) -> np.ndarray:
    """Reorder tensor factors so that subsystems appear as in ``new_order``."""
    m = as_matrix(m)
    _check_shape(m, shape)
    new_order = list(new_order)
    if sorted(new_order) != sorted(shape.labels):
        raise ShapeError(f"{new_order} is not a permutation of {list(shape.labels)}")
    perm = [shape.index(lab) for lab in new_order]
    n = len(perm)
    t = m.reshape(shape.dims + shape.dims).transpose(perm + [p + n for p in perm])
    return t.reshape(m.shape)


def _spectral_threshold(values: np.ndarray, rank_tol: float) -> float:
    return rank_tol * max(float(np.max(np.abs(values))), 0.0) if values.size else 0.0


_SPECTRAL_MAPS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sqrt": np.sqrt,
    "log2": np.log2,
    "pinv_sqrt": lambda x: 1.0 / np.sqrt(x),
    "pinv": lambda x: 1.0 / x,
}


def spectral_function(m, f: str, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Apply ``f`` to the spectrum of a PSD matrix.

    ``f`` is one of ``"sqrt"``, ``"log2"``, ``"pinv_sqrt"`` or ``"pinv"``.
    Eigenvalues at or below ``rank_tol * lambda_max`` are sent to zero, which is
    the support-restricted (pseudo-inverse) convention for the singular maps.
    """
    if f not in _SPECTRAL_MAPS:
        raise ValueError(f"unknown spectral map {f!r}; choose from {sorted(_SPECTRAL_MAPS)}")
    values, vectors = hermitian_eig(m)
    cut = _spectral_threshold(values, rank_tol)
    if values.size and values[0] < -cut:
        raise ValidationError(f"matrix is not positive semidefinite (eigenvalue {values[0]:.3e})")
    out = np.zeros_like(values)
    keep = values > cut
    out[keep] = _SPECTRAL_MAPS[f](values[keep])
    return (vectors * out) @ vectors.conj().T


def support_isometry(m, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal columns spanning the support of a PSD matrix (largest eigenvalue first)."""
    values, vectors = hermitian_eig(m)
    keep = values > _spectral_threshold(values, rank_tol)
    return vectors[:, keep][:, ::-1]


def kernel_isometry(m, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal columns spanning the kernel of a PSD matrix."""
    values, vectors = hermitian_eig(m)
    return vectors[:, values <= _spectral_threshold(values, rank_tol)]


def is_unitary(u, tol: float = 1e-9) -> bool:
    u = as_matrix(u)
    return u.shape[0] == u.shape[1] and np.abs(u.conj().T @ u - np.eye(u.shape[1])).max() <= tol


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare operators of shapes {a.shape} and {b.shape}")
    return 0.5 * float(np.abs(hermitian_eig(a - b).values).sum())


@dataclass(frozen=True)
class DensityOperator:
    """A validated quantum state: Hermitian, PSD, unit trace, with subsystem shape.

    ``herm_tol`` is relative to the largest eigenvalue magnitude.
    """

    matrix: np.ndarray
    shape: Shape
    herm_tol: float = HERM_TOL

    def __init__(self, matrix, shape: Shape | Sequence[int] | None = None,
                 herm_tol: float = HERM_TOL, validate: bool = True):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density operator must be a square matrix, got {m.shape}")
        if shape is None:
            shape = Shape([m.shape[0]])
        elif not isinstance(shape, Shape):
            shape = Shape(shape)
        _check_shape(m, shape)
        object.__setattr__(self, "matrix", _readonly(m))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "herm_tol", float(herm_tol))
        if validate:
            self.validate()

    def validate(self) -> None:
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise ValidationError("density operator has non-finite entries")
        values = hermitian_eig(m).values
        scale = max(float(np.abs(values).max()), 1.0)
        tol = self.herm_tol * scale
        herm = float(np.abs(m - m.conj().T).max())
        if herm > tol:
            raise ValidationError(f"not Hermitian: max |M - M^dag| = {herm:.3e}")
        if values[0] < -tol:
            raise ValidationError(f"not positive semidefinite: eigenvalue {values[0]:.3e}")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > tol:
            raise ValidationError(f"trace is {tr!r}, expected 1")

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def dims(self) -> tuple:
        return self.shape.dims

    @property
    def labels(self) -> tuple:
        return self.shape.labels

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eig(self.matrix).values

    def ptrace(self, traced) -> "DensityOperator":
        """Reduced state after tracing out ``traced``."""
        traced = _label_set(traced)
        keep = [lab for lab in self.labels if lab not in traced]
        if not keep:
            raise ShapeError("cannot trace out every subsystem of a state")
        reduced = partial_trace(self.matrix, self.shape, traced)
        return DensityOperator(reduced, self.shape.sub(keep), self.herm_tol, validate=False)

    def reduce(self, keep) -> "DensityOperator":
        """Reduced state on ``keep`` (order as in the parent shape)."""
        keep = set(_label_set(keep))
        return self.ptrace([lab for lab in self.labels if lab not in keep])

    def permute(self, new_order: Sequence[str]) -> "DensityOperator":
        m = permute_subsystems(self.matrix, self.shape, new_order)
        dims = [self.dims[self.shape.index(lab)] for lab in new_order]
        return DensityOperator(m, Shape(dims, new_order), self.herm_tol, validate=False)

    def relabel(self, labels: Sequence[str]) -> "DensityOperator":
        return DensityOperator(self.matrix, Shape(self.dims, labels), self.herm_tol, validate=False)

    def __matmul__(self, other: "DensityOperator") -> "DensityOperator":
        """Tensor product of states; labels are concatenated."""
        return DensityOperator(tensor(self.matrix, other.matrix), self.shape + other.shape,
                               self.herm_tol, validate=False)


def pure_state(vector, shape: Shape | Sequence[int] | None = None) -> DensityOperator:
    """Projector onto a normalized copy of ``vector``."""
    v = np.asarray(vector, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityOperator(np.outer(v, v.conj()), shape)


def maximally_mixed(shape: Shape | Sequence[int] | int) -> DensityOperator:
    if isinstance(shape, int):
        shape = Shape([shape])
    elif not isinstance(shape, Shape):
        shape = Shape(shape)
    return DensityOperator(np.eye(shape.dim) / shape.dim, shape)


def basis_projector(d: int, k: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[k, k] = 1.0
    return e
