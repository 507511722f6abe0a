"""Quantum channels in Kraus form.

A channel maps operators on ``in_shape`` to operators on ``out_shape`` via
``T(rho) = sum_i K_i rho K_i^dag``. Choi matrices use the convention
``J = sum_ij |i><j| (x) T(|i><j|)`` (input factor first), so
``Tr_out J = I_in`` exactly when ``T`` is trace preserving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .linops import (
    RANK_TOL,
    DensityOperator,
    Shape,
    as_matrix,
    hermitian_eig,
    kernel_isometry,
    partial_trace,
    spectral_function,
    tensor,
)

KRAUS_PRUNE = 1e-12


def _as_shape(shape) -> Shape:
    if isinstance(shape, Shape):
        return shape
    if isinstance(shape, int):
        return Shape([shape])
    return Shape(shape)


@dataclass(frozen=True)
class QuantumChannel:
    """A linear map in Kraus form; validity is checked by :func:`is_cptp`."""

    kraus: tuple
    in_shape: Shape
    out_shape: Shape

    def __init__(self, kraus: Sequence, in_shape=None, out_shape=None):
        ops = [np.array(k, dtype=complex) for k in kraus]
        if not ops:
            raise ShapeError("a channel needs at least one Kraus operator")
        rows, cols = ops[0].shape
        if any(k.shape != (rows, cols) for k in ops):
            raise ShapeError("Kraus operators must share one shape")
        in_shape = _as_shape(in_shape if in_shape is not None else cols)
        out_shape = _as_shape(out_shape if out_shape is not None else rows)
        if (rows, cols) != (out_shape.dim, in_shape.dim):
            raise ShapeError(
                f"Kraus operators are {rows}x{cols} but shapes need {out_shape.dim}x{in_shape.dim}"
            )
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(ops))
        object.__setattr__(self, "in_shape", in_shape)
        object.__setattr__(self, "out_shape", out_shape)

    @property
    def in_dim(self) -> int:
        return self.in_shape.dim

    @property
    def out_dim(self) -> int:
        return self.out_shape.dim

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)

    def __call__(self, rho):
        return apply(self, rho)


@dataclass(frozen=True)
class ChoiMatrix:
    matrix: np.ndarray
    in_dim: int
    out_dim: int


class CPTPReport(NamedTuple):
    ok: bool
    tp_residual: float
    min_choi_eigenvalue: float


@dataclass(frozen=True)
class StinespringDilation:
    """``T(rho) = Tr_env U (rho (x) env_state) U^dag`` with env_state = |0><0|."""

    env_dim: int
    env_state: DensityOperator
    unitary: np.ndarray
    isometry: np.ndarray

    def apply(self, rho) -> np.ndarray:
        d = self.unitary.shape[0] // self.env_dim
        joint = tensor(as_matrix(rho), self.env_state.matrix)
        out = self.unitary @ joint @ self.unitary.conj().T
        return partial_trace(out, Shape([d, self.env_dim], ["S", "E"]), "E")


def apply(channel: QuantumChannel, rho):
    """``sum_i K_i rho K_i^dag``; a DensityOperator in gives a DensityOperator out."""
    m = as_matrix(rho)
    if m.shape != (channel.in_dim, channel.in_dim):
        raise ShapeError(f"channel input is {channel.in_dim}-dimensional, operand is {m.shape}")
    ks = channel.stacked
    out = np.einsum("kab,bc,kdc->ad", ks, m, ks.conj(), optimize=True)
    if isinstance(rho, DensityOperator):
        return DensityOperator(out, channel.out_shape, rho.herm_tol, validate=False)
    return out


def adjoint_apply(channel: QuantumChannel, x) -> np.ndarray:
    """Heisenberg-picture action ``sum_i K_i^dag X K_i``."""
    x = as_matrix(x)
    if x.shape != (channel.out_dim, channel.out_dim):
        raise ShapeError(f"adjoint input must be {channel.out_dim}-dimensional, got {x.shape}")
    ks = channel.stacked
    return np.einsum("kba,bc,kcd->ad", ks.conj(), x, ks, optimize=True)


def adjoint(channel: QuantumChannel) -> QuantumChannel:
    """The adjoint map as a (unital, generally not trace-preserving) Kraus map."""
    return QuantumChannel([k.conj().T for k in channel.kraus], channel.out_shape, channel.in_shape)


def superoperator(channel: QuantumChannel) -> np.ndarray:
    """Matrix of the channel acting on row-major vectorized operators."""
    ks = channel.stacked
    return np.einsum("kab,kcd->acbd", ks, ks.conj()).reshape(
        channel.out_dim ** 2, channel.in_dim ** 2
    )


def choi_matrix(channel: QuantumChannel) -> ChoiMatrix:
    vecs = channel.stacked.transpose(0, 2, 1).reshape(len(channel.kraus), -1)
    return ChoiMatrix(vecs.T @ vecs.conj(), channel.in_dim, channel.out_dim)


def choi_from_superoperator(s: np.ndarray, in_dim: int, out_dim: int) -> ChoiMatrix:
    j = s.reshape(out_dim, out_dim, in_dim, in_dim).transpose(2, 0, 3, 1)
    return ChoiMatrix(j.reshape(in_dim * out_dim, in_dim * out_dim), in_dim, out_dim)


def choi_from_map(func, in_dim: int, out_dim: int) -> ChoiMatrix:
    """Choi matrix of an arbitrary linear map given as a callable on matrices."""
    j = np.zeros((in_dim * out_dim, in_dim * out_dim), dtype=complex)
    for i in range(in_dim):
        for k in range(in_dim):
            e = np.zeros((in_dim, in_dim), dtype=complex)
            e[i, k] = 1.0
            j[i * out_dim:(i + 1) * out_dim, k * out_dim:(k + 1) * out_dim] = func(e)
    return ChoiMatrix(j, in_dim, out_dim)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    return v * (abs(v[k]) / v[k])


def from_choi(choi: ChoiMatrix, in_shape=None, out_shape=None,
              rank_tol: float = KRAUS_PRUNE) -> QuantumChannel:
    """Canonical Kraus operators from the eigendecomposition of a Choi matrix.

    Eigenpairs above ``rank_tol * lambda_max`` are kept, in descending eigenvalue
    order with ties broken on the real parts of the entries; each eigenvector's
    largest entry is made real positive.
    """
    values, vectors = hermitian_eig(choi.matrix)
    if values[0] < -1e-8 * max(values[-1], 1.0):
        raise ValidationError(f"Choi matrix is not PSD (eigenvalue {values[0]:.3e}); map is not CP")
    keep = [i for i in range(len(values)) if values[i] > rank_tol * max(values[-1], 0.0)]
    if not keep:
        keep = [len(values) - 1]
    pairs = []
    for i in keep:
        v = _fix_phase(vectors[:, i])
        pairs.append((-round(float(values[i]), 12), tuple(np.round(v.real, 12)), i, v))
    pairs.sort(key=lambda t: t[:2])
    kraus = [
        (np.sqrt(max(values[i], 0.0)) * v).reshape(choi.in_dim, choi.out_dim).T
        for _, _, i, v in pairs
    ]
    return QuantumChannel(kraus, in_shape or choi.in_dim, out_shape or choi.out_dim)


def minimal_kraus(channel: QuantumChannel) -> QuantumChannel:
    """Equivalent channel with a linearly independent (Choi-rank) Kraus set."""
    return from_choi(choi_matrix(channel), channel.in_shape, channel.out_shape)


def is_cptp(channel, tol: float = 1e-9) -> CPTPReport:
    """Trace-preservation residual (spectral norm) and minimum Choi eigenvalue.

    Accepts a :class:`QuantumChannel` or a raw :class:`ChoiMatrix`, so maps that
    have no Kraus form (e.g. the transpose) can be diagnosed too.
    """
    if isinstance(channel, QuantumChannel):
        ks = channel.stacked
        tp = np.einsum("kba,kbc->ac", ks.conj(), ks) - np.eye(channel.in_dim)
        choi = choi_matrix(channel)
    else:
        choi = channel
        reduced = partial_trace(choi.matrix, Shape([choi.in_dim, choi.out_dim]), "B")
        tp = reduced - np.eye(choi.in_dim)
    tp_res = float(np.linalg.norm(tp, 2))
    values = hermitian_eig(choi.matrix).values
    scale = max(float(values[-1]), 1.0)
    min_eig = float(values[0])
    return CPTPReport(tp_res <= tol and min_eig >= -tol * scale, tp_res, min_eig)


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """The channel ``second o first`` (``first`` acts first)."""
    if first.out_dim != second.in_dim:
        raise ShapeError(f"cannot feed a {first.out_dim}-dim output into a {second.in_dim}-dim input")
    kraus = [s @ t for s in second.kraus for t in first.kraus]
    kept = [k for k in kraus if np.linalg.norm(k) >= KRAUS_PRUNE]
    return QuantumChannel(kept or kraus[:1], first.in_shape, second.out_shape)


def tensor_with_identity(channel: QuantumChannel, id_shape, side: str = "left") -> QuantumChannel:
    """``id (x) T`` (``side="left"``: identity factor first) or ``T (x) id``."""
    id_shape = _as_shape(id_shape)
    eye = np.eye(id_shape.dim)
    if side == "left":
        return QuantumChannel([np.kron(eye, k) for k in channel.kraus],
                              id_shape + channel.in_shape, id_shape + channel.out_shape)
    if side == "right":
        return QuantumChannel([np.kron(k, eye) for k in channel.kraus],
                              channel.in_shape + id_shape, channel.out_shape + id_shape)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def petz_transpose_channel(channel: QuantumChannel, sigma, rank_tol: float = RANK_TOL) -> QuantumChannel:
    """Transpose channel of ``channel`` relative to the reference state ``sigma``.

    On the support of ``T(sigma)`` the Kraus operators are
    ``sigma^(1/2) K_i^dag T(sigma)^(-1/2)``. The kernel of ``T(sigma)`` is sent to
    the dominant eigenvector of ``sigma`` so that the result is CPTP everywhere.
    """
    if not isinstance(sigma, DensityOperator):
        sigma = DensityOperator(sigma, channel.in_shape)
    if sigma.dim != channel.in_dim:
        raise ShapeError("reference state does not live on the channel input")
    s_half = spectral_function(sigma.matrix, "sqrt", rank_tol)
    t_sigma = apply(channel, sigma.matrix)
    t_inv_half = spectral_function(t_sigma, "pinv_sqrt", rank_tol)
    kraus = [s_half @ k.conj().T @ t_inv_half for k in channel.kraus]
    kernel = kernel_isometry(t_sigma, rank_tol)
    if kernel.shape[1]:
        dominant = hermitian_eig(sigma.matrix).vectors[:, -1]
        kraus += [np.outer(dominant, kernel[:, m].conj()) for m in range(kernel.shape[1])]
    kept = [k for k in kraus if np.linalg.norm(k) >= KRAUS_PRUNE]
    return QuantumChannel(kept, channel.out_shape, channel.in_shape)


def stinespring(channel: QuantumChannel) -> StinespringDilation:
    """Unitary dilation built from the isometry ``V = sum_i K_i (x) |i>_env``.

    The columns of ``U`` indexed ``(s, 0)`` are those of ``V``; the remaining
    columns complete them to an orthonormal basis via a Householder QR of
    ``[V | I]``, which fixes the completion deterministically.
    """
    d = channel.in_dim
    if channel.out_dim != d:
        raise ShapeError("stinespring needs a channel whose input and output dimensions agree")
    n = len(channel.kraus)
    iso = channel.stacked.transpose(1, 0, 2).reshape(d * n, d)
    q, _ = np.linalg.qr(np.hstack([iso, np.eye(d * n)]), mode="complete")
    complement = q[:, d:]
    # Project out V explicitly for numerical hygiene, then re-orthonormalize.
    complement = complement - iso @ (iso.conj().T @ complement)
    complement, _ = np.linalg.qr(complement)
    u = np.zeros((d * n, d * n), dtype=complex)
    first = np.arange(d) * n
    rest = np.setdiff1d(np.arange(d * n), first)
    u[:, first] = iso
    u[:, rest] = complement[:, : len(rest)]
    env = np.zeros((n, n))
    env[0, 0] = 1.0
    return StinespringDilation(n, DensityOperator(env), u, iso)


# Standard channels.

def identity_channel(shape) -> QuantumChannel:
    shape = _as_shape(shape)
    return QuantumChannel([np.eye(shape.dim)], shape, shape)


def unitary_channel(u, shape=None) -> QuantumChannel:
    u = as_matrix(u)
    shape = _as_shape(shape if shape is not None else u.shape[0])
    return QuantumChannel([u], shape, shape)


def partial_trace_channel(shape, traced) -> QuantumChannel:
    """``rho -> Tr_traced rho`` with Kraus operators ``I (x) <k| (x) I``."""
    shape = _as_shape(shape)
    traced = [traced] if isinstance(traced, str) else list(traced)
    keep = [lab for lab in shape.labels if lab not in traced]
    if not keep:
        raise ShapeError("at least one subsystem must survive the partial trace")
    out_shape = shape.sub(keep)
    traced_dims = [shape.dims[shape.index(lab)] for lab in traced]
    kraus = []
    for idx in np.ndindex(*traced_dims):
        factors = []
        for lab, d in zip(shape.labels, shape.dims):
            if lab in traced:
                bra = np.zeros((1, d))
                bra[0, idx[traced.index(lab)]] = 1.0
                factors.append(bra)
            else:
                factors.append(np.eye(d))
        kraus.append(tensor(*factors))
    return QuantumChannel(kraus, shape, out_shape)


def append_state_channel(in_shape, state: DensityOperator) -> QuantumChannel:
    """``alpha -> alpha (x) state``."""
    in_shape = _as_shape(in_shape)
    values, vectors = hermitian_eig(state.matrix)
    eye = np.eye(in_shape.dim)
    kraus = [np.kron(eye, np.sqrt(max(lam, 0.0)) * vectors[:, [m]])
             for m, lam in enumerate(values) if lam > KRAUS_PRUNE]
    return QuantumChannel(kraus, in_shape, in_shape + state.shape)


def replacement_channel(in_shape, state: DensityOperator) -> QuantumChannel:
    """``alpha -> Tr(alpha) state``."""
    in_shape = _as_shape(in_shape)
    values, vectors = hermitian_eig(state.matrix)
    kraus = []
    for m, lam in enumerate(values):
        if lam <= KRAUS_PRUNE:
            continue
        for k in range(in_shape.dim):
            e = np.zeros(in_shape.dim)
            e[k] = 1.0
            kraus.append(np.sqrt(lam) * np.outer(vectors[:, m], e))
    return QuantumChannel(kraus, in_shape, state.shape)


def depolarizing_channel(shape) -> QuantumChannel:
    """Completely depolarizing channel ``rho -> Tr(rho) I/d``."""
    shape = _as_shape(shape)
    d = shape.dim
    return replacement_channel(shape, DensityOperator(np.eye(d) / d, shape))


def measurement_channel(basis=None, shape=None) -> QuantumChannel:
    """Projective measurement with the outcome written into the same basis.

    ``rho -> sum_x <b_x|rho|b_x> |b_x><b_x|``; with ``basis=None`` the
    computational basis is used (complete dephasing).
    """
    if basis is None:
        basis = np.eye(_as_shape(shape).dim)
    basis = as_matrix(basis)
    shape = _as_shape(shape if shape is not None else basis.shape[0])
    kraus = [np.outer(basis[:, x], basis[:, x].conj()) for x in range(basis.shape[1])]
    return QuantumChannel(kraus, shape, shape)


dephasing_channel = measurement_channel
