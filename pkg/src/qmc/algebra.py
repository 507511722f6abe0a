"""Finite-dimensional *-algebras of matrices and the channels that fix them.

Algebras are carried as Hilbert-Schmidt orthonormal bases. A
:class:`BlockStructure` stores a unitary ``W`` whose columns are an adapted
basis: ``W^dag X W = (+)_j X_j (x) I_{dR_j}`` for every ``X`` in the algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import (
    QuantumChannel,
    choi_from_superoperator,
    from_choi,
    minimal_kraus,
    superoperator,
)
from .errors import AlgebraError, NoFaithfulStateError, ShapeError
from .linops import RANK_TOL, DensityOperator, as_matrix, hermitian_eig

NULL_TOL = 1e-10
CLOSURE_TOL = 1e-8
FIXED_POINT_TOL = 1e-9
CLUSTER_GAP = 1e-7
MAX_ATTEMPTS = 8


def null_space(m: np.ndarray, rtol: float = NULL_TOL, floor: float = 0.0) -> np.ndarray:
    """Orthonormal columns spanning ``{x : m x = 0}``.

    Singular values below ``max(rtol * s_max, floor)`` count as zero; the floor
    keeps an all-zero (up to rounding) system from being read as full rank.
    """
    if m.size == 0:
        return np.eye(m.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    cut = max(rtol * (s[0] if s.size else 0.0), floor)
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T


def _orthonormal_span(mats: np.ndarray, rtol: float = NULL_TOL) -> np.ndarray:
    """HS-orthonormal basis of the span of a stack of matrices."""
    n, d, _ = mats.shape
    u, s, _ = np.linalg.svd(mats.reshape(n, d * d).T, full_matrices=False)
    rank = int(np.sum(s > rtol * (s[0] if s.size else 0.0)))
    return u[:, :rank].T.reshape(rank, d, d)


@dataclass(frozen=True)
class OperatorAlgebra:
    """A *-subalgebra of ``M_d`` given by a Hilbert-Schmidt orthonormal basis."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 3 or b.shape[1:] != (self.ambient_dim, self.ambient_dim):
            raise ShapeError(f"basis of shape {b.shape} does not fit ambient dimension {self.ambient_dim}")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def spanned_by(cls, mats: Sequence) -> "OperatorAlgebra":
        mats = np.stack([as_matrix(m) for m in mats])
        return cls(mats.shape[1], _orthonormal_span(mats))

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    def projection_residual(self, x) -> float:
        """Frobenius distance from ``x`` to the span of the basis."""
        x = as_matrix(x)
        coeffs = np.einsum("kab,ab->k", self.basis.conj(), x)
        return float(np.linalg.norm(x - np.einsum("k,kab->ab", coeffs, self.basis)))

    def closure_residuals(self) -> dict:
        """Worst residuals of the *-algebra axioms (adjoint, product, identity)."""
        b = self.basis
        flat = b.reshape(len(b), -1)
        proj = flat.T @ flat.conj()

        def outside(vecs):
            vecs = vecs.reshape(-1, self.ambient_dim ** 2)
            res = vecs - vecs @ proj.T
            return float(np.linalg.norm(res, axis=1).max()) if len(vecs) else 0.0

        adj = outside(b.conj().transpose(0, 2, 1))
        prod = outside(np.einsum("iab,jbc->ijac", b, b))
        ident = self.projection_residual(np.eye(self.ambient_dim)) / np.sqrt(self.ambient_dim)
        return {"adjoint": adj, "product": prod, "identity": ident}

    def is_star_algebra(self, tol: float = CLOSURE_TOL) -> bool:
        return max(self.closure_residuals().values()) <= tol


def _commutator_rows(g: np.ndarray) -> np.ndarray:
    # vec(GX - XG) = (G (x) I - I (x) G^T) vec(X) for row-major vec.
    d = g.shape[0]
    eye = np.eye(d)
    return np.kron(g, eye) - np.kron(eye, g.T)


def commutant(generators: Sequence, rtol: float = NULL_TOL) -> OperatorAlgebra:
    """All ``X`` with ``[X, G] = [X, G^dag] = 0`` for every generator ``G``."""
    gens = [as_matrix(g) for g in generators]
    if not gens:
        raise ShapeError("commutant needs at least one generator")
    d = gens[0].shape[0]
    if any(g.shape != (d, d) for g in gens):
        raise ShapeError("generators must be square matrices of one dimension")
    rows = np.vstack([_commutator_rows(h) for g in gens for h in (g, g.conj().T)])
    scale = max(float(np.linalg.norm(g, 2)) for g in gens)
    ns = null_space(rows, rtol, floor=rtol * scale)
    return OperatorAlgebra(d, ns.T.reshape(-1, d, d))


def _fixed_space(s: np.ndarray, tol: float) -> np.ndarray:
    return null_space(s - np.eye(s.shape[0]), tol, floor=tol)


def ergodic_superoperator(channel: QuantumChannel, tol: float = FIXED_POINT_TOL) -> np.ndarray:
    """Spectral projector of the superoperator onto its eigenvalue-1 eigenspace.

    For a channel the eigenvalue 1 is semisimple, so with right fixed vectors
    ``R`` and left fixed vectors ``L`` the projector is ``R (L^dag R)^-1 L^dag``;
    this equals the Cesaro mean of the powers of the channel.
    """
    if channel.in_dim != channel.out_dim:
        raise ShapeError("ergodic projection needs a channel from a space to itself")
    s = superoperator(channel)
    right = _fixed_space(s, tol)
    left = _fixed_space(s.conj().T, tol)
    if right.shape[1] != left.shape[1] or right.shape[1] == 0:
        raise AlgebraError("could not isolate the eigenvalue-1 eigenspace of the channel")
    return right @ np.linalg.solve(left.conj().T @ right, left.conj().T)


def _maximal_invariant_state(channel: QuantumChannel) -> np.ndarray:
    d = channel.in_dim
    p = ergodic_superoperator(channel)
    return (p @ (np.eye(d) / d).reshape(-1)).reshape(d, d)


def _require_faithful(channel: QuantumChannel) -> None:
    values = hermitian_eig(_maximal_invariant_state(channel)).values
    if values[0] <= RANK_TOL * values[-1]:
        raise NoFaithfulStateError(
            "channel has no full-rank invariant state; restrict it to the support of its "
            f"invariant states first (smallest eigenvalue {values[0]:.3e})"
        )


def fixed_point_algebra(channel: QuantumChannel) -> OperatorAlgebra:
    """``{X : F*(X) = X}``, computed as the commutant of the Kraus operators."""
    _require_faithful(channel)
    return commutant(minimal_kraus(channel).kraus)


def ergodic_projection(channel: QuantumChannel) -> QuantumChannel:
    """The channel ``P = lim (1/N) sum_{n<=N} F^n``, in canonical Kraus form."""
    _require_faithful(channel)
    d = channel.in_dim
    p = ergodic_superoperator(channel)
    return from_choi(choi_from_superoperator(p, d, d), channel.in_shape, channel.out_shape)


@dataclass(frozen=True)
class BlockStructure:
    """``H = (+)_j H_L_j (x) H_R_j`` realized by the columns of ``unitary``.

    Block ``j`` occupies columns ``offsets[j]:offsets[j+1]`` with the right
    factor index varying fastest.
    """

    blocks: tuple
    unitary: np.ndarray

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    @property
    def offsets(self) -> list:
        out = [0]
        for dl, dr in self.blocks:
            out.append(out[-1] + dl * dr)
        return out

    def columns(self, j: int) -> np.ndarray:
        o = self.offsets
        return self.unitary[:, o[j]:o[j + 1]]

    def projector(self, j: int) -> np.ndarray:
        c = self.columns(j)
        return c @ c.conj().T

    def rotate(self, x) -> np.ndarray:
        """``W^dag X W``: express an operator in the adapted basis."""
        return self.unitary.conj().T @ as_matrix(x) @ self.unitary

    def block(self, x, j: int) -> np.ndarray:
        """Block ``j`` of ``W^dag X W`` as an array of shape (dL, dR, dL, dR)."""
        c = self.columns(j)
        dl, dr = self.blocks[j]
        return (c.conj().T @ as_matrix(x) @ c).reshape(dl, dr, dl, dr)

    def algebra_residual(self, algebra: OperatorAlgebra) -> float:
        """How far ``W^dag A W`` is from ``(+)_j M_dL (x) I_dR`` (max entrywise)."""
        worst = 0.0
        offsets = self.offsets
        for x in algebra.basis:
            y = self.rotate(x)
            mask = np.ones_like(y, dtype=bool)
            for j, (dl, dr) in enumerate(self.blocks):
                sl = slice(offsets[j], offsets[j + 1])
                mask[sl, sl] = False
                blk = y[sl, sl].reshape(dl, dr, dl, dr)
                left = np.einsum("arbr->ab", blk) / dr
                ideal = np.einsum("ab,rs->arbs", left, np.eye(dr))
                worst = max(worst, float(np.abs(blk - ideal).max()))
            if mask.any():
                worst = max(worst, float(np.abs(y[mask]).max()))
        return worst


def _random_hermitian_in(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    herm = np.concatenate([basis + basis.conj().transpose(0, 2, 1),
                           1j * (basis - basis.conj().transpose(0, 2, 1))])
    coeffs = rng.standard_normal(len(herm))
    return np.einsum("k,kab->ab", coeffs, herm) / 2


def _cluster(values: np.ndarray) -> list:
    """Split ascending eigenvalues into clusters separated by relative gaps."""
    scale = max(float(values[-1] - values[0]), float(np.abs(values).max()), 1e-300)
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] > CLUSTER_GAP * scale:
            groups.append([i])
        else:
            groups[-1].append(i)
    return groups


def _center(algebra: OperatorAlgebra) -> np.ndarray:
    b = algebra.basis
    comm = np.einsum("kab,lbc->lkac", b, b) - np.einsum("lab,kbc->lkac", b, b)
    n = len(b)
    rows = comm.transpose(0, 2, 3, 1).reshape(n * algebra.ambient_dim ** 2, n)
    coeffs = null_space(rows, 1e-9, floor=1e-9)
    return np.einsum("km,kab->mab", coeffs, b)


class _Retry(Exception):
    pass


def _factor_block(sub: np.ndarray, rng: np.random.Generator) -> tuple:
    """Adapted basis for one simple summand, given in its own n-dim coordinates."""
    n = sub.shape[1]
    factor = _orthonormal_span(sub, 1e-9)
    dl = int(round(np.sqrt(len(factor))))
    if dl * dl != len(factor) or n % dl:
        raise _Retry(f"summand of dimension {len(factor)} is not a full matrix block on {n} dims")
    dr = n // dl
    if dl == 1:
        return 1, dr, np.eye(n, dtype=complex)
    h = _random_hermitian_in(factor, rng)
    values, vectors = np.linalg.eigh(h)
    groups = _cluster(values)
    if len(groups) != dl or any(len(g) != dr for g in groups):
        raise _Retry("generic element did not split the block into minimal projections")
    projs = [vectors[:, g] @ vectors[:, g].conj().T for g in groups]
    ref = vectors[:, groups[0]]
    a = np.einsum("k,kab->ab", rng.standard_normal(len(factor)) + 1j * rng.standard_normal(len(factor)),
                  factor)
    cols = [ref]
    for p in projs[1:]:
        u = p @ a @ projs[0]
        s = np.linalg.svd(u, compute_uv=False)
        if s[dr - 1] < 1e-6 * s[0] or s[0] - s[dr - 1] > 1e-8 * s[0]:
            raise _Retry("matrix unit between minimal projections is degenerate")
        cols.append(u @ ref / s[0])
    g = np.stack(cols, axis=1).reshape(n, dl * dr)
    return dl, dr, g


def _attempt(algebra: OperatorAlgebra, rng: np.random.Generator) -> BlockStructure:
    d = algebra.ambient_dim
    center = _center(algebra)
    h = _random_hermitian_in(center, rng)
    values, vectors = np.linalg.eigh(h)
    pieces = []
    for group in _cluster(values):
        v = vectors[:, group]
        sub = np.einsum("ai,kab,bj->kij", v.conj(), algebra.basis, v)
        dl, dr, g = _factor_block(sub, rng)
        cols = v @ g
        proj = cols @ cols.conj().T
        key = (dl, dr, tuple(np.round(proj.real.ravel(), 8)), tuple(np.round(proj.imag.ravel(), 8)))
        pieces.append((key, (dl, dr), cols))
    pieces.sort(key=lambda t: t[0])
    w = np.hstack([cols for _, _, cols in pieces])
    if w.shape != (d, d):
        raise _Retry("blocks do not exhaust the ambient space")
    return BlockStructure(tuple(b for _, b, _ in pieces), w)


def decompose_algebra(algebra: OperatorAlgebra, seed: int = 0) -> BlockStructure:
    """Wedderburn form ``W^dag A W = (+)_j M_dL_j (x) I_dR_j`` of a unital *-algebra.

    Blocks come from the spectral clusters of a seeded generic central element;
    inside each block a generic element yields minimal projections and matrix
    units between them. Each attempt is certified by the conjugation residual;
    a failure retries with the next seed.
    """
    res = algebra.closure_residuals()
    if max(res.values()) > CLOSURE_TOL:
        raise AlgebraError(f"basis does not span a unital *-algebra: residuals {res}")
    last = "no attempt made"
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        try:
            structure = _attempt(algebra, rng)
        except _Retry as exc:
            last = str(exc)
            continue
        unitary_err = np.abs(structure.unitary.conj().T @ structure.unitary - np.eye(algebra.ambient_dim)).max()
        residual = structure.algebra_residual(algebra)
        if unitary_err < CLOSURE_TOL and residual < CLOSURE_TOL:
            return structure
        last = f"residual {residual:.3e}, unitarity error {unitary_err:.3e}"
    raise AlgebraError(f"block decomposition failed after {MAX_ATTEMPTS} attempts: {last}")


@dataclass(frozen=True)
class ConditionalExpectation:
    """``P0(xi) = (+)_j Tr_R_j(Pi_j xi Pi_j) (x) omega_j`` in the adapted basis."""

    structure: BlockStructure
    omega: tuple

    def apply(self, xi) -> np.ndarray:
        xi = as_matrix(xi)
        s = self.structure
        out = np.zeros((s.dim, s.dim), dtype=complex)
        for j, (dl, dr) in enumerate(s.blocks):
            left = np.einsum("arbr->ab", s.block(xi, j))
            c = s.columns(j)
            out += c @ np.kron(left, self.omega[j].matrix) @ c.conj().T
        return out

    def channel(self) -> QuantumChannel:
        s = self.structure
        kraus = []
        for j, (dl, dr) in enumerate(s.blocks):
            c = s.columns(j)
            values, vectors = hermitian_eig(self.omega[j].matrix)
            for m, lam in enumerate(values):
                if lam <= 1e-14:
                    continue
                for r in range(dr):
                    e = np.zeros(dr)
                    e[r] = 1.0
                    local = np.kron(np.eye(dl), np.sqrt(lam) * np.outer(vectors[:, m], e))
                    kraus.append(c @ local @ c.conj().T)
        return QuantumChannel(kraus, s.dim, s.dim)


def conditional_expectation(algebra: OperatorAlgebra, channel: QuantumChannel,
                            seed: int = 0, tol: float = CLOSURE_TOL) -> ConditionalExpectation:
    """Block structure of ``algebra`` plus the states ``omega_j`` of the ergodic projection.

    ``algebra`` must be the fixed-point algebra of ``channel``; the extracted
    form is checked against the ergodic projection on all matrix units.
    """
    _require_faithful(channel)
    structure = decompose_algebra(algebra, seed)
    d = structure.dim
    p = ergodic_superoperator(channel)

    def project(x):
        return (p @ x.reshape(-1)).reshape(d, d)

    omegas = []
    for j, (dl, dr) in enumerate(structure.blocks):
        tau = structure.projector(j) / (dl * dr)
        right = np.einsum("aras->rs", structure.block(project(tau), j))
        right = 0.5 * (right + right.conj().T)
        omegas.append(DensityOperator(right / np.trace(right).real, [dr], validate=False))
    ce = ConditionalExpectation(structure, tuple(omegas))
    worst = 0.0
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            worst = max(worst, float(np.abs(project(e) - ce.apply(e)).max()))
    if worst > tol:
        raise AlgebraError(
            f"ergodic projection differs from the block form by {worst:.3e}; "
            "the algebra is not the fixed-point algebra of this channel"
        )
    return ce


def block_channel(structure: BlockStructure, right_channels: Sequence[QuantumChannel]) -> QuantumChannel:
    """``(+)_j id_L_j (x) G_j`` with coherences between blocks removed."""
    kraus = []
    for j, g in enumerate(right_channels):
        dl, dr = structure.blocks[j]
        if g.in_dim != dr or g.out_dim != dr:
            raise ShapeError(f"block {j} needs a channel on dimension {dr}")
        c = structure.columns(j)
        kraus += [c @ np.kron(np.eye(dl), k) @ c.conj().T for k in g.kraus]
    return QuantumChannel(kraus, structure.dim, structure.dim)


def apply_superoperator(s: np.ndarray, x) -> np.ndarray:
    x = as_matrix(x)
    d = x.shape[0]
    return (s @ x.reshape(-1)).reshape(d, d)

