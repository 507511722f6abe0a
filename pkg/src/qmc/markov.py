"""Strong subadditivity equality: recovery, detection and block decomposition.

A tripartite state is a :class:`~qmc.linops.DensityOperator` on three
subsystems whose roles are A, B, C in label order. B is always compressed to
the support of ``rho_B`` before any Petz or fixed-point computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import algebra
from .channels import (
    QuantumChannel,
    apply,
    compose,
    partial_trace_channel,
    petz_transpose_channel,
    tensor_with_identity,
)
from .entropy import conditional_mutual_information
from .errors import FactorizationError, NotMarkovError, PreservationError, ShapeError, ValidationError
from .linops import (
    RANK_TOL,
    DensityOperator,
    Shape,
    as_matrix,
    kernel_isometry,
    support_isometry,
    trace_distance,
)

CMI_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-8


def tripartite(matrix, dims: Sequence[int], labels: Sequence[str] = ("A", "B", "C")) -> DensityOperator:
    """Validated state on three subsystems."""
    return DensityOperator(matrix, Shape(dims, labels))


def _check_tripartite(rho: DensityOperator) -> None:
    if not isinstance(rho, DensityOperator) or len(rho.labels) != 3:
        raise ShapeError("expected a DensityOperator on exactly three subsystems")


class _Restricted(NamedTuple):
    rho: DensityOperator   # on (A, B', C) with B' = supp(rho_B)
    support: np.ndarray    # dB x r isometry
    kernel: np.ndarray     # dB x (dB - r)


def _restrict_b(rho: DensityOperator, rank_tol: float = RANK_TOL) -> _Restricted:
    _check_tripartite(rho)
    a, b, c = rho.labels
    da, db, dc = rho.dims
    rho_b = rho.reduce([b]).matrix
    v = support_isometry(rho_b, rank_tol)
    k = kernel_isometry(rho_b, rank_tol)
    iso = np.kron(np.kron(np.eye(da), v), np.eye(dc))
    m = iso.conj().T @ rho.matrix @ iso
    m = m / np.trace(m).real
    return _Restricted(DensityOperator(m, Shape([da, v.shape[1], dc], rho.labels), validate=False), v, k)


def petz_recovery_channel(rho_bc: DensityOperator, rank_tol: float = RANK_TOL) -> QuantumChannel:
    """Transpose channel of ``Tr_C`` at ``rho_BC``: a channel B -> BC with ``R(rho_B) = rho_BC``."""
    if len(rho_bc.labels) != 2:
        raise ShapeError("the recovery channel needs a state on two subsystems (B, C)")
    trace_c = partial_trace_channel(rho_bc.shape, rho_bc.labels[1])
    return petz_transpose_channel(trace_c, rho_bc, rank_tol)


def _recovered(rho: DensityOperator) -> np.ndarray:
    a, b, c = rho.labels
    recovery = petz_recovery_channel(rho.reduce([b, c]))
    lifted = tensor_with_identity(recovery, rho.shape.sub([a]), side="left")
    return apply(lifted, rho.reduce([a, b]).matrix)


def recovery_residual(rho: DensityOperator) -> float:
    """Trace distance between ``rho_ABC`` and ``(id_A (x) R)(rho_AB)``."""
    restricted = _restrict_b(rho).rho
    return trace_distance(restricted.matrix, _recovered(restricted))


class MarkovVerdict(NamedTuple):
    cmi: float
    residual: float
    passed: bool


def is_markov(rho: DensityOperator, tol: float = CMI_TOL, residual_tol: float | None = None) -> MarkovVerdict:
    """Both equality diagnostics; passes when ``cmi < tol`` and the recovery residual
    is below ``residual_tol`` (default ``10 * sqrt(tol)``)."""
    _check_tripartite(rho)
    if residual_tol is None:
        residual_tol = 10 * np.sqrt(tol)
    cmi = conditional_mutual_information(rho)
    residual = recovery_residual(rho)
    return MarkovVerdict(cmi, residual, bool(cmi < tol and residual < residual_tol))


@dataclass(frozen=True)
class MarkovBlock:
    q: float
    dims: tuple                  # (dL, dR)
    rho_al: DensityOperator      # on (A, bL)
    rho_rc: DensityOperator      # on (bR, C)
    omega: DensityOperator       # Tr_C rho_rc, the bR marginal


@dataclass(frozen=True)
class MarkovDecomposition:
    """``rho_ABC = (+)_j q_j rho_{A bL_j} (x) rho_{bR_j C}``.

    ``b_basis`` is a unitary on H_B whose first ``support_dim`` columns carry the
    blocks in order (right factor fastest); the remaining columns span
    ``ker rho_B``, which carries no weight.
    """

    dims: tuple
    labels: tuple
    b_basis: np.ndarray
    support_dim: int
    blocks: tuple
    residual: float = field(default=0.0)
    tol: float = field(default=CMI_TOL)

    @property
    def q(self) -> np.ndarray:
        return np.array([blk.q for blk in self.blocks])

    @property
    def block_dims(self) -> list:
        return [blk.dims for blk in self.blocks]


def _block_product(tau: np.ndarray, dims: Sequence[int], split: int) -> tuple:
    """Normalized marginals of ``tau`` on factors [:split] and [split:], and the product residual."""
    d1 = int(np.prod(dims[:split]))
    d2 = int(np.prod(dims[split:]))
    t = tau.reshape(d1, d2, d1, d2)
    first = np.einsum("arbr->ab", t)
    second = np.einsum("aras->rs", t)
    tr = np.trace(first).real
    first, second = first / tr, second / tr
    residual = trace_distance(tau / tr, np.kron(first, second))
    return first, second, residual


def _state(m: np.ndarray, dims, labels) -> DensityOperator:
    m = 0.5 * (m + m.conj().T)
    return DensityOperator(m / np.trace(m).real, Shape(dims, labels), validate=False)


def _block_sort_key(blk: MarkovBlock, proj: np.ndarray) -> tuple:
    return (blk.dims[0], blk.dims[1], -round(blk.q, 10), tuple(np.round(proj.real.ravel(), 8)),
            tuple(np.round(proj.imag.ravel(), 8)))


def decompose(rho: DensityOperator, tol: float = CMI_TOL, seed: int = 0) -> MarkovDecomposition:
    """Explicit short-Markov-chain block form of a state saturating strong subadditivity.

    Raises :class:`NotMarkovError` if :func:`is_markov` fails at ``tol`` and
    :class:`FactorizationError` if a block that must be a product is not one
    within ``10 * tol`` trace distance.
    """
    verdict = is_markov(rho, tol)
    if not verdict.passed:
        raise NotMarkovError(
            f"state does not saturate strong subadditivity (cmi={verdict.cmi:.3e}, "
            f"recovery residual={verdict.residual:.3e})", verdict.cmi, verdict.residual)
    a, b, c = rho.labels
    da, db, dc = rho.dims
    restricted, v_supp, v_kern = _restrict_b(rho)
    r = v_supp.shape[1]
    rho_ab = restricted.reduce([a, b])
    rho_bc = restricted.reduce([b, c])

    recovery = petz_recovery_channel(rho_bc)
    phi = compose(partial_trace_channel(rho_bc.shape, c), recovery)
    fixed = algebra.fixed_point_algebra(phi)
    expectation = algebra.conditional_expectation(fixed, phi, seed)
    structure = expectation.structure

    ab = np.kron(np.eye(da), structure.unitary)
    bc = np.kron(structure.unitary, np.eye(dc))
    ab_rot = (ab.conj().T @ rho_ab.matrix @ ab).reshape(da, r, da, r)
    bc_rot = (bc.conj().T @ rho_bc.matrix @ bc).reshape(r, dc, r, dc)
    rho_b_rot = structure.rotate(rho_ab.reduce([b]).matrix)

    limit = 10 * tol
    offsets = structure.offsets
    pieces = []
    for j, (dl, dr) in enumerate(structure.blocks):
        sl = slice(offsets[j], offsets[j + 1])
        n = dl * dr
        q_j = float(np.trace(rho_b_rot[sl, sl]).real)
        tau_ab = ab_rot[:, sl, :, sl].reshape(da * n, da * n)
        left, right, res_ab = _block_product(tau_ab, [da, dl, dr], 2)
        if res_ab > limit:
            raise FactorizationError(f"block {j}: rho_AB block is not rho_AbL (x) omega "
                                     f"(residual {res_ab:.3e})", res_ab)
        omega = expectation.omega[j].matrix
        res_omega = trace_distance(right, omega)
        if res_omega > limit:
            raise FactorizationError(f"block {j}: bR marginal disagrees with the ergodic projection "
                                     f"(residual {res_omega:.3e})", res_omega)
        tau_bc = bc_rot[sl, :, sl, :].reshape(n * dc, n * dc)
        sigma_l, rho_rc, res_bc = _block_product(tau_bc, [dl, dr, dc], 1)
        if res_bc > limit:
            raise FactorizationError(f"block {j}: rho_BC block is not sigma_L (x) rho_bRC "
                                     f"(residual {res_bc:.3e})", res_bc)
        cross = trace_distance(sigma_l, np.einsum("alam->lm", left.reshape(da, dl, da, dl)))
        if cross > limit:
            raise FactorizationError(f"block {j}: bL marginals of rho_AB and rho_BC disagree "
                                     f"(residual {cross:.3e})", cross)
        blk = MarkovBlock(
            q=q_j,
            dims=(dl, dr),
            rho_al=_state(left, [da, dl], [a, "bL"]),
            rho_rc=_state(rho_rc, [dr, dc], ["bR", c]),
            omega=_state(omega, [dr], ["bR"]),
        )
        cols = v_supp @ structure.columns(j)
        pieces.append((_block_sort_key(blk, cols @ cols.conj().T), blk, cols))

    pieces.sort(key=lambda t: t[0])
    q = np.clip([p[1].q for p in pieces], 0.0, None)
    q = q / q.sum()
    blocks = tuple(
        MarkovBlock(float(qj), blk.dims, blk.rho_al, blk.rho_rc, blk.omega)
        for qj, (_, blk, _) in zip(q, pieces)
    )
    b_basis = np.hstack([cols for _, _, cols in pieces] + [v_kern])
    out = MarkovDecomposition((da, db, dc), rho.labels, b_basis, r, blocks, 0.0, tol)
    residual = trace_distance(reconstruct(out).matrix, rho.matrix)
    if residual > 10 * tol:
        raise FactorizationError(f"reassembled state differs from the input by {residual:.3e}", residual)
    return MarkovDecomposition((da, db, dc), rho.labels, b_basis, r, blocks, residual, tol)


def reconstruct(d: MarkovDecomposition) -> DensityOperator:
    """Assemble ``(+)_j q_j rho_{A bL_j} (x) rho_{bR_j C}`` and rotate B back."""
    da, db, dc = d.dims
    if sum(dl * dr for dl, dr in d.block_dims) != d.support_dim or d.b_basis.shape != (db, db):
        raise ShapeError("block dimensions do not add up to the B system")
    t = np.zeros((da, db, dc, da, db, dc), dtype=complex)
    offset = 0
    for blk in d.blocks:
        dl, dr = blk.dims
        n = dl * dr
        prod = np.kron(blk.rho_al.matrix, blk.rho_rc.matrix).reshape(da, n, dc, da, n, dc)
        t[:, offset:offset + n, :, :, offset:offset + n, :] += blk.q * prod
        offset += n
    rotated = t.reshape(da * db * dc, da * db * dc)
    u = np.kron(np.kron(np.eye(da), d.b_basis), np.eye(dc))
    return DensityOperator(u @ rotated @ u.conj().T, Shape(d.dims, d.labels), validate=False)


class SeparableTerm(NamedTuple):
    weight: float
    rho_a: DensityOperator
    rho_c: DensityOperator


def separable_decomposition(d: MarkovDecomposition) -> list:
    """``rho_AC = sum_j q_j Tr_bL(rho_{A bL_j}) (x) Tr_bR(rho_{bR_j C})``."""
    a, _, c = d.labels
    return [SeparableTerm(blk.q, blk.rho_al.reduce([a]), blk.rho_rc.reduce([c])) for blk in d.blocks]


def separable_extension(terms: Sequence) -> DensityOperator:
    """``sum_i w_i rho_A_i (x) |i><i|_B (x) rho_C_i``, whose I(A:C|B) vanishes."""
    terms = [SeparableTerm(*t) for t in terms]
    w = np.array([t.weight for t in terms], dtype=float)
    if not terms or np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
        raise ValidationError("separable weights must form a probability distribution")
    da, dc = terms[0].rho_a.dim, terms[0].rho_c.dim
    if any(t.rho_a.dim != da or t.rho_c.dim != dc for t in terms):
        raise ShapeError("all terms must share the A and C dimensions")
    n = len(terms)
    m = np.zeros((da * n * dc,) * 2, dtype=complex)
    for i, t in enumerate(terms):
        flag = np.zeros((n, n))
        flag[i, i] = 1.0
        m += t.weight * np.kron(np.kron(as_matrix(t.rho_a), flag), as_matrix(t.rho_c))
    return DensityOperator(m, Shape([da, n, dc], ["A", "B", "C"]))


@dataclass(frozen=True)
class KoashiImotoDecomposition:
    """``rho_k = (+)_j q_{j|k} rho_{j|k} (x) omega_j`` on the joint support.

    ``structure`` lives on the support; ``support`` maps it into the input space.
    """

    structure: algebra.BlockStructure
    support: np.ndarray
    omega: tuple
    per_state: tuple   # per state: tuple of (q_{j|k}, rho_{j|k}) pairs
    residual: float

    def embedded_block_state(self, j: int, left) -> np.ndarray:
        """``left (x) omega_j`` placed in block ``j`` of the input space."""
        c = self.support @ self.structure.columns(j)
        return c @ np.kron(as_matrix(left), self.omega[j].matrix) @ c.conj().T

    def reassemble(self, k: int) -> np.ndarray:
        return sum(qj * self.embedded_block_state(j, rho_j)
                   for j, (qj, rho_j) in enumerate(self.per_state[k]))


def koashi_imoto(states: Sequence[DensityOperator], channel: QuantumChannel, seed: int = 0,
                 tol: float = RECONSTRUCTION_TOL) -> KoashiImotoDecomposition:
    """Common block form of states left invariant by ``channel``.

    The channel is compressed to the joint support of the states, and the block
    structure is that of its fixed-point algebra.
    """
    states = [s if isinstance(s, DensityOperator) else DensityOperator(s) for s in states]
    for k, s in enumerate(states):
        moved = trace_distance(apply(channel, s.matrix), s.matrix)
        if moved > 1e-9:
            raise PreservationError(f"channel moves state {k} by trace distance {moved:.3e}")
    mean = sum(s.matrix for s in states) / len(states)
    v = support_isometry(mean)
    restricted = QuantumChannel([v.conj().T @ k @ v for k in channel.kraus], v.shape[1], v.shape[1])
    fixed = algebra.fixed_point_algebra(restricted)
    expectation = algebra.conditional_expectation(fixed, restricted, seed)
    structure = expectation.structure
    per_state = []
    worst = 0.0
    for s in states:
        local = v.conj().T @ s.matrix @ v
        entries = []
        for j, (dl, dr) in enumerate(structure.blocks):
            blk = structure.block(local, j)
            left = np.einsum("arbr->ab", blk)
            qj = max(float(np.trace(left).real), 0.0)
            rho_j = left / qj if qj > 1e-14 else np.eye(dl) / dl
            entries.append((qj, DensityOperator(0.5 * (rho_j + rho_j.conj().T), [dl], validate=False)))
        total = sum(q for q, _ in entries)
        entries = tuple((q / total, r) for q, r in entries)
        per_state.append(entries)
    out = KoashiImotoDecomposition(structure, v, expectation.omega, tuple(per_state), 0.0)
    for k, s in enumerate(states):
        worst = max(worst, trace_distance(out.reassemble(k), s.matrix))
    if worst > tol:
        raise FactorizationError(f"states do not reassemble from the block form (residual {worst:.3e})",
                                 worst)
    return KoashiImotoDecomposition(structure, v, expectation.omega, tuple(per_state), worst)


def marginal_block_form(d: MarkovDecomposition) -> np.ndarray:
    """``rho_AB = (+)_j q_j rho_{A bL_j} (x) omega_j`` rebuilt from the decomposition factors."""
    da, db, _ = d.dims
    t = np.zeros((da, db, da, db), dtype=complex)
    offset = 0
    for blk in d.blocks:
        dl, dr = blk.dims
        n = dl * dr
        prod = np.kron(blk.rho_al.matrix, blk.omega.matrix).reshape(da, n, da, n)
        t[:, offset:offset + n, :, offset:offset + n] += blk.q * prod
        offset += n
    u = np.kron(np.eye(da), d.b_basis)
    return u @ t.reshape(da * db, da * db) @ u.conj().T
