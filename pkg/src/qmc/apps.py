"""Worked applications: coherent information and error-correction reversibility,
Holevo-bound saturation, and the classical embedding of distributions."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import markov
from .channels import (
    QuantumChannel,
    apply,
    compose,
    minimal_kraus,
    petz_transpose_channel,
    tensor_with_identity,
)
from .entropy import Ensemble, holevo_chi, shannon_entropy, von_neumann_entropy
from .errors import FactorizationError, NotMarkovError, ShapeError, ValidationError
from .linops import (
    RANK_TOL,
    DensityOperator,
    Shape,
    hermitian_eig,
    trace_distance,
)


@dataclass(frozen=True)
class Purification:
    """``|Phi> = sum_i sqrt(lambda_i) |i>_A |v_i>_B`` for a state on B."""

    vector: np.ndarray
    source: DensityOperator
    ancilla_dim: int

    @property
    def state(self) -> DensityOperator:
        shape = Shape([self.ancilla_dim, self.source.dim], ["R", "Q"])
        return DensityOperator(np.outer(self.vector, self.vector.conj()), shape, validate=False)


def purify(sigma: DensityOperator, rank_tol: float = RANK_TOL) -> Purification:
    """Canonical purification on an ancilla of dimension ``rank(sigma)``.

    Eigenvalues are taken in descending order, so the ancilla index 0 carries
    the largest weight.
    """
    if not isinstance(sigma, DensityOperator):
        sigma = DensityOperator(sigma)
    values, vectors = hermitian_eig(sigma.matrix)
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    keep = values > rank_tol * values[0]
    values, vectors = values[keep], vectors[:, keep]
    k = len(values)
    psi = np.zeros((k, sigma.dim), dtype=complex)
    for i in range(k):
        psi[i] = np.sqrt(values[i]) * vectors[:, i]
    vec = psi.ravel()
    return Purification(vec / np.linalg.norm(vec), sigma, k)


def _on_purification(phi: QuantumChannel, purification: Purification) -> np.ndarray:
    lifted = tensor_with_identity(phi, Shape([purification.ancilla_dim], ["R"]), side="left")
    return apply(lifted, purification.state.matrix)


def coherent_information(sigma: DensityOperator, phi: QuantumChannel) -> float:
    """``S(phi(sigma)) - S((id (x) phi)(Phi_sigma))``."""
    if sigma.dim != phi.in_dim:
        raise ShapeError(f"channel expects dimension {phi.in_dim}, state has {sigma.dim}")
    out = apply(phi, sigma.matrix)
    joint = _on_purification(phi, purify(sigma))
    return von_neumann_entropy(out) - von_neumann_entropy(joint)


class QECVerdict(NamedTuple):
    gap: float
    recoverable: bool
    recovery: Optional[QuantumChannel]
    recovery_residual: Optional[float]
    verified: bool


def qec_check(sigma: DensityOperator, phi: QuantumChannel, tol: float = 1e-9) -> QECVerdict:
    """Perfect reversibility of ``phi`` on ``sigma`` via ``S(sigma) - I_c``.

    When the gap is below ``tol`` the transpose channel at ``sigma`` is built and
    checked to restore the purification within ``10 * sqrt(tol)``.
    """
    gap = von_neumann_entropy(sigma.matrix) - coherent_information(sigma, phi)
    if gap >= tol:
        return QECVerdict(float(gap), False, None, None, False)
    recovery = petz_transpose_channel(phi, sigma)
    purification = purify(sigma)
    restored = _on_purification(compose(recovery, phi), purification)
    residual = trace_distance(restored, purification.state.matrix)
    return QECVerdict(float(gap), True, recovery, float(residual), bool(residual < 10 * np.sqrt(tol)))


class HolevoVerdict(NamedTuple):
    chi_before: float
    chi_after: float
    saturated: bool
    commuting: bool
    outputs_commuting: bool
    block_dims: Optional[list]
    flags_diagonal: Optional[bool]


def _pairwise_commuting(mats: Sequence[np.ndarray], tol: float) -> bool:
    return all(np.linalg.norm(a @ b - b @ a, 2) < tol for a, b in combinations(mats, 2))


def dilated_cq_state(ensemble: Ensemble, phi: QuantumChannel) -> DensityOperator:
    """CQ state pushed through the Stinespring isometry of ``phi``: on (X, B~, C~) with ``phi = Tr_C~``."""
    phi = minimal_kraus(phi)
    n = len(phi.kraus)
    iso = np.stack(phi.kraus).transpose(1, 0, 2).reshape(phi.out_dim * n, phi.in_dim)
    nx = len(ensemble.states)
    d_out = phi.out_dim
    m = np.zeros((nx * d_out * n,) * 2, dtype=complex)
    for x, (p, s) in enumerate(zip(ensemble.probs.probs, ensemble.states)):
        flag = np.zeros((nx, nx))
        flag[x, x] = 1.0
        m += p * np.kron(flag, iso @ s.matrix @ iso.conj().T)
    return DensityOperator(m, Shape([nx, d_out, n], ["A", "B", "C"]), validate=False)


def holevo_equality_check(ensemble: Ensemble, phi: QuantumChannel, tol: float = 1e-9,
                          seed: int = 0) -> HolevoVerdict:
    """Compare chi before and after ``phi`` and report commutativity of the ensemble.

    When saturated, the dilated classical-quantum state is decomposed and the
    A-marginals of the bL factors are checked to be diagonal in the flag basis.
    """
    after = Ensemble(ensemble.probs, [apply(phi, s) for s in ensemble.states])
    before_chi = holevo_chi(ensemble)
    after_chi = holevo_chi(after)
    saturated = bool(abs(before_chi - after_chi) < tol)
    commuting = _pairwise_commuting([s.matrix for s in ensemble.states], tol)
    outputs_commuting = _pairwise_commuting([s.matrix for s in after.states], tol)
    block_dims = flags = None
    if saturated:
        try:
            d = markov.decompose(dilated_cq_state(ensemble, phi), tol=tol, seed=seed)
        except (NotMarkovError, FactorizationError):
            pass
        else:
            block_dims = d.block_dims
            flags = all(
                np.abs(m - np.diag(np.diag(m))).max() < 10 * np.sqrt(tol)
                for m in (blk.rho_al.reduce(["A"]).matrix for blk in d.blocks)
            )
    return HolevoVerdict(float(before_chi), float(after_chi), bool(saturated), commuting, outputs_commuting, block_dims, flags)


def embed_distribution(p, labels: Sequence[str] | None = None) -> DensityOperator:
    """Diagonal state ``sum_x P(x) |x><x|`` on the product of the array's axes."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-12 * max(p.size, 1):
        raise ValidationError("not a probability distribution")
    dims = p.shape if p.ndim else (1,)
    if labels is not None and len(labels) != len(dims):
        raise ShapeError(f"{len(labels)} labels for a {len(dims)}-way distribution")
    return DensityOperator(np.diag(p.ravel()).astype(complex), Shape(dims, labels))


@dataclass(frozen=True)
class ClassicalFactorization:
    """``P(a,b,c) = P_B(b) P(a|b) P(c|b)``; conditional rows with ``P_B(b) = 0`` are zero."""

    p_b: np.ndarray
    p_a_given_b: np.ndarray   # shape (dB, dA)
    p_c_given_b: np.ndarray   # shape (dB, dC)
    support: np.ndarray       # mask of b with P_B(b) > 0

    def joint(self) -> np.ndarray:
        return np.einsum("b,ba,bc->abc", self.p_b, self.p_a_given_b, self.p_c_given_b)


class ClassicalVerdict(NamedTuple):
    cmi: float
    passed: bool
    factorization: Optional[ClassicalFactorization]


def classical_cmi(p) -> float:
    """``I(A:C|B) = sum_b P_B(b) I(A:C|B=b)`` for a joint array indexed (a, b, c)."""
    p = np.asarray(p, dtype=float)
    total = 0.0
    for b in range(p.shape[1]):
        pb = p[:, b, :].sum()
        if pb <= 0:
            continue
        cond = p[:, b, :] / pb
        mi = (shannon_entropy(cond.sum(axis=1)) + shannon_entropy(cond.sum(axis=0))
              - shannon_entropy(cond.ravel()))
        total += pb * mi
    return float(total)


def classical_markov_check(p, tol: float = 1e-9) -> ClassicalVerdict:
    """Conditional independence of A and C given B for a joint distribution on A x B x C."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 3:
        raise ShapeError("expected a three-way joint distribution")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-12 * p.size:
        raise ValidationError("not a probability distribution")
    cmi = classical_cmi(p)
    if cmi >= tol:
        return ClassicalVerdict(cmi, False, None)
    p_b = p.sum(axis=(0, 2))
    support = p_b > 0
    p_a_b = np.zeros((p.shape[1], p.shape[0]))
    p_c_b = np.zeros((p.shape[1], p.shape[2]))
    p_a_b[support] = (p.sum(axis=2).T)[support] / p_b[support, None]
    p_c_b[support] = p.sum(axis=0)[support] / p_b[support, None]
    return ClassicalVerdict(cmi, True, ClassicalFactorization(p_b, p_a_b, p_c_b, support))
