"""Entropic functionals in bits: Shannon, von Neumann, Umegaki relative entropy,
mutual and conditional mutual information, and the Holevo quantity."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .linops import (
    RANK_TOL,
    DensityOperator,
    Shape,
    as_matrix,
    hermitian_eig,
    tensor,
)

PROB_TOL = 1e-12


@functools.total_ordering
class _Infinity:
    """Sentinel for an infinite relative entropy.

    Compares greater than every real number but supports no arithmetic, so an
    infinite divergence can never leak silently into a finite computation.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("qmc.INFINITY")

    def __bool__(self):
        return True

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


def is_infinite(x) -> bool:
    return x is INFINITY


@dataclass(frozen=True)
class Distribution:
    """A finite probability distribution with optional outcome labels."""

    probs: np.ndarray
    support_labels: tuple = ()

    def __init__(self, probs, support_labels: Sequence[str] = ()):
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise ValidationError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
            raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
        if support_labels and len(support_labels) != p.size:
            raise ValidationError("one label per outcome is required")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "support_labels", tuple(support_labels))


@dataclass(frozen=True)
class Ensemble:
    """States ``rho_x`` prepared with probabilities ``p(x)``."""

    probs: Distribution
    states: tuple

    def __init__(self, probs, states: Sequence[DensityOperator]):
        if not isinstance(probs, Distribution):
            probs = Distribution(probs)
        states = tuple(s if isinstance(s, DensityOperator) else DensityOperator(s) for s in states)
        if len(states) != probs.probs.size:
            raise ValidationError(f"{probs.probs.size} probabilities for {len(states)} states")
        if len({s.dim for s in states}) > 1:
            raise ValidationError("ensemble states must share a dimension")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", states)

    @property
    def average(self) -> np.ndarray:
        return sum(p * s.matrix for p, s in zip(self.probs.probs, self.states))


def _entropy_of_spectrum(values) -> float:
    p = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    p = p[p > 0]
    h = -float(np.sum(p * np.log2(p)))
    return h if h > 0 else 0.0


def shannon_entropy(p) -> float:
    """H(P) = -sum p log2 p with 0 log 0 = 0."""
    if isinstance(p, Distribution):
        p = p.probs
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0):
        raise ValidationError("probabilities must be nonnegative")
    return _entropy_of_spectrum(p)


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho log2 rho, from the eigenvalues of rho."""
    return _entropy_of_spectrum(hermitian_eig(as_matrix(rho)).values)


def relative_entropy(rho, sigma, rank_tol: float = RANK_TOL):
    """Umegaki relative entropy S(rho||sigma) in bits.

    Returns :data:`INFINITY` when the support of ``rho`` is not contained in the
    support of ``sigma``.
    """
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise ShapeError(f"operators of shapes {r.shape} and {s.shape} are not comparable")
    rv, rV = hermitian_eig(r)
    sv, sV = hermitian_eig(s)
    r_keep = rv > rank_tol * max(rv.max(), 0.0)
    s_keep = sv > rank_tol * max(sv.max(), 0.0)
    # Components of rho's support vectors outside supp(sigma).
    s_ker = sV[:, ~s_keep]
    if s_ker.size and r_keep.any():
        leak = np.linalg.norm(s_ker.conj().T @ rV[:, r_keep], axis=0)
        if leak.max() > np.sqrt(rank_tol):
            return INFINITY
    p = np.clip(rv[r_keep], 0.0, 1.0)
    neg_entropy = float(np.sum(p * np.log2(p)))
    # Tr(rho log sigma) using only sigma's support.
    log_s = np.log2(sv[s_keep])
    overlaps = np.abs(sV[:, s_keep].conj().T @ rV[:, r_keep]) ** 2
    cross = float(np.sum(overlaps * p[None, :] * log_s[:, None]))
    return max(neg_entropy - cross, 0.0)


def _split(shape: Shape, split) -> tuple[list, list]:
    part_a, part_b = split
    part_a = [part_a] if isinstance(part_a, str) else list(part_a)
    part_b = [part_b] if isinstance(part_b, str) else list(part_b)
    if set(part_a) & set(part_b) or sorted(part_a + part_b) != sorted(shape.labels):
        raise ShapeError(f"{split!r} is not a bipartition of {shape.labels}")
    return part_a, part_b


def mutual_information(rho: DensityOperator, split=None) -> float:
    """I(A:B) = S(A) + S(B) - S(AB) for a bipartition ``split`` of the labels.

    With ``split=None`` the state must have exactly two subsystems.
    """
    if split is None:
        if len(rho.labels) != 2:
            raise ShapeError("a split is required for states with more than two subsystems")
        split = ([rho.labels[0]], [rho.labels[1]])
    part_a, part_b = _split(rho.shape, split)
    return (von_neumann_entropy(rho.reduce(part_a)) + von_neumann_entropy(rho.reduce(part_b))
            - von_neumann_entropy(rho))


def mutual_information_relative(rho: DensityOperator, split=None):
    """I(A:B) evaluated as S(rho_AB || rho_A (x) rho_B)."""
    if split is None:
        split = ([rho.labels[0]], list(rho.labels[1:]))
    part_a, part_b = _split(rho.shape, split)
    ordered = rho.permute(
        [lab for lab in rho.labels if lab in part_a] + [lab for lab in rho.labels if lab in part_b]
    )
    product = tensor(rho.reduce(part_a).matrix, rho.reduce(part_b).matrix)
    return relative_entropy(ordered.matrix, product)


def conditional_mutual_information(rho: DensityOperator) -> float:
    """I(A:C|B) = S(AB) + S(BC) - S(ABC) - S(B) for a state on three subsystems.

    The subsystems play the roles A, B, C in the order of ``rho.labels``.
    """
    if len(rho.labels) != 3:
        raise ShapeError(f"conditional mutual information needs 3 subsystems, got {rho.labels}")
    a, b, c = rho.labels
    return (von_neumann_entropy(rho.reduce([a, b])) + von_neumann_entropy(rho.reduce([b, c]))
            - von_neumann_entropy(rho) - von_neumann_entropy(rho.reduce([b])))


def cq_state(ensemble: Ensemble) -> DensityOperator:
    """The classical-quantum state sum_x p(x) |x><x| (x) rho_x on (X, Q)."""
    n = len(ensemble.states)
    d = ensemble.states[0].dim
    m = np.zeros((n * d, n * d), dtype=complex)
    for x, (p, s) in enumerate(zip(ensemble.probs.probs, ensemble.states)):
        flag = np.zeros((n, n))
        flag[x, x] = 1.0
        m += p * tensor(flag, s.matrix)
    return DensityOperator(m, Shape([n, d], ["X", "Q"]))


def holevo_chi(ensemble: Ensemble) -> float:
    """chi = S(sum_x p_x rho_x) - sum_x p_x S(rho_x)."""
    if not isinstance(ensemble, Ensemble):
        raise ValidationError("holevo_chi expects an Ensemble")
    avg = von_neumann_entropy(ensemble.average)
    return avg - sum(p * von_neumann_entropy(s) for p, s in zip(ensemble.probs.probs, ensemble.states))
