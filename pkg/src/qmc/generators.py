"""Seeded random states, channels and test families.

Every generator takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .channels import QuantumChannel
from .entropy import Ensemble
from .linops import DensityOperator, Shape


def ginibre_matrix(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def ginibre_state(rng: np.random.Generator, dims: Sequence[int], labels=None,
                  rank: int | None = None) -> DensityOperator:
    """``G G^dag / Tr(G G^dag)`` with complex standard-normal ``G``."""
    d = int(np.prod(dims))
    g = ginibre_matrix(rng, d, rank or d)
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real, Shape(dims, labels))


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre_matrix(rng, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(rng: np.random.Generator, d_in: int, d_out: int | None = None,
                   n_kraus: int = 2) -> QuantumChannel:
    """Kraus operators cut from a random isometry ``C^d_in -> C^d_out (x) C^n``."""
    d_out = d_in if d_out is None else d_out
    if d_out * n_kraus < d_in:
        raise ValueError(f"{n_kraus} Kraus operators into dimension {d_out} cannot be trace preserving "
                         f"on dimension {d_in}")
    iso = np.linalg.qr(ginibre_matrix(rng, d_out * n_kraus, d_in))[0]
    kraus = iso.reshape(d_out, n_kraus, d_in).transpose(1, 0, 2)
    return QuantumChannel(list(kraus), d_in, d_out)


def random_distribution(rng: np.random.Generator, shape) -> np.ndarray:
    p = rng.dirichlet(np.ones(int(np.prod(shape))))
    return p.reshape(shape)


def classical_chain(rng: np.random.Generator, dims: Sequence[int]) -> np.ndarray:
    """Joint P(a) P(b|a) P(c|b) on ``dims = (dA, dB, dC)``."""
    da, db, dc = dims
    p_a = rng.dirichlet(np.ones(da))
    p_b_a = rng.dirichlet(np.ones(db), size=da)
    p_c_b = rng.dirichlet(np.ones(dc), size=db)
    return p_a[:, None, None] * p_b_a[:, :, None] * p_c_b[None, :, :]


def ghz_state(d: int = 2, parties: int = 3, labels=None) -> DensityOperator:
    """``sum_k |k...k> / sqrt(d)``."""
    dims = [d] * parties
    v = np.zeros(d ** parties, dtype=complex)
    for k in range(d):
        v[sum(k * d ** i for i in range(parties))] = 1.0
    v /= np.sqrt(d)
    return DensityOperator(np.outer(v, v.conj()), Shape(dims, labels))


def product_state(rng: np.random.Generator, dims: Sequence[int]) -> DensityOperator:
    out = None
    for d, lab in zip(dims, "ABCDEFGH"):
        s = ginibre_state(rng, [d], [lab])
        out = s if out is None else out @ s
    return out


def planted_markov_state(rng: np.random.Generator, d_a: int, d_c: int,
                         blocks: Sequence[tuple], q: Sequence[float],
                         rotate: bool = True) -> tuple:
    """``(+)_j q_j rho_{A bL_j} (x) rho_{bR_j C}`` with B rotated by a Haar unitary.

    Returns ``(state, planted)`` where ``planted`` records the block basis and
    factors used to build the state.
    """
    q = np.asarray(q, dtype=float)
    if len(q) != len(blocks) or abs(q.sum() - 1) > 1e-12 or np.any(q < 0):
        raise ValueError("q must be a probability vector with one entry per block")
    d_b = sum(dl * dr for dl, dr in blocks)
    w = haar_unitary(rng, d_b) if rotate else np.eye(d_b, dtype=complex)
    total = np.zeros((d_a * d_b * d_c,) * 2, dtype=complex)
    factors = []
    offset = 0
    for (dl, dr), qj in zip(blocks, q):
        left = ginibre_state(rng, [d_a, dl]).matrix
        right = ginibre_state(rng, [dr, d_c]).matrix
        embed = np.kron(np.kron(np.eye(d_a), w[:, offset:offset + dl * dr]), np.eye(d_c))
        total += qj * embed @ np.kron(left, right) @ embed.conj().T
        factors.append((left, right))
        offset += dl * dr
    state = DensityOperator(total, Shape([d_a, d_b, d_c], ["A", "B", "C"]))
    return state, {"blocks": list(blocks), "q": q, "basis": w, "factors": factors}


def perturbed_state(rng: np.random.Generator, state: DensityOperator, eps: float) -> DensityOperator:
    """``(1 - eps) rho + eps G G^dag / Tr(G G^dag)``."""
    noise = ginibre_state(rng, state.dims, state.labels)
    return DensityOperator((1 - eps) * state.matrix + eps * noise.matrix, state.shape)


def commuting_ensemble(rng: np.random.Generator, d: int, n: int) -> tuple:
    """``n`` states diagonal in one Haar-random basis; returns (ensemble, basis)."""
    u = haar_unitary(rng, d)
    states = []
    for _ in range(n):
        weights = rng.dirichlet(np.ones(d))
        states.append(DensityOperator((u * weights) @ u.conj().T))
    return Ensemble(rng.dirichlet(np.ones(n)), states), u


def random_ensemble(rng: np.random.Generator, d: int, n: int) -> Ensemble:
    return Ensemble(rng.dirichlet(np.ones(n)), [ginibre_state(rng, [d]) for _ in range(n)])


def planted_block_family(rng: np.random.Generator, blocks: Sequence[tuple], n_states: int) -> dict:
    """States ``(+)_j q_{j|k} rho_{j|k} (x) omega_j`` sharing ``omega_j``, in a rotated basis."""
    d = sum(dl * dr for dl, dr in blocks)
    w = haar_unitary(rng, d)
    omegas = [ginibre_state(rng, [dr]).matrix for _, dr in blocks]
    states, weights, lefts = [], [], []
    for _ in range(n_states):
        qk = rng.dirichlet(np.ones(len(blocks)))
        m = np.zeros((d, d), dtype=complex)
        offset = 0
        lk = []
        for (dl, dr), qj, om in zip(blocks, qk, omegas):
            left = ginibre_state(rng, [dl]).matrix
            c = w[:, offset:offset + dl * dr]
            m += qj * c @ np.kron(left, om) @ c.conj().T
            lk.append(left)
            offset += dl * dr
        states.append(DensityOperator(m))
        weights.append(qk)
        lefts.append(lk)
    return {"states": states, "basis": w, "omega": omegas, "q": weights, "left": lefts,
            "blocks": list(blocks)}


def random_blocks(rng: np.random.Generator, max_dim: int, max_blocks: int = 3) -> list:
    """Random ``[(dL, dR), ...]`` with ``sum dL*dR <= max_dim``."""
    blocks, used = [], 0
    for _ in range(int(rng.integers(1, max_blocks + 1))):
        options = [(a, b) for a in range(1, 4) for b in range(1, 4) if used + a * b <= max_dim]
        if not options:
            break
        a, b = options[int(rng.integers(len(options)))]
        blocks.append((a, b))
        used += a * b
    return blocks


def planted_structure(rng: np.random.Generator, blocks: Sequence[tuple]):
    """Block structure for ``blocks`` realized in a Haar-random basis."""
    from .algebra import BlockStructure

    d = sum(dl * dr for dl, dr in blocks)
    return BlockStructure(tuple(tuple(b) for b in blocks), haar_unitary(rng, d))


def planted_algebra(structure):
    """``W ((+)_j M_dL (x) I_dR) W^dag`` spanned by its matrix units."""
    from .algebra import OperatorAlgebra

    mats = []
    for j, (dl, dr) in enumerate(structure.blocks):
        c = structure.columns(j)
        for a in range(dl):
            for b in range(dl):
                e = np.zeros((dl, dl))
                e[a, b] = 1.0
                mats.append(c @ np.kron(e, np.eye(dr)) @ c.conj().T)
    return OperatorAlgebra.spanned_by(mats)


def contractive_channel(rng: np.random.Generator, d: int, r: float, n_kraus: int = 2) -> QuantumChannel:
    """``(1 - r) * replace(omega) + r * G`` with Ginibre ``omega`` and random ``G``.

    All eigenvalues except the fixed one have modulus at most ``r``.
    """
    omega = ginibre_state(rng, [d]).matrix
    vals, vecs = np.linalg.eigh(omega)
    kraus = []
    for i in range(d):
        for k in range(d):
            kraus.append(np.sqrt((1 - r) * max(vals[k], 0.0)) * np.outer(vecs[:, k], np.eye(d)[i]))
    kraus += [np.sqrt(r) * k for k in random_channel(rng, d, d, n_kraus).kraus]
    return QuantumChannel(kraus, d, d)
