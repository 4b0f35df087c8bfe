"""Brute-force reference for free-field expectations in a truncated Fock space.

The distinct packets of a monomial span a finite-dimensional one-particle
space with Gram matrix ``G[a, b] = contraction(p_a, p_b)``.  Factoring
``G = L L^dagger`` gives annihilators ``a(p_a) = sum_q L[a, q] b_q`` in terms
of orthonormal modes ``b_q``, and each field factor becomes the explicit
matrix ``a + a^dagger`` on a product of truncated oscillator spaces.  With
at least ``n + 1`` levels per mode no product of ``n`` factors reaches the
truncation, so the vacuum matrix element is exact.

This shares nothing with the Wick enumeration except the pairing values.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .wick import FieldMonomial, PolynomialState, contraction

__all__ = ["ladder_operators", "fock_state_expectation", "fock_vacuum_expectation"]


def _lowering(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels)), k=1)


def ladder_operators(modes: int, levels: int) -> list:
    """Annihilation matrices ``b_q`` on ``modes`` oscillators with ``levels`` states each."""
    eye = np.eye(levels)
    low = _lowering(levels)
    ops = []
    for q in range(modes):
        factors = [low if p == q else eye for p in range(modes)]
        ops.append(reduce(np.kron, factors))
    return ops


def _field_matrices(packets, m, levels):
    gram = np.array([[contraction(p, q, m) for q in packets] for p in packets], dtype=complex)
    vals, vecs = np.linalg.eigh(gram)
    vals = np.clip(vals, 0.0, None)
    L = vecs * np.sqrt(vals)
    b = ladder_operators(len(packets), levels)
    fields = []
    for a in range(len(packets)):
        ann = sum(L[a, q] * b[q] for q in range(len(packets)))
        fields.append(ann + ann.conj().T)
    return fields


def fock_vacuum_expectation(mono: FieldMonomial, m: float, levels: int | None = None) -> complex:
    """``<0|f_1 ... f_n|0>`` by explicit matrix products."""
    factors = list(mono)
    if not factors:
        return 1.0 + 0.0j
    packets = list(dict.fromkeys(factors))
    if len(packets) > 3:
        raise ValueError("the brute-force reference handles at most three distinct packets")
    levels = len(factors) + 1 if levels is None else levels
    fields = _field_matrices(packets, m, levels)
    slot = {p: i for i, p in enumerate(packets)}
    dim = levels ** len(packets)
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0
    for f in reversed(factors):
        vec = fields[slot[f]] @ vec
    return complex(vec[0])


def fock_state_expectation(state: PolynomialState, A: FieldMonomial) -> complex:
    C = state.creator
    num = fock_vacuum_expectation(C.adjoint() + A + C, state.m)
    den = fock_vacuum_expectation(C.adjoint() + C, state.m)
    return num / den
