"""Exact linear algebra over the rationals for small integer matrices."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]


def to_fractions(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def rref(rows: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns (zero rows dropped)."""
    R = to_fractions(rows)
    if not R:
        return [], []
    ncols = len(R[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(R)) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [x * inv for x in R[r]]
        for i in range(len(R)):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [x - f * y for x, y in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == len(R):
            break
    return R[:r], pivots


def nullspace(rows: Sequence[Sequence], ncols: int | None = None) -> Matrix:
    """Basis of {x : rows @ x = 0}, returned in reduced row echelon form.

    Returning the RREF of the kernel (rather than the raw free-variable basis)
    makes the basis canonical: it depends only on the subspace.
    """
    if ncols is None:
        ncols = len(rows[0])
    R, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[f]
        basis.append(v)
    if not basis:
        return []
    canon, _ = rref(basis)
    return canon


def rank(rows: Sequence[Sequence]) -> int:
    """Rank by fraction-free (Bareiss) elimination on integer or rational input."""
    if not rows or not rows[0]:
        return 0
    rows = [list(r) for r in rows]
    if any(isinstance(x, Fraction) and x.denominator != 1 for r in rows for x in r):
        return len(rref(rows)[1])
    M = [[int(x) for x in r] for r in rows]
    nr, nc = len(M), len(M[0])
    prev = 1
    rk = 0
    for c in range(nc):
        p = next((i for i in range(rk, nr) if M[i][c] != 0), None)
        if p is None:
            continue
        M[rk], M[p] = M[p], M[rk]
        piv = M[rk][c]
        # every remaining row is rescaled, even those with a zero in column c
        for i in range(rk + 1, nr):
            M[i] = [(piv * M[i][k] - M[i][c] * M[rk][k]) // prev for k in range(nc)]
        prev = piv
        rk += 1
        if rk == nr:
            break
    return rk


def integer_scaled(v: Sequence[Fraction]) -> list[int]:
    """Smallest integer multiple of ``v`` with the same direction."""
    from math import gcd, lcm

    den = 1
    for x in v:
        den = lcm(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    return [x // g for x in ints] if g else ints
