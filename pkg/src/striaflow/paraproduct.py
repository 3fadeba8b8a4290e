"""Paraproduct splitting of pointwise products, and derivations along vector fields.

The product of two fields splits into two paraproducts plus a remainder:

    u v = T_u v + T_v u + R(u, v),
    T_u v   = sum_{j >= 1} (S_{j-1} u) (Delta_j v),
    R(u, v) = sum_{|k - j| <= 1} (Delta_j u) (Delta_k v),

where S and Delta come from one dyadic ladder and every physical-space
product is de-aliased. Because the band masks sum to one on the grid, the
three pieces reassemble the de-aliased product to machine precision; the
splitting is exact bookkeeping, not an approximation.

Physical block values are accumulated once per operand and each aggregate
is transformed back a single time, so a full Bony split costs
O(j_max) inverse transforms plus three forward transforms.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .dyadic import DyadicLadder
from .grid import SpectralField, VectorField, derivative, pointwise_product

__all__ = [
    "paraproduct",
    "remainder",
    "paravector",
    "derive_along",
    "div_along",
]


def _block_values(ladder: DyadicLadder, u: SpectralField):
    """Physical samples of every band of u, in block order -1..j_max."""
    return [
        np.asarray(SpectralField(u.grid, u.coeffs * ladder.mask(j), real=u.real).values())
        for j in ladder.blocks()
    ]


def _spectral_of(grid, phys: np.ndarray, real: bool) -> SpectralField:
    coeffs = sfft.fft2(phys) / (grid.n * grid.n)
    return SpectralField(grid, np.where(grid.dealias_mask, coeffs, 0.0), real=real)


def _check_grids(ladder: DyadicLadder, *fields):
    for f in fields:
        if f.grid != ladder.grid:
            raise ValueError("all operands must share the ladder's grid")


def paraproduct(ladder: DyadicLadder, u: SpectralField, v: SpectralField) -> SpectralField:
    """Low-high part T_u v; the sum runs over bands j >= 1 of v."""
    _check_grids(ladder, u, v)
    ub = _block_values(ladder, u)
    vb = _block_values(ladder, v)
    acc = np.zeros((ladder.grid.n, ladder.grid.n), dtype=np.float64)
    # cut[j-1] = S_{j-1} u accumulated in physical space: blocks -1 .. j-2.
    cut = ub[0].copy()
    for j in range(1, ladder.j_max + 1):
        # entering iteration j, cut holds blocks -1..j-2
        acc += cut * vb[j + 1]
        cut += ub[j]
    return _spectral_of(ladder.grid, acc, u.real and v.real)


def remainder(ladder: DyadicLadder, u: SpectralField, v: SpectralField) -> SpectralField:
    """Diagonal part R(u, v): block pairs no more than one band apart."""
    _check_grids(ladder, u, v)
    ub = _block_values(ladder, u)
    vb = _block_values(ladder, v)
    acc = np.zeros((ladder.grid.n, ladder.grid.n), dtype=np.float64)
    top = ladder.j_max + 1
    for j in range(len(ub)):
        for k in range(max(0, j - 1), min(top, j + 1) + 1):
            acc += ub[j] * vb[k]
    return _spectral_of(ladder.grid, acc, u.real and v.real)


def paravector(ladder: DyadicLadder, x: VectorField, u: SpectralField) -> SpectralField:
    """Paradifferential derivation T_X u = sum_i T_{X^i} (d_i u)."""
    _check_grids(ladder, x[0], x[1], u)
    out = paraproduct(ladder, x[0], derivative(u, 0))
    second = paraproduct(ladder, x[1], derivative(u, 1))
    return SpectralField(u.grid, out.coeffs + second.coeffs, real=out.real and second.real)


def derive_along(f: SpectralField, x: VectorField) -> SpectralField:
    """Full derivation d_X f = sum_i X^i d_i f (de-aliased products)."""
    p0 = pointwise_product(x[0], derivative(f, 0))
    p1 = pointwise_product(x[1], derivative(f, 1))
    return SpectralField(f.grid, p0.coeffs + p1.coeffs, real=p0.real and p1.real)


def div_along(f: SpectralField, x: VectorField) -> SpectralField:
    """Divergence form div(f X) = sum_i d_i (f X^i).

    Satisfies div_along(f, X) - derive_along(f, X) = f * div(X) up to
    machine precision (Leibniz in the de-aliased band).
    """
    d0 = derivative(pointwise_product(f, x[0]), 0)
    d1 = derivative(pointwise_product(f, x[1]), 1)
    return SpectralField(f.grid, d0.coeffs + d1.coeffs, real=d0.real and d1.real)
