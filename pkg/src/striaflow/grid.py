"""Periodic grid, spectral fields, and the core transform toolbox.

Fields live on the 2-D torus [0, length)^2 sampled on an n-by-n uniform
grid (n a power of two, >= 16). Spectral coefficients follow the true
Fourier-series normalization

    f(x) = sum_xi  coeff(xi) * exp(i * (2*pi/length) * xi . x),

so ``coeff((0, 0))`` is the grid mean and Parseval reads
``mean |f|^2 = sum |coeff|^2``. Coefficient arrays are indexed in FFT
order; the integer frequency along each axis runs over
{-n/2+1, ..., n/2}.

The Nyquist frequency (the slot labeled n/2) is its own conjugate
partner, so a real field forces that coefficient to be real. Multiplying
it by i*xi would break Hermitian symmetry, and the sampled derivative of
that mode vanishes at every grid point; ``derivative`` therefore projects
the Nyquist row/column to zero. De-aliasing removes it anyway.

Quadratic nonlinearities use the 2/3 rule: ``dealias`` zeroes every
coefficient with any |xi_axis| > n/3. For power-of-two n the kept band is
|xi| <= floor(n/3), and products of two kept modes alias only onto modes
that the rule removes, so band-limited products are alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "SpectralField",
    "VectorField",
    "to_spectral",
    "to_physical",
    "derivative",
    "inv_neg_laplacian",
    "dealias",
    "pointwise_product",
    "field_from_values",
    "constant_field",
    "check_hermitian",
]

#: Imaginary residue allowed when collapsing a real-flagged field to values.
REALITY_TOL = 1e-13


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, length)^2.

    Parameters
    ----------
    n : int
        Points per axis; power of two, at least 16.
    length : float
        Periodic box side, default 2*pi.
    """

    n: int
    length: float = 2.0 * np.pi

    # Derived arrays, filled in __post_init__ (frozen dataclass idiom).
    freq_x: np.ndarray = field(init=False, repr=False, compare=False)
    freq_y: np.ndarray = field(init=False, repr=False, compare=False)
    wavenumber_sq: np.ndarray = field(init=False, repr=False, compare=False)
    inv_wavenumber_sq: np.ndarray = field(init=False, repr=False, compare=False)
    deriv_mult: tuple = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)
    freq_radius: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if not (self.length > 0.0):
            raise ValueError(f"box length must be positive, got {self.length}")

        # Integer frequencies in FFT order; Nyquist slot labeled +n/2.
        f = np.fft.fftfreq(n, d=1.0 / n)
        f[n // 2] = n // 2
        fx = f[:, None]
        fy = f[None, :]
        scale = 2.0 * np.pi / self.length

        ksq = (scale * fx) ** 2 + (scale * fy) ** 2
        inv = np.zeros_like(ksq)
        inv[ksq > 0] = 1.0 / ksq[ksq > 0]

        # Derivative multipliers with the Nyquist mode projected out.
        dx = 1j * scale * fx.copy()
        dy = 1j * scale * fy.copy()
        dx[n // 2, 0] = 0.0
        dy[0, n // 2] = 0.0

        cutoff = n / 3.0
        mask = (np.abs(fx) <= cutoff) & (np.abs(fy) <= cutoff)

        object.__setattr__(self, "freq_x", _ro(fx))
        object.__setattr__(self, "freq_y", _ro(fy))
        object.__setattr__(self, "wavenumber_sq", _ro(ksq))
        object.__setattr__(self, "inv_wavenumber_sq", _ro(inv))
        object.__setattr__(self, "deriv_mult", (_ro(dx), _ro(dy)))
        object.__setattr__(self, "dealias_mask", _ro(mask))
        object.__setattr__(self, "freq_radius", _ro(np.hypot(fx, fy)))

    @property
    def spacing(self) -> float:
        return self.length / self.n

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def meshgrid(self):
        """Physical coordinate arrays (x, y), indexed [i, j] -> (x_i, y_j)."""
        c = self.axis_coords()
        return np.meshgrid(c, c, indexing="ij")

    def __eq__(self, other):
        return (
            isinstance(other, GridSpec)
            and self.n == other.n
            and self.length == other.length
        )

    def __hash__(self):
        return hash((self.n, self.length))


def _ro(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class SpectralField:
    """Immutable scalar field held as Fourier coefficients.

    ``real`` asserts Hermitian symmetry (coeff(-xi) == conj(coeff(xi)));
    it is enforced when values are materialized, where the imaginary
    residue must stay below REALITY_TOL relative to the field scale.
    """

    __slots__ = ("grid", "coeffs", "real", "_values")

    def __init__(self, grid: GridSpec, coeffs: np.ndarray, real: bool = True):
        if coeffs.shape != (grid.n, grid.n):
            raise ValueError(
                f"coefficient array shape {coeffs.shape} does not match grid n={grid.n}"
            )
        # The constructor adopts the array and marks it read-only; callers
        # keeping a live reference must pass a copy.
        c = np.ascontiguousarray(coeffs, dtype=np.complex128)
        self.grid = grid
        self.coeffs = _ro(c)
        self.real = bool(real)
        self._values = None

    def values(self) -> np.ndarray:
        """Physical samples (cached). Real array when the real flag is set."""
        if self._values is None:
            n = self.grid.n
            z = sfft.ifft2(self.coeffs) * (n * n)
            if self.real:
                scale = max(1.0, float(np.max(np.abs(z.real))))
                resid = float(np.max(np.abs(z.imag)))
                if resid > REALITY_TOL * scale:
                    raise ValueError(
                        "field flagged real but inverse transform has imaginary "
                        f"residue {resid:.3e} (Hermitian symmetry violated)"
                    )
                self._values = _ro(np.ascontiguousarray(z.real))
            else:
                self._values = _ro(z)
        return self._values

    def mean(self) -> float | complex:
        c0 = self.coeffs[0, 0]
        return c0.real if self.real else c0

    def is_dealiased(self, tol: float = 0.0) -> bool:
        dropped = self.coeffs[~self.grid.dealias_mask]
        return bool(np.all(np.abs(dropped) <= tol))

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, real={self.real})"


class VectorField:
    """Pair of scalar fields sharing one grid, treated as one vector field."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(components)
        if len(comps) != 2:
            raise ValueError("vector fields here are 2-D (two components)")
        if comps[0].grid != comps[1].grid:
            raise ValueError("vector components must share a grid")
        self.components = comps

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    def __getitem__(self, i: int) -> SpectralField:
        return self.components[i]

    def divergence(self) -> SpectralField:
        return add(derivative(self.components[0], 0), derivative(self.components[1], 1))

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude on the grid."""
        return np.hypot(self.components[0].values(), self.components[1].values())

    def max_norm(self) -> float:
        return float(np.max(self.magnitude()))


def to_spectral(grid: GridSpec, values: np.ndarray) -> SpectralField:
    """Forward transform of physical samples into Fourier-series coefficients."""
    if values.shape != (grid.n, grid.n):
        raise ValueError(
            f"sample array shape {values.shape} does not match grid n={grid.n}"
        )
    real = not np.iscomplexobj(values)
    coeffs = sfft.fft2(values) / (grid.n * grid.n)
    out = SpectralField(grid, coeffs, real=real)
    if real:
        out._values = _ro(np.ascontiguousarray(values, dtype=np.float64).copy())
    return out


def to_physical(f: SpectralField) -> np.ndarray:
    return f.values()


def field_from_values(grid: GridSpec, values: np.ndarray) -> SpectralField:
    return to_spectral(grid, np.asarray(values, dtype=np.float64))


def constant_field(grid: GridSpec, value: float) -> SpectralField:
    c = np.zeros((grid.n, grid.n), dtype=np.complex128)
    c[0, 0] = value
    return SpectralField(grid, c, real=True)


def derivative(f: SpectralField, axis: int) -> SpectralField:
    """Spectral partial derivative along axis 0 (x) or 1 (y)."""
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    return SpectralField(f.grid, f.coeffs * f.grid.deriv_mult[axis], real=f.real)


def inv_neg_laplacian(f: SpectralField) -> SpectralField:
    """Unique mean-zero solution of -Lap(out) = f (mean of f is discarded)."""
    return SpectralField(f.grid, f.coeffs * f.grid.inv_wavenumber_sq, real=f.real)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0), real=f.real)


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Physical-space product, transformed back and de-aliased (2/3 rule)."""
    if f.grid != g.grid:
        raise ValueError("pointwise product requires a shared grid")
    prod = f.values() * g.values()
    n = f.grid.n
    coeffs = sfft.fft2(prod) / (n * n)
    return SpectralField(
        f.grid,
        np.where(f.grid.dealias_mask, coeffs, 0.0),
        real=f.real and g.real,
    )


def add(f: SpectralField, g: SpectralField, alpha: float = 1.0) -> SpectralField:
    """f + alpha*g on a shared grid."""
    if f.grid != g.grid:
        raise ValueError("field addition requires a shared grid")
    return SpectralField(f.grid, f.coeffs + alpha * g.coeffs, real=f.real and g.real)


def scale(f: SpectralField, alpha: float) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * alpha, real=f.real and not np.iscomplexobj(alpha))


def zero_mean(f: SpectralField) -> SpectralField:
    c = f.coeffs.copy()
    c[0, 0] = 0.0
    return SpectralField(f.grid, c, real=f.real)


def check_hermitian(f: SpectralField, tol: float = 1e-12) -> bool:
    """Explicit Hermitian-symmetry test: coeff(-xi) == conj(coeff(xi))."""
    c = f.coeffs
    n = f.grid.n
    idx = (-np.arange(n)) % n
    mirrored = c[np.ix_(idx, idx)]
    scale_ = max(1.0, float(np.max(np.abs(c))))
    return float(np.max(np.abs(mirrored - np.conj(c)))) <= tol * scale_
