"""Fourier representation of periodic fields on the d-torus.

Fields live on [0, 2*pi)^d and are stored as complex Fourier coefficients
c(k), |k_i| <= N, with the convention

    f(x) = sum_k c(k) exp(i k.x),   c(k) = (1/(2*pi)^d) \\int f exp(-i k.x) dx,

so c(-k) = conj(c(k)) for real fields.  Coefficient arrays use the compact
FFT layout [0..N, -N..-1] of length 2N+1 per spectral axis, with any tensor
component axes leading.  All operations are pure; fields are safe to share
across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi

CHECKPOINT_MAGIC = b"KVSF"
CHECKPOINT_VERSION = 1


class BlowUpError(RuntimeError):
    """Raised when a field evaluation or a trajectory leaves the finite range."""

    def __init__(self, message, t=None, location=None):
        super().__init__(message)
        self.t = t
        self.location = location


def compact_wavenumbers(n_modes):
    """Integer wavenumbers [0..N, -N..-1] matching the compact layout."""
    return np.concatenate([np.arange(0, n_modes + 1), np.arange(-n_modes, 0)])


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with a fixed spectral truncation.

    n_modes is the retained band N (|k_i| <= N per axis); n_points is the
    number of physical points M per axis used for pointwise (nonlinear)
    evaluation.  M >= 2N+1 keeps the band representable; a larger M provides
    dealiasing padding for products (M >= (q+1)N+1 makes degree-q nonlinear
    evaluation alias-free on the retained band).
    """

    dim: int
    n_modes: int
    n_points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.n_points < 2 * self.n_modes + 1:
            raise ValueError(
                f"n_points={self.n_points} cannot represent modes up to "
                f"N={self.n_modes} (need >= {2 * self.n_modes + 1})")

    @classmethod
    def for_degree(cls, dim, n_modes, degree=None):
        """Grid sized for alias-free evaluation of a degree-q nonlinearity.

        degree=None selects the 3/2-style padding used for non-polynomial
        stresses (exactness is then impossible; 3N+1 dealiases the quadratic
        part and keeps the rest spectrally small).
        """
        if degree is None:
            m_min = 3 * n_modes + 1
        else:
            m_min = (degree + 1) * n_modes + 1
        m_min = max(m_min, 2 * n_modes + 1)
        return cls(dim, n_modes, sfft.next_fast_len(m_min))

    @property
    def volume(self):
        return TWO_PI ** self.dim

    @property
    def spacing(self):
        return TWO_PI / self.n_points

    @property
    def spectral_shape(self):
        return (2 * self.n_modes + 1,) * self.dim

    def axis_points(self):
        return np.arange(self.n_points) * self.spacing

    def meshgrid(self):
        axes = [self.axis_points() for _ in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def wavenumber_axes(self):
        """Per-axis integer wavenumbers, shaped to broadcast over coeffs."""
        out = []
        k = compact_wavenumbers(self.n_modes).astype(float)
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = 2 * self.n_modes + 1
            out.append(k.reshape(shape))
        return out

    def k_squared(self):
        ks = self.wavenumber_axes()
        return sum(k ** 2 for k in ks)


@dataclass
class SpectralField:
    """A real periodic tensor field held as compact Fourier coefficients.

    comp_shape is () for scalars, (d,) for vectors, (d, d) for matrices;
    coeffs has shape comp_shape + (2N+1,)*dim.
    """

    grid: Grid
    comp_shape: tuple
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = self.comp_shape + self.grid.spectral_shape
        if self.coeffs.shape != expected:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} != expected {expected}")

    @property
    def spectral_axes(self):
        nc = len(self.comp_shape)
        return tuple(range(nc, nc + self.grid.dim))

    def copy(self):
        return SpectralField(self.grid, self.comp_shape, self.coeffs.copy())

    def __add__(self, other):
        _check_compatible(self, other)
        return SpectralField(self.grid, self.comp_shape, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_compatible(self, other)
        return SpectralField(self.grid, self.comp_shape, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.comp_shape, self.coeffs * scalar)

    __rmul__ = __mul__


def _check_compatible(a, b):
    if a.grid != b.grid or a.comp_shape != b.comp_shape:
        raise ValueError("fields live on different grids or component shapes")


def zero_field(grid, comp_shape=()):
    return SpectralField(grid, comp_shape,
                         np.zeros(comp_shape + grid.spectral_shape, dtype=complex))


def _compact_take(n_modes, n_points):
    return np.concatenate([np.arange(0, n_modes + 1),
                           np.arange(n_points - n_modes, n_points)])


def forward(grid, values):
    """Physical samples on the grid -> SpectralField (this is P^N o sampling).

    Real transforms carry the half-spectrum; the negative last-axis modes
    are reconstructed by conjugate mirroring, so the result is
    Hermitian-symmetric by construction.
    """
    dim = grid.dim
    n, m = grid.n_modes, grid.n_points
    if values.shape[-dim:] != (m,) * dim:
        raise ValueError(
            f"sample shape {values.shape[-dim:]} does not match grid "
            f"({m} points per axis)")
    comp_shape = values.shape[:-dim]
    half = sfft.rfftn(values, axes=tuple(range(-dim, 0))) / m ** dim
    out = np.empty(comp_shape + grid.spectral_shape, dtype=complex)
    if dim == 1:
        out[..., :n + 1] = half[..., :n + 1]
        out[..., n + 1:] = np.conj(half[..., 1:n + 1][..., ::-1])
    else:
        take1 = _compact_take(n, m)
        neg1 = (m - take1) % m
        out[..., :, :n + 1] = half[..., take1, :n + 1]
        out[..., :, n + 1:] = np.conj(half[..., neg1, 1:n + 1][..., ::-1])
    return SpectralField(grid, comp_shape, out)


def inverse(fld, n_points=None):
    """SpectralField -> real samples on n_points (default: the field's grid)."""
    grid = fld.grid
    m = grid.n_points if n_points is None else n_points
    n = grid.n_modes
    if m < 2 * n + 1:
        raise ValueError(f"{m} points cannot carry modes up to {n}")
    dim = grid.dim
    half_len = m // 2 + 1
    half = np.zeros(fld.comp_shape + (m,) * (dim - 1) + (half_len,),
                    dtype=complex)
    scale = float(m) ** dim
    if dim == 1:
        half[..., :n + 1] = fld.coeffs[..., :n + 1] * scale
    else:
        take1 = _compact_take(n, m)
        ix = (Ellipsis,) + np.ix_(take1, np.arange(n + 1))
        half[ix] = fld.coeffs[..., :, :n + 1] * scale
    vals = sfft.irfftn(half, s=(m,) * dim, axes=tuple(range(-dim, 0)))
    return np.ascontiguousarray(vals)


def hermitianize(fld):
    """Project onto Hermitian-symmetric coefficients (real physical field)."""
    c = fld.coeffs
    axes = fld.spectral_axes
    rev = np.flip(c, axis=axes)
    rev = np.roll(rev, shift=[1] * len(axes), axis=axes)
    fld.coeffs = 0.5 * (c + np.conj(rev))
    return fld


def hermitian_defect(fld):
    c = fld.coeffs
    axes = fld.spectral_axes
    rev = np.roll(np.flip(c, axis=axes), shift=[1] * len(axes), axis=axes)
    return float(np.max(np.abs(c - np.conj(rev))))


def gradient(fld):
    """Append a derivative axis: (grad f)_{...a} = d_a f_{...}."""
    grid = fld.grid
    ks = grid.wavenumber_axes()
    parts = [1j * k * fld.coeffs for k in ks]
    out = np.stack(parts, axis=len(fld.comp_shape))
    return SpectralField(grid, fld.comp_shape + (grid.dim,), out)


def divergence(fld):
    """Contract the last component axis against ik."""
    grid = fld.grid
    if not fld.comp_shape or fld.comp_shape[-1] != grid.dim:
        raise ValueError("divergence needs a trailing component axis of length d")
    ks = grid.wavenumber_axes()
    nc = len(fld.comp_shape)
    out = sum(1j * ks[a] * np.take(fld.coeffs, a, axis=nc - 1)
              for a in range(grid.dim))
    return SpectralField(grid, fld.comp_shape[:-1], out)


def laplacian(fld):
    return SpectralField(fld.grid, fld.comp_shape, -fld.grid.k_squared() * fld.coeffs)


def curl2d(fld):
    """Row-wise curl of a 2x2 matrix field: (curl F)_i = d_1 F_{i2} - d_2 F_{i1}."""
    grid = fld.grid
    if grid.dim != 2 or fld.comp_shape != (2, 2):
        raise ValueError("curl2d expects a 2x2 matrix field on a 2-d grid")
    k1, k2 = grid.wavenumber_axes()
    out = 1j * k1 * fld.coeffs[:, 1] - 1j * k2 * fld.coeffs[:, 0]
    return SpectralField(grid, (2,), out)


def project(fld, n_modes):
    """Truncate or zero-pad to a mode budget N (the projection P^N).

    The result lives on the minimal grid for that budget; regrid() moves it
    onto a padded grid when pointwise evaluation is needed.
    """
    grid = fld.grid
    new_grid = Grid(grid.dim, n_modes, 2 * n_modes + 1)
    if n_modes == grid.n_modes:
        return SpectralField(new_grid, fld.comp_shape, fld.coeffs.copy())
    new = zero_field(new_grid, fld.comp_shape)
    n_common = min(n_modes, grid.n_modes)
    src_take = _compact_take(n_common, 2 * grid.n_modes + 1)
    dst_take = _compact_take(n_common, 2 * n_modes + 1)
    src_ix = (Ellipsis,) + np.ix_(*([src_take] * grid.dim))
    dst_ix = (Ellipsis,) + np.ix_(*([dst_take] * grid.dim))
    new.coeffs[dst_ix] = fld.coeffs[src_ix]
    return new


def regrid(fld, grid):
    """Move a field onto another grid with the same dim and mode budget."""
    if grid.dim != fld.grid.dim or grid.n_modes != fld.grid.n_modes:
        raise ValueError("regrid cannot change dim or mode budget")
    return SpectralField(grid, fld.comp_shape, fld.coeffs.copy())


def pointwise_product(a, b):
    """Dealiased product: P^N(a*b) evaluated on the (padded) physical grid."""
    _check_grids(a, b)
    va = inverse(a)
    vb = inverse(b)
    return forward(a.grid, va * vb)


def _check_grids(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def nonlinear_stress(model, f_field):
    """P^N o S: evaluate the stress pointwise on the padded grid, project back.

    The field's grid must have been sized for the model's dealiasing needs
    (Grid.for_degree with the model's stress degree).
    """
    grid = f_field.grid
    d = grid.dim
    if f_field.comp_shape != (d, d):
        raise ValueError("stress evaluation expects a matrix field")
    if model.linear_factor is not None:
        out = SpectralField(grid, (d, d), model.linear_factor * f_field.coeffs)
        return out
    vals = inverse(f_field)
    # batch axes last for the constitutive call: (M..., d, d)
    vals = np.moveaxis(vals, (0, 1), (-2, -1))
    with np.errstate(over="ignore", invalid="ignore"):
        stress = model.s(vals)
    if not np.all(np.isfinite(stress)):
        bad = np.argwhere(~np.isfinite(stress))[0]
        raise BlowUpError(
            f"non-finite stress value at grid point index {tuple(bad[:d])}",
            location=tuple(int(i) for i in bad[:d]))
    stress = np.moveaxis(stress, (-2, -1), (0, 1))
    return forward(grid, np.ascontiguousarray(stress))


# ---------------------------------------------------------------------------
# norms and inner products

def l2_norm_sq(fld):
    """||f||^2_{L^2} by Parseval (all tensor components summed)."""
    return fld.grid.volume * float(np.sum(np.abs(fld.coeffs) ** 2))


def l2_norm(fld):
    return np.sqrt(l2_norm_sq(fld))


def sobolev_norm(fld, s):
    """Full H^s norm, weight (1+|k|^2)^s."""
    w = (1.0 + fld.grid.k_squared()) ** s
    return float(np.sqrt(fld.grid.volume * np.sum(w * np.abs(fld.coeffs) ** 2)))


def grad_l2_sq(fld):
    """\\int |grad f|^2 (the H^1 seminorm squared), via Parseval."""
    return fld.grid.volume * float(
        np.sum(fld.grid.k_squared() * np.abs(fld.coeffs) ** 2))


def lp_norm(fld, p, n_points=None):
    """L^p norm by equal-weight quadrature of the pointwise Frobenius magnitude."""
    grid = fld.grid
    m = grid.n_points if n_points is None else n_points
    vals = inverse(fld, m)
    nc = len(fld.comp_shape)
    mag2 = vals ** 2
    for _ in range(nc):
        mag2 = mag2.sum(axis=0)
    h = (TWO_PI / m) ** grid.dim
    return float((np.sum(mag2 ** (p / 2.0)) * h) ** (1.0 / p))


def inner(a, b):
    """L^2 inner product (real fields)."""
    _check_grids(a, b)
    return a.grid.volume * float(np.real(np.sum(a.coeffs * np.conj(b.coeffs))))


def integral(fld):
    """\\int f dx = volume * c(0), componentwise."""
    zero = (0,) * fld.grid.dim
    return np.real(fld.coeffs[(Ellipsis,) + zero]) * fld.grid.volume


# ---------------------------------------------------------------------------
# single-mode helpers (test and initial-data construction)

def mode_index(n_modes, k):
    k = np.atleast_1d(np.asarray(k, dtype=int))
    if np.any(np.abs(k) > n_modes):
        raise ValueError(f"mode {k} outside budget N={n_modes}")
    return tuple(int(ki) % (2 * n_modes + 1) for ki in k)


def set_mode(fld, k, value, comp=()):
    """Set c(k) and its Hermitian partner c(-k) = conj(value)."""
    n = fld.grid.n_modes
    k = np.atleast_1d(np.asarray(k, dtype=int))
    idx = (comp if isinstance(comp, tuple) else (comp,)) + mode_index(n, k)
    fld.coeffs[idx] = value
    if np.any(k != 0):
        jdx = (idx[:len(idx) - fld.grid.dim]) + mode_index(n, -k)
        fld.coeffs[jdx] = np.conj(value)
    return fld


def get_mode(fld, k, comp=()):
    idx = (comp if isinstance(comp, tuple) else (comp,)) + \
        mode_index(fld.grid.n_modes, np.atleast_1d(np.asarray(k, dtype=int)))
    return fld.coeffs[idx]


# ---------------------------------------------------------------------------
# checkpoint format: header {magic "KVSF", version u32, d u32, N u32,
# rank u32, time f64, little-endian}, then (re, im) f64 pairs for every
# component (row-major) of every wavenumber in lexicographic k order over
# [-N..N]^d.

def _lex_wavenumbers(dim, n_modes):
    rng = np.arange(-n_modes, n_modes + 1)
    if dim == 1:
        return [(int(k),) for k in rng]
    return [(int(k1), int(k2)) for k1 in rng for k2 in rng]


def write_field(path, fld, t=0.0):
    grid = fld.grid
    rank = len(fld.comp_shape)
    header = struct.pack("<4sIIIId", CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                         grid.dim, grid.n_modes, rank, float(t))
    ncomp = int(np.prod(fld.comp_shape, dtype=int)) if rank else 1
    flat = fld.coeffs.reshape((ncomp,) + grid.spectral_shape)
    rows = []
    for k in _lex_wavenumbers(grid.dim, grid.n_modes):
        idx = mode_index(grid.n_modes, k)
        rows.append(flat[(slice(None),) + idx])
    data = np.stack(rows)  # (n_k, ncomp) complex
    out = np.empty(data.shape + (2,), dtype="<f8")
    out[..., 0] = data.real
    out[..., 1] = data.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(out.tobytes())


def read_field(path, n_points=None):
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sIIIId"))
        magic, version, dim, n_modes, rank, t = struct.unpack("<4sIIIId", header)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a KVSF checkpoint")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        raw = np.frombuffer(fh.read(), dtype="<f8")
    comp_shape = (dim,) * rank
    ncomp = dim ** rank
    n_k = (2 * n_modes + 1) ** dim
    raw = raw.reshape(n_k, ncomp, 2)
    data = raw[..., 0] + 1j * raw[..., 1]
    m = n_points if n_points is not None else 2 * n_modes + 1
    grid = Grid(dim, n_modes, m)
    fld = zero_field(grid, comp_shape)
    flat = fld.coeffs.reshape((ncomp,) + grid.spectral_shape)
    for row, k in enumerate(_lex_wavenumbers(dim, n_modes)):
        idx = mode_index(n_modes, k)
        flat[(slice(None),) + idx] = data[row]
    return fld, float(t)
