"""Laguerre-series Fourier data V(xi, eta) and convolution kernels on grids.

For a multiplier H the Fourier transform of the kernel of H(L, U) is

    V(xi, eta) = sum_n m_H(n, |P0 xi|^2, eta) prod_j ell_{n_j}^{(r_j-1)}(|P_j xi|^2 / b_j),
    m_H(n, mu, eta) = H(sum_j (2 n_j + r_j) b_j + mu, eta),

and the kernel itself is 2^{|r|} (2 pi)^{-dim G} times the inverse Fourier
transform of V.  `synthesize_kernel` samples that transform on a centred
lattice with an FFT.
"""
from __future__ import annotations

import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClusterAmbiguous, GridTooCoarse, NumericalError, SingularEta, ValidationError
from .group import StratifiedGroup, j_matrix
from .laguerre import ell_series
from .multipliers import Multiplier
from .spectral import SpectralData, batch_regular, decompose, generic_profile

log = logging.getLogger(__name__)

NKG1_MAGIC = b"NKG1"
SKIP_LIMIT = 0.01


@dataclass(frozen=True)
class TruncationSpec:
    """Where to cut the n-box.

    ``Lambda`` defaults to the multiplier's support bound.  ``pad`` enlarges
    the box on every axis (useful to confirm that truncation is exact).
    """

    Lambda: float | None = None
    pad: int = 0
    mu_nodes: int = 64
    max_terms: int = 20_000_000

    def bound(self, H: Multiplier) -> float:
        return float(H.support_bound if self.Lambda is None else self.Lambda)

    def to_spec(self) -> dict:
        return {"Lambda": self.Lambda, "pad": self.pad, "mu_nodes": self.mu_nodes}


def n_box(sd: SpectralData, Lam: float, pad: int = 0) -> tuple:
    """Upper indices N_j = floor((Lam/b_j - r_j)/2) (+ pad); -1 marks an empty axis."""
    out = []
    for bj, rj in zip(sd.b, sd.r):
        nj = int(np.floor((Lam / bj - rj) / 2.0))
        out.append(max(nj, -1) + pad if nj >= 0 else (pad - 1 if pad > 0 else -1))
    return tuple(out)


def spectral_points(sd: SpectralData, box) -> np.ndarray:
    """Tensor of sum_j (2 n_j + r_j) b_j over the n-box."""
    lam = np.zeros(tuple(n + 1 for n in box))
    for j, (bj, rj, nj) in enumerate(zip(sd.b, sd.r, box)):
        shape = [1] * len(box)
        shape[j] = nj + 1
        lam = lam + ((2.0 * np.arange(nj + 1) + rj) * bj).reshape(shape)
    return lam


def reparametrize(H: Multiplier, sd: SpectralData):
    """Return m_H(n, mu, eta) = H(sum_j (2 n_j + r_j) b_j + mu, eta)."""

    def m(n, mu, eta):
        n = np.atleast_1d(n)
        if len(n) != sd.done:
            raise ValidationError(f"n must have {sd.done} entries")
        lam = float(np.sum((2.0 * n + np.asarray(sd.r)) * sd.b)) + mu
        return H.H(np.asarray(lam), eta)[()]

    return m


def _binom_weights(sd: SpectralData, box) -> np.ndarray:
    """prod_j b_j^{r_j} binom(n_j + r_j - 1, n_j) over the box."""
    from scipy.special import comb

    w = np.ones(tuple(n + 1 for n in box))
    for j, (bj, rj, nj) in enumerate(zip(sd.b, sd.r, box)):
        shape = [1] * len(box)
        shape[j] = nj + 1
        w = w * (bj**rj * comb(np.arange(nj + 1) + rj - 1, np.arange(nj + 1), exact=False)).reshape(shape)
    return w


def _check_box(box, trunc):
    size = int(np.prod([n + 1 for n in box])) if box else 0
    if size > trunc.max_terms:
        raise NumericalError(f"n-box of {size} terms exceeds max_terms={trunc.max_terms}")
    return size


def _projection_norms(sd: SpectralData, xi):
    taus = [np.einsum("si,ij,sj->s", xi, Pj, xi) for Pj in sd.P]
    mu = np.einsum("si,ij,sj->s", xi, sd.P0, xi) if sd.r0 else None
    return taus, mu


def eval_V_sd(H: Multiplier, sd: SpectralData, eta, xi, trunc: TruncationSpec | None = None,
              chunk: int = 1 << 16) -> np.ndarray:
    """V at points ``xi`` (shape (S, d1)) for precomputed spectral data at eta."""
    trunc = trunc or TruncationSpec()
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    S = xi.shape[0]
    dtype = float if H.is_real else complex
    if H.is_zero:
        return np.zeros(S, dtype=dtype)
    Lam = trunc.bound(H)
    box = n_box(sd, Lam, trunc.pad)
    if any(n < 0 for n in box):
        return np.zeros(S, dtype=dtype)
    _check_box(box, trunc)
    lam = spectral_points(sd, box)
    ks = [rj - 1 for rj in sd.r]
    norms, mu = _projection_norms(sd, xi)
    ts = [norms[j] / sd.b[j] for j in range(sd.done)]
    if not sd.r0:
        C = H.H(lam, eta)
        return ell_series(C, ks, ts).astype(dtype, copy=False)
    out = np.empty(S, dtype=dtype)
    for s0 in range(0, S, chunk):
        sl = slice(s0, min(S, s0 + chunk))
        C = H.H(lam[None] + mu[sl].reshape((-1,) + (1,) * sd.done), eta)
        out[sl] = ell_series(C, ks, [t[sl] for t in ts], per_sample=True)
    return out


def eval_V(H: Multiplier, G: StratifiedGroup, eta, xi, trunc: TruncationSpec | None = None) -> np.ndarray:
    """V(xi, eta) at points ``xi`` (shape (S, d1) or (d1,))."""
    try:
        sd = decompose(G, eta)
    except ClusterAmbiguous as exc:
        raise SingularEta(str(exc)) from exc
    xi_arr = np.asarray(xi, dtype=float)
    out = eval_V_sd(H, sd, eta, xi_arr.reshape(-1, G.d1), trunc)
    return out if xi_arr.ndim > 1 else out[0]


def eval_K_tilde(H: Multiplier, sd: SpectralData, eta, x, trunc: TruncationSpec | None = None) -> np.ndarray:
    """Partial Fourier transform of the kernel in u, at (x, eta), for r0 = 0.

    Each Laguerre function of |P_j xi|^2/b_j on a 2r_j-dimensional block is,
    up to the factor (-1)^n (pi b_j)^{r_j}, its own Fourier transform after
    the rescaling xi -> b_j x / 2, which gives

        2^{|r|} (2 pi)^{-d1} sum_n m_H(n, 0, eta) prod_j (pi b_j)^{r_j} (-1)^{n_j}
        ell_{n_j}^{(r_j - 1)}(b_j |P_j x|^2 / 4).
    """
    if sd.r0:
        raise NotImplementedError("x-space kernels are implemented for groups with trivial kernel of J_eta")
    trunc = trunc or TruncationSpec()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S, d1 = x.shape
    dtype = float if H.is_real else complex
    if H.is_zero:
        return np.zeros(S, dtype=dtype)
    box = n_box(sd, trunc.bound(H), trunc.pad)
    if any(n < 0 for n in box):
        return np.zeros(S, dtype=dtype)
    _check_box(box, trunc)
    C = H.H(spectral_points(sd, box), eta)
    for j, nj in enumerate(box):
        shape = [1] * sd.done
        shape[j] = nj + 1
        C = C * ((-1.0) ** np.arange(nj + 1)).reshape(shape)
    norms, _ = _projection_norms(sd, x)
    ts = [sd.b[j] * norms[j] / 4.0 for j in range(sd.done)]
    pref = 2.0**sd.r_total * (2 * np.pi) ** (-d1) * np.prod([(np.pi * bj) ** rj for bj, rj in zip(sd.b, sd.r)])
    return (pref * ell_series(C, [rj - 1 for rj in sd.r], ts)).astype(dtype, copy=False)


# -- grids ---------------------------------------------------------------

@dataclass(eq=False)
class KernelGrid:
    """Kernel samples on a centred lattice over g1 x g2.

    Axis ``i`` holds the points ``(m - count/2) * spacing`` for
    ``m = 0..count-1``; x axes come first, then u axes.
    """

    group: StratifiedGroup | None
    x_grid: tuple
    u_grid: tuple
    values: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    @property
    def dims(self):
        return tuple(self.x_grid) + tuple(self.u_grid)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([sp for _, sp in self.dims]))

    def axes(self):
        return [(np.arange(n) - n // 2) * sp for n, sp in self.dims]

    def coordinates(self):
        """Arrays x (shape values.shape + (d1,)) and u (values.shape + (d2,)), built lazily by callers."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        d1 = len(self.x_grid)
        return np.stack(mesh[:d1], axis=-1), np.stack(mesh[d1:], axis=-1)


def _validate_axes(grid, n, what):
    grid = tuple((int(c), float(s)) for c, s in grid)
    if len(grid) != n:
        raise ValidationError(f"{what} grid needs {n} axes, got {len(grid)}")
    for c, s in grid:
        if c < 2 or c % 2 or not s > 0:
            raise ValidationError(f"{what} grid axes need an even count >= 2 and positive spacing, got ({c}, {s})")
    return grid


def eta_radius(G: StratifiedGroup, Lam: float) -> float:
    """Radius beyond which the smallest spectral point exceeds Lam.

    Uses sum_j r_j b_j >= |J_eta|_HS / sqrt(2) and the smallest eigenvalue of
    the Gram form eta -> |J_eta|_HS^2.
    """
    Js = j_matrix(G, np.eye(G.d2))
    gram = np.einsum("kij,lij->kl", Js, Js)
    gmin = float(np.linalg.eigvalsh(gram)[0])
    return np.sqrt(2.0) * Lam / np.sqrt(gmin)


def nyquist_check(H: Multiplier, G: StratifiedGroup, x_grid, u_grid, safety: float = 1.5, tail: float = 1e-6):
    Lam = H.nyquist_bound(tail)
    r_xi = safety * np.sqrt(Lam)
    r_eta = eta_radius(G, Lam)
    for n, dx in x_grid:
        if np.pi / dx < r_xi:
            raise GridTooCoarse(f"x spacing {dx} resolves |xi| <= {np.pi / dx:.4g}, need {r_xi:.4g}")
    for n, du in u_grid:
        if np.pi / du < r_eta:
            raise GridTooCoarse(f"u spacing {du} resolves |eta| <= {np.pi / du:.4g}, need {r_eta:.4g}")
    return r_xi, r_eta


def dual_axes(x_grid, u_grid):
    """Frequency axes: xi centred on 0, eta shifted by half a cell so eta = 0 is never sampled."""
    xi_axes = [(np.arange(n) - n // 2) * (2 * np.pi / (n * dx)) for n, dx in x_grid]
    eta_axes = [(np.arange(n) - n // 2 + 0.5) * (2 * np.pi / (n * du)) for n, du in u_grid]
    return xi_axes, eta_axes


def sample_V_grid(H, G, x_grid, u_grid, trunc=None, threads: int = 1, profile=None):
    """V on the dual lattice, shape x-counts + u-counts, plus the count of skipped eta."""
    trunc = trunc or TruncationSpec()
    xi_axes, eta_axes = dual_axes(x_grid, u_grid)
    xi = np.stack(np.meshgrid(*xi_axes, indexing="ij"), axis=-1).reshape(-1, G.d1)
    etas = np.stack(np.meshgrid(*eta_axes, indexing="ij"), axis=-1).reshape(-1, G.d2)
    dtype = float if H.is_real else complex
    V = np.zeros((xi.shape[0], etas.shape[0]), dtype=dtype)
    if H.is_zero:
        return V, 0
    profile = profile or generic_profile(G)
    ok, b, P, P0 = batch_regular(G, etas, profile)
    sds = {}
    for i in np.flatnonzero(ok):
        sds[i] = SpectralData(profile.done, b[i], tuple(profile.r), profile.r0, P[i], P0[i])
    for i in np.flatnonzero(~ok):
        # a cluster layout in another order can still be regular
        try:
            sd = decompose(G, etas[i])
        except (ClusterAmbiguous, ValidationError):
            continue
        if (sd.done, sd.r0, tuple(sorted(sd.r))) == (profile.done, profile.r0, tuple(sorted(profile.r))):
            sds[i] = sd
    skipped = etas.shape[0] - len(sds)
    if skipped > SKIP_LIMIT * etas.shape[0]:
        raise SingularEta(f"{skipped} of {etas.shape[0]} eta grid points are singular (limit 1%)")
    if skipped:
        log.info("skipped %d singular eta grid points", skipped)
    def work(i):
        V[:, i] = eval_V_sd(H, sds[i], etas[i], xi, trunc)

    order = sorted(sds)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, order))
    else:
        for i in order:
            work(i)
    shape = tuple(n for n, _ in x_grid) + tuple(n for n, _ in u_grid)
    return V.reshape(shape), skipped


def synthesize_kernel(H: Multiplier, G: StratifiedGroup, x_grid, u_grid, trunc: TruncationSpec | None = None,
                      threads: int = 1, safety: float = 1.5, check: bool = True) -> KernelGrid:
    """Kernel of H(L, U) on a centred lattice.

    The integral over (xi, eta) is replaced by a sum over the dual lattice
    (xi centred, eta offset by half a cell) and evaluated with one inverse FFT.
    Singular eta are skipped and counted in ``provenance["skipped_eta"]``.
    """
    x_grid = _validate_axes(x_grid, G.d1, "x")
    u_grid = _validate_axes(u_grid, G.d2, "u")
    trunc = trunc or TruncationSpec()
    if check and not H.is_zero:
        nyquist_check(H, G, x_grid, u_grid, safety)
    V, skipped = sample_V_grid(H, G, x_grid, u_grid, trunc, threads)
    values = kernel_from_V(V, G, x_grid, u_grid)
    prov = {"multiplier": H.to_spec(), "truncation": trunc.to_spec(), "skipped_eta": int(skipped)}
    return KernelGrid(G, x_grid, u_grid, values, prov)


def kernel_from_V(V: np.ndarray, G: StratifiedGroup, x_grid, u_grid) -> np.ndarray:
    """Inverse transform of lattice samples of V (layout as in ``sample_V_grid``)."""
    if not V.any():
        return np.zeros(V.shape, dtype=complex)
    d1 = G.d1
    r_total = sum(generic_profile(G).r)
    axes = tuple(range(V.ndim))
    values = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(V, axes=axes), axes=axes), axes=axes)
    for k, (n, du) in enumerate(u_grid):
        u = (np.arange(n) - n // 2) * du
        deta = 2 * np.pi / (n * du)
        shape = [1] * V.ndim
        shape[d1 + k] = n
        values *= np.exp(0.5j * deta * u).reshape(shape)
    cell = np.prod([dx for _, dx in x_grid]) * np.prod([du for _, du in u_grid])
    values *= 2.0**r_total / cell
    return values


# -- NKG1 files ----------------------------------------------------------

def write_nkg1(path, grid: KernelGrid) -> None:
    dims = grid.dims
    with Path(path).open("wb") as fh:
        fh.write(NKG1_MAGIC)
        fh.write(struct.pack("<I", len(dims)))
        for n, sp in dims:
            fh.write(struct.pack("<Id", int(n), float(sp)))
        fh.write(np.ascontiguousarray(grid.values, dtype="<c16").tobytes())


def read_nkg1(path):
    """Return ``(dims, values)`` with dims a list of (count, spacing)."""
    data = Path(path).read_bytes()
    if data[:4] != NKG1_MAGIC:
        raise ValidationError(f"{path} is not an NKG1 file")
    (nd,) = struct.unpack_from("<I", data, 4)
    off = 8
    dims = []
    for _ in range(nd):
        n, sp = struct.unpack_from("<Id", data, off)
        dims.append((n, sp))
        off += 12
    count = int(np.prod([n for n, _ in dims]))
    values = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape([n for n, _ in dims])
    return dims, values.copy()
