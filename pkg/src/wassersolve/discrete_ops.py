"""Discrete spaces, inner products and TPFA operators.

Fields are plain 1-D numpy arrays: cell fields have one entry per cell of the
mesh they live on, diamond and flux fields one entry per internal face of the
fine mesh. A flux field stores ``F_{K,sigma}`` in the mesh's fixed ``K -> L``
orientation, so conservativity holds by construction.
"""

from __future__ import annotations

from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, NestedMeshPair


class Kind(str, Enum):
    LINEAR = "linear"
    HARMONIC = "harmonic"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, Kind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown reconstruction kind {value!r}") from None


class MeshMismatch(ValueError):
    pass


class NegativeDensity(ValueError):
    pass


class ZeroDensity(ValueError):
    pass


def _cells(mesh: Mesh, a, name="field"):
    a = np.asarray(a, dtype=float)
    if a.shape != (mesh.n_cells,):
        raise MeshMismatch(f"{name} has shape {a.shape}, mesh has {mesh.n_cells} cells")
    return a


def _faces(mesh: Mesh, u, name="field"):
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_faces,):
        raise MeshMismatch(f"{name} has shape {u.shape}, mesh has {mesh.n_faces} internal faces")
    return u


# -- inner products -------------------------------------------------------------

def inner_cell(mesh: Mesh, a, b) -> float:
    a, b = _cells(mesh, a, "a"), _cells(mesh, b, "b")
    return float(np.sum(a * b * mesh.cell_measures))


def inner_diamond(mesh: Mesh, u, v) -> float:
    u, v = _faces(mesh, u, "u"), _faces(mesh, v, "v")
    return float(np.sum(u * v * mesh.diamond_weights))


def inner_flux(mesh: Mesh, F, G) -> float:
    # each face is counted from both sides with weight m d / 2, hence m d overall
    return inner_diamond(mesh, F, G)


# -- divergence and gradient ----------------------------------------------------

def gradient(mesh: Mesh, a) -> np.ndarray:
    a = _cells(mesh, a)
    K, L = mesh.face_cells.T
    return (a[L] - a[K]) / mesh.face_d


def divergence(mesh: Mesh, F) -> np.ndarray:
    F = _faces(mesh, F)
    K, L = mesh.face_cells.T
    q = F * mesh.face_measures
    out = np.bincount(K, weights=q, minlength=mesh.n_cells)
    out -= np.bincount(L, weights=q, minlength=mesh.n_cells)
    return out / mesh.cell_measures


def gradient_matrix(mesh: Mesh) -> sp.csr_matrix:
    nf = mesh.n_faces
    K, L = mesh.face_cells.T
    rows = np.repeat(np.arange(nf), 2)
    cols = np.column_stack([K, L]).ravel()
    vals = np.column_stack([-1.0 / mesh.face_d, 1.0 / mesh.face_d]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf, mesh.n_cells))


def divergence_matrix(mesh: Mesh) -> sp.csr_matrix:
    """``D = -M^{-1} G^T W``, the negative adjoint of the gradient."""
    G = gradient_matrix(mesh)
    W = sp.diags(mesh.diamond_weights)
    return (-sp.diags(1.0 / mesh.cell_measures) @ G.T @ W).tocsr()


# -- reconstruction ---------------------------------------------------------------

def _split(mesh: Mesh, a):
    K, L = mesh.face_cells.T
    return a[K], a[L], mesh.face_dK, mesh.face_dL, mesh.face_d


def reconstruct(mesh: Mesh, a, kind="linear") -> np.ndarray:
    """Density on each diamond from the two neighbouring cell values."""
    kind = Kind.parse(kind)
    a = _cells(mesh, a)
    aK, aL, dK, dL, d = _split(mesh, a)
    if kind is Kind.LINEAR:
        return (dK * aK + dL * aL) / d
    if (a < 0).any():
        raise NegativeDensity("harmonic reconstruction needs a >= 0")
    num = d * aK * aL
    den = dK * aL + dL * aK
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=num > 0)
    return out


def _partials(mesh: Mesh, a, kind: Kind):
    """Per-face partial derivatives of the reconstruction in ``a_K`` and ``a_L``."""
    aK, aL, dK, dL, d = _split(mesh, a)
    if kind is Kind.LINEAR:
        return dK / d, dL / d
    if (a <= 0).any():
        raise ZeroDensity("harmonic differential needs a > 0")
    H = reconstruct(mesh, a, kind)
    return dK / d * (H / aK) ** 2, dL / d * (H / aL) ** 2


def reconstruct_diff(mesh: Mesh, a, b, kind="linear") -> np.ndarray:
    """Directional derivative ``dR[a] b``."""
    kind = Kind.parse(kind)
    a, b = _cells(mesh, a), _cells(mesh, b)
    pK, pL = _partials(mesh, a, kind)
    K, L = mesh.face_cells.T
    return pK * b[K] + pL * b[L]


def reconstruct_diff_matrix(mesh: Mesh, a, kind="linear") -> sp.csr_matrix:
    kind = Kind.parse(kind)
    a = _cells(mesh, a)
    pK, pL = _partials(mesh, a, kind)
    K, L = mesh.face_cells.T
    nf = mesh.n_faces
    rows = np.repeat(np.arange(nf), 2)
    cols = np.column_stack([K, L]).ravel()
    vals = np.column_stack([pK, pL]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf, mesh.n_cells))


def reconstruct_diff_adjoint(mesh: Mesh, a, u, kind="linear") -> np.ndarray:
    """``(dR[a])^* u`` with respect to the cell and diamond products."""
    kind = Kind.parse(kind)
    a, u = _cells(mesh, a), _faces(mesh, u)
    pK, pL = _partials(mesh, a, kind)
    K, L = mesh.face_cells.T
    w = u * mesh.diamond_weights
    out = np.bincount(K, weights=w * pK, minlength=mesh.n_cells)
    out += np.bincount(L, weights=w * pL, minlength=mesh.n_cells)
    return out / mesh.cell_measures


def _harmonic_hessian(mesh: Mesh, a):
    """Per-face second derivatives (hKK, hKL, hLL) of the harmonic mean."""
    if (a <= 0).any():
        raise ZeroDensity("harmonic differential needs a > 0")
    aK, aL, dK, dL, d = _split(mesh, a)
    den = dK * aL + dL * aK
    c = 2.0 * d * dK * dL / den**3
    return -c * aL**2, c * aK * aL, -c * aK**2


def second_diff_matrix(mesh: Mesh, a, u, kind="linear") -> sp.csr_matrix:
    """``sum_sigma u_sigma m_sigma d_sigma Hess_sigma``, unscaled by cell measures."""
    kind = Kind.parse(kind)
    a, u = _cells(mesh, a), _faces(mesh, u)
    n = mesh.n_cells
    if kind is Kind.LINEAR:
        return sp.csr_matrix((n, n))
    hKK, hKL, hLL = _harmonic_hessian(mesh, a)
    w = u * mesh.diamond_weights
    K, L = mesh.face_cells.T
    rows = np.concatenate([K, K, L, L])
    cols = np.concatenate([K, L, K, L])
    vals = np.concatenate([w * hKK, w * hKL, w * hKL, w * hLL])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def reconstruct_second_diff_action(mesh: Mesh, a, u, da, kind="linear") -> np.ndarray:
    """Derivative of ``(dR[a])^* u`` in ``a`` along ``da``."""
    kind = Kind.parse(kind)
    a, u, da = _cells(mesh, a), _faces(mesh, u), _cells(mesh, da)
    if kind is Kind.LINEAR:
        return np.zeros(mesh.n_cells)
    hKK, hKL, hLL = _harmonic_hessian(mesh, a)
    K, L = mesh.face_cells.T
    w = u * mesh.diamond_weights
    out = np.bincount(K, weights=w * (hKK * da[K] + hKL * da[L]), minlength=mesh.n_cells)
    out += np.bincount(L, weights=w * (hKL * da[K] + hLL * da[L]), minlength=mesh.n_cells)
    return out / mesh.cell_measures


# -- injection --------------------------------------------------------------------

def injection_matrix(pair: NestedMeshPair) -> sp.csr_matrix:
    nf = pair.fine.n_cells
    return sp.csr_matrix((np.ones(nf), (np.arange(nf), pair.containment)),
                         shape=(nf, pair.coarse.n_cells))


def inject(pair: NestedMeshPair, a) -> np.ndarray:
    a = _cells(pair.coarse, a)
    return a[pair.containment]


def inject_adjoint(pair: NestedMeshPair, b) -> np.ndarray:
    b = _cells(pair.fine, b)
    out = np.bincount(pair.containment, weights=b * pair.fine.cell_measures,
                      minlength=pair.coarse.n_cells)
    return out / pair.coarse.cell_measures


def reconstruct_coarse_adjoint(pair: NestedMeshPair, a, u, kind="linear") -> np.ndarray:
    """``I^* (dR[I a])^* u``: the reconstruction adjoint seen from the coarse mesh."""
    return inject_adjoint(pair, reconstruct_diff_adjoint(pair.fine, inject(pair, a), u, kind))


class Operators:
    """Sparse matrices of the operators on a mesh pair, built once per pair."""

    def __init__(self, pair: NestedMeshPair):
        self.pair = pair
        self.coarse = pair.coarse
        self.fine = pair.fine

    @cached_property
    def G(self) -> sp.csr_matrix:
        return gradient_matrix(self.fine)

    @cached_property
    def D(self) -> sp.csr_matrix:
        return divergence_matrix(self.fine)

    @cached_property
    def P(self) -> sp.csr_matrix:
        return injection_matrix(self.pair)

    @cached_property
    def Pstar(self) -> sp.csr_matrix:
        """Matrix of ``I^*``: ``Mc^{-1} P^T Mf``."""
        return (sp.diags(1.0 / self.coarse.cell_measures) @ self.P.T
                @ sp.diags(self.fine.cell_measures)).tocsr()

    @cached_property
    def W(self) -> np.ndarray:
        return self.fine.diamond_weights

    @cached_property
    def mf(self) -> np.ndarray:
        return self.fine.cell_measures

    @cached_property
    def mc(self) -> np.ndarray:
        return self.coarse.cell_measures
