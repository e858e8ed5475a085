"""Periodic piecewise polynomial spaces with node smoothness constraints.

A space is fixed by (mesh, degree, smoothness): per element a polynomial of
the given degree in the reference coordinate, glued so that the function on
the circle has continuous derivatives of all orders below `smoothness` at
the mesh nodes (smoothness 0 imposes nothing).

Two engines build the constraint null space:

  bloch  uniform meshes only: the element-index DFT block-diagonalizes the
         cyclic continuity constraints into one small matrix per frequency
         class, K = R - e^{i theta} L, whose null spaces are found by a
         batched SVD.  The resulting basis functions are discrete Bloch
         waves, exactly L^2-orthonormal.
  dense  any mesh: assembles the full constraint matrix, with chain-rule
         weights converting reference derivatives to circle derivatives on
         analytically mapped elements, and takes a global SVD.

Both produce the same space on uniform meshes, which the tests exploit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .funcspace import PiecewisePoly, eval_ref_basis, ref_endpoint_values
from .mesh import compose_weights
from .quadrature import _gl_rule

_RANK_TOL = 1e-10


class DegenerateSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceReport:
    degree: int
    smoothness: int
    n_elements: int
    dim: int
    basis_kind: str


def _endpoint_rows(degree, h, smoothness):
    """(L, R): rows j < smoothness of phi^{(j)} values at t = 0 and t = h."""
    L = np.empty((smoothness, degree + 1))
    R = np.empty((smoothness, degree + 1))
    for j in range(smoothness):
        v0, vh = ref_endpoint_values(degree, h, order=j)
        L[j] = v0
        R[j] = vh
    return L, R


def _chain_rows(gm, t, degree, h, m):
    """Rows j < m of circle-derivative evaluation at reference point t:
    row_j[a] = d^j (phi_a o gamma^{-1}) / dx^j at gamma(t)."""
    E = np.stack([eval_ref_basis(degree, h, np.array([t]), order=r)[:, 0]
                  for r in range(m)])
    if gm.kind == "affine":
        signs = gm.orientation ** np.arange(m)
        return signs[:, None] * E
    gd = [gm.derivative(np.array([t]), r) for r in range(1, m)]
    A = compose_weights(gd, m - 1)[..., 0] if m > 1 else np.eye(1)
    return A @ E


class SplineSpace:
    """Constraint null space of a (mesh, degree, smoothness) triple."""

    def __init__(self, mesh, degree, smoothness, engine=None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        if smoothness < 0:
            raise ValueError("smoothness must be >= 0")
        if smoothness > degree + 1:
            raise DegenerateSpaceError(
                f"smoothness {smoothness} exceeds degree {degree} + 1; the "
                "space collapses to constants before that")
        if engine is None:
            engine = "bloch" if mesh.kind == "uniform" else "dense"
        if engine == "bloch" and mesh.kind != "uniform":
            raise ValueError("the bloch engine needs a uniform mesh")
        if engine not in ("bloch", "dense"):
            raise ValueError(f"unknown engine {engine!r}")
        self.mesh = mesh
        self.degree = int(degree)
        self.smoothness = int(smoothness)
        self.engine = engine
        if engine == "bloch":
            self._build_bloch()
        else:
            self._build_dense()
        if self.dim == 0:
            raise DegenerateSpaceError("constraints leave no function")

    # bloch engine -----------------------------------------------------

    def _build_bloch(self):
        n = self.mesh.n_elements
        p = self.degree
        m = self.smoothness
        self.theta = 2.0 * math.pi * np.arange(n) / n
        if m == 0:
            W = np.broadcast_to(np.eye(p + 1), (n, p + 1, p + 1)).copy()
            self.block_dims = np.full(n, p + 1)
            self._groups = {p + 1: (np.arange(n), W.astype(complex))}
            self.dim = n * (p + 1)
            return
        L, R = _endpoint_rows(p, self.mesh.h, m)
        phase = np.exp(1j * self.theta)
        K = R[None, :, :] - phase[:, None, None] * L[None, :, :]
        _, s, Vh = np.linalg.svd(K)
        tol = _RANK_TOL * float(s.max())
        ranks = (s > tol).sum(axis=1)
        self.block_dims = (p + 1) - ranks
        self._groups = {}
        for d in np.unique(self.block_dims):
            idx = np.nonzero(self.block_dims == d)[0]
            if d == 0:
                continue
            W = np.stack([Vh[i][ranks[i]:].conj().T for i in idx])
            self._groups[int(d)] = (idx, W)
        self.dim = int(self.block_dims.sum())

    # dense engine -----------------------------------------------------

    def _build_dense(self):
        mesh = self.mesh
        n = mesh.n_elements
        p = self.degree
        m = self.smoothness
        h = mesh.h
        N = n * (p + 1)
        if m == 0:
            self._W = np.eye(N)
            self.dim = N
            return
        C = np.zeros((n * m, N))
        for e in range(n):
            e_next = (e + 1) % n
            t_right = mesh.node_param[e][1]
            t_left = mesh.node_param[e_next][0]
            rows_r = _chain_rows(mesh.maps[e], t_right, p, h, m)
            rows_l = _chain_rows(mesh.maps[e_next], t_left, p, h, m)
            sl_r = slice(e * (p + 1), (e + 1) * (p + 1))
            sl_l = slice(e_next * (p + 1), (e_next + 1) * (p + 1))
            for j in range(m):
                row = e * m + j
                C[row, sl_r] += rows_r[j]
                C[row, sl_l] -= rows_l[j]
        scale = np.linalg.norm(C, axis=1)
        C = C / np.where(scale > 0, scale, 1.0)[:, None]
        _, s, Vh = np.linalg.svd(C)
        tol = _RANK_TOL * float(s.max()) if s.size else 0.0
        rank = int((s > tol).sum())
        self._W = Vh[rank:].conj().T
        self.dim = self._W.shape[1]

    # shared interface -------------------------------------------------

    def report(self):
        return SpaceReport(self.degree, self.smoothness,
                           self.mesh.n_elements, self.dim, self.engine)

    def membership_residual(self, v):
        """Relative distance of a PiecewisePoly from the space, measured in
        the reference coefficient metric (equal to relative L^2 distance on
        uniform meshes)."""
        if v.mesh is not self.mesh or v.degree != self.degree:
            raise ValueError("function does not live over this space's mesh "
                             "and degree")
        q = v.coeffs.astype(complex)
        den = float(np.sum(np.abs(q) ** 2))
        if den == 0.0:
            return 0.0
        if self.engine == "bloch":
            # blocks without a group entry were removed entirely by the
            # constraints; their mass counts fully toward the residual
            Qhat = np.fft.fft(q, axis=0)
            out = float(np.sum(np.abs(Qhat) ** 2))
            for _, (idx, W) in self._groups.items():
                proj = np.einsum("bad,bd->ba", W,
                                 np.einsum("bad,ba->bd", W.conj(), Qhat[idx]))
                out -= float(np.sum(np.abs(proj) ** 2))
            return math.sqrt(max(out, 0.0) / (den * self.mesh.n_elements))
        flat = q.ravel()
        proj = self._W @ (self._W.conj().T @ flat)
        return math.sqrt(float(np.sum(np.abs(flat - proj) ** 2)) / den)

    def elementwise_fit(self, u):
        """Per-element L^2 fit of a trigonometric polynomial, ignoring all
        continuity constraints.

        The pullback of u to each element is projected onto reference
        polynomials of the space's degree; when every pullback is exactly
        such a polynomial the fit represents u, so feeding the result to
        membership_residual turns this into a membership test for u.
        """
        mesh = self.mesh
        coeffs = np.empty((mesh.n_elements, self.degree + 1), dtype=complex)
        base_x, base_w = _gl_rule(24)
        for e, (gm, arc) in enumerate(zip(mesh.maps, mesh.arc_lengths)):
            phase = u.max_freq * arc
            panels = max(2, int(math.ceil(phase / 8.0)) + 2)
            edges = np.linspace(0.0, gm.length, panels + 1)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1] - edges[0])
            t = (mid[:, None] + half * base_x[None, :]).ravel()
            w = np.broadcast_to(half * base_w, (panels, base_x.size)).ravel()
            vals = u.evaluate(gm.value(t))
            B = eval_ref_basis(self.degree, mesh.h, t)
            coeffs[e] = (B * w) @ vals
        return PiecewisePoly(mesh, coeffs, smoothness=0)

    def basis_splines(self):
        """Materialize an L^2- (bloch) or coefficient- (dense) orthonormal
        basis as PiecewisePoly functions.  Meant for small spaces."""
        out = []
        n = self.mesh.n_elements
        if self.engine == "bloch":
            e = np.arange(n)
            for _, (idx, W) in sorted(self._groups.items()):
                for b, nu in enumerate(idx):
                    wave = np.exp(1j * self.theta[nu] * e) / math.sqrt(n)
                    for col in range(W.shape[2]):
                        out.append(PiecewisePoly(
                            self.mesh, wave[:, None] * W[b, :, col][None, :],
                            smoothness=self.smoothness))
            return out
        for col in range(self.dim):
            out.append(PiecewisePoly(
                self.mesh, self._W[:, col].reshape(n, self.degree + 1),
                smoothness=self.smoothness))
        return out
