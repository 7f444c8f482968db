"""P1 finite elements for the coupled displacement / microrotation block.

Unknowns live at mesh nodes, six per node in the order
``(u1, u2, u3, a1, a2, a3)`` where ``a = axl(A)``. Fields depend on ``(x1, x2)``
only; derivatives in ``x3`` vanish.

For a frozen plastic strain the discrete problem is the first variation of the
stored energy,

    2 mu (eps(u), eps(v)) + lambda (tr eps(u), tr eps(v))
  + 2 mu_c (skew grad u - A, skew grad v - B) + 4 l_c (grad a, grad b)
  = (f, v) + (m, b) + 2 mu (eps_p, eps(v)) + lambda (tr eps_p, tr eps(v)),

with Dirichlet data for ``u`` and ``a`` on the whole boundary. ``m`` is an
optional couple source used only by manufactured-solution tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.linalg as la
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from . import tensor3 as t3

NDOF = 6

# degree-5, 7-point rule on the reference triangle (barycentric coordinates)
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
QUAD7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
QUAD7_W = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])

# edge midpoints: exact for quadratics
QUAD3_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
QUAD3_W = np.full(3, 1.0 / 3.0)


class InvalidPlasticField(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Structured triangulation of ``[0, Lx] x [0, Ly]``."""

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_tags: dict
    nx: int
    ny: int
    Lx: float
    Ly: float
    areas: np.ndarray = field(repr=False)
    shape_grads: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def boundary_nodes(self):
        return np.unique(np.concatenate(list(self.boundary_tags.values())))

    @property
    def interior_nodes(self):
        mask = np.ones(self.n_nodes, bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def h(self):
        """Largest element diameter."""
        return float(np.hypot(self.Lx / self.nx, self.Ly / self.ny))

    @property
    def diameter(self):
        return float(np.hypot(self.Lx, self.Ly))

    @property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    def points(self, bary):
        """Physical coordinates of barycentric points, shape ``(E, q, 2)``."""
        return np.einsum("qa,ead->eqd", bary, self.nodes[self.triangles])

    def interpolate(self, values, bary):
        """Values of a nodal field at barycentric points, shape ``(E, q, ...)``."""
        return np.einsum("qa,ea...->eq...", bary, np.asarray(values, float)[self.triangles])

    def distance_to_boundary(self, x):
        x = np.asarray(x, float)
        return np.minimum.reduce([x[..., 0], self.Lx - x[..., 0], x[..., 1], self.Ly - x[..., 1]])


def build_mesh(nx, ny, Lx=1.0, Ly=1.0):
    """Split each of the ``nx * ny`` rectangles along its rising diagonal."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    if not (Lx > 0 and Ly > 0):
        raise ValueError("Lx and Ly must be positive")
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (i + j * (nx + 1)).ravel()
    n10, n01 = n00 + 1, n00 + nx + 1
    n11 = n01 + 1
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([n00, n10, n11])
    tris[1::2] = np.column_stack([n00, n11, n01])

    grid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tags = {
        "bottom": grid[0, :].copy(),
        "top": grid[-1, :].copy(),
        "left": grid[:, 0].copy(),
        "right": grid[:, -1].copy(),
    }
    areas, grads = _geometry(nodes, tris)
    return Mesh(nodes, tris, tags, nx, ny, float(Lx), float(Ly), areas, grads)


def _geometry(nodes, tris):
    p = nodes[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise ValueError("mesh has degenerate or clockwise triangles")
    # gradient of barycentric coordinate a is the rotated opposite edge / det
    grads = np.empty((len(tris), 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        edge = p[:, c] - p[:, b]
        grads[:, a, 0] = -edge[:, 1] / det
        grads[:, a, 1] = edge[:, 0] / det
    return 0.5 * det, grads


def gradient_at_elements(mesh, field):
    """Element-wise gradient of a P1 field.

    ``field`` of shape ``(N, 3)`` gives ``(E, 3, 3)`` with rows = components and
    an identically zero third column. Other trailing shapes give ``(E, k, 2)``.
    """
    field = np.asarray(field, float)
    g = np.einsum("eak,ead->ekd", field[mesh.triangles].reshape(mesh.n_elements, 3, -1),
                  mesh.shape_grads)
    if field.ndim == 2 and field.shape[1] == 3:
        out = np.zeros((mesh.n_elements, 3, 3))
        out[:, :, :2] = g
        return out
    if field.ndim == 1:
        return g[:, 0, :]
    return g


def sym_gradient_operator(mesh):
    """Sparse map from nodal displacements ``(N, 3)`` (flattened) to element
    symmetric gradients ``(E, 3, 3)`` (flattened)."""
    E = mesh.n_elements
    G = mesh.shape_grads
    rows, cols, vals = [], [], []
    e = np.arange(E)
    for a in range(3):
        node = mesh.triangles[:, a]
        for i in range(3):
            for j in range(2):
                # d u_i / d x_j contributes half to (i, j) and (j, i)
                for r in (3 * i + j, 3 * j + i):
                    rows.append(9 * e + r)
                    cols.append(3 * node + i)
                    vals.append(0.5 * G[:, a, j])
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(9 * E, 3 * mesh.n_nodes),
    ).tocsr()


# ----------------------------------------------------------------------------
# coupled operator
# ----------------------------------------------------------------------------


def _element_operators(mesh):
    """Strain-displacement type operators for every element (18 local dofs)."""
    E = mesh.n_elements
    G = mesh.shape_grads
    Bgrad = np.zeros((E, 9, 18))  # grad u, row-major (component, derivative)
    Ba = np.zeros((E, 6, 18))  # grad a, (component, derivative) with 2 derivatives
    for a in range(3):
        for i in range(3):
            for j in range(2):
                Bgrad[:, 3 * i + j, 6 * a + i] = G[:, a, j]
                Ba[:, 2 * i + j, 6 * a + 3 + i] = G[:, a, j]
    Bgrad_t = Bgrad.reshape(E, 3, 3, 18)
    Bsym = 0.5 * (Bgrad_t + Bgrad_t.transpose(0, 2, 1, 3)).reshape(E, 9, 18)
    Btr = Bgrad_t[:, [0, 1, 2], [0, 1, 2], :].sum(axis=1)  # (E, 18)
    skew = 0.5 * (Bgrad_t - Bgrad_t.transpose(0, 2, 1, 3))
    Bw = skew[:, [0, 0, 1], [1, 2, 2], :]  # axl(skew grad u), (E, 3, 18)

    # nodal-value operators at the edge-midpoint rule
    Nu = np.zeros((3, 3, 18))
    Na = np.zeros((3, 3, 18))
    for q in range(3):
        for a in range(3):
            for i in range(3):
                Nu[q, i, 6 * a + i] = QUAD3_BARY[q, a]
                Na[q, i, 6 * a + 3 + i] = QUAD3_BARY[q, a]
    return Bgrad, Bsym, Btr, Bw, Ba, Nu, Na


def _element_dofs(mesh):
    return (NDOF * mesh.triangles[:, :, None] + np.arange(NDOF)).reshape(mesh.n_elements, 18)


@dataclass
class SparseSystem:
    """Assembled system before and after elimination of Dirichlet dofs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray
    constrained_values: np.ndarray
    free: np.ndarray
    reduced_matrix: sp.csr_matrix
    reduced_rhs: np.ndarray
    n_nodes: int


class CoupledOperator:
    """Assembled coupled stiffness for one mesh and one set of material constants.

    The stiffness does not depend on the plastic strain, so it is built once and
    reused for every load vector; the reduced matrix is factorized lazily.
    """

    def __init__(self, mesh, params):
        self.mesh = mesh
        self.params = params
        Bgrad, Bsym, Btr, Bw, Ba, Nu, Na = _element_operators(mesh)
        self._Bsym, self._Btr, self._Nu, self._Na = Bsym, Btr, Nu, Na
        p = params
        area = mesh.areas[:, None, None]
        Ke = area * (
            2.0 * p.mu * np.einsum("eki,ekj->eij", Bsym, Bsym)
            + p.lam * np.einsum("ei,ej->eij", Btr, Btr)
            + 4.0 * p.l_c * np.einsum("eki,ekj->eij", Ba, Ba)
        )
        for q in range(3):
            D = Bw - Na[q]
            Ke += (area * QUAD3_W[q]) * 4.0 * p.mu_c * np.einsum("eki,ekj->eij", D, D)
        self._dofs = _element_dofs(mesh)
        ndof = NDOF * mesh.n_nodes
        rows = np.repeat(self._dofs, 18, axis=1).ravel()
        cols = np.tile(self._dofs, (1, 18)).ravel()
        K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
        K.sum_duplicates()
        self.matrix = K

        bnodes = mesh.boundary_nodes
        self.constrained = (NDOF * bnodes[:, None] + np.arange(NDOF)).ravel()
        mask = np.ones(ndof, bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)
        self.K_ff = K[self.free][:, self.free].tocsc()
        self.K_fc = K[self.free][:, self.constrained].tocsr()
        self._lu = None
        # sparse map from flattened element plastic strains to the load vector
        C = mesh.areas[:, None, None] * (
            2.0 * p.mu * Bsym.transpose(0, 2, 1)
            + p.lam * Btr[:, :, None] * np.eye(3).ravel()[None, None, :]
        )  # (E, 18, 9)
        prow = np.repeat(self._dofs, 9, axis=1).ravel()
        pcol = np.tile(9 * np.arange(mesh.n_elements)[:, None] + np.arange(9), (1, 18)).ravel()
        self._plastic_map = sp.coo_matrix(
            (C.ravel(), (prow, pcol)), shape=(ndof, 9 * mesh.n_elements)
        ).tocsr()

    @property
    def ndof(self):
        return NDOF * self.mesh.n_nodes

    def load_vector(self, eps_p=None, f=None, m=None):
        """Global load vector for plastic strain ``(E,3,3)`` and body-force data.

        ``f`` and ``m`` are callables ``x (M, 2) -> (M, 3)`` or ``None``.
        """
        mesh = self.mesh
        Fe = np.zeros((mesh.n_elements, 18))
        if eps_p is not None:
            check_plastic_field(eps_p)
            F_plastic = self._plastic_map @ np.asarray(eps_p, float).ravel()
        else:
            F_plastic = 0.0
        for src, N in ((f, self._Nu), (m, self._Na)):
            if src is None:
                continue
            xq = mesh.points(QUAD3_BARY)
            vals = np.asarray(src(xq.reshape(-1, 2)), float).reshape(mesh.n_elements, 3, 3)
            Fe += np.einsum("e,q,qki,eqk->ei", mesh.areas, QUAD3_W, N, vals)
        F = np.zeros(self.ndof)
        if f is not None or m is not None:
            np.add.at(F, self._dofs.ravel(), Fe.ravel())
        return F + F_plastic

    def dirichlet_vector(self, g_D, a_D):
        """Stack boundary values (``(Nb, 3)`` each, boundary-node order) into dof order."""
        nb = len(self.mesh.boundary_nodes)
        g = np.broadcast_to(np.asarray(g_D, float), (nb, 3))
        a = np.broadcast_to(np.asarray(a_D, float), (nb, 3))
        return np.hstack([g, a]).ravel()

    def system(self, eps_p=None, f=None, g_D=0.0, a_D=0.0, m=None):
        F = self.load_vector(eps_p, f, m)
        uc = self.dirichlet_vector(g_D, a_D)
        return SparseSystem(
            matrix=self.matrix,
            rhs=F,
            constrained=self.constrained,
            constrained_values=uc,
            free=self.free,
            reduced_matrix=self.K_ff,
            reduced_rhs=F[self.free] - self.K_fc @ uc,
            n_nodes=self.mesh.n_nodes,
        )

    def solve(self, eps_p=None, f=None, g_D=0.0, a_D=0.0, m=None, method="direct", tol=1e-10):
        """Assemble the right-hand side and solve; returns nodal ``(u, a)``."""
        S = self.system(eps_p, f, g_D, a_D, m)
        if method == "direct":
            x = np.zeros(len(self.free))
            if len(self.free):
                if self._lu is None:
                    self._lu = _factorize(self.K_ff)
                x = self._lu(S.reduced_rhs)
            return expand_solution(S, x)
        if method == "cg":
            return solve_spd(S, tol)
        raise ValueError(f"unknown linear solver {method!r}")


def _factorize(K):
    """Factorize an SPD sparse matrix; returns a solve callable.

    Uses a banded Cholesky factor after reverse Cuthill-McKee reordering, which
    is compact for structured grids; falls back to sparse LU if the matrix is
    not numerically positive definite.
    """
    K = sp.csr_matrix(K)
    perm = csgraph.reverse_cuthill_mckee(K, symmetric_mode=True)
    Kp = K[perm][:, perm].tocoo()
    low = Kp.row >= Kp.col
    bw = int(np.max(Kp.row[low] - Kp.col[low], initial=0))
    if (bw + 1) * K.shape[0] <= 5e7:
        ab = np.zeros((bw + 1, K.shape[0]))
        ab[Kp.row[low] - Kp.col[low], Kp.col[low]] = Kp.data[low]
        try:
            cb = la.cholesky_banded(ab, lower=True)
        except la.LinAlgError:
            pass
        else:
            def solve(rhs):
                x = np.empty_like(rhs)
                x[perm] = la.cho_solve_banded((cb, True), rhs[perm], check_finite=False)
                return x

            return solve
    return spla.splu(sp.csc_matrix(K)).solve


def check_plastic_field(eps_p, tol=1e-10):
    ep = np.asarray(eps_p, float)
    if not np.all(np.isfinite(ep)):
        raise InvalidPlasticField("plastic strain has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(ep), initial=0.0)))
    if np.max(np.abs(ep - np.swapaxes(ep, -1, -2)), initial=0.0) > tol * scale:
        raise InvalidPlasticField("plastic strain is not symmetric")
    if np.max(np.abs(t3.tr(ep)), initial=0.0) > tol * scale:
        raise InvalidPlasticField("plastic strain is not trace-free")


def assemble_coupled(mesh, params, eps_p=None, f=None, g_D=0.0, A_D=0.0, m=None):
    """Assemble the coupled system with Dirichlet dofs eliminated.

    ``g_D`` and ``A_D`` hold values on ``mesh.boundary_nodes``: displacement
    vectors and axial vectors of the boundary microrotation respectively.
    """
    return CoupledOperator(mesh, params).system(eps_p, f, g_D, A_D, m)


def expand_solution(system, x_free):
    x = np.zeros(NDOF * system.n_nodes)
    x[system.free] = x_free
    x[system.constrained] = system.constrained_values
    x = x.reshape(-1, NDOF)
    return x[:, :3].copy(), x[:, 3:].copy()


def pcg(A, b, tol, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients; returns ``(x, iterations)``."""
    n = b.shape[0]
    if maxiter is None:
        maxiter = max(10 * n, 10000)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, float)
    if bnorm == 0.0:
        return np.zeros(n), 0
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it - 1
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if np.linalg.norm(r) <= tol * bnorm:
        return x, maxiter
    raise NoConvergence(
        f"PCG stopped after {maxiter} iterations, relative residual "
        f"{np.linalg.norm(r) / bnorm:.3e}"
    )


def solve_spd(system, tol=1e-10):
    """Solve a reduced system by PCG and re-insert the Dirichlet values."""
    if not (0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    x = np.zeros(len(system.free))
    if len(system.free):
        x, _ = pcg(system.reduced_matrix, system.reduced_rhs, tol)
    return expand_solution(system, x)


# ----------------------------------------------------------------------------
# auxiliary operators
# ----------------------------------------------------------------------------


def laplace_matrix(mesh):
    Ke = mesh.areas[:, None, None] * np.einsum("ead,ebd->eab", mesh.shape_grads, mesh.shape_grads)
    return _scalar_assemble(mesh, Ke)


def mass_matrix(mesh):
    Me = mesh.areas[:, None, None] * ((np.ones((3, 3)) + np.eye(3)) / 12.0)
    return _scalar_assemble(mesh, Me)


def _scalar_assemble(mesh, Ke):
    n = mesh.n_nodes
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def h1_gram(mesh):
    """Block-diagonal H1 Gram matrix (mass + stiffness) for all six components."""
    M = mass_matrix(mesh) + laplace_matrix(mesh)
    return sp.kron(M, sp.identity(NDOF), format="csr")


@lru_cache(maxsize=4)
def _laplace_factor(nx, ny, Lx, Ly):
    mesh = build_mesh(nx, ny, Lx, Ly)
    L = laplace_matrix(mesh)
    inner, bnd = mesh.interior_nodes, mesh.boundary_nodes
    lu = spla.splu(L[inner][:, inner].tocsc()) if len(inner) else None
    return lu, L[inner][:, bnd].tocsr()


def harmonic_extension(mesh, boundary_values):
    """Discrete harmonic function with given values on ``mesh.boundary_nodes``.

    ``boundary_values`` has shape ``(Nb,)`` or ``(Nb, k)``.
    """
    lu, L_ib = _laplace_factor(mesh.nx, mesh.ny, mesh.Lx, mesh.Ly)
    inner, bnd = mesh.interior_nodes, mesh.boundary_nodes
    g = np.asarray(boundary_values, float)
    out = np.zeros((mesh.n_nodes,) + g.shape[1:])
    out[bnd] = g
    if lu is not None:
        rhs = -(L_ib @ g.reshape(len(bnd), -1))
        out[inner] = lu.solve(rhs).reshape((len(inner),) + g.shape[1:])
    return out


def error_norms(mesh, field, exact, exact_grad):
    """L2 and H1-seminorm errors of a nodal P1 field against a smooth function.

    ``exact(x) -> (M, k)`` and ``exact_grad(x) -> (M, k, 2)`` with ``x`` of shape
    ``(M, 2)``; the integrals use the 7-point rule.
    """
    field = np.asarray(field, float).reshape(mesh.n_nodes, -1)
    k = field.shape[1]
    xq = mesh.points(QUAD7_BARY).reshape(-1, 2)
    uh = mesh.interpolate(field, QUAD7_BARY)  # (E, 7, k)
    gh = np.einsum("eak,ead->ekd", field[mesh.triangles], mesh.shape_grads)
    ue = np.asarray(exact(xq), float).reshape(mesh.n_elements, 7, k)
    ge = np.asarray(exact_grad(xq), float).reshape(mesh.n_elements, 7, k, 2)
    w = mesh.areas[:, None] * QUAD7_W[None, :]
    l2 = np.sqrt(np.sum(w * np.sum((uh - ue) ** 2, axis=-1)))
    h1 = np.sqrt(np.sum(w * np.sum((gh[:, None] - ge) ** 2, axis=(-2, -1))))
    return l2, h1
