"""Independent reference solutions used by the tests.

Nothing here calls the package's assembly or return-map code: manufactured
sources come from symbolic differentiation of the stored energy, and the
scalar hardening responses from closed forms or ``scipy.integrate``.
"""

from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp


# ---------------------------------------------------------------------------
# manufactured solution for the coupled (u, axl A) block
# ---------------------------------------------------------------------------

X1, X2 = sp.symbols("x1 x2", real=True)

U_EXACT = (
    sp.sin(sp.pi * X1) * sp.cos(sp.pi * X2) / 10,
    X1 * X2 * (1 - X1) + sp.exp(X2) / 20,
    sp.cos(sp.pi * X1 * X2) / 10,
)
A_EXACT = (
    sp.sin(sp.pi * X2) * X1 / 10,
    sp.cos(sp.pi * X1) / 10,
    X1 * X2**2 / 10,
)


def _axl_inv(a):
    al, be, ga = a
    return sp.Matrix([[0, al, be], [-al, 0, ga], [-be, -ga, 0]])


def _grad3(v):
    return sp.Matrix(3, 3, lambda i, j: sp.diff(v[i], (X1, X2)[j]) if j < 2 else 0)


@lru_cache(maxsize=None)
def mms_problem(mu, lam, mu_c, l_c):
    """Return numeric callables (u, grad u, a, grad a, f, m) for the coupled block.

    The sources are the Euler-Lagrange expressions of the stored energy
    density ``mu|e|^2 + lam/2 tr(e)^2 + mu_c|skew grad u - A|^2 + 2 l_c|grad a|^2``,
    obtained by differentiating with respect to symbolic gradient slots.
    """
    G = sp.Matrix(3, 2, lambda i, j: sp.Symbol(f"G{i}{j}"))
    H = sp.Matrix(3, 2, lambda i, j: sp.Symbol(f"H{i}{j}"))
    asym = sp.symbols("a0 a1 a2")
    full = G.row_join(sp.zeros(3, 1))
    e = (full + full.T) / 2
    w = (full - full.T) / 2 - _axl_inv(asym)
    psi = (mu * sum(x**2 for x in e) + sp.Rational(1, 2) * lam * e.trace() ** 2
           + mu_c * sum(x**2 for x in w) + 2 * l_c * sum(x**2 for x in H))

    gu = _grad3(U_EXACT)[:, :2]
    ga = _grad3(A_EXACT)[:, :2]
    subs = {G[i, j]: gu[i, j] for i in range(3) for j in range(2)}
    subs.update({H[i, j]: ga[i, j] for i in range(3) for j in range(2)})
    subs.update(dict(zip(asym, A_EXACT)))

    f = [-sum(sp.diff(sp.diff(psi, G[i, j]).subs(subs), (X1, X2)[j]) for j in range(2))
         for i in range(3)]
    m = [sp.diff(psi, asym[k]).subs(subs)
         - sum(sp.diff(sp.diff(psi, H[k, j]).subs(subs), (X1, X2)[j]) for j in range(2))
         for k in range(3)]

    def vec(exprs):
        fn = sp.lambdify((X1, X2), list(exprs), "numpy")
        return lambda x: np.column_stack(
            [np.broadcast_to(np.asarray(c, float), x.shape[:1]) for c in fn(x[:, 0], x[:, 1])])

    def mat(M):
        fn = sp.lambdify((X1, X2), [M[i, j] for i in range(3) for j in range(2)], "numpy")
        return lambda x: np.stack(
            [np.broadcast_to(np.asarray(c, float), x.shape[:1]) for c in fn(x[:, 0], x[:, 1])],
            axis=-1).reshape(-1, 3, 2)

    return vec(U_EXACT), mat(gu), vec(A_EXACT), mat(ga), vec(f), vec(m)


# ---------------------------------------------------------------------------
# scalar hardening responses under proportional straining
# ---------------------------------------------------------------------------


def melan_prager_ramp(t, mu, c, sigma_y, nu, rate):
    """Plastic multiplier p(t) for ``|dev eps| = rate * t`` with linear hardening.

    Solves ``nu p' = {2 mu (rate t - p) - c p - sigma_y}_+`` from rest; the
    plastic strain is ``p N`` and the backstress ``c p N`` for the fixed
    direction ``N``.
    """
    t = np.asarray(t, float)
    A = 2 * mu * rate / (2 * mu + c)
    k = (2 * mu + c) / nu
    ty = sigma_y / (2 * mu * rate)
    tau = np.maximum(t - ty, 0.0)
    return A * tau - (A / k) * (-np.expm1(-k * tau))


def armstrong_frederick_ramp(t_eval, mu, c, d, sigma_y, nu, strain):
    """Scalar proportional response (p, beta) with ``b = beta N`` by stiff ODE solve.

    ``strain(t)`` is the signed deviatoric strain magnitude along ``N``.
    """

    def rhs(t, y):
        p, beta = y
        xi = 2 * mu * (strain(t) - p) - beta
        rate = max(abs(xi) - sigma_y, 0.0) / nu * np.sign(xi)
        return [rate, c * rate - d * abs(rate) * beta]

    sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), [0.0, 0.0], method="Radau",
                    t_eval=t_eval, rtol=1e-11, atol=1e-14, max_step=float(t_eval[-1]) / 2000)
    return sol.y[0], sol.y[1]


def isotropic_stress(eps, mu, lam):
    """Hooke's law written out component by component."""
    eps = np.asarray(eps, float)
    out = np.empty_like(eps)
    trace = eps[..., 0, 0] + eps[..., 1, 1] + eps[..., 2, 2]
    for i in range(3):
        for j in range(3):
            out[..., i, j] = 2 * mu * eps[..., i, j] + (lam * trace if i == j else 0.0)
    return out


def random_deviator(rng, norm, size=()):
    """Symmetric trace-free matrices with prescribed Frobenius norm."""
    M = rng.standard_normal(size + (3, 3))
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    M -= np.trace(M, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3
    n = np.sqrt(np.sum(M * M, axis=(-2, -1)))[..., None, None]
    return M / n * np.asarray(norm)[..., None, None] if np.ndim(norm) else M / n * norm
