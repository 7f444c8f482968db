"""Pointwise material laws of the Armstrong-Frederick model with Cosserat coupling.

Stresses follow the small-strain isotropic law

    T_E = 2 mu (eps - eps_p) + lambda tr(eps - eps_p) 1
    T   = T_E + 2 mu_c (skew grad u - A)

and the internal variables evolve by the Yosida-regularized flow rule

    d/dt eps_p = (1/nu) {|dev T_E - b| - sigma_y}_+  (dev T_E - b) / |dev T_E - b|
    d/dt b     = c d/dt eps_p - d |d/dt eps_p| b

Every function is vectorized over leading axes: pass ``(3, 3)`` for one point or
``(n, 3, 3)`` for a batch of quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import tensor3 as t3

NEWTON_RTOL = 1e-12
NEWTON_MAXITER = 50


class NoConvergence(RuntimeError):
    """Local Newton solve failed; ``index`` is the offending point in the batch."""

    def __init__(self, message, residual=np.nan, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


@dataclass(frozen=True)
class MaterialParams:
    """Constitutive constants.

    ``nu`` is the Yosida regularization parameter. ``d = 0`` gives linear
    (Melan-Prager) kinematic hardening; every other constant must be positive.
    """

    mu: float
    lam: float
    mu_c: float
    l_c: float
    c: float
    d: float
    sigma_y: float
    nu: float
    rho: float = 1.0

    def __post_init__(self):
        bad = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                bad.append(f.name)
            elif f.name == "d":
                if v < 0:
                    bad.append(f.name)
            elif v <= 0:
                bad.append(f.name)
        if bad:
            raise ValueError("invalid material parameters: " + ", ".join(bad))

    @property
    def backstress_bound(self):
        """Saturation radius c/d of the backstress (inf for d = 0)."""
        return np.inf if self.d == 0 else self.c / self.d

    def with_nu(self, nu):
        return MaterialParams(**{**self.as_dict(), "nu": nu})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class LocalState:
    """Internal variables (plastic strain, backstress) at one or many points."""

    eps_p: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, shape=()):
        return cls(np.zeros(shape + (3, 3)), np.zeros(shape + (3, 3)))


def elastic_stress(eps, eps_p, params):
    e = np.asarray(eps, float) - np.asarray(eps_p, float)
    return 2.0 * params.mu * e + params.lam * t3.tr(e)[..., None, None] * t3.IDENTITY


def total_stress(grad_u, eps_p, A, params):
    """Total (non-symmetric) stress including the Cosserat couple term."""
    t3.axl(A)  # raises NotSkew
    grad_u = np.asarray(grad_u, float)
    return elastic_stress(t3.sym(grad_u), eps_p, params) + 2.0 * params.mu_c * (
        t3.skew(grad_u) - A
    )


def overstress(T_E, b):
    """Relative stress ``dev T_E - b`` and its norm."""
    xi = t3.dev(T_E) - np.asarray(b, float)
    return xi, t3.norm(xi)


def yield_excess(T_E, b, params):
    _, r = overstress(T_E, b)
    return np.maximum(r - params.sigma_y, 0.0)


def flow_rate(T_E, b, params):
    """Yosida flow rate; zero inside K(b), including the point dev T_E = b."""
    xi, r = overstress(T_E, b)
    excess = np.maximum(r - params.sigma_y, 0.0)
    scale = np.divide(excess, params.nu * r, out=np.zeros_like(r), where=excess > 0)
    return scale[..., None, None] * xi


def set_membership(which, T_E, b, params, atol=None):
    """Membership in the yield set ``K`` or the test-function set ``Kstar``.

    ``atol`` defaults to ``1e-12 * sigma_y`` so that boundary points count as
    members despite rounding.
    """
    if atol is None:
        atol = 1e-12 * params.sigma_y
    _, r = overstress(T_E, b)
    if which == "K":
        lhs = r
    elif which == "Kstar":
        lhs = r + params.d / (2.0 * params.c) * t3.inner(b, b)
    else:
        raise ValueError(f"unknown set {which!r}; expected 'K' or 'Kstar'")
    return lhs <= params.sigma_y + atol


def free_energy_density(grad_u, eps_p, A, grad_axlA, b, params):
    """Stored energy density rho*psi (energy per unit volume)."""
    grad_u = np.asarray(grad_u, float)
    e = t3.sym(grad_u) - np.asarray(eps_p, float)
    w = t3.skew(grad_u) - np.asarray(A, float)
    g = np.asarray(grad_axlA, float)
    return (
        params.mu * t3.inner(e, e)
        + params.mu_c * t3.inner(w, w)
        + 0.5 * params.lam * t3.tr(e) ** 2
        + 2.0 * params.l_c * np.sum(g * g, axis=(-2, -1))
        + t3.inner(b, b) / (2.0 * params.c)
    )


def return_map(eps_trial, eps_p_n, b_n, dt, params):
    """Backward-Euler update of (eps_p, b) for a batch of points.

    With the plastic increment written as ``dgamma * n`` (``|n| = 1``) the
    implicit equations give ``b_new = (b_n + c dgamma n) / (1 + d dgamma)`` and
    ``n`` parallel to ``z = s_trial - b_n / (1 + d dgamma)``. The multiplier then
    solves the scalar equation

        nu/dt g + (2 mu + c/(1 + d g)) g + sigma_y - |z(g)| = 0,

    whose left side is strictly increasing (slope >= nu/dt + 2 mu) whenever
    ``|b_n| <= c/d``. It is solved by bracketed Newton.

    Returns
    -------
    eps_p, b, dgamma : arrays of the batch shape
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    eps_trial = np.asarray(eps_trial, float)
    eps_p_n = np.asarray(eps_p_n, float)
    b_n = np.asarray(b_n, float)
    mu, c, d = params.mu, params.c, params.d
    visc = params.nu / dt

    s_tr = 2.0 * mu * t3.dev(eps_trial - eps_p_n)
    r_tr = t3.norm(s_tr - b_n)
    plastic = r_tr - params.sigma_y > 0.0

    eps_p = eps_p_n.copy()
    b = b_n.copy()
    dgamma = np.zeros(r_tr.shape)
    if not np.any(plastic):
        return eps_p, b, dgamma

    s = s_tr[plastic]
    bn = b_n[plastic]
    sb = t3.inner(s, bn)
    ss = t3.inner(s, s)
    bb = t3.inner(bn, bn)

    def resid(g):
        q = 1.0 / (1.0 + d * g)
        zn = np.sqrt(np.maximum(ss - 2.0 * q * sb + q * q * bb, 0.0))
        f = visc * g + (2.0 * mu + c * q) * g + params.sigma_y - zn
        dzn = np.divide(d * q * q * (sb - q * bb), zn, out=np.zeros_like(zn), where=zn > 0)
        df = visc + 2.0 * mu + c * q * q - dzn
        return f, df

    lo = np.zeros(s.shape[0])
    hi = (np.sqrt(ss) + np.sqrt(bb)) / (visc + 2.0 * mu)
    g = (r_tr[plastic] - params.sigma_y) / (visc + 2.0 * mu + c)
    active = np.ones(g.shape, bool)
    for _ in range(NEWTON_MAXITER):
        f, df = resid(g)
        lo = np.where(f < 0, g, lo)
        hi = np.where(f > 0, g, hi)
        step = f / df
        g_new = g - step
        outside = (g_new <= lo) | (g_new >= hi)
        g_new = np.where(outside, 0.5 * (lo + hi), g_new)
        converged = np.abs(g_new - g) <= NEWTON_RTOL * np.maximum(np.abs(g_new), 1e-300)
        g = np.where(active, g_new, g)
        active &= ~converged
        if not np.any(active):
            break
    else:
        f, _ = resid(g)
        worst = int(np.argmax(np.where(active, np.abs(f), -1.0)))
        index = int(np.flatnonzero(plastic.ravel())[worst])
        raise NoConvergence(
            f"return mapping did not converge (residual {abs(f[worst]):.3e})",
            residual=float(abs(f[worst])),
            index=index,
        )

    q = 1.0 / (1.0 + d * g)
    z = s - q[:, None, None] * bn
    n = z / t3.norm(z)[:, None, None]
    de = g[:, None, None] * n
    eps_p[plastic] = eps_p_n[plastic] + de
    b[plastic] = q[:, None, None] * (bn + c * de)
    dgamma[plastic] = g
    return eps_p, b, dgamma


def local_update(eps_trial, state_n, dt, params):
    """Implicit update of one point (or a batch); returns a new :class:`LocalState`."""
    eps_p, b, _ = return_map(eps_trial, state_n.eps_p, state_n.b, dt, params)
    return LocalState(eps_p, b)
