"""Time-incremental driver for the regularized (Yosida) evolution problem.

Each time step alternates between the global linear solve for ``(u, axl A)``
with the plastic strain frozen and the implicit local update of
``(eps_p, b)`` on every element, until both stop changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import constitutive as cm
from . import grid_fem as gf
from . import tensor3 as t3

log = logging.getLogger(__name__)

ADMISSIBILITY_TOL = 1e-10


class InadmissibleInitialData(ValueError):
    def __init__(self, message, max_violation):
        super().__init__(message)
        self.max_violation = max_violation


class StaggerNoConvergence(RuntimeError):
    def __init__(self, message, last_change):
        super().__init__(message)
        self.last_change = last_change


class LocalNoConvergence(RuntimeError):
    def __init__(self, message, element):
        super().__init__(message)
        self.element = element


# ----------------------------------------------------------------------------
# load presets
# ----------------------------------------------------------------------------


def _skew_axl(grad):
    """axl(skew([grad | 0])) for gradients of shape (M, 3, 2)."""
    G = np.zeros(grad.shape[:-1] + (3,))
    G[..., :2] = grad
    return t3.axl(t3.skew(G))


class LoadPreset:
    """Analytic boundary and body-force data.

    Subclasses provide the displacement ``g(x, t)``, its spatial gradient and
    its time derivative. The boundary microrotation is taken compatible with
    the boundary displacement, ``A_D = skew(grad g)``.
    """

    name = "base"

    def g(self, x, t):
        raise NotImplementedError

    def g_grad(self, x, t):
        raise NotImplementedError

    def g_t(self, x, t):
        raise NotImplementedError

    def a(self, x, t):
        return _skew_axl(self.g_grad(x, t))

    def f(self, x, t):
        return np.zeros((len(x), 3))

    def f_t(self, x, t):
        return np.zeros((len(x), 3))

    def has_body_force(self):
        return False

    def params(self):
        return {}


class ZeroLoad(LoadPreset):
    name = "zero"

    def g(self, x, t):
        return np.zeros((len(x), 3))

    def g_grad(self, x, t):
        return np.zeros((len(x), 3, 2))

    g_t = g


class LinearRamp(LoadPreset):
    """``g(x, t) = (offset + rate * t) * M x`` for a constant ``3 x 2`` matrix ``M``."""

    name = "linear_ramp"

    def __init__(self, M, rate=1.0, offset=0.0):
        self.M = np.asarray(M, float).reshape(3, 2)
        self.rate = float(rate)
        self.offset = float(offset)

    def scale(self, t):
        return self.offset + self.rate * t

    def g(self, x, t):
        return self.scale(t) * (np.asarray(x) @ self.M.T)

    def g_grad(self, x, t):
        return np.broadcast_to(self.scale(t) * self.M, (len(x), 3, 2)).copy()

    def g_t(self, x, t):
        return self.rate * (np.asarray(x) @ self.M.T)

    def params(self):
        return {"M": self.M.ravel().tolist(), "rate": self.rate, "offset": self.offset}


class CyclicShear(LoadPreset):
    """Sinusoidal shear ``u1 = gamma(t) x2 (1 + hetero sin(pi x1 / Lx))``.

    ``gamma(t) = amplitude sin(2 pi t / period)``. An optional body force
    ``force * sin(2 pi t / period) * (sin(pi x1/Lx) sin(pi x2/Ly), 0, 0)`` is
    added when ``force != 0``.
    """

    name = "cyclic_shear"

    def __init__(self, amplitude, period=1.0, hetero=0.0, force=0.0, Lx=1.0, Ly=1.0):
        self.amplitude = float(amplitude)
        self.period = float(period)
        self.hetero = float(hetero)
        self.force = float(force)
        self.Lx, self.Ly = float(Lx), float(Ly)

    def _phase(self, t):
        w = 2.0 * np.pi / self.period
        return np.sin(w * t), w * np.cos(w * t)

    def _profile(self, x):
        x = np.asarray(x, float)
        k = np.pi / self.Lx
        s = 1.0 + self.hetero * np.sin(k * x[:, 0])
        phi = x[:, 1] * s
        dphi = np.column_stack([x[:, 1] * self.hetero * k * np.cos(k * x[:, 0]), s])
        return phi, dphi

    def g(self, x, t):
        phi, _ = self._profile(x)
        out = np.zeros((len(x), 3))
        out[:, 0] = self.amplitude * self._phase(t)[0] * phi
        return out

    def g_grad(self, x, t):
        _, dphi = self._profile(x)
        out = np.zeros((len(x), 3, 2))
        out[:, 0, :] = self.amplitude * self._phase(t)[0] * dphi
        return out

    def g_t(self, x, t):
        phi, _ = self._profile(x)
        out = np.zeros((len(x), 3))
        out[:, 0] = self.amplitude * self._phase(t)[1] * phi
        return out

    def _bump(self, x):
        x = np.asarray(x, float)
        return np.sin(np.pi * x[:, 0] / self.Lx) * np.sin(np.pi * x[:, 1] / self.Ly)

    def f(self, x, t):
        out = np.zeros((len(x), 3))
        out[:, 0] = self.force * self._phase(t)[0] * self._bump(x)
        return out

    def f_t(self, x, t):
        out = np.zeros((len(x), 3))
        out[:, 0] = self.force * self._phase(t)[1] * self._bump(x)
        return out

    def has_body_force(self):
        return self.force != 0.0

    def params(self):
        return {"amplitude": self.amplitude, "period": self.period,
                "hetero": self.hetero, "force": self.force}


PRESETS = {"zero": ZeroLoad, "linear_ramp": LinearRamp, "cyclic_shear": CyclicShear}


def make_preset(name, Lx=1.0, Ly=1.0, **kwargs):
    if name not in PRESETS:
        raise KeyError(f"unknown load preset {name!r}; known: {sorted(PRESETS)}")
    if name == "cyclic_shear":
        kwargs.setdefault("Lx", Lx)
        kwargs.setdefault("Ly", Ly)
    return PRESETS[name](**kwargs)


# ----------------------------------------------------------------------------
# scenario, state, trajectory
# ----------------------------------------------------------------------------


@dataclass
class Scenario:
    material: cm.MaterialParams
    nx: int
    ny: int
    T: float
    steps: int
    load: LoadPreset = field(default_factory=ZeroLoad)
    Lx: float = 1.0
    Ly: float = 1.0
    eps_p0: np.ndarray | None = None
    b0: np.ndarray | None = None
    times: np.ndarray | None = None

    def __post_init__(self):
        if self.times is None:
            if self.steps < 1 or not self.T > 0:
                raise ValueError("need steps >= 1 and T > 0")
            self.times = np.linspace(0.0, self.T, self.steps + 1)
        else:
            self.times = np.asarray(self.times, float)
            if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
                raise ValueError("time grid must start at 0 and increase strictly")

    def mesh(self):
        return gf.build_mesh(self.nx, self.ny, self.Lx, self.Ly)

    def initial_internal(self, n_elements):
        ep = np.zeros((n_elements, 3, 3)) if self.eps_p0 is None else np.asarray(self.eps_p0, float)
        b = np.zeros((n_elements, 3, 3)) if self.b0 is None else np.asarray(self.b0, float)
        return np.broadcast_to(ep, (n_elements, 3, 3)).copy(), np.broadcast_to(b, (n_elements, 3, 3)).copy()

    def boundary_data(self, mesh, t):
        xb = mesh.nodes[mesh.boundary_nodes]
        return self.load.g(xb, t), self.load.a(xb, t)

    def body_force(self, t):
        if not self.load.has_body_force():
            return None
        return lambda x: self.load.f(x, t)


@dataclass
class State:
    time: float
    u: np.ndarray  # (N, 3)
    a: np.ndarray  # (N, 3) axial vector of A
    eps_p: np.ndarray  # (E, 3, 3)
    b: np.ndarray  # (E, 3, 3)
    T: np.ndarray  # (E, 3, 3)
    T_E: np.ndarray  # (E, 3, 3)
    stagger_iters: int = 0
    max_excess: float = 0.0

    def excess(self, params):
        return cm.yield_excess(self.T_E, self.b, params)


@dataclass
class Trajectory:
    mesh: gf.Mesh
    params: cm.MaterialParams
    states: list = field(default_factory=list)
    load: LoadPreset | None = None

    @property
    def times(self):
        return np.array([s.time for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def append(self, state):
        if self.states and not state.time > self.states[-1].time:
            raise ValueError("trajectory times must increase strictly")
        self.states.append(state)


def make_state(mesh, params, time, u, a, eps_p, b, iters=0):
    grad_u = gf.gradient_at_elements(mesh, u)
    T_E = cm.elastic_stress(t3.sym(grad_u), eps_p, params)
    A_c = t3.axl_inv(a[mesh.triangles].mean(axis=1))
    T = T_E + 2.0 * params.mu_c * (t3.skew(grad_u) - A_c)
    exc = cm.yield_excess(T_E, b, params)
    return State(time, u, a, eps_p, b, T, T_E, iters, float(np.max(exc, initial=0.0)))


class Stepper:
    """Holds the assembled operator of one scenario and advances states."""

    def __init__(self, scenario, stagger_tol=1e-8, max_stagger=200, linear_solver="direct",
                 linear_tol=1e-10, anderson=5):
        self.scenario = scenario
        self.params = scenario.material
        self.mesh = scenario.mesh()
        self.operator = gf.CoupledOperator(self.mesh, self.params)
        self.stagger_tol = stagger_tol
        self.max_stagger = max_stagger
        self.linear_solver = linear_solver
        self.linear_tol = linear_tol
        self.anderson = int(anderson)
        self._sym_grad = gf.sym_gradient_operator(self.mesh)
        self._last = None  # (state, plastic increment rate) of the latest step

    def _solve(self, eps_p, t):
        g, a = self.scenario.boundary_data(self.mesh, t)
        return self.operator.solve(eps_p, self.scenario.body_force(t), g, a,
                                   method=self.linear_solver, tol=self.linear_tol)

    def initial_state(self):
        mesh, p = self.mesh, self.params
        eps_p0, b0 = self.scenario.initial_internal(mesh.n_elements)
        for name, z in (("eps_p0", eps_p0), ("b0", b0)):
            if np.max(np.abs(z - np.swapaxes(z, -1, -2)), initial=0) > ADMISSIBILITY_TOL or \
                    np.max(np.abs(t3.tr(z)), initial=0) > ADMISSIBILITY_TOL:
                raise InadmissibleInitialData(f"{name} must be symmetric and trace-free", np.inf)
        u, a = self._solve(eps_p0, 0.0)
        state = make_state(mesh, p, 0.0, u, a, eps_p0, b0, iters=1)
        b_viol = np.max(t3.norm(b0), initial=0.0) - p.backstress_bound
        y_viol = state.max_excess
        worst = max(b_viol, y_viol)
        if worst > ADMISSIBILITY_TOL * max(1.0, p.sigma_y):
            raise InadmissibleInitialData(
                f"initial data violate admissibility: backstress excess {b_viol:.3e}, "
                f"yield excess {y_viol:.3e}",
                worst,
            )
        return state

    def step(self, state_n, t_next):
        if not t_next > state_n.time:
            raise ValueError("t_next must exceed the current time")
        dt = t_next - state_n.time
        p = self.params
        eps_p = state_n.eps_p
        if self._last is not None and self._last[0] is state_n:
            # linear extrapolation of the plastic strain as first iterate
            eps_p = eps_p + dt * self._last[1]
        u_old = None
        change = np.inf
        accel = _Anderson(self.anderson)
        for k in range(1, self.max_stagger + 1):
            u, a = self._solve(eps_p, t_next)
            eps = (self._sym_grad @ u.ravel()).reshape(-1, 3, 3)
            try:
                eps_p_new, b_new, _ = cm.return_map(eps, state_n.eps_p, state_n.b, dt, p)
            except cm.NoConvergence as exc:
                raise LocalNoConvergence(f"element {exc.index}: {exc}", exc.index) from exc
            d_ep = _rel_change(eps_p_new, eps_p)
            d_u = 0.0 if u_old is None else _rel_change(u, u_old)
            change = max(d_ep, d_u)
            u_old = u
            if change <= self.stagger_tol:
                eps_p = eps_p_new
                break
            eps_p = accel.update(eps_p, eps_p_new)
        else:
            raise StaggerNoConvergence(
                f"staggered iteration at t={t_next:g} stopped after {self.max_stagger} "
                f"iterations (last relative change {change:.3e})",
                change,
            )
        state = make_state(self.mesh, p, t_next, u, a, eps_p, b_new, iters=k)
        self._last = (state, (eps_p - state_n.eps_p) / dt)
        return state

    def run(self, callback=None):
        traj = Trajectory(self.mesh, self.params, load=self.scenario.load)
        state = self.initial_state()
        traj.append(state)
        if callback:
            callback(state)
        for t in self.scenario.times[1:]:
            state = self.step(state, float(t))
            traj.append(state)
            if callback:
                callback(state)
        return traj


class _Anderson:
    """Anderson mixing for the fixed point ``x = G(x)`` with memory ``m``.

    ``m = 0`` reproduces the plain Picard iteration. The combination of
    symmetric trace-free iterates stays symmetric and trace-free.
    """

    def __init__(self, m):
        self.m = m
        self.count = 0
        self.prev = None
        self.dX = self.dF = None

    def update(self, x, gx):
        if self.m <= 0:
            return gx
        x = x.ravel()
        f = gx.ravel() - x
        if self.prev is not None:
            if self.dX is None:
                self.dX = np.empty((self.m, x.size))
                self.dF = np.empty((self.m, x.size))
            slot = self.count % self.m
            self.dX[slot] = x - self.prev[0]
            self.dF[slot] = f - self.prev[1]
            self.count += 1
        self.prev = (x.copy(), f)
        k = min(self.count, self.m)
        if k == 0:
            return gx
        F, X = self.dF[:k], self.dX[:k]
        G = F @ F.T
        G += 1e-12 * np.trace(G) * np.eye(k)
        gamma = np.linalg.solve(G, F @ f)
        return (x + f - gamma @ (X + F)).reshape(gx.shape)


def _rel_change(new, old):
    diff = np.linalg.norm(np.ravel(new - old))
    if diff == 0.0:
        return 0.0
    return diff / max(np.linalg.norm(np.ravel(new)), np.linalg.norm(np.ravel(old)))


def solve_initial_state(scenario, **kwargs):
    return Stepper(scenario, **kwargs).initial_state()


def step(state_n, t_next, scenario, stagger_tol=1e-8, max_stagger=200, stepper=None):
    stepper = stepper or Stepper(scenario, stagger_tol, max_stagger)
    return stepper.step(state_n, t_next)


def run(scenario, callback=None, **kwargs):
    return Stepper(scenario, **kwargs).run(callback)


def nu_sweep(scenario, nus, keep_trajectories=False, **kwargs):
    """Run ``scenario`` once per regularization parameter.

    Returns a list of ``(nu, summary)``; a failed run yields a summary with an
    ``error`` entry and the sweep carries on.
    """
    from .regularity_lab import energy_report

    nus = [float(v) for v in nus]
    if any(v <= 0 for v in nus):
        raise ValueError("regularization parameters must be positive")
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise ValueError("regularization parameters must be strictly descending")
    out = []
    for nu in nus:
        sc = replace(scenario, material=scenario.material.with_nu(nu), times=scenario.times)
        try:
            traj = run(sc, **kwargs)
        except (StaggerNoConvergence, LocalNoConvergence, gf.NoConvergence) as exc:
            log.warning("nu=%g failed: %s", nu, exc)
            out.append((nu, {"error": str(exc)}))
            continue
        rep = energy_report(traj, sc.material)
        summary = {
            "estimate_quantity": float(np.max(rep["estimate_total"])),
            "estimate_final": float(rep["estimate_total"][-1]),
            "max_excess": float(np.max(rep["max_excess"])),
            "max_backstress": float(np.max(rep["max_backstress"])),
            "max_stagger_iters": int(max(s.stagger_iters for s in traj.states)),
        }
        if keep_trajectories:
            summary["trajectory"] = traj
        out.append((nu, summary))
    return out


def reference_material(nu=1e-3, **overrides):
    """Material used by the demos and the acceptance runs (``c/d = 1``)."""
    base = dict(mu=100.0, lam=150.0, mu_c=50.0, l_c=1e-3, c=50.0, d=50.0, sigma_y=1.0, nu=nu)
    base.update(overrides)
    return cm.MaterialParams(**base)


def reference_scenario(n=32, steps=100, nu=1e-3, **material):
    """Heterogeneous cyclic shear above yield, ending at a load peak.

    Amplitude 0.03 (about four times the yield shear strain), period 0.8 and
    final time 1, so ``u(T)`` carries the full load.
    """
    load = CyclicShear(0.03, period=0.8, hetero=0.3)
    return Scenario(reference_material(nu, **material), n, n, 1.0, steps, load)
