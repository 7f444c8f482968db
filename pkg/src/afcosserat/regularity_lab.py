"""Local-energy, hole-filling and Hoelder diagnostics on discrete fields.

Ball integrals use the 7-point triangle rule with an inside-ball indicator:
an element contributes its (constant) P1 energy density times the weighted
fraction of its quadrature points that fall in the ball. Fields are nodal
arrays of shape ``(N,)`` or ``(N, k)``, or :class:`AnalyticField` objects whose
gradient is evaluated at the quadrature points (useful for singular profiles
that a P1 interpolant resolves poorly). Trajectories are
:class:`afcosserat.quasistatic.Trajectory` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import constitutive as cm
from . import grid_fem as gf
from . import tensor3 as t3

MIN_ELEMENTS_PER_RADIUS = 2.0
DEGENERATE_RTOL = 1e-14
NARROW_SCALE_RANGE = 2.0  # flag Hoelder fits over less than this scale ratio


class BallUnresolved(ValueError):
    pass


class BoundaryNotZero(ValueError):
    pass


@dataclass(frozen=True)
class BallSpec:
    center: tuple
    radius: float
    clip: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass
class RatioResult:
    """A diagnostic ratio; ``value`` is ``None`` when ``flag`` marks it degenerate."""

    value: float | None
    numerator: float
    denominator: float
    flag: str | None = None

    @property
    def degenerate(self):
        return self.flag is not None


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    residual: float

    @classmethod
    def from_loglog(cls, x, y):
        lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
        A = np.column_stack([lx, np.ones_like(lx)])
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
        r = ly - A @ coef
        dof = max(len(lx) - 2, 1)
        s2 = float(r @ r) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        return cls(float(coef[0]), float(coef[1]), float(np.sqrt(cov[0, 0])),
                   float(np.sqrt(np.mean(r * r))))


@dataclass
class WidmanReport:
    q: float
    alpha: float
    residuals: np.ndarray
    violations: np.ndarray
    fitted_alpha: float
    fit: ExponentFit


@dataclass
class GrowthReport:
    center: tuple
    radii: np.ndarray
    energies: np.ndarray
    ratios: list
    fit: ExponentFit | None
    widman: WidmanReport | None = None
    lift_energies: np.ndarray | None = None
    lift_fit: ExponentFit | None = None
    lift_K: float | None = None
    flag: str | None = None

    @property
    def exponent(self):
        return None if self.fit is None else self.fit.slope

    @property
    def lift_exponent(self):
        return None if self.lift_fit is None else self.lift_fit.slope


@dataclass
class HolderReport:
    alpha: float | None
    slope: float | None
    span: tuple
    n_pairs: int
    scales: np.ndarray = field(repr=False)
    modulus: np.ndarray = field(repr=False)
    residual: float = np.nan
    flag: str | None = None
    predicted: float | None = None


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form field: ``value(x) -> (M,) or (M, k)``, ``gradient(x) -> (M, 2) or (M, k, 2)``."""

    value: object
    gradient: object

    def nodal(self, mesh):
        return np.asarray(self.value(mesh.nodes), float)


def radial_power(center, alpha):
    """The profile ``|x - center|^alpha`` with its gradient."""
    c = np.asarray(center, float)

    def value(x):
        return np.linalg.norm(np.asarray(x) - c, axis=-1) ** alpha

    def gradient(x):
        d = np.asarray(x) - c
        r = np.linalg.norm(d, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, alpha * r ** (alpha - 2), 0.0)
        return scale[..., None] * d

    return AnalyticField(value, gradient)


def _point(c):
    return tuple(float(x) for x in c)


def _nodal(mesh, field, k=-1):
    if isinstance(field, AnalyticField):
        field = field.nodal(mesh)
    return np.asarray(field, float).reshape(mesh.n_nodes, k)


# ----------------------------------------------------------------------------
# ball integrals
# ----------------------------------------------------------------------------


def energy_density(mesh, field):
    """|grad v|^2 per element ``(E,)`` for nodal fields, per quadrature point
    ``(E, 7)`` for :class:`AnalyticField` input."""
    if isinstance(field, AnalyticField):
        xq = mesh.points(gf.QUAD7_BARY)
        g = np.asarray(field.gradient(xq.reshape(-1, 2)), float)
        return np.sum(g.reshape(mesh.n_elements, 7, -1) ** 2, axis=-1)
    g = gf.gradient_at_elements(mesh, np.asarray(field, float).reshape(mesh.n_nodes, -1))
    return np.sum(g * g, axis=(-2, -1))


def _inside(mesh, center, radius, inner=0.0):
    xq = mesh.points(gf.QUAD7_BARY)
    r = np.linalg.norm(xq - np.asarray(center, float), axis=-1)
    return (r < radius) & (r >= inner)


def ball_fraction(mesh, center, radius, inner=0.0):
    """Weighted fraction of each element inside ``inner <= |x - c| < radius``."""
    return _inside(mesh, center, radius, inner) @ gf.QUAD7_W


def _check_ball(mesh, center, radius, clip, reach=1.0):
    if radius < MIN_ELEMENTS_PER_RADIUS * mesh.h:
        raise BallUnresolved(
            f"radius {radius:g} below {MIN_ELEMENTS_PER_RADIUS:g} element diameters ({mesh.h:g})"
        )
    if not clip and mesh.distance_to_boundary(np.asarray(center, float)) < reach * radius - 1e-12:
        raise ValueError("ball leaves the domain; pass clip=True for boundary balls")


def integrate_density(mesh, density, center, radius, inner=0.0):
    """Ball (or annulus) integral of an element ``(E,)`` or quadrature-point ``(E, 7)`` density."""
    inside = _inside(mesh, center, radius, inner)
    if np.ndim(density) == 2:
        return float(np.sum(mesh.areas[:, None] * gf.QUAD7_W * inside * density))
    return float(np.sum(density * mesh.areas * (inside @ gf.QUAD7_W)))


def local_energy(mesh, field, ball):
    """Integral of |grad v|^2 over the ball (intersected with the domain when clipped)."""
    _check_ball(mesh, ball.center, ball.radius, ball.clip)
    return integrate_density(mesh, energy_density(mesh, field), ball.center, ball.radius)


def _ratio(num, den, total):
    if den <= DEGENERATE_RTOL * total or den == 0.0:
        return RatioResult(None, num, den, "degenerate annulus")
    return RatioResult(num / den, num, den)


def hole_filling_ratio(mesh, field, center, R, clip=False, density=None):
    """Ratio of the ball energy on B_R to the annulus energy on B_2R minus B_R."""
    _check_ball(mesh, center, R, clip, reach=2.0)
    if density is None:
        density = energy_density(mesh, field)
    num = integrate_density(mesh, density, center, R)
    den = integrate_density(mesh, density, center, 2 * R, inner=R)
    return _ratio(num, den, num + den)


def widman_iteration(energies, C, K=0.0, gamma=1.0, R0=1.0, rtol=1e-12):
    """Check the hole-filled decay level by level on dyadic radii ``R0 2^-j``.

    Level ``j`` passes when ``E[j+1] <= q E[j] + K R[j+1]^gamma`` with
    ``q = C / (1 + C)``. The exponent implied by the ratio bound is
    ``alpha = -log2(q) / 2``; ``fitted_alpha`` is half the slope of log E
    against log R.
    """
    E = np.asarray(energies, float)
    if E.size < 4:
        raise ValueError("need at least 4 dyadic levels")
    q = C / (1.0 + C)
    R = R0 * 2.0 ** -np.arange(E.size)
    resid = E[1:] - q * E[:-1] - K * R[1:] ** gamma
    viol = resid > rtol * np.maximum(E[:-1], np.finfo(float).tiny)
    alpha = -np.log2(q) / 2.0 if q > 0 else np.inf
    pos = E > 0
    fit = ExponentFit.from_loglog(R[pos], E[pos]) if pos.sum() >= 2 else ExponentFit(np.nan, np.nan, np.nan, np.nan)
    return WidmanReport(q, alpha, resid, viol, fit.slope / 2.0, fit)


def growth_report(mesh, density, center, radii, clip=False, widman_K=0.0, widman_gamma=1.0):
    """Ball energies over ``radii`` for a given element energy density.

    When the radii are dyadic (``R[j+1] = R[j] / 2``, at least 4 levels) the
    measured ratio bound ``C`` (largest hole-filling ratio) feeds
    :func:`widman_iteration`.
    """
    radii = np.asarray(sorted(radii, reverse=True), float)
    for R in radii:
        _check_ball(mesh, center, R, clip)
    E = np.array([integrate_density(mesh, density, center, R) for R in radii])
    ratios = []
    for R in radii:
        try:
            ratios.append(hole_filling_ratio(mesh, None, center, R, clip=True, density=density))
        except BallUnresolved:
            ratios.append(RatioResult(None, np.nan, np.nan, "unresolved"))
    if np.all(E <= 0):
        return GrowthReport(_point(center), radii, E, ratios, None, flag="zero energy")
    pos = E > 0
    fit = ExponentFit.from_loglog(radii[pos], E[pos]) if pos.sum() >= 2 else None
    widman = None
    dyadic = len(radii) >= 4 and np.allclose(radii[1:] / radii[:-1], 0.5)
    vals = [r.value for r in ratios if r.value is not None]
    if dyadic and vals:
        widman = widman_iteration(E, max(vals), widman_K, widman_gamma, R0=radii[0])
    return GrowthReport(_point(center), radii, E, ratios, fit, widman)


# ----------------------------------------------------------------------------
# Poincare and div-curl oracles
# ----------------------------------------------------------------------------


def poincare_annulus_check(mesh, field, center, R):
    """Poincare ratio on B_2R with the annulus mean as the subtracted constant."""
    _check_ball(mesh, center, R, clip=False, reach=2.0)
    v = _nodal(mesh, field)
    vq = mesh.interpolate(v, gf.QUAD7_BARY)  # (E, 7, k)
    xq = mesh.points(gf.QUAD7_BARY)
    r = np.linalg.norm(xq - np.asarray(center, float), axis=-1)
    w = mesh.areas[:, None] * gf.QUAD7_W[None, :]
    big = r < 2 * R
    ann = big & (r >= R)
    wa = w * ann
    c_R = np.einsum("eq,eqk->k", wa, vq) / wa.sum()
    num = np.sqrt(np.sum(w * big * np.sum((vq - c_R) ** 2, axis=-1)))
    grad = np.sqrt(integrate_density(mesh, energy_density(mesh, v), center, 2 * R))
    if grad <= 1e-14 * max(1.0, float(np.max(np.abs(v)))):
        return RatioResult(0.0, float(num), float(R * grad), "degenerate field")
    return RatioResult(float(num / (R * grad)), float(num), float(R * grad))


def random_smooth_field(mesh, rng, max_freq=3, components=1):
    """Random trigonometric polynomial with decaying coefficients, sampled at nodes."""
    x = mesh.nodes / np.array([mesh.Lx, mesh.Ly])
    out = np.zeros((mesh.n_nodes, components))
    for k in range(max_freq + 1):
        for l in range(max_freq + 1):
            if k == l == 0:
                continue
            amp = 1.0 / (1.0 + k * k + l * l)
            ph = np.pi * (k * x[:, 0] + l * x[:, 1])
            a, b = rng.standard_normal((2, components)) * amp
            out += np.cos(ph)[:, None] * a + np.sin(ph)[:, None] * b
    return out[:, 0] if components == 1 else out


def poincare_supremum(mesh, center, R, n_fields=200, seed=0, max_freq=3):
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_fields):
        res = poincare_annulus_check(mesh, random_smooth_field(mesh, rng, max_freq), center, R)
        if res.value is not None and not res.degenerate:
            vals.append(res.value)
    return float(np.max(vals)), np.array(vals)


def div_curl_check(mesh, field, tol=1e-12):
    """Ratio ||grad u||^2 / (||div u||^2 + ||curl u||^2) for u vanishing on the boundary."""
    u = _nodal(mesh, field, 3)
    scale = max(float(np.max(np.abs(u))), np.finfo(float).tiny)
    if np.max(np.abs(u[mesh.boundary_nodes])) > tol * scale:
        raise BoundaryNotZero("field must vanish on all boundary nodes")
    G = gf.gradient_at_elements(mesh, u)  # (E, 3, 3); column 2 is zero
    div = G[:, 0, 0] + G[:, 1, 1]
    curl = np.stack([G[:, 2, 1], -G[:, 2, 0], G[:, 1, 0] - G[:, 0, 1]], axis=-1)
    grad2 = float(mesh.areas @ np.sum(G * G, axis=(1, 2)))
    dc2 = float(mesh.areas @ (div**2 + np.sum(curl**2, axis=1)))
    if dc2 == 0.0:
        return RatioResult(None, grad2, dc2, "degenerate field")
    return RatioResult(grad2 / dc2, grad2, dc2)


# ----------------------------------------------------------------------------
# Hoelder estimators
# ----------------------------------------------------------------------------


def _fit_modulus(scales, modulus, n_pairs, floor):
    ok = modulus > floor
    if ok.sum() < 2:
        return HolderReport(None, None, (np.nan, np.nan), n_pairs, scales, modulus,
                            flag="constant field, exponent undefined")
    fit = ExponentFit.from_loglog(scales[ok], modulus[ok])
    alpha = float(np.clip(fit.slope, np.finfo(float).eps, 1.0))
    span = tuple(float(np.clip(fit.slope + k * fit.stderr, 0.0, 1.0)) for k in (-2, 2))
    flag = None
    if scales[-1] < NARROW_SCALE_RANGE * scales[0]:
        flag = f"narrow scale range ({scales[-1] / scales[0]:.2f}x), exponent unreliable"
    return HolderReport(alpha, fit.slope, span, n_pairs, scales, modulus, fit.residual, flag)


def _anchor_candidates(mesh, anchors):
    if anchors is None or (isinstance(anchors, str) and anchors == "all"):
        return np.arange(mesh.n_nodes)
    if isinstance(anchors, str):
        d = mesh.distance_to_boundary(mesh.nodes)
        band = 0.1 * min(mesh.Lx, mesh.Ly)
        if anchors == "interior":
            return np.flatnonzero(d >= 2.5 * band)
        if anchors == "boundary":
            return np.flatnonzero(d <= band)
        raise ValueError(f"unknown anchor set {anchors!r}")
    return np.asarray(anchors, int)


def holder_space(mesh, field, sample_pairs=1000, seed=0, anchors="all", n_scales=8):
    """Spatial Hoelder exponent from the empirical modulus of continuity.

    ``sample_pairs`` anchor nodes are drawn (seeded) from the ``anchors`` set;
    each is paired with every node within ``diam/4``. For log-spaced scales
    ``delta`` in ``[4h, diam/4]`` (``h`` the grid spacing) the modulus is the
    largest ``|v(x) - v(y)|`` over pairs with ``|x - y| <= delta``; the exponent
    is the least-squares slope of log modulus against log delta, clamped to
    ``(0, 1]``.
    """
    if sample_pairs < 100:
        raise ValueError("sample_pairs must be at least 100")
    v = _nodal(mesh, field)
    if not np.all(np.isfinite(v)):
        raise ValueError("field has non-finite values")
    h = min(mesh.Lx / mesh.nx, mesh.Ly / mesh.ny)
    dmin, dmax = 4.0 * h, mesh.diameter / 4.0
    if dmax <= dmin:
        raise BallUnresolved("mesh too coarse for the scale range [4h, diam/4]")
    cand = _anchor_candidates(mesh, anchors)
    rng = np.random.default_rng(seed)
    if sample_pairs < len(cand):
        cand = np.sort(rng.choice(cand, size=sample_pairs, replace=False))
    tree = cKDTree(mesh.nodes)
    nbrs = tree.query_ball_point(mesh.nodes[cand], dmax)
    counts = np.array([len(n) for n in nbrs])
    i = np.repeat(cand, counts)
    j = np.concatenate(nbrs).astype(int)
    dist = np.linalg.norm(mesh.nodes[i] - mesh.nodes[j], axis=1)
    diff = np.linalg.norm(v[i] - v[j], axis=1)
    scales = np.geomspace(dmin, dmax, n_scales)
    order = np.argsort(dist)
    running = np.maximum.accumulate(diff[order])
    idx = np.searchsorted(dist[order], scales, side="right") - 1
    modulus = np.where(idx >= 0, running[np.maximum(idx, 0)], 0.0)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(v))))
    return _fit_modulus(scales, modulus, int(np.count_nonzero(i != j)), floor)


def holder_time(trajectory, probe_points, seed=0, field="u", alpha_space=None, max_pairs=20000,
                n_scales=8):
    """Temporal Hoelder exponent at probe points from a stored trajectory.

    Probe coordinates snap to the nearest node. The modulus at scale ``delta``
    (log-spaced in ``[min dt, T/4]``) is the largest ``|v(x0, t1) - v(x0, t2)|``
    over probes and time pairs with ``|t1 - t2| <= delta``. With
    ``alpha_space`` given, the report carries ``alpha / (2 (alpha + 1))`` as the
    predicted lower bound.
    """
    times = trajectory.times
    if len(times) < 5:
        raise ValueError("need at least 5 stored time levels")
    mesh = trajectory.mesh
    probes = np.atleast_2d(np.asarray(probe_points, float))
    nodes = cKDTree(mesh.nodes).query(probes)[1]
    series = np.stack([getattr(s, field)[nodes] for s in trajectory.states])  # (nt, P, 3)
    n1, n2 = np.triu_indices(len(times), k=1)
    if len(n1) > max_pairs:
        keep = np.sort(np.random.default_rng(seed).choice(len(n1), max_pairs, replace=False))
        n1, n2 = n1[keep], n2[keep]
    dt = times[n2] - times[n1]
    diff = np.linalg.norm(series[n2] - series[n1], axis=-1).max(axis=1)
    dmin = float(np.min(np.diff(times)))
    dmax = max((times[-1] - times[0]) / 4.0, dmin * 2)
    scales = np.geomspace(dmin, dmax, n_scales)
    order = np.argsort(dt)
    running = np.maximum.accumulate(diff[order])
    idx = np.searchsorted(dt[order], scales * (1 + 1e-12), side="right") - 1
    modulus = np.where(idx >= 0, running[np.maximum(idx, 0)], 0.0)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(series))))
    rep = _fit_modulus(scales, modulus, len(n1) * len(nodes), floor)
    if alpha_space is not None:
        rep.predicted = alpha_space / (2.0 * (alpha_space + 1.0))
    return rep


# ----------------------------------------------------------------------------
# trajectory quantities
# ----------------------------------------------------------------------------


def _compliance_product(T, params):
    """(D^-1 T) : T for the isotropic elasticity tensor with constants mu, lambda."""
    lam, mu = params.lam, params.mu
    trT = t3.tr(T)
    return (t3.inner(T, T) - lam / (2 * mu + 3 * lam) * trT**2) / (2 * mu)


def _skew_mismatch_sq(mesh, grad_u, a):
    """Element integrals of |skew grad u - A|^2 (A linear, exact 3-point rule)."""
    w = t3.axl(t3.skew(grad_u))  # (E, 3)
    aq = mesh.interpolate(a, gf.QUAD3_BARY)  # (E, 3, 3)
    d = w[:, None, :] - aq
    return mesh.areas * (2.0 * np.einsum("q,eqk,eqk->e", gf.QUAD3_W, d, d))


def total_energy(mesh, state, params):
    """Integral of the stored energy density over the domain."""
    grad_u = gf.gradient_at_elements(mesh, state.u)
    grad_a = gf.gradient_at_elements(mesh, state.a)
    no_A = np.zeros_like(grad_u)
    # cosserat mismatch integrated separately because A varies within elements
    dens = cm.free_energy_density(t3.sym(grad_u), state.eps_p, no_A, grad_a, state.b, params)
    return float(mesh.areas @ dens + params.mu_c * np.sum(_skew_mismatch_sq(mesh, grad_u, state.a)))


def energy_report(trajectory, params=None):
    """Per-step energy and estimate quantities along a trajectory.

    Returns a dict of arrays indexed by step:

    ``energy``             stored energy
    ``rate_sum``           accumulated sum over steps of dt * [ (D^-1 dT_E, dT_E)
                           + 2 mu_c |skew grad du - dA|^2 + 4 l_c |grad d axl A|^2 ]
                           with backward-difference rates
    ``excess_term``        (1 / 2 nu) * integral of the squared yield excess
    ``estimate_total``     rate_sum + excess_term
    ``dissipation``        accumulated sum of <d eps_p, dev T_E - b>
    ``max_backstress``, ``max_excess``
    """
    params = params or trajectory.params
    mesh = trajectory.mesh
    n = len(trajectory)
    if n == 0:
        raise ValueError("empty trajectory")
    out = {k: np.zeros(n) for k in ("time", "energy", "rate_sum", "excess_term",
                                    "estimate_total", "dissipation", "max_backstress",
                                    "max_excess")}
    prev = None
    for k, s in enumerate(trajectory.states):
        out["time"][k] = s.time
        out["energy"][k] = total_energy(mesh, s, params)
        exc = cm.yield_excess(s.T_E, s.b, params)
        out["excess_term"][k] = float(mesh.areas @ exc**2) / (2 * params.nu)
        out["max_backstress"][k] = float(np.max(t3.norm(s.b), initial=0.0))
        out["max_excess"][k] = float(np.max(exc, initial=0.0))
        if prev is not None:
            dt = s.time - prev.time
            dTE = s.T_E - prev.T_E
            du = s.u - prev.u
            da = s.a - prev.a
            g_du = gf.gradient_at_elements(mesh, du)
            g_da = gf.gradient_at_elements(mesh, da)
            inc = (
                mesh.areas @ _compliance_product(dTE, params)
                + 2 * params.mu_c * np.sum(_skew_mismatch_sq(mesh, g_du, da))
                + 4 * params.l_c * (mesh.areas @ np.sum(g_da * g_da, axis=(1, 2)))
            ) / dt
            xi, _ = cm.overstress(s.T_E, s.b)
            diss = mesh.areas @ t3.inner(s.eps_p - prev.eps_p, xi)
            out["rate_sum"][k] = out["rate_sum"][k - 1] + inc
            out["dissipation"][k] = out["dissipation"][k - 1] + diss
        prev = s
    out["estimate_total"] = out["rate_sum"] + out["excess_term"]
    return out


def velocity_energy_density(trajectory, field="u"):
    """Element density of the time integral of |grad v_t|^2 (backward differences)."""
    mesh = trajectory.mesh
    dens = np.zeros(mesh.n_elements)
    st = trajectory.states
    for prev, s in zip(st[:-1], st[1:]):
        dt = s.time - prev.time
        dens += energy_density(mesh, getattr(s, field) - getattr(prev, field)) / dt
    return dens


def lift_rates(trajectory, load=None):
    """Harmonic extensions of the boundary-velocity data, one per stored step."""
    mesh = trajectory.mesh
    load = load or trajectory.load
    xb = mesh.nodes[mesh.boundary_nodes]
    return [gf.harmonic_extension(mesh, load.g_t(xb, s.time)) for s in trajectory.states]


def boundary_growth(mesh, trajectory, lift, centers, radii):
    """Clipped-ball growth diagnostics at boundary centers.

    ``lift`` is a sequence of nodal boundary-lift rates (one per stored step),
    or ``None`` to build harmonic lifts from the trajectory's load preset.
    """
    if lift is None:
        lift = lift_rates(trajectory)
    radii = np.asarray(sorted(radii, reverse=True), float)
    dens = velocity_energy_density(trajectory)
    lift_dens = np.stack([energy_density(mesh, w) for w in lift])  # (nt, E)
    reports = []
    for c in centers:
        c = np.asarray(c, float)
        if mesh.distance_to_boundary(c) > mesh.h + 1e-12:
            raise ValueError(f"center {tuple(c)} is not within h of the boundary")
        rep = growth_report(mesh, dens, c, radii, clip=True)
        G = np.array([
            np.max(lift_dens @ (mesh.areas * ball_fraction(mesh, c, R))) for R in radii
        ])
        rep.lift_energies = G
        if np.all(G <= 1e-300):
            rep.lift_K = 0.0
        else:
            pos = G > 0
            rep.lift_fit = ExponentFit.from_loglog(radii[pos], G[pos])
            rep.lift_K = float(np.max(G[pos] / radii[pos] ** rep.lift_fit.slope))
        reports.append(rep)
    return reports
