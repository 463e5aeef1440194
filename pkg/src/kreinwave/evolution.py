"""Wave dynamics on strings and the free Dirac group.

The string equation m u_tt = u_ξξ with u_ξ(0, t) = 0 and u_t(·, 0) = 0 is
discretized as a bead-spring chain: nodes ξ_i = i h carry the mass of their
dual cell (atoms go to the nearest node), neighbours are joined by springs
of stiffness 1/h, and nodes with no mass are eliminated by joining their
springs in series.  Time stepping is leapfrog.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    DomainError,
    PowerTail,
    SpectralMeasure,
    ValidationError,
    szego_function,
    symmetrize_halfline,
)
from .report import Verdict
from .strings import (
    MassDistribution,
    boundary_density,
    generalized_fourier,
    lumped_masses,
    phi_on_nodes,
    string_eikonal,
    string_eikonal_inverse,
    string_szego_criterion,
    wavefront,
)

log = logging.getLogger(__name__)

CFL_SAFETY = 0.9
FRONT_QUANTILE = 1e-4
CESARO_SAMPLES = 256
SPECTRAL_TAIL_WARN = 0.01
K_CHUNK = 512


class CFLError(ValueError):
    """Time step above the stability bound."""

    def __init__(self, dt, dt_max):
        super().__init__(f"dt={dt:g} exceeds the stable bound {dt_max:g}; use dt <= {dt_max:g}")
        self.dt = dt
        self.suggested = dt_max


@dataclass(frozen=True, eq=False)
class LatticeString:
    """Condensed chain: positions, masses (all > 0) and springs between neighbours."""

    xi: np.ndarray
    m: np.ndarray
    k: np.ndarray
    h: float
    full_xi: np.ndarray
    full_m: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.m.sum())

    def accel(self, u):
        f = np.zeros_like(u)
        du = self.k * np.diff(u)
        f[:-1] += du
        f[1:] -= du
        return f / self.m

    def stiffness_energy(self, u) -> float:
        return 0.5 * float(np.sum(self.k * np.diff(u) ** 2))

    def stable_dt(self) -> float:
        """2/√B with B a Gershgorin bound on the spectrum of M^-1/2 K M^-1/2."""
        m, k = self.m, self.k
        kl = np.concatenate([[0.0], k])
        kr = np.concatenate([k, [0.0]])
        s = np.sqrt(m)
        off_l = np.concatenate([[0.0], k / (s[:-1] * s[1:])])
        off_r = np.concatenate([k / (s[:-1] * s[1:]), [0.0]])
        B = float(np.max((kl + kr) / m + off_l + off_r))
        return 2 / math.sqrt(B)

    def max_dt(self) -> float:
        return CFL_SAFETY * self.stable_dt()

    def default_dt(self, unit: float = 1.0) -> float:
        """Largest admissible dt that divides ``unit`` (so integer times are steps)."""
        return unit / math.ceil(unit / self.max_dt())


def discretize(M: MassDistribution, h: float, xi_max: float | None = None) -> LatticeString:
    """Lump the string onto nodes i h, 0 ≤ i h ≤ ξ_max."""
    if not h > 0:
        raise ValidationError("h must be positive")
    xi_max = M.xi_max if xi_max is None else float(xi_max)
    n = int(round(xi_max / h))
    nodes = h * np.arange(n + 1)
    m = lumped_masses(M, nodes)
    if len(M.atoms) > 1 and np.min(np.diff(M.atom_positions)) < h:
        log.warning("atoms closer than h=%g share lattice nodes", h)
    keep = m > 0
    if not np.any(keep):
        raise ValidationError("lattice carries no mass")
    x = nodes[keep]
    k = 1 / np.diff(x)
    return LatticeString(x, m[keep], k, float(h), nodes, m)


@dataclass
class WaveState:
    """Displacement at t and velocity at t − dt/2."""

    t: float
    u: np.ndarray
    v: np.ndarray
    dt: float
    steps: int = 0
    meta: dict = field(default_factory=dict)


def initial_state(lattice: LatticeString, u0, dt: float | None = None) -> WaveState:
    """Start at rest: v(−dt/2) = −(dt/2) a(u0) so that v(0) = 0."""
    dt = lattice.default_dt() if dt is None else float(dt)
    _check_dt(lattice, dt)
    u0 = _on_lattice(lattice, u0)
    return WaveState(0.0, u0.copy(), -0.5 * dt * lattice.accel(u0), dt)


def _on_lattice(lattice: LatticeString, u0) -> np.ndarray:
    if callable(u0):
        return np.asarray(u0(lattice.xi), dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape == lattice.xi.shape:
        return u0.copy()
    if u0.shape == lattice.full_xi.shape:
        return u0[lattice.full_m > 0].copy()
    raise ValidationError("initial data must be a callable or sampled on the lattice")


def _check_dt(lattice: LatticeString, dt: float):
    limit = lattice.max_dt()
    if not 0 < dt <= limit * (1 + 1e-12):
        raise CFLError(dt, limit)


def step_leapfrog(lattice: LatticeString, state: WaveState, dt: float | None = None,
                  n_steps: int = 1) -> WaveState:
    """Advance ``n_steps`` leapfrog steps: v += dt a(u); u += dt v."""
    dt = state.dt if dt is None else float(dt)
    if dt != state.dt:
        raise ValidationError("dt must match the state's staggering")
    _check_dt(lattice, dt)
    u, v = state.u.copy(), state.v.copy()
    m, k = lattice.m, lattice.k
    f = np.empty_like(u)
    for _ in range(int(n_steps)):
        du = k * np.diff(u)
        f[:] = 0.0
        f[:-1] += du
        f[1:] -= du
        v += dt * f / m
        u += dt * v
    return WaveState(state.t + n_steps * dt, u, v, dt, state.steps + int(n_steps), dict(state.meta))


def energy(lattice: LatticeString, state: WaveState) -> float:
    """½ Σ m v(t−dt/2) v(t+dt/2) + ½ Σ k (Δu)², exactly invariant under leapfrog."""
    v_next = state.v + state.dt * lattice.accel(state.u)
    return 0.5 * float(np.sum(lattice.m * state.v * v_next)) + lattice.stiffness_energy(state.u)


def simulate(lattice: LatticeString, u0, times, dt: float | None = None) -> list[WaveState]:
    """States at the requested times (each rounded to the nearest step)."""
    state = initial_state(lattice, u0, dt)
    out = []
    for t in sorted(float(x) for x in times):
        target = int(round(t / state.dt))
        if abs(target * state.dt - t) > 1e-9 * max(1.0, t):
            log.info("t=%g is not a multiple of dt=%g; using t=%g", t, state.dt, target * state.dt)
        if target > state.steps:
            state = step_leapfrog(lattice, state, n_steps=target - state.steps)
        out.append(state)
    return out


# ---------------------------------------------------------------------------
# Diagnostics.


def _mass_density(lattice: LatticeString, state: WaveState) -> np.ndarray:
    return lattice.m * state.u ** 2


def detect_front(lattice: LatticeString, state: WaveState, quantile: float = FRONT_QUANTILE) -> float:
    """Smallest node ξ_i whose tail mass ½ m_i u_i² + Σ_{j>i} m_j u_j² is ≤ quantile · total."""
    w = _mass_density(lattice, state)
    total = float(w.sum())
    if total == 0:
        return 0.0
    after = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    tail = 0.5 * w + after
    i = int(np.argmax(tail <= quantile * total))
    return float(lattice.xi[i])


def support_front(u0, xi) -> float:
    """Right end of the support of sampled initial data."""
    nz = np.nonzero(np.asarray(u0) != 0)[0]
    if len(nz) == 0:
        return 0.0
    i = nz[-1]
    return float(xi[min(i + 1, len(xi) - 1)])


def near_front_window(M: MassDistribution, front0: float, t: float, ell: float) -> tuple[float, float]:
    a = float(string_eikonal(M, front0))
    lo = string_eikonal_inverse(M, max(a + t - ell, 0.0))
    hi = string_eikonal_inverse(M, a + t)
    return float(lo), float(hi)


def near_front_mass(M: MassDistribution, lattice: LatticeString, state: WaveState,
                    front0: float, ell: float) -> float:
    """∫ u² dm over [L_{a+t−ℓ}, L_{a+t}], a = T(𝔣0), on the lattice."""
    lo, hi = near_front_window(M, front0, state.t, ell)
    if hi > lattice.xi[-1]:
        raise ValidationError("near-front window extends past the lattice")
    sel = (lattice.xi >= lo) & (lattice.xi <= hi)
    return float(np.sum(_mass_density(lattice, state)[sel]))


def diagnostics_row(M, lattice, state, front0, ell) -> dict:
    pred = wavefront(M, front0, state.t)
    try:
        nfm = near_front_mass(M, lattice, state, front0, ell)
    except ValidationError:
        nfm = math.nan
    return {"t": state.t, "front_predicted": float(pred), "front_detected": detect_front(lattice, state),
            "near_front_mass": nfm, "energy": energy(lattice, state)}


# ---------------------------------------------------------------------------
# Spectral synthesis.


def k_grid(k_max: float, n: int) -> np.ndarray:
    """Midpoints k_j = (j + ½) k_max / n; pass ``k_grid(...)**2`` as a λ-grid."""
    return (np.arange(n) + 0.5) * (k_max / n)


def _k_weights(k):
    """Trapezoid weights in k for a grid that starts near 0 (first cell reaches 0)."""
    w = np.empty_like(k)
    w[1:-1] = 0.5 * (k[2:] - k[:-2])
    w[0] = 0.5 * (k[1] - k[0]) + k[0]
    w[-1] = 0.5 * (k[-1] - k[-2])
    return w


def _transform(M, nodes, u0, lam):
    nodes = np.asarray(nodes, dtype=float)
    lam = np.asarray(lam, dtype=float)
    k = np.sqrt(lam)
    u = np.asarray(u0(nodes) if callable(u0) else u0, dtype=float)
    g = generalized_fourier(M, nodes, u, lam)
    dens = boundary_density(M, lam)
    return k, g, dens


def evolve_spectral(M: MassDistribution, nodes, u0, t: float, lam_grid) -> np.ndarray:
    """u(ξ, t) = ∫ φ(ξ, λ) cos(t√λ) g(λ) dσ(λ), with g the transform of u0.

    The λ-integral is a trapezoid rule in k = √λ against the exact boundary
    density of the string (homogeneous past ``xi_max``).
    """
    k, g, dens = _transform(M, nodes, u0, lam_grid)
    w = _k_weights(k) * 2 * k * dens
    mass = w * g * g
    if mass.sum() > 0 and mass[int(0.9 * len(k)):].sum() > SPECTRAL_TAIL_WARN * mass.sum():
        log.warning("transform keeps more than 1%% of its mass near the end of the lambda grid")
    coef = np.cos(t * k) * g * w
    nodes = np.asarray(nodes, dtype=float)
    out = np.zeros(len(nodes))
    for s in range(0, len(k), K_CHUNK):
        sl = slice(s, s + K_CHUNK)
        out += phi_on_nodes(M, nodes, k[sl] ** 2 + 0j).real @ coef[sl]
    return out


# ---------------------------------------------------------------------------
# Traveling-wave profile.


def string_szego_outer(M: MassDistribution, lam, eps: float = 1e-3):
    """D_{μσ1}(√λ + iε) for the symmetrized spectral measure of the string."""
    sigma = SpectralMeasure("halfline", lam, boundary_density(M, lam),
                            tail=PowerTail(-0.5, 1 / (math.pi * math.sqrt(M.tail_rho))))
    mu = symmetrize_halfline(sigma)
    return szego_function(mu, np.sqrt(lam) + 1j * eps, check_poisson=False)


@dataclass
class TravelingWave:
    eta: np.ndarray
    G: np.ndarray
    norm_G: float            # ‖G‖²_{L²(ℝ)} on the η-grid
    norm_g: float            # ‖g χ_ac‖²_{L²(σ)}
    k: np.ndarray
    g: np.ndarray
    D: np.ndarray

    @property
    def norm_ratio(self) -> float:
        return self.norm_G / (2 * self.norm_g) if self.norm_g else math.nan

    def __call__(self, eta):
        return np.interp(eta, self.eta, self.G, left=0.0, right=0.0)


def traveling_wave_profile(M: MassDistribution, nodes, u0, eta_grid, lam_grid, *,
                           eps: float = 1e-3, check_szego: bool = True) -> TravelingWave:
    """G(η) = (2/π) ∫_0^∞ Re(D(k) e^{iηk}) g(k²) dk, D the outer function of μσ1.

    This is the profile integral written in k = √λ.  The string must be in
    the Szegő class; the check uses the string criterion on the truncation.
    """
    if check_szego:
        rep = string_szego_criterion(M)
        if rep.verdict == Verdict.NOT_SZEGO:
            raise DomainError(f"string is not in the Szego class ({rep.reason})")
    k, g, dens = _transform(M, nodes, u0, lam_grid)
    D = string_szego_outer(M, np.asarray(lam_grid, dtype=float), eps)
    eta = np.asarray(eta_grid, dtype=float)
    w = _k_weights(k)
    F = D * g * w
    G = np.zeros(len(eta))
    for s in range(0, len(eta), K_CHUNK):
        sl = slice(s, s + K_CHUNK)
        G[sl] = (2 / math.pi) * np.real(np.exp(1j * np.outer(eta[sl], k)) @ F)
    norm_G = float(np.trapezoid(G * G, eta))
    norm_g = float(np.sum(w * 2 * k * dens * g * g))
    return TravelingWave(eta, G, norm_G, norm_g, k, g, D)


def modified_free_evolution(M: MassDistribution, G, t: float, xi) -> np.ndarray:
    """½ χ_ac ρ^{-1/4}(ξ) G(T(ξ) − t); zero at atoms and where ρ = 0."""
    xi = np.asarray(xi, dtype=float)
    rho = M.density(xi)
    ac = rho > 0
    if M.atoms:
        ac &= ~np.isin(xi, M.atom_positions)
    Gf = G if callable(G) else (lambda e: np.interp(e, G[0], G[1], left=0.0, right=0.0))
    out = np.zeros(len(xi))
    out[ac] = 0.5 * rho[ac] ** -0.25 * Gf(string_eikonal(M, xi[ac]) - t)
    return out


# ---------------------------------------------------------------------------
# Free Dirac group and Cesàro averages.


def free_dirac_evolution(Z, t: float, h: float = 1.0) -> np.ndarray:
    """e^{itD_0} Z for cell data Z of shape (n, 2) on cells [ih, (i+1)h), t a multiple of h.

    z1 is extended evenly and z2 oddly across τ = 0; the result is
    ½(z1(τ−t) + z1(τ+t) + i(z2(τ−t) − z2(τ+t)),
      −i(z1(τ−t) − z1(τ+t)) + z2(τ−t) + z2(τ+t))
    on n + |s| cells, s = t/h.
    """
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim != 2 or Z.shape[1] != 2:
        raise ValidationError("Z must have shape (n, 2)")
    s = t / h
    si = int(round(s))
    if abs(s - si) > 1e-9 * max(1.0, abs(s)):
        raise ValidationError("t must be an integer multiple of h")
    n = len(Z)
    out_n = n + abs(si)
    idx = np.arange(out_n)

    def sample(col, j, parity):
        vals = np.zeros(out_n, dtype=complex)
        mirror = j < 0
        jj = np.where(mirror, -j - 1, j)
        ok = jj < n
        vals[ok] = Z[jj[ok], col]
        vals[mirror & ok] *= parity
        return vals

    a1, b1 = sample(0, idx - si, 1), sample(0, idx + si, 1)
    a2, b2 = sample(1, idx - si, -1), sample(1, idx + si, -1)
    out = np.empty((out_n, 2), dtype=complex)
    out[:, 0] = 0.5 * (a1 + b1 + 1j * (a2 - b2))
    out[:, 1] = 0.5 * (-1j * (a1 - b1) + a2 + b2)
    return out


def dirac_norm(Z, h: float = 1.0) -> float:
    return math.sqrt(h * float(np.sum(np.abs(np.asarray(Z)) ** 2)))


def dirac_front(Z, h: float = 1.0) -> float:
    """Right end of the support of cell data."""
    nz = np.nonzero(np.any(np.asarray(Z) != 0, axis=1))[0]
    return 0.0 if len(nz) == 0 else float((nz[-1] + 1) * h)


def cesaro_localization(lattice: LatticeString, u0, b: float, T: float,
                        n_samples: int = CESARO_SAMPLES, dt: float | None = None) -> float:
    """(1/T)∫_0^T ∫_{[0,b]} u² dm dt by the midpoint rule at t_j = (j + ½) T/n."""
    times = (np.arange(n_samples) + 0.5) * (T / n_samples)
    state = initial_state(lattice, u0, dt)
    sel = lattice.xi <= b
    total = 0.0
    for t in times:
        target = int(round(t / state.dt))
        if target > state.steps:
            state = step_leapfrog(lattice, state, n_steps=target - state.steps)
        total += float(np.sum(lattice.m[sel] * state.u[sel] ** 2))
    return total / n_samples


# ---------------------------------------------------------------------------
# Initial profiles.


def bump_profile(center: float, radius: float):
    """cos²(π(ξ − c)/(2r)) on |ξ − c| < r; smooth, with front c + r."""
    def u0(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x - center) < radius, np.cos(np.pi * (x - center) / (2 * radius)) ** 2, 0.0)
    return u0


def ramp_profile(front: float, width: float):
    """1 on [0, front − width], falling linearly to 0 at ``front``."""
    def u0(x):
        return np.clip((front - np.asarray(x, dtype=float)) / width, 0.0, 1.0)
    return u0


def initial_profile(spec: dict):
    """(u0, front0) from {"kind": "bump", "center", "radius"} or {"kind": "ramp", "front", "width"}."""
    kind = spec.get("kind")
    try:
        if kind == "bump":
            c, r = float(spec["center"]), float(spec["radius"])
            if r <= 0:
                raise ValidationError("bump radius must be positive")
            return bump_profile(c, r), c + r
        if kind == "ramp":
            f, w = float(spec["front"]), float(spec["width"])
            if not 0 < w <= f:
                raise ValidationError("ramp needs 0 < width <= front")
            return ramp_profile(f, w), f
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed initial profile: {exc}") from exc
    raise ValidationError(f"unknown initial profile kind {kind!r}")
