"""Krein strings: piecewise-constant density plus point masses.

A string is stored semi-analytically.  ``breaks[k]`` starts a density cell
with value ``rho[k]``; the last cell continues past ``xi_max`` (the declared
tail).  ``M`` is right-continuous, so an atom at ξ belongs to M(ξ).

The diagonal Hamiltonian attached to a string uses τ = ξ + M(ξ):
a density cell of length Δξ becomes a τ-cell of length Δξ(1 + ρ) with
H = diag(ρ/(1+ρ), 1/(1+ρ)), and an atom of mass m becomes an indivisible
τ-cell of length m with H = diag(1, 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .canonical import Hamiltonian, WeylResult
from .measures import DomainError, PowerTail, SpectralMeasure, ValidationError
from .report import SzegoReport, Verdict, make_report

TRACE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MassDistribution:
    breaks: np.ndarray
    rho: np.ndarray
    atoms: tuple = ()
    xi_max: float = math.inf
    L: float = math.inf

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        r = np.asarray(self.rho, dtype=float)
        if b.ndim != 1 or len(b) == 0 or b.shape != r.shape:
            raise ValidationError("breaks and rho must be 1-d of equal length")
        if b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValidationError("breaks must start at 0 and increase strictly")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValidationError("density must be finite and nonnegative")
        atoms = tuple(sorted((float(x), float(m)) for x, m in self.atoms))
        if any(m <= 0 for _, m in atoms) or any(x < 0 for x, _ in atoms):
            raise ValidationError("atoms need positions >= 0 and positive masses")
        xi_max = float(self.xi_max)
        if not math.isfinite(xi_max):
            xi_max = max(b[-1], atoms[-1][0] if atoms else 0.0) + 1.0
        if xi_max <= b[-1] or (atoms and atoms[-1][0] >= xi_max):
            raise ValidationError("xi_max must lie beyond the last break and atom")
        if self.L != math.inf:
            raise ValidationError("only strings of infinite length are supported")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "xi_max", xi_max)
        if self.mass(xi_max) <= 0:
            raise ValidationError("string carries no mass on the truncation")

    @classmethod
    def constant(cls, rho: float, xi_max: float, atoms=()) -> "MassDistribution":
        return cls(np.array([0.0]), np.array([float(rho)]), atoms, xi_max)

    @property
    def tail_rho(self) -> float:
        return float(self.rho[-1])

    @property
    def atom_positions(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    def density(self, xi):
        k = np.clip(np.searchsorted(self.breaks, xi, side="right") - 1, 0, len(self.breaks) - 1)
        return self.rho[k]

    def _integral(self, values, xi):
        xi = np.asarray(xi, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(values[:-1] * np.diff(self.breaks))])
        k = np.clip(np.searchsorted(self.breaks, xi, side="right") - 1, 0, len(self.breaks) - 1)
        return cum[k] + values[k] * (xi - self.breaks[k])

    def ac_mass(self, xi):
        return self._integral(self.rho, xi)

    def atom_mass(self, xi, *, left: bool = False):
        """Σ m_j over ξ_j ≤ ξ (ξ_j < ξ with ``left``)."""
        if not self.atoms:
            return np.zeros_like(np.asarray(xi, dtype=float))
        cm = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
        idx = np.searchsorted(self.atom_positions, xi, side="left" if left else "right")
        return cm[idx]

    def mass(self, xi, *, left: bool = False):
        """M(ξ) (right-continuous), or M(ξ−) with ``left``."""
        return self.ac_mass(xi) + self.atom_mass(xi, left=left)

    def to_json(self) -> str:
        ends = list(self.breaks[1:]) + [self.xi_max]
        return json.dumps({
            "density": [{"to": float(e), "rho": float(r)} for e, r in zip(ends, self.rho)],
            "atoms": [{"xi": x, "m": m} for x, m in self.atoms],
            "L": "inf",
            "xi_max": self.xi_max,
        })

    @classmethod
    def from_json(cls, text) -> "MassDistribution":
        d = json.loads(text) if isinstance(text, str) else text
        try:
            dens = d["density"]
            ends = [float(c["to"]) for c in dens]
            rho = [float(c["rho"]) for c in dens]
            xi_max = float(d.get("xi_max", ends[-1]))
            L = d.get("L", "inf")
            if L not in ("inf", None) and float(L) != math.inf:
                raise ValidationError("only strings of infinite length are supported")
            atoms = [(float(a["xi"]), float(a["m"])) for a in d.get("atoms", [])]
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed string JSON: {exc}") from exc
        breaks = np.concatenate([[0.0], ends[:-1]])
        return cls(breaks, np.array(rho), atoms, xi_max)


# ---------------------------------------------------------------------------
# Events: density pieces and atoms in ξ order.


def _events(M: MassDistribution, x0: float, x1: float):
    """Yield ("cell", xi0, length, rho) and ("atom", xi, m) covering [x0, x1).

    Atoms at ``x0`` are included and atoms at ``x1`` are not, so chaining
    calls never double-counts.  The tail density continues past ``xi_max``.
    """
    if x1 <= x0:
        return
    b = M.breaks
    cuts = np.concatenate([[x0], b[np.searchsorted(b, x0, "right"):np.searchsorted(b, x1, "left")], [x1]])
    pos = M.atom_positions
    lo, hi = np.searchsorted(pos, x0, "left"), np.searchsorted(pos, x1, "left")
    atoms = M.atoms[lo:hi]
    ai = 0
    for a, e in zip(cuts[:-1], cuts[1:]):
        a = float(a)
        while ai < len(atoms) and atoms[ai][0] < e:
            if atoms[ai][0] > a:
                yield ("cell", a, atoms[ai][0] - a, float(M.density(a)))
                a = atoms[ai][0]
            yield ("atom", a, atoms[ai][1])
            ai += 1
        yield ("cell", a, float(e) - a, float(M.density(a)))


def string_to_hamiltonian(M: MassDistribution) -> Hamiltonian:
    """Diagonal unit-trace Hamiltonian diag(h2, h1) of the string."""
    lengths, cells = [], []
    for ev in _events(M, 0.0, M.xi_max):
        if ev[0] == "atom":
            lengths.append(ev[2])
            cells.append((1.0, 0.0, 0.0))
        else:
            _, _, dx, rho = ev
            lengths.append(dx * (1 + rho))
            cells.append((rho / (1 + rho), 1 / (1 + rho), 0.0))
    # merge equal neighbours so the roundtrip is canonical
    L, C = [lengths[0]], [cells[0]]
    for ln, c in zip(lengths[1:], cells[1:]):
        if c == C[-1] and c[1] > 0:
            L[-1] += ln
        else:
            L.append(ln)
            C.append(c)
    return Hamiltonian.from_cells(L, C)


def hamiltonian_to_string(H: Hamiltonian) -> MassDistribution:
    """Inverse of :func:`string_to_hamiltonian` on diagonal unit-trace H."""
    if not H.is_diagonal:
        raise ValidationError("Hamiltonian must be diagonal")
    if np.any(np.abs(H.h1 + H.h2 - 1) > TRACE_TOL):
        raise ValidationError("Hamiltonian must have unit trace")
    if H.h2[-1] == 0:
        raise ValidationError("terminal indivisible interval: the pair is not proper")
    dtau = np.diff(np.append(H.breaks, H.tau_max))
    xi = 0.0
    breaks, rho, atoms = [], [], []
    for a, b, d in zip(H.h1, H.h2, dtau):
        if b == 0:
            atoms.append((xi, d * a))
            continue
        r = a / b
        if not rho or r != rho[-1]:
            breaks.append(xi)
            rho.append(r)
        xi += d * b
    return MassDistribution(np.array(breaks), np.array(rho), atoms, xi)


# ---------------------------------------------------------------------------
# Eikonal.


def string_eikonal(M: MassDistribution, xi):
    """T(ξ) = ∫_0^ξ √ρ (atoms do not count)."""
    return M._integral(np.sqrt(M.rho), xi)


def string_eikonal_inverse(M: MassDistribution, eta, *, extend: bool = True):
    """L_η = inf{ξ : T(ξ) = η}; +inf if never reached.

    With ``extend`` (default) the tail density continues past ``xi_max``;
    otherwise points beyond the truncation return +inf.
    """
    eta = np.asarray(eta, dtype=float)
    rate = np.sqrt(M.rho)
    cum = M._integral(rate, M.breaks)
    k = np.clip(np.searchsorted(cum, eta, side="left") - 1, 0, len(cum) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = M.breaks[k] + (eta - cum[k]) / rate[k]
    xi = np.where(eta <= 0, 0.0, xi)
    xi = np.where((rate[k] == 0) & (eta > 0), np.inf, xi)
    if not extend:
        xi = np.where(xi > M.xi_max, np.inf, xi)
    return xi if xi.ndim else float(xi)


def wavefront(M: MassDistribution, front0: float, t: float):
    """Predicted front L_{T(𝔣0) + t}.

    The front moves at eikonal speed from the eikonal position of the
    initial front, so the travel time is measured in T, not in ξ.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if not 0 <= front0:
        raise ValidationError("front0 must be nonnegative")
    return string_eikonal_inverse(M, string_eikonal(M, front0) + t)


# ---------------------------------------------------------------------------
# Szegő criterion.


def string_szego_criterion(M: MassDistribution, eta_grid=None, *, n_terms: int | None = None,
                           extend: bool = True) -> SzegoReport:
    """Terms (ξ_{n+2} − ξ_n)(mass of [ξ_n, ξ_{n+2})) − (η_{n+2} − η_n)², ξ_n = L_{η_n}.

    An atom sitting exactly at some ξ_n is counted in the window starting
    there, matching the canonical windows [L_{η_n}, L_{η_{n+2}}].
    ``eta_grid`` defaults to η_n = n for ``n_terms`` terms (by default as
    many as fit in the truncation).
    """
    if eta_grid is None:
        if n_terms is None:
            n_terms = max(int(math.floor(float(string_eikonal(M, M.xi_max)))) - 2, 0)
        eta_grid = np.arange(n_terms + 2, dtype=float)
    eta = np.asarray(eta_grid, dtype=float)
    gaps = np.diff(eta)
    if len(eta) < 3 or np.any(gaps <= 0):
        raise ValidationError("eta grid must be strictly increasing with at least 3 points")
    if gaps.min() < 1e-3 * gaps.max():
        raise ValidationError("eta grid spacing is not bounded above and below")
    xi = string_eikonal_inverse(M, eta, extend=extend)
    diag = {"xi_max": M.xi_max, "tail_rho": M.tail_rho, "tail_extended": extend,
            "front_law": "L(T(f0) + t)"}
    bad = ~np.isfinite(xi)
    n_ok = len(eta) - 2
    forced = None
    if np.any(bad):
        first = int(np.argmax(bad))
        diag["unreached_eta"] = float(eta[first])
        n_ok = max(first - 2, 0)
        forced = (Verdict.NOT_SZEGO, "sqrt(rho) in L1 on window")
    a, b = xi[:n_ok], xi[2:n_ok + 2]
    Mb = M.mass(b, left=True)
    mass = Mb - M.mass(a, left=True)
    terms = (b - a) * mass - (eta[2:n_ok + 2] - eta[:n_ok]) ** 2
    # ξ-differences and mass differences carry rounding of order eps·ξ and eps·M(ξ)
    noise = 64 * np.finfo(float).eps * (np.maximum(b, 1.0) * mass + np.maximum(Mb, 1.0) * (b - a))
    terms = np.where(np.abs(terms) <= noise, 0.0, terms)
    rep = make_report(terms, eta[:n_ok + 2], diagnostics=diag, forced=forced)
    rep.diagnostics["xi"] = xi[:n_ok]
    rep.diagnostics["M_xi"] = M.mass(a)
    return rep


def two_material_terms(a: float, b: float, delta) -> np.ndarray:
    """(√a − √b)² (2 − δ_n − δ_{n+1})(δ_n + δ_{n+1})."""
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0) or np.any(d > 1):
        raise ValidationError("delta values must lie in [0, 1]")
    s = d[:-1] + d[1:]
    return (math.sqrt(a) - math.sqrt(b)) ** 2 * (2 - s) * s


def two_material_string(a: float, b: float, delta, xi_max: float | None = None) -> MassDistribution:
    """Unit cells [n, n+1): density b on the first 1 − δ_n, density a on the last δ_n.

    Past the last cell the string is homogeneous with density b.
    """
    d = np.asarray(delta, dtype=float)
    breaks, rho = [], []
    for n, dn in enumerate(d):
        if dn < 1:
            breaks.append(float(n))
            rho.append(b)
        if dn > 0:
            breaks.append(n + 1 - dn)
            rho.append(a)
    breaks.append(float(len(d)))
    rho.append(b)
    br, rh = [breaks[0]], [rho[0]]
    for x, r in zip(breaks[1:], rho[1:]):
        if r != rh[-1]:
            br.append(x)
            rh.append(r)
    if xi_max is None:
        xi_max = len(d) + 1.0
    return MassDistribution(np.array(br), np.array(rh), (), xi_max)


def log_pieces_string(power: int, n_cells: int) -> MassDistribution:
    """Density 1 with density-2 pieces of length 1/(n log(e+n)^power) ending at n = 1, 2, ..."""
    n = np.arange(1, n_cells + 1, dtype=float)
    return two_material_string(2.0, 1.0, 1 / (n * np.log(math.e + n) ** power))


# ---------------------------------------------------------------------------
# Transfer matrices φ, ψ.


@dataclass(frozen=True)
class StringTransfer:
    xi: float
    z: complex
    phi: complex
    psi: complex
    dphi: complex   # φ'(ξ−)
    dpsi: complex   # ψ'(ξ−)

    @property
    def wronskian(self) -> complex:
        return self.phi * self.dpsi - self.psi * self.dphi


def _cell_apply(state, z, dx, rho):
    """Advance (φ, φ', ψ, ψ') across a constant-density cell, vectorized over z."""
    p, dp, s, ds = state
    w = z * rho * dx * dx
    r = np.sqrt(w)
    small = np.abs(r) < 1e-6
    safe = np.where(small, 1.0, r)
    c = np.where(small, 1 - w / 2, np.cos(safe))
    S = np.where(small, 1 - w / 6, np.sin(safe) / safe)
    a, bb, cc = c, dx * S, -z * rho * dx * S
    return (a * p + bb * dp, cc * p + a * dp, a * s + bb * ds, cc * s + a * ds)


def _propagate(M: MassDistribution, xi: float, z):
    z = np.asarray(z, dtype=complex)
    one = np.ones_like(z)
    state = (one, 0 * one, 0 * one, one.copy())
    for ev in _events(M, 0.0, xi):
        if ev[0] == "atom":
            p, dp, s, ds = state
            state = (p, dp - z * ev[2] * p, s, ds - z * ev[2] * s)
        else:
            state = _cell_apply(state, z, ev[2], ev[3])
    return state


def string_transfer(M: MassDistribution, xi: float, z) -> StringTransfer:
    """φ, ψ and their left derivatives at ξ; ``z`` scalar."""
    if not 0 <= xi <= M.xi_max:
        raise ValidationError("xi must lie in [0, xi_max]")
    p, dp, s, ds = (complex(v) for v in _propagate(M, xi, complex(z)))
    return StringTransfer(float(xi), complex(z), p, s, dp, ds)


def phi_on_nodes(M: MassDistribution, nodes, z):
    """φ(ξ_i, z) at increasing nodes, shape (len(nodes), len(z))."""
    nodes = np.asarray(nodes, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty((len(nodes), len(z)), dtype=complex)
    one = np.ones_like(z)
    state = (one, 0 * one, 0 * one, one.copy())
    pos = 0.0
    for i, x in enumerate(nodes):
        for ev in _events(M, pos, x):
            if ev[0] == "atom":
                p, dp, s, ds = state
                state = (p, dp - z * ev[2] * p, s, ds - z * ev[2] * s)
            else:
                state = _cell_apply(state, z, ev[2], ev[3])
        pos = x
        out[i] = state[0]
    return out


def string_tw_function(M: MassDistribution, z) -> WeylResult:
    """q(z) = lim ψ/φ, closed with the exact tail solution.

    Past ``xi_max`` the density is the constant tail ρ∞, where the solution
    square-integrable at infinity satisfies f' = ik f with k = √(ρ∞ z),
    Im k > 0.  Hence q = (ikψ − ψ')/(ikφ − φ').  The residual compares the
    same matching done at the start of the tail cell.
    """
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise ValidationError("z must lie off [0, ∞)")
    k = _tail_k(M, z)

    def matched(x):
        p, dp, s, ds = (complex(v) for v in _propagate(M, x, z))
        return (1j * k * s - ds) / (1j * k * p - dp)

    q = matched(M.xi_max)
    t0 = max(float(M.breaks[-1]), M.atom_positions.max() if M.atoms else 0.0)
    ref = matched(0.5 * (t0 + M.xi_max))
    resid = abs(q - ref)
    return WeylResult(complex(q), float(resid), M.xi_max, bool(resid < 1e-6 * max(1.0, abs(q))))


def _tail_k(M: MassDistribution, z):
    k = np.sqrt(M.tail_rho * np.asarray(z, dtype=complex))
    return np.where(k.imag < 0, -k, k)


def boundary_density(M: MassDistribution, lam):
    """Exact spectral density σ'(λ) = k / (π (k² φ² + φ'²)), k = √(ρ∞ λ), for λ > 0.

    Valid for strings that are homogeneous past ``xi_max``; zero when the
    tail density vanishes (no absolutely continuous spectrum then).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValidationError("lambda must be positive")
    if M.tail_rho == 0:
        return np.zeros_like(lam)
    p, dp, _, _ = _propagate(M, M.xi_max, lam.astype(complex))
    p, dp = p.real, dp.real
    k = np.sqrt(M.tail_rho * lam)
    return k / (math.pi * (k * k * p * p + dp * dp))


def spectral_density_estimate(M: MassDistribution, lam_grid, eps: float) -> SpectralMeasure:
    """Half-line density Im q(λ + iε)/π on ``lam_grid``."""
    lam = np.asarray(lam_grid, dtype=float)
    if np.any(lam <= 0) or eps <= 0:
        raise ValidationError("lambda grid must be positive and eps > 0")
    z = lam + 1j * eps
    k = _tail_k(M, z)
    p, dp, s, ds = _propagate(M, M.xi_max, z)
    q = (1j * k * s - ds) / (1j * k * p - dp)
    return SpectralMeasure("halfline", lam, np.maximum(q.imag / math.pi, 0.0))


# ---------------------------------------------------------------------------
# Generalized Fourier transform.


def lumped_masses(M: MassDistribution, nodes) -> np.ndarray:
    """Dual-cell masses: the a.c. mass between midpoints plus atoms at the nearest node."""
    x = np.asarray(nodes, dtype=float)
    mids = np.concatenate([[x[0]], 0.5 * (x[1:] + x[:-1]), [x[-1]]])
    m = np.diff(M.ac_mass(mids))
    if M.atoms:
        idx = np.clip(np.searchsorted(mids, M.atom_positions, side="right") - 1, 0, len(x) - 1)
        np.add.at(m, idx, M.atom_masses)
    return m


def generalized_fourier(M: MassDistribution, nodes, v, lam, masses=None) -> np.ndarray:
    """g(λ) = ∫ v φ(·, λ) dm, with dm lumped onto ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    v = np.asarray(v, dtype=float)
    if masses is None:
        masses = lumped_masses(M, nodes)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    keep = v != 0
    if not np.any(keep):
        return np.zeros(len(lam))
    last = int(np.nonzero(keep)[0][-1]) + 1
    phi = phi_on_nodes(M, nodes[:last], lam.astype(complex)).real
    return (masses[:last] * v[:last]) @ phi


def homogeneous_density(rho0: float, lam):
    """σ'(λ) = 1/(π √(ρ0 λ)) for a string of constant density ρ0."""
    return 1 / (math.pi * np.sqrt(rho0 * np.asarray(lam, dtype=float)))


def spectral_measure(M: MassDistribution, lam) -> SpectralMeasure:
    """Half-line spectral measure sampled at ``lam`` from the exact boundary density.

    The tail beyond the grid is the homogeneous law of the tail density.
    """
    if M.tail_rho == 0:
        raise DomainError("string has no absolutely continuous spectrum")
    lam = np.asarray(lam, dtype=float)
    return SpectralMeasure("halfline", lam, boundary_density(M, lam),
                           tail=PowerTail(-0.5, 1 / (math.pi * math.sqrt(M.tail_rho))))
