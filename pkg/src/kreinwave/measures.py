"""Spectral measures on the line or half-line: log integrals, outer functions, entropy.

A measure is stored as a sampled absolutely continuous density (trapezoid
interpretation between samples), a list of atoms, and a power-law model for
the density beyond the sampled window.  Integrals against Poisson-type kernels
are closed with that model: the window is padded with a log-spaced tail grid
out to ``TAIL_DECADES`` decades past the last sample, and the remainder past
the padding is added from the leading term of the kernel's expansion.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

NEG_INFINITY = float("-inf")
ZERO_DENSITY = 1e-300
EPS_LADDER = (1e-1, 1e-2, 1e-3)
DEFAULT_EPS = 1e-3
TAIL_DECADES = 8
TAIL_POINTS_PER_DECADE = 200


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DomainError(ValueError):
    """The requested quantity is not defined for this input (e.g. non-Szego measure)."""


@dataclass(frozen=True)
class PowerTail:
    """Density model ``w(x) = c * |x|**p`` beyond the sampled window."""

    p: float
    c: float

    def __call__(self, x):
        return self.c * np.abs(x) ** self.p


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    support: str
    grid: np.ndarray
    density: np.ndarray
    atoms: tuple = ()
    tail: PowerTail | None = None

    def __post_init__(self):
        if self.support not in ("line", "halfline"):
            raise ValidationError(f"support must be 'line' or 'halfline', got {self.support!r}")
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != dens.shape or len(grid) < 2:
            raise ValidationError("grid and density must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(grid) > 0):
            raise ValidationError("grid must be strictly increasing")
        if not np.all(np.isfinite(dens)) or np.any(dens < 0):
            raise ValidationError("density must be finite and nonnegative")
        if self.support == "halfline" and grid[0] < 0:
            raise ValidationError("half-line grid must start at x >= 0")
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        if any(m <= 0 for _, m in atoms):
            raise ValidationError("atom masses must be positive")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "atoms", atoms)

    # -- tails -------------------------------------------------------------
    def tails(self) -> tuple[PowerTail | None, PowerTail]:
        """(left, right) power-law tails; the left one is None on the half-line."""
        if self.tail is not None:
            right = self.tail
            left = self.tail if self.support == "line" else None
            return left, right
        right = _fit_tail(self.grid, self.density, side=1)
        left = _fit_tail(self.grid, self.density, side=-1) if self.support == "line" else None
        return left, right

    # -- serialization -------------------------------------------------------
    def to_json(self) -> str:
        d = {
            "support": self.support,
            "grid": self.grid.tolist(),
            "density": self.density.tolist(),
            "atoms": [{"x": x, "m": m} for x, m in self.atoms],
        }
        if self.tail is not None:
            d["tail"] = {"p": self.tail.p, "c": self.tail.c}
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str | dict) -> "SpectralMeasure":
        d = json.loads(text) if isinstance(text, str) else text
        try:
            tail = d.get("tail")
            return cls(
                support=d["support"],
                grid=np.asarray(d["grid"], dtype=float),
                density=np.asarray(d["density"], dtype=float),
                atoms=tuple((a["x"], a["m"]) for a in d.get("atoms", [])),
                tail=PowerTail(float(tail["p"]), float(tail["c"])) if tail else None,
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed measure JSON: {exc}") from exc


def _fit_tail(grid, dens, side: int) -> PowerTail:
    """Least-squares power law through the last decade of samples on one side."""
    x = grid if side > 0 else -grid[::-1]
    w = dens if side > 0 else dens[::-1]
    xmax = x[-1]
    if xmax <= 0:
        raise ValidationError("grid does not extend to that side of the origin")
    sel = x >= xmax / 10.0
    if sel.sum() < 2:
        sel = np.zeros_like(sel)
        sel[-2:] = True
    xs, ws = x[sel], w[sel]
    if np.any(ws <= ZERO_DENSITY):
        return PowerTail(0.0, 0.0)
    if xs[0] <= 0:
        return PowerTail(0.0, float(ws[-1]))
    p, logc = np.polyfit(np.log(xs), np.log(ws), 1)
    return PowerTail(float(p), float(math.exp(logc)))


# ---------------------------------------------------------------------------
# Extended grids: window + log-spaced tails sampled from the power-law model.


@dataclass(frozen=True)
class _Extended:
    x: np.ndarray
    w: np.ndarray
    lo: float          # outer ends of the padded grid (where analytic remainders start)
    hi: float
    left: PowerTail | None
    right: PowerTail


def _extend(grid, dens, left: PowerTail | None, right: PowerTail) -> _Extended:
    xs, ws = [grid], [dens]
    hi = grid[-1]
    if hi > 0:
        t = _tail_nodes(hi)
        xs.append(t)
        ws.append(right(t))
        hi = t[-1]
    lo = grid[0]
    if left is not None and lo < 0:
        t = _tail_nodes(-lo)
        xs.insert(0, -t[::-1])
        ws.insert(0, left(t[::-1]))
        lo = -t[-1]
    return _Extended(np.concatenate(xs), np.concatenate(ws), lo, hi, left, right)


def _tail_nodes(x0: float) -> np.ndarray:
    n = TAIL_DECADES * TAIL_POINTS_PER_DECADE
    return x0 * np.logspace(0, TAIL_DECADES, n + 1)[1:]


def _trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _poisson_remainder(tail: PowerTail | None, x0: float) -> float:
    """∫_{x0}^∞ c x^p/(1+x^2) dx to leading order, x0 >> 1."""
    if tail is None or tail.c == 0:
        return 0.0
    if tail.p >= 1:
        return math.inf
    return tail.c * x0 ** (tail.p - 1) / (1 - tail.p)


def _log_remainder(tail: PowerTail | None, x0: float) -> float:
    """∫_{x0}^∞ log(c x^p)/(1+x^2) dx to leading order."""
    if tail is None:
        return 0.0
    if tail.c <= 0:
        return -math.inf
    a, b = math.log(tail.c), tail.p
    return (a + b * math.log(x0) + b) / x0


def _log_density(w):
    """log w with zeros mapped to -inf; zero runs are detected separately."""
    with np.errstate(divide="ignore"):
        return np.where(w > ZERO_DENSITY, np.log(np.maximum(w, ZERO_DENSITY)), -np.inf)


def _has_zero_run(w) -> bool:
    z = w <= ZERO_DENSITY
    return bool(np.any(z[1:] & z[:-1]))


def _log_trapz(logw, x, weight):
    """Trapezoid rule for ∫ log(w) * weight, exact in log for cells with one zero endpoint.

    A cell where the linear interpolant of w vanishes at one end contributes
    ``Δ (log w_other - 1) * weight(mid)``, the exact integral of the log of
    the interpolant.  Zero runs have to be excluded by the caller.
    """
    dx = np.diff(x)
    l0, l1 = logw[:-1], logw[1:]
    w0, w1 = weight[:-1], weight[1:]
    ok = np.isfinite(l0) & np.isfinite(l1)
    total = np.sum(0.5 * (l0[ok] * w0[ok] + l1[ok] * w1[ok]) * dx[ok])
    bad = ~ok
    if np.any(bad):
        other = np.where(np.isfinite(l0[bad]), l0[bad], l1[bad])
        wm = 0.5 * (w0[bad] + w1[bad])
        total += np.sum(dx[bad] * (other - 1.0) * wm)
    return float(total)


# ---------------------------------------------------------------------------
# Line integrals.


def poisson_integral(mu: SpectralMeasure) -> float:
    """(1/π)∫ dμ/(1+x²) on the line, atoms included."""
    if mu.support != "line":
        raise ValidationError("poisson_integral expects a full-line measure")
    left, right = mu.tails()
    ext = _extend(mu.grid, mu.density, left, right)
    val = _trapz(ext.w / (1 + ext.x**2), ext.x)
    val += _poisson_remainder(right, ext.hi) + _poisson_remainder(left, -ext.lo)
    val += sum(m / (1 + x * x) for x, m in mu.atoms)
    return val / math.pi


def _check_poisson_finite(mu: SpectralMeasure):
    if mu.support == "line":
        left, right = mu.tails()
        bad = any(t is not None and t.c > 0 and t.p >= 1 for t in (left, right))
    else:
        _, right = mu.tails()
        bad = right.c > 0 and right.p >= 0
    if bad:
        raise ValidationError("measure is not Poisson-finite under its tail model")


def _line_log_integral(grid, dens, left, right) -> float:
    """(1/π)∫ log w/(1+x²) dx without the Poisson-finiteness check."""
    if _has_zero_run(dens):
        return NEG_INFINITY
    for t in (left, right):
        if t is not None and t.c <= 0:
            return NEG_INFINITY
    ext = _extend(grid, dens, left, right)
    lw = _log_density(ext.w)
    val = _log_trapz(lw, ext.x, 1.0 / (1 + ext.x**2))
    val += _log_remainder(right, ext.hi) + _log_remainder(left, -ext.lo)
    return val / math.pi


def szego_log_integral(mu: SpectralMeasure) -> float:
    """J = (1/π)∫ log w(x)/(1+x²) dx, or ``NEG_INFINITY``.

    The full line is assumed to be covered by the grid plus the tail model;
    ``w`` vanishing on two consecutive samples means ``w = 0`` on a set of
    positive length and yields the sentinel.
    """
    if mu.support != "line":
        raise ValidationError("szego_log_integral expects a full-line measure")
    _check_poisson_finite(mu)
    left, right = mu.tails()
    return _line_log_integral(mu.grid, mu.density, left, right)


def szego_membership_halfline(sigma: SpectralMeasure) -> float:
    """∫_0^∞ log υ(x) / (√x (x+1)) dx for a half-line measure, or ``NEG_INFINITY``.

    With ``x = s²`` the integral becomes ``∫_ℝ log υ(s²)/(1+s²) ds``, which
    is evaluated as a line log integral (times π).  The density on
    ``[0, grid[0]]`` is taken constant.
    """
    if sigma.support != "halfline":
        raise ValidationError("expected a half-line measure")
    _check_poisson_finite(sigma)
    return _halfline_log_integral(sigma)


def _halfline_log_integral(sigma: SpectralMeasure) -> float:
    _, right = sigma.tails()
    s, w = _even_sqrt_grid(sigma.grid, sigma.density)
    # log(c x^p) = log(c s^{2p})
    sym = PowerTail(2 * right.p, right.c)
    return math.pi * _line_log_integral(s, w, sym, sym)


def _even_sqrt_grid(grid, values):
    """Map half-line samples at x to an even function of s = ±√x."""
    s = np.sqrt(grid)
    if s[0] > 0:
        s = np.concatenate([[0.0], s])
        values = np.concatenate([[values[0]], values])
    return np.concatenate([-s[:0:-1], s]), np.concatenate([values[:0:-1], values])


# ---------------------------------------------------------------------------
# Outer function.


def _cauchy_log_integral(ext: _Extended, ell, z):
    """∫ ℓ(t) (1/(t−z) − t/(t²+1)) dt for an array of z (Im z > 0).

    The kernel is integrated against ℓ(t) − ℓ(Re z) by the trapezoid rule and
    ℓ(Re z) times the closed-form kernel integral is added back.  This keeps
    the rule accurate when Im z is much smaller than the grid spacing.
    """
    x, lo, hi = ext.x, ext.lo, ext.hi
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    kernel2 = x / (x**2 + 1)
    dx = np.diff(x)
    wts = np.zeros_like(x)
    wts[:-1] += 0.5 * dx
    wts[1:] += 0.5 * dx
    out = np.empty(z.shape, dtype=complex)
    ell0_all = np.interp(z.real, x, ell)
    chunk = max(1, int(4e6 // len(x)))
    for i in range(0, len(z), chunk):
        zz = z[i:i + chunk, None]
        ell0 = ell0_all[i:i + chunk, None]
        kern = 1.0 / (x[None, :] - zz) - kernel2[None, :]
        part = ((ell[None, :] - ell0) * kern) @ wts
        z1 = zz[:, 0]
        closed = (np.log(hi - z1) - np.log(lo - z1)
                  - 0.5 * np.log((hi * hi + 1) / (lo * lo + 1)))
        out[i:i + chunk] = part + ell0[:, 0] * closed
    # Past the padded ends K(t) = z/t² + O(t⁻³), so
    #   ∫_X^∞ (a + b log t) z/t² dt = z (a + b log X + b)/X  on either side.
    for tail, x0 in ((ext.right, hi), (ext.left, -lo)):
        if tail is None:
            continue
        a, b = 0.5 * math.log(tail.c), 0.5 * tail.p
        out += z * (a + b * math.log(x0) + b) / x0
    return out


def _szego_prepare(mu: SpectralMeasure, check_poisson: bool = True) -> tuple[_Extended, np.ndarray]:
    if mu.support != "line":
        raise ValidationError("szego_function expects a full-line measure")
    if check_poisson:
        _check_poisson_finite(mu)
    left, right = mu.tails()
    if _line_log_integral(mu.grid, mu.density, left, right) == NEG_INFINITY:
        raise DomainError("measure is not in the Szego class (log integral diverges)")
    ext = _extend(mu.grid, mu.density, left, right)
    ell = 0.5 * _log_density(ext.w)
    if not np.all(np.isfinite(ell)):
        # isolated zeros: integrable log singularities; clip to the smallest
        # representable level so the kernel sum stays finite
        ell = np.where(np.isfinite(ell), ell, 0.5 * math.log(ZERO_DENSITY))
    return ext, ell


def szego_function(mu: SpectralMeasure, z, *, check_poisson: bool = True):
    """Outer function D_μ(z) = exp((1/πi)∫ log√w (1/(x−z) − x/(x²+1)) dx).

    ``z`` may be a scalar or an array in the open upper half-plane.  Boundary
    values are requested as ``x + iε`` (see :func:`szego_boundary`).
    ``check_poisson=False`` skips the Poisson-finiteness check on ``μ``
    itself; only the log integral must converge for ``D_μ`` to exist.
    """
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.imag <= 0):
        raise ValidationError("z must lie in the open upper half-plane")
    ext, ell = _szego_prepare(mu, check_poisson)
    vals = np.exp(_cauchy_log_integral(ext, ell, zz.ravel()) / (math.pi * 1j))
    return vals.reshape(zz.shape) if zz.ndim else complex(vals[0])


def szego_boundary(mu: SpectralMeasure, x, eps: float = DEFAULT_EPS, **kw):
    """D_μ(x + iε) on real points ``x``."""
    return szego_function(mu, np.asarray(x, dtype=float) + 1j * eps, **kw)


def boundary_ladder(mu: SpectralMeasure, x, ladder=EPS_LADDER, **kw) -> dict:
    """Boundary values along the ε-ladder with successive differences.

    Returns ``{"eps": ladder, "values": [...], "diffs": [...], "value": last}``;
    the differences expose the first-order convergence in ε.
    """
    vals = [szego_boundary(mu, x, eps, **kw) for eps in ladder]
    diffs = [np.max(np.abs(vals[i + 1] - vals[i])) for i in range(len(vals) - 1)]
    return {"eps": tuple(ladder), "values": vals, "diffs": diffs, "value": vals[-1]}


def scattering_multiplier(mu: SpectralMeasure, x_grid, eps: float = DEFAULT_EPS):
    """s(x) = conj(D_μ)/D_μ at x + iε, computed as exp(−2i arg D) so |s| = 1 exactly."""
    d = szego_boundary(mu, x_grid, eps)
    return np.exp(-2j * np.angle(d))


def entropy(mu: SpectralMeasure) -> float:
    """K = log I − J with I = (1/π)∫ dμ/(1+x²) (atoms included, no linear term)."""
    J = szego_log_integral(mu)
    if J == NEG_INFINITY:
        raise DomainError("entropy is infinite for a non-Szego measure")
    return math.log(poisson_integral(mu)) - J


# ---------------------------------------------------------------------------
# Strings: half-line measures and their even symmetrization.


def symmetrize_halfline(sigma: SpectralMeasure) -> SpectralMeasure:
    """Full-line measure with μ([E1, E2]) = (π/2) σ([E1², E2²]) on both sides.

    Its density is ``π |x| σ'(x²)``; an atom of σ at λ > 0 splits into two
    atoms of mass ``π m / 2`` at ``±√λ`` (an atom at 0 keeps mass ``π m``).
    """
    if sigma.support != "halfline":
        raise ValidationError("expected a half-line measure")
    # π|s|σ'(s²) has a finite limit at s = 0, so the origin itself is left
    # out and bridged linearly between ±√λ_1 instead of forced to zero
    pos = sigma.grid > 0
    r = np.sqrt(sigma.grid[pos])
    s = np.concatenate([-r[::-1], r])
    v = np.concatenate([sigma.density[pos][::-1], sigma.density[pos]])
    w = math.pi * np.abs(s) * v
    _, right = sigma.tails()
    # π s c s^{2p} = π c |s|^{2p+1}
    tail = PowerTail(2 * right.p + 1, math.pi * right.c)
    atoms = []
    for lam, m in sigma.atoms:
        if lam == 0:
            atoms.append((0.0, math.pi * m))
        else:
            r = math.sqrt(lam)
            atoms += [(-r, 0.5 * math.pi * m), (r, 0.5 * math.pi * m)]
    return SpectralMeasure("line", s, w, tuple(sorted(atoms)), tail)


def string_szego_function(sigma: SpectralMeasure, z, eps: float | None = None):
    """D^(S)_σ(z) = D_{μ_σ1}(√z) / (√π z^{1/4}) for a half-line spectral measure.

    ``√z`` and ``z^{1/4}`` use the principal branch, so ``√z`` lies in the
    upper half-plane for z off [0, ∞).  With ``eps`` given, ``z`` is read as
    real λ > 0 and the outer function is taken at ``√λ + iε``.
    """
    if sigma.support != "halfline":
        raise ValidationError("expected a half-line measure")
    if _halfline_log_integral(sigma) == NEG_INFINITY:
        raise DomainError("spectral measure is not in the half-line Szego class")
    mu = symmetrize_halfline(sigma)
    z = np.asarray(z, dtype=complex)
    if eps is not None:
        root = np.sqrt(z.real) + 1j * eps
    else:
        root = np.sqrt(z)
        if np.any(root.imag <= 0):
            raise ValidationError("z must lie off [0, ∞) unless eps is given")
    d = szego_function(mu, root, check_poisson=False)
    quarter = np.sqrt(root)
    return d / (math.sqrt(math.pi) * quarter)
