"""Dirac potentials Q = [[q1, q2], [q2, -q1]] and their Szegő criteria.

N0 solves J N0' + Q N0 = 0, N0(0) = I, i.e. N0' = (JQ) N0 with the
symmetric traceless generator JQ = [[-q2, q1], [q1, q2]].  The reduced
Hamiltonian H = N0* N0 has det H = 1, so the eikonal is T(τ) = τ and the
canonical criterion uses the windows [n, n + 2].

For the two scalar forms, with g = ∫_0^τ q:
  diagonal Q = diag(q, -q):        N0 = [[cosh g, sinh g], [sinh g, cosh g]]
  antidiagonal Q = [[0, q], [q, 0]]: N0 = diag(e^-g, e^g)
and both reduce to ∫h ∫1/h − 4 with h = e^{2g}.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import ValidationError
from .report import SzegoReport, Verdict, make_report

log = logging.getLogger(__name__)

FORMS = ("diagonal", "antidiagonal", "general")
RK4_STEP = 1e-3
MIN_SUBCELLS = 16
PHASE_PER_SUBCELL = math.pi / 8
CHUNK_POINTS = 2_000_000
DISPERSION_SUP = 0.2
WVN_RESOLUTION_ALPHA = 3.0


# ---------------------------------------------------------------------------
# Scalar potentials.


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """q = values[k] on [breaks[k], breaks[k+1]); the last value continues."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.shape != v.shape or len(b) == 0 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValidationError("piecewise-constant q needs increasing breaks from 0 and matching values")
        if not np.all(np.isfinite(v)):
            raise ValidationError("q values must be finite")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def __call__(self, tau):
        k = np.clip(np.searchsorted(self.breaks, tau, side="right") - 1, 0, len(self.breaks) - 1)
        return self.values[k]

    def integral(self, tau):
        """g(τ) = ∫_0^τ q."""
        tau = np.asarray(tau, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.values[:-1] * np.diff(self.breaks))])
        k = np.clip(np.searchsorted(self.breaks, tau, side="right") - 1, 0, len(self.breaks) - 1)
        return cum[k] + self.values[k] * (tau - self.breaks[k])

    def to_dict(self):
        return {"kind": "pc", "breaks": self.breaks.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class WvN:
    """q(τ) = sin(τ^α)/τ^β for τ ≥ τ0, held at q(τ0) on [0, τ0]."""

    alpha: float
    beta: float
    tau0: float = 1.0

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValidationError("tau0 must be positive")

    def __call__(self, tau):
        t = np.maximum(np.asarray(tau, dtype=float), self.tau0)
        return np.sin(t ** self.alpha) / t ** self.beta

    def phase_advance(self, a, b):
        """|b'^α − a'^α| with both ends clipped at τ0."""
        a = np.maximum(a, self.tau0)
        b = np.maximum(b, self.tau0)
        return np.abs(b ** self.alpha - a ** self.alpha)

    def to_dict(self):
        return {"kind": "wvn", "alpha": self.alpha, "beta": self.beta, "tau0": self.tau0}


def _q_from_dict(d):
    kind = d.get("kind")
    if kind == "pc":
        return PiecewiseConstant(np.asarray(d["breaks"], float), np.asarray(d["values"], float))
    if kind == "wvn":
        return WvN(float(d["alpha"]), float(d["beta"]), float(d.get("tau0", 1.0)))
    raise ValidationError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True, eq=False)
class DiracPotential:
    form: str
    q1: object
    q2: object
    tau_max: float

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValidationError(f"form must be one of {FORMS}")
        if self.form == "diagonal" and self.q2 is not None:
            raise ValidationError("diagonal potentials have q2 = 0")
        if self.form == "antidiagonal" and self.q1 is not None:
            raise ValidationError("antidiagonal potentials have q1 = 0")
        if not self.tau_max > 0:
            raise ValidationError("tau_max must be positive")

    @classmethod
    def diagonal(cls, q, tau_max):
        return cls("diagonal", q, None, float(tau_max))

    @classmethod
    def antidiagonal(cls, q, tau_max):
        return cls("antidiagonal", None, q, float(tau_max))

    @property
    def scalar(self):
        """The single nonzero entry q of a diagonal or antidiagonal potential."""
        if self.form == "general":
            raise ValidationError("general potentials have no scalar reduction")
        return self.q1 if self.form == "diagonal" else self.q2

    def entries(self, tau):
        zero = np.zeros_like(np.asarray(tau, dtype=float))
        q1 = zero if self.q1 is None else self.q1(tau)
        q2 = zero if self.q2 is None else self.q2(tau)
        return q1, q2

    def breaks(self) -> np.ndarray:
        """Union of the piecewise-constant breaks; None if an entry is not piecewise constant."""
        out = [0.0]
        for q in (self.q1, self.q2):
            if isinstance(q, PiecewiseConstant):
                out += q.breaks.tolist()
            elif q is not None:
                return None
        return np.unique(np.asarray(out))

    def to_json(self) -> str:
        d = {"form": self.form, "tau_max": self.tau_max}
        if self.form == "general":
            d["q1"] = self.q1.to_dict() if self.q1 is not None else None
            d["q2"] = self.q2.to_dict() if self.q2 is not None else None
        else:
            d["q"] = self.scalar.to_dict()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text) -> "DiracPotential":
        d = json.loads(text) if isinstance(text, str) else text
        try:
            form = d["form"]
            tau_max = float(d["tau_max"])
            if form == "general":
                q1 = _q_from_dict(d["q1"]) if d.get("q1") else None
                q2 = _q_from_dict(d["q2"]) if d.get("q2") else None
                return cls("general", q1, q2, tau_max)
            q = _q_from_dict(d["q"])
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed potential JSON: {exc}") from exc
        if form == "diagonal":
            return cls.diagonal(q, tau_max)
        if form == "antidiagonal":
            return cls.antidiagonal(q, tau_max)
        raise ValidationError(f"form must be one of {FORMS}")


# ---------------------------------------------------------------------------
# Transfer matrix N0.


def _generator(q1, q2):
    """JQ = [[-q2, q1], [q1, q2]] for arrays of q1, q2."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return np.stack([np.stack([-q2, q1], -1), np.stack([q1, q2], -1)], -2)


def _expm_sym(G, s):
    """exp(s G) for symmetric traceless G (G² = r² I): cosh(rs) I + sinh(rs)/r G."""
    r = np.sqrt(np.maximum(-np.linalg.det(G), 0.0))
    rs = r * s
    small = np.abs(rs) < 1e-8
    shc = np.where(small, s * (1 + rs * rs / 6), np.sinh(rs) / np.where(r == 0, 1.0, r))
    return np.cosh(rs)[..., None, None] * np.eye(2) + shc[..., None, None] * G


def _int_expm_sym(G, length):
    """∫_0^ℓ exp(2sG) ds = sinh(2rℓ)/(2r) I + sinh²(rℓ)/r² G."""
    r = np.sqrt(np.maximum(-np.linalg.det(G), 0.0))
    x = 2 * r * length
    small = np.abs(x) < 1e-5
    safe_r = np.where(r == 0, 1.0, r)
    a = np.where(small, length * (1 + x * x / 6), np.sinh(x) / (2 * safe_r))
    b = np.where(small, length * length * (1 + x * x / 12), np.sinh(x / 2) ** 2 / safe_r ** 2)
    return a[..., None, None] * np.eye(2) + b[..., None, None] * G


def _scalar_g(q, tau, step=RK4_STEP):
    if isinstance(q, PiecewiseConstant):
        return q.integral(tau)
    tau = np.asarray(tau, dtype=float)
    top = float(np.max(tau)) if tau.size else 0.0
    n = max(int(math.ceil(top / step)), 2)
    n += n % 2
    grid = np.linspace(0.0, top, n + 1)
    g = _cumulative_simpson(q(grid), grid[1] - grid[0])
    return np.interp(tau, grid, g)


def transfer_N0(Q: DiracPotential, tau_stops, *, step: float = RK4_STEP) -> np.ndarray:
    """N0 at each stop, shape (len(stops), 2, 2).

    Diagonal and antidiagonal potentials use the closed forms in g = ∫q;
    general potentials use fixed-step RK4 (steps aligned to breaks).
    """
    stops = np.asarray(tau_stops, dtype=float)
    if np.any(stops < 0) or np.any(stops > Q.tau_max * (1 + 1e-12)):
        raise ValidationError("tau_stops must lie in [0, tau_max]")
    if Q.form != "general":
        g = _scalar_g(Q.scalar, stops, step)
        out = np.zeros(stops.shape + (2, 2))
        if Q.form == "diagonal":
            out[..., 0, 0] = out[..., 1, 1] = np.cosh(g)
            out[..., 0, 1] = out[..., 1, 0] = np.sinh(g)
        else:
            out[..., 0, 0] = np.exp(-g)
            out[..., 1, 1] = np.exp(g)
        return out
    return _rk4_N0(Q, stops, step)


def _rk4_N0(Q: DiracPotential, stops, step):
    order = np.argsort(stops)
    brk = Q.breaks()
    out = np.zeros(stops.shape + (2, 2))
    N = np.eye(2)
    t = 0.0

    def rhs(s, N):
        q1, q2 = Q.entries(s)
        return _generator(q1, q2) @ N

    for k in order:
        target = float(stops[k])
        nodes = [t]
        if brk is not None:
            nodes += [b for b in brk if t < b < target]
        nodes.append(target)
        for a, b in zip(nodes[:-1], nodes[1:]):
            n = max(int(math.ceil((b - a) / step)), 1)
            h = (b - a) / n
            # evaluate a piecewise-constant Q inside its cell, not at the break
            eps = 0.0 if brk is None else 1e-12 * max(1.0, abs(b))
            for i in range(n):
                s = a + i * h
                k1 = rhs(s, N)
                k2 = rhs(s + h / 2, N + h / 2 * k1)
                k3 = rhs(s + h / 2, N + h / 2 * k2)
                k4 = rhs(min(s + h, b - eps), N + h * k3)
                N = N + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = target
        out[k] = N
    return out


# ---------------------------------------------------------------------------
# Criteria.


def _n_windows(tau_max: float, n_max: int | None) -> int:
    avail = int(math.floor(tau_max)) - 1
    n = avail if n_max is None else min(int(n_max), avail)
    if n < 1:
        raise ValidationError("tau_max too short for a single window [0, 2]")
    return n


def dirac_szego_sum(Q: DiracPotential, n_max: int | None = None, *, step: float = RK4_STEP) -> SzegoReport:
    """Terms det ∫_n^{n+2} N0* N0 − 4 of the reduced Hamiltonian.

    Windows are evaluated with the propagator restarted at τ = n, which
    leaves the determinant unchanged (det N0 = 1) and avoids the cancellation
    of cosh² − sinh² for large g.  Piecewise-constant potentials are
    integrated exactly cell by cell; other potentials use RK4 and Simpson.
    """
    nw = _n_windows(Q.tau_max, n_max)
    brk = Q.breaks()
    if brk is not None:
        P, S = _unit_blocks_exact(Q, nw + 1)
    else:
        P, S = _unit_blocks_rk4(Q, nw + 1, step)
    W = S[:-1] + np.swapaxes(P[:-1], -1, -2) @ S[1:] @ P[:-1]
    det = W[:, 0, 0] * W[:, 1, 1] - W[:, 0, 1] * W[:, 1, 0]
    terms = det - 4.0
    return make_report(terms, np.arange(nw + 2, dtype=float),
                       diagnostics={"tau_max": Q.tau_max, "form": Q.form,
                                    "route": "exact cells" if brk is not None else f"rk4 step {step}"})


def _unit_blocks_exact(Q: DiracPotential, n_units: int):
    """Propagators P_k over [k, k+1] and S_k = ∫_k^{k+1} Φᵀ Φ with Φ(k) = I."""
    brk = Q.breaks()
    P = np.empty((n_units, 2, 2))
    S = np.empty((n_units, 2, 2))
    for k in range(n_units):
        cuts = np.concatenate([[k], brk[(brk > k) & (brk < k + 1)], [k + 1]])
        lengths = np.diff(cuts)
        q1, q2 = Q.entries(cuts[:-1])
        G = _generator(q1, q2)
        E = _expm_sym(G, lengths)
        I = _int_expm_sym(G, lengths)
        F = np.eye(2)
        acc = np.zeros((2, 2))
        for e, i in zip(E, I):
            acc += F.T @ i @ F
            F = e @ F
        P[k], S[k] = F, acc
    return P, S


def _unit_blocks_rk4(Q: DiracPotential, n_units: int, step: float):
    n = max(int(math.ceil(1 / step)), 2)
    n += n % 2
    h = 1.0 / n
    P = np.empty((n_units, 2, 2))
    S = np.empty((n_units, 2, 2))
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4, 2
    w *= h / 3
    for k in range(n_units):
        F = np.eye(2)
        acc = w[0] * F.T @ F
        for i in range(n):
            s = k + i * h
            g1 = _generator(*Q.entries(s))
            gm = _generator(*Q.entries(s + h / 2))
            g2 = _generator(*Q.entries(s + h))
            k1 = g1 @ F
            k2 = gm @ (F + h / 2 * k1)
            k3 = gm @ (F + h / 2 * k2)
            k4 = g2 @ (F + h * k3)
            F = F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            acc += w[i + 1] * F.T @ F
        P[k], S[k] = F, acc
    return P, S


def _exact_scalar_terms(q: PiecewiseConstant, nw: int) -> np.ndarray:
    """∫h ∫1/h − 4 on [n, n+2] for piecewise-constant q, exact per piece."""
    units = nw + 1
    Ip = np.empty(units)
    Im = np.empty(units)
    for k in range(units):
        cuts = np.concatenate([[k], q.breaks[(q.breaks > k) & (q.breaks < k + 1)], [k + 1]])
        g = 2 * (q.integral(cuts) - q.integral(float(k)))
        slope = 2 * q(cuts[:-1])
        ln = np.diff(cuts)
        Ip[k] = np.sum(np.exp(g[:-1]) * _exprel(slope * ln) * ln)
        Im[k] = np.sum(np.exp(-g[:-1]) * _exprel(-slope * ln) * ln)
    jump = 2 * (q.integral(np.arange(1, units, dtype=float)) - q.integral(np.arange(units - 1, dtype=float)))
    A = Ip[:-1] + np.exp(jump) * Ip[1:]
    B = Im[:-1] + np.exp(-jump) * Im[1:]
    return A * B - 4.0


def _exprel(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    return np.where(small, 1 + x / 2, np.expm1(x) / np.where(small, 1.0, x))


def dirac_special_criterion(q, form: str = "diagonal", n_max: int | None = None, *,
                            tau_max: float | None = None) -> SzegoReport:
    """Terms ∫_n^{n+2} h ∫_n^{n+2} 1/h − 4 with h = e^{2∫q}.

    ``q`` is a :class:`PiecewiseConstant` (exact integration), a :class:`WvN`
    (phase-resolved windows) or any vectorized callable (fixed subcells).
    The result does not depend on ``form``; it is kept for the report.
    """
    if form not in ("diagonal", "antidiagonal"):
        raise ValidationError("form must be diagonal or antidiagonal")
    if n_max is None and tau_max is None:
        raise ValidationError("give n_max or tau_max")
    nw = int(n_max) if n_max is not None else _n_windows(tau_max, None)
    diag = {"form": form, "n_windows": nw}
    if isinstance(q, PiecewiseConstant):
        terms = _exact_scalar_terms(q, nw)
        diag["route"] = "exact"
    else:
        wt = window_terms(q, nw)
        terms = wt["product"]
        diag.update(route="subcell simpson", quadrature_check=wt["check"],
                    max_subcells=wt["max_subcells"])
        if isinstance(q, WvN) and q.alpha > WVN_RESOLUTION_ALPHA:
            diag["resolution_warning"] = True
    return make_report(terms, np.arange(nw + 2, dtype=float), diagnostics=diag)


# ---------------------------------------------------------------------------
# Window quadrature for oscillatory potentials.


def _cumulative_simpson(y, h):
    """∫_0^{x_i} y at every node of a uniform grid with an even number of panels.

    Even nodes use composite Simpson; odd nodes add the half-panel rule
    h/12 (5 y0 + 8 y1 − y2) to the preceding even node.
    """
    y = np.asarray(y)
    out = np.zeros_like(y, dtype=float)
    y0, y1, y2 = y[..., 0:-2:2], y[..., 1:-1:2], y[..., 2::2]
    panels = h / 3 * (y0 + 4 * y1 + y2)
    out[..., 2::2] = np.cumsum(panels, axis=-1)
    out[..., 1:-1:2] = out[..., 0:-2:2] + h / 12 * (5 * y0 + 8 * y1 - y2)
    return out


def _cumulative_trapz(y, h):
    out = np.zeros_like(y, dtype=float)
    out[..., 1:] = np.cumsum(0.5 * h * (y[..., 1:] + y[..., :-1]), axis=-1)
    return out


def _simpson_mean(y, axis=-1):
    n = y.shape[axis] - 1
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4, 2
    return (y * w).sum(axis) / (3 * n)


def _window_subcells(q, n):
    if isinstance(q, WvN):
        adv = q.phase_advance(n.astype(float), n + 2.0)
        m = np.maximum(MIN_SUBCELLS, np.ceil(adv / PHASE_PER_SUBCELL))
    else:
        m = np.full(len(n), 4 * MIN_SUBCELLS, dtype=float)
    return (2 ** np.ceil(np.log2(m))).astype(int)


def _product_term(f):
    """4(⟨e^f⟩⟨e^-f⟩ − 1) = 4(⟨expm1 f⟩⟨expm1 −f⟩ + ⟨4 sinh²(f/2)⟩), f mean-zero."""
    with np.errstate(over="ignore", invalid="ignore"):
        a = _simpson_mean(np.expm1(f))
        b = _simpson_mean(np.expm1(-f))
        c = _simpson_mean(4 * np.sinh(f / 2) ** 2)
        t = 4 * (a * b + c)
    return np.where(np.isfinite(t), t, np.inf)


def window_terms(q: Callable, n_windows: int) -> dict:
    """Per-window product and dispersion terms for a scalar potential.

    Each window [n, n+2] is sampled independently with 2^k subcells chosen
    so the oscillation phase advances at most π/8 per subcell.  The local
    primitive g_n = 2∫_n^τ q is built by cumulative Simpson; its mean-zero
    part f gives the product term 4(⟨e^f⟩⟨e^-f⟩ − 1) and the dispersion term
    ∫ f².  ``check`` is the largest relative change of the product terms when
    the primitive is rebuilt with the trapezoid rule (a resolution probe).
    """
    n_all = np.arange(n_windows)
    m_all = _window_subcells(q, n_all)
    product = np.empty(n_windows)
    dispersion = np.empty(n_windows)
    sup = np.empty(n_windows)
    check = 0.0
    for m in np.unique(m_all):
        idx = n_all[m_all == m]
        per_chunk = max(CHUNK_POINTS // (m + 1), 1)
        for s in range(0, len(idx), per_chunk):
            n = idx[s:s + per_chunk].astype(float)
            h = 2.0 / m
            tau = n[:, None] + h * np.arange(m + 1)[None, :]
            y = q(tau)
            g = 2 * _cumulative_simpson(y, h)
            f = g - _simpson_mean(g)[:, None]
            pt = _product_term(f)
            product[idx[s:s + per_chunk]] = pt
            dispersion[idx[s:s + per_chunk]] = 2 * _simpson_mean(f * f)
            sup[idx[s:s + per_chunk]] = np.max(np.abs(g), axis=1)
            gt = 2 * _cumulative_trapz(y, h)
            ft = gt - _simpson_mean(gt)[:, None]
            pt2 = _product_term(ft)
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.abs(pt2 - pt) / np.maximum(np.abs(pt), 1e-300)
            rel = rel[np.isfinite(rel) & (np.abs(pt) > 1e-14)]
            if rel.size:
                check = max(check, float(rel.max()))
    return {"product": product, "dispersion": dispersion, "sup_g": sup,
            "check": check, "max_subcells": int(m_all.max())}


# ---------------------------------------------------------------------------
# Wigner-von Neumann regions.


@dataclass(frozen=True)
class RegionVerdict:
    region: str                      # "A1" | "A2" | "A3" | "Outside" | "Boundary"
    in_szego_class: bool | None


def _boundary_gap(alpha: float, beta: float) -> float:
    """Signed gap to the region's lower edge (positive inside, 0 on it)."""
    if alpha <= 0:
        return beta - alpha - 0.5
    if alpha < 1:
        return beta - 0.5
    return alpha + beta - 1.5


def wvn_region(alpha: float, beta: float) -> RegionVerdict:
    """Membership of (α, β) in the open region A1 ∪ A2 ∪ A3."""
    gap = _boundary_gap(float(alpha), float(beta))
    if gap == 0:
        return RegionVerdict("Boundary", None)
    if gap < 0:
        return RegionVerdict("Outside", False)
    if alpha <= 0:
        return RegionVerdict("A1", True)
    if alpha < 1:
        return RegionVerdict("A2", True)
    return RegionVerdict("A3", True)


def boundary_distance(alpha: float, beta: float) -> float:
    """Euclidean distance from (α, β) to the edge of A1 ∪ A2 ∪ A3."""
    p = np.array([alpha, beta], dtype=float)
    segs = [((-1e6, -1e6 + 0.5), (0.0, 0.5)), ((0.0, 0.5), (1.0, 0.5)), ((1.0, 0.5), (1e6, 1.5 - 1e6))]
    best = math.inf
    for a, b in segs:
        a, b = np.array(a), np.array(b)
        d = b - a
        t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0, 1)
        best = min(best, float(np.linalg.norm(p - (a + t * d))))
    return best


def wvn_numeric_check(alpha: float, beta: float, n_max: int = 100_000, tau0: float = 1.0) -> SzegoReport:
    """Product criterion for q = sin(τ^α)/τ^β, compared with :func:`wvn_region`."""
    q = WvN(float(alpha), float(beta), tau0)
    if alpha > WVN_RESOLUTION_ALPHA:
        log.warning("alpha=%g: oscillations are fast; subcell counts grow like n^(alpha-1)", alpha)
    rep = dirac_special_criterion(q, "diagonal", n_max)
    region = wvn_region(alpha, beta)
    rep.diagnostics.update(alpha=alpha, beta=beta, tau0=tau0, region=region.region,
                           region_in_class=region.in_szego_class)
    if region.in_szego_class is None:
        rep.verdict = Verdict.INCONCLUSIVE
        rep.reason = "boundary point of the region; not classified"
    else:
        expected = Verdict.SZEGO if region.in_szego_class else Verdict.NOT_SZEGO
        rep.diagnostics["agrees_with_region"] = rep.verdict == expected
    return rep


def dispersion_criterion(q, n_max: int) -> SzegoReport:
    """Terms ∫_n^{n+2} g̃_n² with g_n = 2∫_n^τ q and g̃_n its mean-zero part.

    The criterion is equivalent to the product one only when sup|g_n| → 0;
    ``diagnostics["applicable"]`` records whether the sampled windows show
    that (sup below 0.2 on the last half and not increasing at the end).
    """
    if isinstance(q, PiecewiseConstant):
        qq = q
        q = lambda t: qq(t)  # noqa: E731
    wt = window_terms(q, int(n_max))
    sup = wt["sup_g"]
    half = sup[len(sup) // 2:]
    tail = sup[-max(len(sup) // 8, 1):]
    applicable = bool(half.max() < DISPERSION_SUP and tail.max() <= half.max())
    rep = make_report(wt["dispersion"], np.arange(n_max + 2, dtype=float),
                      diagnostics={"applicable": applicable, "sup_g_tail": float(tail.max())})
    if not applicable:
        rep.reason += "; sup|g_n| does not vanish, criterion not applicable"
    return rep


def korey_check(f, x=None) -> dict:
    """ε = ⟨e^f⟩⟨e^-f⟩ − 1, lhs = ⟨|f − ⟨f⟩|⟩ and their ratio lhs/√ε.

    ``f`` holds samples on a uniform grid over the interval (endpoints
    included); means are trapezoid averages.  ``in_range`` is False when
    ε > 1, where the estimate is not asserted.
    """
    f = np.asarray(f, dtype=float)
    if x is None:
        x = np.linspace(0.0, 1.0, len(f))
    width = x[-1] - x[0]

    def mean(y):
        return float(np.trapezoid(y, x) / width)

    fbar = mean(f)
    g = f - fbar
    eps = mean(np.expm1(g)) * mean(np.expm1(-g)) + mean(4 * np.sinh(g / 2) ** 2)
    lhs = mean(np.abs(g))
    ratio = lhs / math.sqrt(eps) if eps > 0 else 0.0
    return {"eps": eps, "lhs": lhs, "ratio": ratio, "in_range": eps <= 1}
