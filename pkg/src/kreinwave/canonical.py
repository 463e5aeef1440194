"""Canonical Hamiltonian systems J Θ' = z H Θ with piecewise-constant H.

J = [[0, -1], [1, 0]].  On a cell with constant H the propagator is
exp(A), A = -z Δ J H.  Since tr(JH) = 0, A² = -ω² I with ω² = z² Δ² det H,
so exp(A) = cos ω I + (sin ω / ω) A exactly, for any complex z and for
rank-one cells (ω = 0) alike.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .measures import ValidationError
from .report import SzegoReport, Verdict, make_report

J = np.array([[0.0, -1.0], [1.0, 0.0]])
WEYL_TOL = 1e-6
WEYL_MAX_DOUBLINGS = 16


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Piecewise-constant H on [0, ∞).

    Cell ``k`` is ``[breaks[k], breaks[k+1])`` with entries ``h1[k], h2[k], h[k]``
    (H = [[h1, h], [h, h2]]); the last cell starts at ``breaks[-1]`` and is
    taken to continue past ``tau_max`` (declared tail).
    """

    breaks: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h: np.ndarray
    tau_max: float

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        h1, h2, h = (np.asarray(a, dtype=float) for a in (self.h1, self.h2, self.h))
        if b.ndim != 1 or len(b) == 0 or not (h1.shape == h2.shape == h.shape == b.shape):
            raise ValidationError("breaks and cell arrays must be 1-d of equal length")
        if b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValidationError("breaks must start at 0 and increase strictly")
        if not self.tau_max > b[-1]:
            raise ValidationError("tau_max must exceed the last break")
        tr = h1 + h2
        det = h1 * h2 - h * h
        if np.any(tr <= 0) or np.any(h1 < 0) or np.any(h2 < 0):
            raise ValidationError("each cell needs positive trace and nonnegative diagonal")
        if np.any(det < -1e-12 * tr * tr):
            raise ValidationError("each cell must be positive semidefinite")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "tau_max", float(self.tau_max))

    @classmethod
    def from_cells(cls, lengths, cells, tail_length=None) -> "Hamiltonian":
        """Build from cell lengths and (h1, h2, h) triples."""
        lengths = np.asarray(lengths, dtype=float)
        cells = np.asarray(cells, dtype=float).reshape(-1, 3)
        breaks = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
        tau_max = float(np.sum(lengths)) if tail_length is None else float(np.sum(lengths[:-1]) + tail_length)
        return cls(breaks, cells[:, 0], cells[:, 1], cells[:, 2], tau_max)

    @property
    def det(self) -> np.ndarray:
        return np.maximum(self.h1 * self.h2 - self.h * self.h, 0.0)

    @property
    def ends(self) -> np.ndarray:
        return np.append(self.breaks[1:], self.tau_max)

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.h == 0))

    def matrices(self) -> np.ndarray:
        return np.stack([np.stack([self.h1, self.h], -1), np.stack([self.h, self.h2], -1)], -2)

    def to_json(self) -> str:
        return json.dumps({
            "breaks": self.breaks.tolist(),
            "cells": [{"h1": a, "h2": b, "h": c} for a, b, c in zip(self.h1, self.h2, self.h)],
            "tau_max": self.tau_max,
        })

    @classmethod
    def from_json(cls, text) -> "Hamiltonian":
        d = json.loads(text) if isinstance(text, str) else text
        try:
            cells = d["cells"]
            return cls(np.asarray(d["breaks"], dtype=float),
                       [c["h1"] for c in cells], [c["h2"] for c in cells],
                       [c.get("h", 0.0) for c in cells], float(d["tau_max"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed Hamiltonian JSON: {exc}") from exc


@dataclass(frozen=True)
class TransferState:
    tau: float
    z: complex
    theta: np.ndarray   # (Θ⁺, Θ⁻)
    phi: np.ndarray     # (Φ⁺, Φ⁻)

    @property
    def wronskian(self) -> complex:
        return complex(self.theta[0] * self.phi[1] - self.theta[1] * self.phi[0])


# ---------------------------------------------------------------------------
# Propagators.


def _sinc(w):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-6
    safe = np.where(small, 1.0, w)
    return np.where(small, 1 - w * w / 6, np.sin(safe) / safe)


def cell_propagator(hmat, z, length, *, scaled=False):
    """exp(−z Δ J H) for one or many cells.

    ``hmat`` has shape (..., 2, 2).  With ``scaled=True`` the matrix is
    multiplied by exp(−|Im ω|), which keeps very long cells finite; ratios
    of solution components are unaffected.
    """
    hmat = np.asarray(hmat, dtype=float)
    z = np.asarray(z, dtype=complex)
    length = np.asarray(length, dtype=float)
    det = np.maximum(hmat[..., 0, 0] * hmat[..., 1, 1] - hmat[..., 0, 1] * hmat[..., 1, 0], 0.0)
    omega = z * length * np.sqrt(det)
    A = -(z * length)[..., None, None] * (J @ hmat)
    eye = np.eye(2)
    if not scaled:
        return np.cos(omega)[..., None, None] * eye + _sinc(omega)[..., None, None] * A
    a = np.abs(omega.imag)
    ep = np.exp(1j * omega - a)
    em = np.exp(-1j * omega - a)
    cos_s = 0.5 * (ep + em)
    small = np.abs(omega) < 1e-6
    safe = np.where(small, 1.0, omega)
    sinc_s = np.where(small, (1 - omega * omega / 6) * np.exp(-a), (ep - em) / (2j * safe))
    return cos_s[..., None, None] * eye + sinc_s[..., None, None] * A


def _cells_between(H: Hamiltonian, t0: float, t1: float):
    """(matrices, lengths) of the cell pieces covering [t0, t1] (tail extended)."""
    starts = H.breaks
    ends = np.append(starts[1:], np.inf)
    i0 = int(np.searchsorted(starts, t0, side="right")) - 1
    i1 = int(np.searchsorted(starts, t1, side="left")) - 1
    idx = np.arange(max(i0, 0), max(i1, i0) + 1)
    lo = np.maximum(starts[idx], t0)
    hi = np.minimum(ends[idx], t1)
    keep = hi > lo
    mats = H.matrices()[idx[keep]]
    return mats, (hi - lo)[keep]


def integrate_transfer(H: Hamiltonian, z: complex, tau_stops) -> list[TransferState]:
    """Θ and Φ at each stop (Θ(0) = (1, 0), Φ(0) = (0, 1))."""
    stops = np.asarray(tau_stops, dtype=float)
    if np.any(stops < 0) or np.any(stops > H.tau_max * (1 + 1e-12)):
        raise ValidationError("tau_stops must lie in [0, tau_max]")
    order = np.argsort(stops)
    F = np.eye(2, dtype=complex)
    t = 0.0
    out: list[TransferState | None] = [None] * len(stops)
    for k in order:
        s = float(stops[k])
        mats, lens = _cells_between(H, t, s)
        if len(lens):
            P = cell_propagator(mats, z, lens)
            for m in P:
                F = m @ F
        t = max(t, s)
        out[k] = TransferState(s, complex(z), F[:, 0].copy(), F[:, 1].copy())
    return out


# ---------------------------------------------------------------------------
# Eikonal.


def _cumulative(H: Hamiltonian, values: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(values * np.diff(np.append(H.breaks, H.tau_max)))])


def _piecewise_integral(H: Hamiltonian, values, tau):
    """∫_0^τ f for piecewise-constant f (tail cell continued past tau_max)."""
    tau = np.asarray(tau, dtype=float)
    cum = _cumulative(H, values)[:-1]
    k = np.clip(np.searchsorted(H.breaks, tau, side="right") - 1, 0, len(H.breaks) - 1)
    return cum[k] + values[k] * (tau - H.breaks[k])


def eikonal(H: Hamiltonian, tau):
    """T(τ) = ∫_0^τ √det H."""
    return _piecewise_integral(H, np.sqrt(H.det), tau)


def eikonal_inverse(H: Hamiltonian, eta, *, extend: bool = False):
    """L_η = min{τ : T(τ) = η}; +inf when η is not reached by tau_max.

    With ``extend=True`` the tail cell is continued past tau_max (infinite
    only if the tail has det H = 0).
    """
    eta = np.asarray(eta, dtype=float)
    rate = np.sqrt(H.det)
    cum = _cumulative(H, rate)[:-1]           # T at each break
    k = np.searchsorted(cum, eta, side="left") - 1
    k = np.clip(k, 0, len(cum) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = H.breaks[k] + (eta - cum[k]) / rate[k]
    tau = np.where(eta <= 0, 0.0, tau)
    tau = np.where((rate[k] == 0) & (eta > 0), np.inf, tau)
    if not extend:
        tau = np.where(tau > H.tau_max * (1 + 1e-14), np.inf, tau)
    return tau if tau.ndim else float(tau)


def integrated_H(H: Hamiltonian, a, b) -> np.ndarray:
    """∫_a^b H dτ for arrays of endpoints; returns (..., 3) = (h1, h2, h) integrals."""
    out = [(_piecewise_integral(H, v, b) - _piecewise_integral(H, v, a)) for v in (H.h1, H.h2, H.h)]
    return np.stack(out, -1)


def szego_sum(H: Hamiltonian, partition=None, *, n_terms: int | None = None,
              extend: bool = True) -> SzegoReport:
    """Terms det ∫_{L(α_n)}^{L(α_{n+2})} H dτ − (α_{n+2} − α_n)².

    ``partition`` defaults to α_n = n with as many terms as fit under
    T(tau_max) (or ``n_terms``).  With ``extend`` (default) the declared tail
    cell continues past tau_max; a tail with det H = 0 means √det H ∈ L¹ and
    gives a NotSzego verdict as soon as some L(α_n) is infinite.
    """
    if partition is None:
        if n_terms is None:
            n_terms = max(int(math.floor(float(eikonal(H, H.tau_max)))) - 2, 0)
        partition = np.arange(n_terms + 2, dtype=float)
    alpha = np.asarray(partition, dtype=float)
    gaps = np.diff(alpha)
    if len(alpha) < 3 or np.any(gaps <= 0):
        raise ValidationError("partition must be strictly increasing with at least 3 points")
    if gaps.min() < 1e-3 * gaps.max():
        raise ValidationError("partition spacing is not bounded above and below")
    L = eikonal_inverse(H, alpha, extend=extend)
    diag = {"tau_max": H.tau_max, "tail_extended": extend,
            "tail_cell": [float(H.h1[-1]), float(H.h2[-1]), float(H.h[-1])]}
    if np.any(~np.isfinite(L)):
        first = int(np.argmax(~np.isfinite(L)))
        diag["unreached_eta"] = float(alpha[first])
        finite = max(first - 2, 0)
        a_, b_ = L[:finite], L[2:finite + 2]
        I = integrated_H(H, a_, b_)
        terms = _window_terms(I, b_, alpha[2:finite + 2] - alpha[:finite])
        return make_report(terms, alpha[:finite + 2], diagnostics=diag,
                           forced=(Verdict.NOT_SZEGO, "sqrt(det H) in L1 on window"))
    I = integrated_H(H, L[:-2], L[2:])
    terms = _window_terms(I, L[2:], alpha[2:] - alpha[:-2])
    return make_report(terms, alpha, diagnostics=diag)


def _window_terms(I, right, width):
    """det I − width², with cancellation noise from the cumulative integrals set to 0.

    The integrals are differences of running sums, so each entry carries an
    error of order eps·tau; terms below that level are not resolved.
    """
    terms = I[:, 0] * I[:, 1] - I[:, 2] ** 2 - width ** 2
    noise = 64 * np.finfo(float).eps * np.maximum(np.abs(right), 1.0) * (I[:, 0] + I[:, 1])
    return np.where(np.abs(terms) <= noise, 0.0, terms)


# ---------------------------------------------------------------------------
# Weyl function.


@dataclass(frozen=True)
class WeylResult:
    value: complex
    residual: float
    tau: float
    converged: bool


def weyl_m(H: Hamiltonian, z: complex, *, tol: float = WEYL_TOL,
           max_doublings: int = WEYL_MAX_DOUBLINGS, eps_min: float = 1e-8) -> WeylResult:
    """m(z) = lim Φ⁻/Θ⁻, truncated where successive doublings agree.

    The ratio is evaluated at tau_max/2 and tau_max, then tau is doubled
    (continuing the tail cell) until the change drops below ``tol`` or
    ``max_doublings`` is reached.  The fundamental matrix is rescaled after
    every cell so long windows cannot overflow.
    """
    z = complex(z)
    if z.imag < eps_min:
        raise ValidationError("weyl_m needs Im z > 0")
    F = np.eye(2, dtype=complex)
    t = 0.0

    def advance(F, t, target):
        ms, ls = _cells_between(H, t, target)
        for P in cell_propagator(ms, z, ls, scaled=True):
            F = P @ F
            F = F / np.max(np.abs(F))
        return F

    def ratio(F):
        # F[1, 0] = 0 only before any cell with h2 > 0; the next doubling fixes it
        return F[1, 1] / F[1, 0] if F[1, 0] != 0 else complex(math.inf)

    target = H.tau_max / 2
    F = advance(F, t, target)
    t = target
    prev = ratio(F)
    resid = math.inf
    for _ in range(max_doublings + 1):
        target = 2 * t
        F = advance(F, t, target)
        t = target
        cur = ratio(F)
        resid = abs(cur - prev)
        prev = cur
        if resid < tol * max(1.0, abs(cur)):
            return WeylResult(complex(cur), float(resid), t, True)
    return WeylResult(complex(prev), float(resid), t, False)
