"""Criterion reports and the finite-sample convergence detector shared by all criteria."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

# Detector constants.  They are part of the public contract and are echoed
# into every report so that a verdict can be audited later.
N_DOUBLINGS = 5
GEOMETRIC_RATIO = 0.7
LOG_EXPONENT_SZEGO = 1.5
LOG_EXPONENT_NOT_SZEGO = 1.2
TERM_CEILING = 1e3
TERM_TOL = 1e-10


class Verdict(str, enum.Enum):
    SZEGO = "Szego"
    NOT_SZEGO = "NotSzego"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class SzegoReport:
    """Terms of a determinant-sum criterion together with the detector output.

    ``partition`` is the eta-grid the terms were computed on (``eta[n]`` for
    term ``n`` uses ``eta[n]`` and ``eta[n + 2]``).  ``diagnostics`` holds the
    detector internals and the truncation assumptions that produced the terms.
    """

    terms: np.ndarray
    partial_sums: np.ndarray
    verdict: Verdict
    reason: str
    tail_ratios: np.ndarray
    partition: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1]) if len(self.partial_sums) else 0.0

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "n_terms": int(len(self.terms)),
            "partial_sum": self.total,
            "tail_ratios": [float(r) for r in self.tail_ratios],
            "diagnostics": _jsonable(self.diagnostics),
        }

    def terms_csv(self, xi=None, mass=None) -> str:
        """Terms as CSV with columns n, xi_n, M_xi_n, term, partial_sum."""
        n = len(self.terms)
        xi = np.full(n, np.nan) if xi is None else np.asarray(xi)[:n]
        mass = np.full(n, np.nan) if mass is None else np.asarray(mass)[:n]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "xi_n", "M_xi_n", "term", "partial_sum"])
        for i in range(n):
            w.writerow([i, _fmt(xi[i]), _fmt(mass[i]), _fmt(self.terms[i]),
                        _fmt(self.partial_sums[i])])
        return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def classify_series(terms, *, n_doublings: int = N_DOUBLINGS):
    """Decide convergence of ``sum(terms)`` from a finite prefix.

    Partial sums are taken at ``N_k = N / 2**k``; the increments
    ``d_k = S(N_k) - S(N_k / 2)`` over the last doublings drive the decision:

    * any non-finite term or a term above ``TERM_CEILING``: divergent;
    * vanishing increments, or geometric decay with ratio <= 0.7: convergent;
    * nondecreasing increments: divergent;
    * otherwise the decay exponent ``q`` in ``d ~ (log N)**-q`` is fitted.
      ``sum 1/(n log(n)**q)`` converges iff ``q > 1``, so ``q >= 1.5`` is read
      as convergent and ``q <= 1.2`` as divergent; in between, inconclusive.

    Returns ``(verdict, reason, ratios, diagnostics)``.
    """
    a = np.asarray(terms, dtype=float)
    n = len(a)
    diag: dict = {"n_terms": n, "n_doublings": n_doublings}
    if n == 0:
        return Verdict.INCONCLUSIVE, "no terms", np.array([]), diag
    if not np.all(np.isfinite(a)):
        return Verdict.NOT_SZEGO, "non-finite term", np.array([]), diag
    big = float(a.max())
    if big > TERM_CEILING:
        diag["max_term"] = big
        return Verdict.NOT_SZEGO, f"single term exceeds {TERM_CEILING:g}", np.array([]), diag

    s = np.cumsum(a)
    cuts = [n // 2**k for k in range(n_doublings + 1)][::-1]
    if cuts[0] < 1:
        return Verdict.INCONCLUSIVE, "too few terms for the doubling detector", np.array([]), diag
    sums = np.array([s[c - 1] for c in cuts])
    inc = np.diff(sums)
    diag["checkpoints"] = cuts
    diag["increments"] = inc
    last = inc[-4:]
    scale = max(abs(float(s[-1])), 1.0)
    if np.all(np.abs(last[-3:]) <= 1e-12 * scale):
        return Verdict.SZEGO, "tail increments vanish", np.array([]), diag

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = last[1:] / last[:-1]
    if np.all(last[:-1] > 0) and np.all(ratios <= GEOMETRIC_RATIO):
        return Verdict.SZEGO, "increments decay geometrically", ratios, diag
    if np.all(np.diff(last[-3:]) >= 0):
        return Verdict.NOT_SZEGO, "increments nondecreasing", ratios, diag

    pos = last > 0
    if pos.sum() >= 3:
        logn = np.log(np.log(np.array(cuts[-4:], dtype=float)))
        slope = np.polyfit(logn[pos], np.log(last[pos]), 1)[0]
        q = -float(slope)
        diag["log_exponent"] = q
        if q >= LOG_EXPONENT_SZEGO:
            return Verdict.SZEGO, f"increments decay like (log N)^-{q:.2f}", ratios, diag
        if q <= LOG_EXPONENT_NOT_SZEGO:
            return Verdict.NOT_SZEGO, f"increments decay like (log N)^-{q:.2f}", ratios, diag
        return Verdict.INCONCLUSIVE, f"log-decay exponent {q:.2f} in the undecided band", ratios, diag
    return Verdict.INCONCLUSIVE, "increments change sign", ratios, diag


def make_report(terms, partition, *, diagnostics=None, forced=None) -> SzegoReport:
    """Build a report; ``forced=(verdict, reason)`` bypasses the detector."""
    terms = np.asarray(terms, dtype=float)
    partial = np.cumsum(terms) if len(terms) else np.zeros(0)
    verdict, reason, ratios, diag = classify_series(terms)
    if forced is not None:
        verdict, reason = forced
    d = dict(diag)
    d.update(diagnostics or {})
    d["min_term"] = float(terms.min()) if len(terms) else 0.0
    return SzegoReport(terms=terms, partial_sums=partial, verdict=verdict, reason=reason,
                       tail_ratios=np.asarray(ratios), partition=np.asarray(partition, dtype=float),
                       diagnostics=d)
