"""Command-line front end.

Each subcommand reads one JSON config, writes CSV (and JSON reports) into
``--out`` and prints a one-line summary.  Exit codes: 0 ok, 1 invalid input,
2 file errors, 3 numerical or stability failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import canonical, dirac, evolution, strings
from .measures import DomainError, ValidationError
from .report import _jsonable

log = logging.getLogger("kreinwave")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "h": 0.01,
    "dt": None,
    "t_end": 20.0,
    "lambda_max": 1600.0,
    "n_lambda": 4000,
    "n_max": None,
    "eps": 1e-2,
    "seed": 0,
}

WVN_GRID = {"alpha": (-3.5, 4.5, 0.25), "beta": (-1.0, 2.5, 0.25)}


class NumericalError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    config_path: Path | None
    out: Path
    data: dict
    resolution: dict = field(default_factory=dict)
    plot: bool = False

    def res(self, key):
        return self.resolution.get(key, DEFAULTS.get(key))

    @property
    def digest(self) -> str:
        if self.config_path is None:
            return ""
        return hashlib.sha256(self.config_path.read_bytes()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows, comments=()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _section(cfg: RunConfig, key: str) -> dict:
    """The ``key`` object of the config, or the whole config when it is absent."""
    return cfg.data.get(key, cfg.data)


def _lambda_grid(cfg: RunConfig):
    kmax = math.sqrt(float(cfg.res("lambda_max")))
    return evolution.k_grid(kmax, int(cfg.res("n_lambda"))) ** 2


# ---------------------------------------------------------------------------
# Plotting (opt-in).


def _plot(path: Path, draw):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_partial_sums(cfg: RunConfig, rep, name: str):
    if not cfg.plot:
        return

    def draw(ax):
        ax.plot(np.arange(len(rep.partial_sums)), rep.partial_sums)
        ax.set_xlabel("n")
        ax.set_ylabel("partial sum")
        ax.set_title(f"{rep.verdict.value}: {rep.reason}")

    _plot(cfg.out / f"{name}.png", draw)


# ---------------------------------------------------------------------------
# Commands.


def cmd_classify_string(cfg: RunConfig) -> int:
    M = strings.MassDistribution.from_json(_section(cfg, "string"))
    n = cfg.res("n_max")
    rep = strings.string_szego_criterion(M, n_terms=None if n is None else int(n))
    (cfg.out / "terms.csv").write_text(rep.terms_csv(rep.diagnostics.get("xi"), rep.diagnostics.get("M_xi")))
    diag = {k: v for k, v in rep.diagnostics.items() if k not in ("xi", "M_xi")}
    _write_json(cfg.out / "report.json", {**rep.to_dict(), "diagnostics": diag, "config_sha256": cfg.digest})
    _plot_partial_sums(cfg, rep, "partial_sums")
    print(f"verdict={rep.verdict.value} terms={len(rep.terms)} partial_sum={rep.total:.6g} reason={rep.reason}")
    return EXIT_OK


def cmd_classify_canonical(cfg: RunConfig) -> int:
    H = canonical.Hamiltonian.from_json(_section(cfg, "hamiltonian"))
    n = cfg.res("n_max")
    part = cfg.data.get("partition")
    rep = canonical.szego_sum(H, part, n_terms=None if n is None else int(n))
    L = canonical.eikonal_inverse(H, rep.partition[: len(rep.terms)], extend=True)
    (cfg.out / "terms.csv").write_text(rep.terms_csv(L, None))
    _write_json(cfg.out / "report.json", {**rep.to_dict(), "config_sha256": cfg.digest})
    _plot_partial_sums(cfg, rep, "partial_sums")
    print(f"verdict={rep.verdict.value} terms={len(rep.terms)} partial_sum={rep.total:.6g} reason={rep.reason}")
    return EXIT_OK


def cmd_classify_dirac(cfg: RunConfig) -> int:
    Q = dirac.DiracPotential.from_json(_section(cfg, "potential"))
    n = cfg.res("n_max")
    if Q.form != "general" and not isinstance(Q.scalar, dirac.PiecewiseConstant):
        nw = int(n) if n is not None else dirac._n_windows(Q.tau_max, None)
        rep = dirac.dirac_special_criterion(Q.scalar, Q.form, nw)
    else:
        rep = dirac.dirac_szego_sum(Q, None if n is None else int(n))
    (cfg.out / "terms.csv").write_text(rep.terms_csv(np.arange(len(rep.terms), dtype=float), None))
    _write_json(cfg.out / "report.json", {**rep.to_dict(), "config_sha256": cfg.digest})
    _plot_partial_sums(cfg, rep, "partial_sums")
    print(f"verdict={rep.verdict.value} terms={len(rep.terms)} partial_sum={rep.total:.6g} reason={rep.reason}")
    return EXIT_OK


def _axis(spec, default):
    if spec is None:
        spec = default
    if isinstance(spec, dict):
        spec = (spec["start"], spec["stop"], spec["step"])
    if isinstance(spec, tuple):
        start, stop, step = (float(v) for v in spec)
        if step <= 0:
            raise ValidationError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    return [float(v) for v in spec]


def cmd_classify_wvn(cfg: RunConfig) -> int:
    d = cfg.data
    try:
        alphas = _axis(d.get("alpha"), WVN_GRID["alpha"])
        betas = _axis(d.get("beta"), WVN_GRID["beta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed grid: {exc}") from exc
    if not alphas or not betas:
        raise ValidationError("empty (alpha, beta) grid")
    numeric = bool(d.get("numeric", False))
    n = cfg.res("n_max") or 100_000
    rows = []
    agree = 0
    for a in alphas:
        for b in betas:
            reg = dirac.wvn_region(a, b)
            verdict = ""
            if numeric:
                rep = dirac.wvn_numeric_check(a, b, int(n))
                verdict = rep.verdict.value
                agree += bool(rep.diagnostics.get("agrees_with_region", False))
            rows.append((a, b, reg.region, verdict))
    _write_csv(cfg.out / "regions.csv", ["alpha", "beta", "region", "numeric_verdict"], rows)
    if cfg.plot:
        _plot_regions(cfg, rows)
    inside = sum(r[2] in ("A1", "A2", "A3") for r in rows)
    msg = f"points={len(rows)} in_class={inside}"
    if numeric:
        msg += f" numeric_agreement={agree}/{len(rows)}"
    print(msg)
    return EXIT_OK


def _plot_regions(cfg, rows):
    def draw(ax):
        col = {"A1": "tab:blue", "A2": "tab:cyan", "A3": "tab:purple", "Outside": "lightgray", "Boundary": "k"}
        for region, c in col.items():
            pts = [(r[0], r[1]) for r in rows if r[2] == region]
            if pts:
                ax.scatter(*zip(*pts), s=12, c=c, label=region)
        ax.set_xlabel("alpha")
        ax.set_ylabel("beta")
        ax.legend(fontsize=7)

    _plot(cfg.out / "regions.png", draw)


def _string_and_profile(cfg):
    M = strings.MassDistribution.from_json(_section(cfg, "string"))
    u0, front0 = evolution.initial_profile(cfg.data.get("u0", {"kind": "bump", "center": 0.0, "radius": 2.0}))
    return M, u0, float(cfg.data.get("front0", front0))


def cmd_simulate(cfg: RunConfig) -> int:
    M, u0, front0 = _string_and_profile(cfg)
    h = float(cfg.res("h"))
    lat = evolution.discretize(M, h)
    dt = cfg.res("dt")
    t_end = float(cfg.res("t_end"))
    every = float(cfg.data.get("diag_every", 1.0))
    ell = float(cfg.data.get("ell", 2.0))
    snaps = sorted(set(float(t) for t in cfg.data.get("snapshots", [0.0, t_end])))
    times = sorted(set(np.round(np.arange(0.0, t_end + 1e-9, every), 12).tolist()) | set(snaps))
    state = evolution.initial_state(lat, u0, None if dt is None else float(dt))
    e0 = evolution.energy(lat, state)
    diag_rows, snap_rows, snap_states = [], [], []
    for t in times:
        target = int(round(t / state.dt))
        if target > state.steps:
            state = evolution.step_leapfrog(lat, state, n_steps=target - state.steps)
        row = evolution.diagnostics_row(M, lat, state, front0, ell)
        if not math.isfinite(row["energy"]):
            raise NumericalError("energy is not finite")
        row["t"] = round(state.t, 12)
        diag_rows.append([row[k] for k in ("t", "front_predicted", "front_detected", "near_front_mass", "energy")])
        if any(abs(t - s) < 1e-9 for s in snaps):
            cm = np.cumsum(lat.m)
            v_now = state.v + 0.5 * state.dt * lat.accel(state.u)
            snap_rows += [(row["t"], x, u, v, c) for x, u, v, c in zip(lat.xi, state.u, v_now, cm)]
            snap_states.append(state)
    _write_csv(cfg.out / "diagnostics.csv",
               ["t", "front_predicted", "front_detected", "near_front_mass", "energy"], diag_rows)
    _write_csv(cfg.out / "snapshots.csv", ["t", "xi", "u", "v", "cumulative_mass"], snap_rows)
    report = {
        "h": h, "dt": state.dt, "t_end": state.t, "front0": front0, "ell": ell,
        "xi_max": M.xi_max, "tail_rho": M.tail_rho, "energy_drift": abs(diag_rows[-1][4] - e0) / e0 if e0 else 0.0,
        "front_law": "L(T(f0) + t)", "config_sha256": cfg.digest,
    }
    if cfg.data.get("spectral_check"):
        lam = _lambda_grid(cfg)
        us = evolution.evolve_spectral(M, lat.xi, u0, state.t, lam)
        report["spectral_rel_l2"] = float(np.sqrt(np.sum(lat.m * (us - state.u) ** 2) / np.sum(lat.m * state.u ** 2)))
    _write_json(cfg.out / "report.json", report)
    if cfg.plot:
        def draw(ax):
            for s in snap_states:
                ax.plot(lat.xi, s.u, lw=0.8, label=f"t={s.t:g}")
            ax.set_xlabel("xi")
            ax.set_ylabel("u")
            ax.legend(fontsize=7)
        _plot(cfg.out / "snapshots.png", draw)
    last = diag_rows[-1]
    print(f"t={last[0]:g} front_predicted={last[1]:.6g} front_detected={last[2]:.6g} "
          f"near_front_mass={last[3]:.6g} energy_drift={report['energy_drift']:.3g}")
    return EXIT_OK


def cmd_front(cfg: RunConfig) -> int:
    M, _, front0 = _string_and_profile(cfg)
    t_end = float(cfg.res("t_end"))
    ts = cfg.data.get("times") or np.round(np.arange(0.0, t_end + 1e-9, 1.0), 12).tolist()
    rows = []
    a = float(strings.string_eikonal(M, front0))
    for t in ts:
        rows.append((float(t), float(strings.wavefront(M, front0, float(t))), a + float(t)))
    _write_csv(cfg.out / "front.csv", ["t", "front_predicted", "eikonal"], rows)
    print(f"front0={front0:g} T(front0)={a:.6g} front(t_end)={rows[-1][1]:.6g}")
    return EXIT_OK


def cmd_profile(cfg: RunConfig) -> int:
    M, u0, _ = _string_and_profile(cfg)
    h = float(cfg.res("h"))
    support = float(cfg.data.get("support", M.xi_max))
    nodes = h * np.arange(int(round(support / h)) + 1)
    eta_max = float(cfg.data.get("eta_max", 40.0))
    eta = np.linspace(-eta_max, eta_max, int(cfg.data.get("n_eta", 8001)))
    lam = _lambda_grid(cfg)
    tw = evolution.traveling_wave_profile(M, nodes, u0(nodes), eta, lam)
    comments = [f"command=profile config_sha256={cfg.digest}",
                f"h={h!r} lambda_max={float(cfg.res('lambda_max'))!r} n_lambda={int(cfg.res('n_lambda'))}",
                f"xi_max={M.xi_max!r} tail_rho={M.tail_rho!r}",
                f"norm_G={tw.norm_G!r} twice_norm_g={2 * tw.norm_g!r} ratio={tw.norm_ratio!r}"]
    _write_csv(cfg.out / "profile.csv", ["eta", "G"], zip(eta, tw.G), comments)
    _write_json(cfg.out / "report.json", {"norm_G": tw.norm_G, "twice_norm_g": 2 * tw.norm_g,
                                          "ratio": tw.norm_ratio, "config_sha256": cfg.digest})
    if cfg.plot:
        _plot(cfg.out / "profile.png", lambda ax: (ax.plot(eta, tw.G), ax.set_xlabel("eta"), ax.set_ylabel("G")))
    print(f"norm_G={tw.norm_G:.6g} twice_norm_g={2 * tw.norm_g:.6g} ratio={tw.norm_ratio:.6f}")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    M = strings.MassDistribution.from_json(_section(cfg, "string"))
    lam = np.asarray(cfg.data.get("lambdas") or np.linspace(0.1, float(cfg.res("lambda_max")), 200).tolist(), float)
    eps = float(cfg.res("eps"))
    est = strings.spectral_density_estimate(M, lam, eps)
    exact = strings.boundary_density(M, lam)
    comments = [f"command=spectrum config_sha256={cfg.digest}",
                f"eps={eps!r} xi_max={M.xi_max!r} tail_rho={M.tail_rho!r}"]
    _write_csv(cfg.out / "spectrum.csv", ["lambda", "density_estimate", "density_exact"],
               zip(lam, est.density, exact), comments)
    if cfg.plot:
        def draw(ax):
            ax.loglog(lam, est.density, label=f"Im q(λ+i{eps:g})/π")
            ax.loglog(lam, exact, "--", label="boundary density")
            ax.set_xlabel("lambda")
            ax.legend(fontsize=7)
        _plot(cfg.out / "spectrum.png", draw)
    print(f"points={len(lam)} eps={eps:g} max_rel_diff={float(np.max(np.abs(est.density / exact - 1))):.3g}")
    return EXIT_OK


def cmd_free_dirac(cfg: RunConfig) -> int:
    d = cfg.data
    try:
        h = float(d.get("h", cfg.res("h")))
        Z = np.stack([np.asarray(d["z1"], float), np.asarray(d["z2"], float)], axis=1)
        times = [float(t) for t in d.get("times", [cfg.res("t_end")])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed free-dirac config: {exc}") from exc
    rows, summary = [], []
    n0 = evolution.dirac_norm(Z, h)
    for t in times:
        U = evolution.free_dirac_evolution(Z, t, h)
        for i, (a, b) in enumerate(U):
            rows.append((t, i * h, a.real, a.imag, b.real, b.imag))
        summary.append({"t": t, "norm_change": abs(evolution.dirac_norm(U, h) - n0),
                        "front": evolution.dirac_front(U, h), "front_expected": abs(t) + evolution.dirac_front(Z, h)})
    _write_csv(cfg.out / "free_dirac.csv", ["t", "tau", "re_z1", "im_z1", "re_z2", "im_z2"], rows)
    _write_json(cfg.out / "report.json", {"h": h, "norm": n0, "times": summary})
    if cfg.plot:
        def draw(ax):
            for t in times:
                sel = [r for r in rows if r[0] == t]
                ax.plot([r[1] for r in sel], [math.hypot(*r[2:4]) ** 2 + math.hypot(*r[4:6]) ** 2 for r in sel],
                        lw=0.8, label=f"t={t:g}")
            ax.set_xlabel("tau")
            ax.set_ylabel("|Z|^2")
            ax.legend(fontsize=7)
        _plot(cfg.out / "free_dirac.png", draw)
    worst = max(s["norm_change"] for s in summary)
    print(f"times={len(times)} max_norm_change={worst:.3g}")
    return EXIT_OK


COMMANDS = {
    "classify-string": cmd_classify_string,
    "classify-dirac": cmd_classify_dirac,
    "classify-canonical": cmd_classify_canonical,
    "classify-wvn": cmd_classify_wvn,
    "simulate": cmd_simulate,
    "front": cmd_front,
    "profile": cmd_profile,
    "spectrum": cmd_spectrum,
    "free-dirac": cmd_free_dirac,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kreinwave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON input")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--h", type=float)
        s.add_argument("--dt", type=float)
        s.add_argument("--t-end", type=float)
        s.add_argument("--lambda-max", type=float)
        s.add_argument("--n-max", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSVs")
    return p


def _load(args) -> RunConfig:
    data = {}
    if args.config is not None:
        text = args.config.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
    elif args.command != "classify-wvn":
        raise ValidationError("--config is required for this command")
    res = dict(data.get("resolution", {}))
    for key in ("h", "dt", "t_end", "lambda_max", "n_max", "seed"):
        v = getattr(args, key)
        if v is not None:
            res[key] = v
    for key in ("h", "dt", "t_end", "lambda_max", "n_max", "eps", "n_lambda"):
        v = res.get(key)
        if v is not None and not v > 0:
            raise ValidationError(f"resolution {key} must be positive")
    args.out.mkdir(parents=True, exist_ok=True)
    if not os.access(args.out, os.W_OK):
        raise OSError(f"output directory {args.out} is not writable")
    return RunConfig(args.command, args.config, args.out, data, res, args.plot)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("KW_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg)
    except evolution.CFLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
