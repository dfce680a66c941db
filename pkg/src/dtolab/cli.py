"""Command-line experiment harness.

Every subcommand writes a CSV table and a JSON manifest (merged
configuration, seeds, SHA-256 of the CSV bytes, wall time).  Parameters
come from built-in defaults, then the ``[<subcommand>]`` section of an INI
file given with ``--config``, then explicit flags.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 timeout.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import itertools
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

__all__ = ["main", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERICAL", "EXIT_TIMEOUT"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_TIMEOUT = 0, 2, 3, 4
RESIDUAL_TOL = 1e-10


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class Timeout(Exception):
    pass


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(s).replace(" ", "").split(",") if x)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(s).replace(" ", "").split(",") if x)


def _opt_int(s: str) -> int | None:
    return None if str(s).lower() in ("", "none", "auto") else int(s)


@dataclass(frozen=True)
class Param:
    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    required: bool = False


def _common_params() -> list[Param]:
    return [
        Param("seed", int, 0, "base seed"),
        Param("threads", int, 1, "worker threads (never changes results)"),
    ]


SUBCOMMANDS: dict[str, tuple[str, list[Param]]] = {
    "wilson2d": ("Monte Carlo Wilson loops on a 2d torus against the exact formulas", [
        Param("L", int, None, "linear size", required=True),
        Param("h", float, 0.2, "field strength"),
        Param("sizes", _ints, (1, 2, 3), "square loop sides; enclosed plaquettes are side**2"),
        Param("sweeps", int, 10_000, "measurement sweeps"),
        Param("burn_in", _opt_int, None, "burn-in sweeps (default 10 L^2)"),
        Param("every", int, 1, "sweeps between measurements"),
        Param("method", str, "auto", "sampler: auto, metropolis, rejection-free"),
    ]),
    "wilson3d": ("Averaged Wilson rectangles on a 3d torus with perimeter/area fits", [
        Param("L", int, 16, "linear size"),
        Param("h", _floats, (0.005, 0.01, 0.0125, 0.015, 0.02, 0.05), "field strengths"),
        Param("max_size", int, 6, "largest rectangle side"),
        Param("sweeps", int, 2000, "measurement sweeps"),
        Param("burn_in", int, 1000, "burn-in sweeps"),
        Param("every", int, 10, "sweeps between measurements"),
        Param("method", str, "auto", "sampler"),
    ]),
    "lifetime3d": ("Lifetimes of wrapping defect strips and the power-law exponent", [
        Param("L", _ints, (8, 12, 16), "linear sizes"),
        Param("h", float, 0.005, "field strength"),
        Param("n_traj", int, 500, "trajectories per size"),
        Param("tau0", float, 1.0, "check interval in sweeps"),
        Param("max_sweeps", float, 1e6, "per-trajectory cap"),
        Param("width", _opt_int, None, "strip width (default L/2)"),
    ]),
    "relax3d": ("Excess defect density after a random start, with decay-law fits", [
        Param("L", int, 16, "linear size"),
        Param("h", float, 0.004, "field strength"),
        Param("n_traj", int, 1000, "trajectories"),
        Param("t_max", float, 3000.0, "last measurement time in sweeps"),
        Param("n_times", int, 40, "log-spaced measurement times"),
        Param("baseline", str, "run", "run (separate stationary run) or tail (per-trajectory late average)"),
        Param("baseline_sweeps", int, 20_000, "sweeps of the separate baseline run"),
        Param("baseline_burn_in", int, 3000, "burn-in of the separate baseline run"),
        Param("tail_from", float, 100.0, "start of the tail window (tail mode)"),
        Param("tail_to", float, 200.0, "end of the tail window (tail mode)"),
        Param("tail_every", float, 5.0, "stamp spacing in the tail window"),
        Param("snr", float, 3.0, "fit window ends before the signal drops below snr * stderr"),
        Param("span", float, 10.0, "fit window covers [t_end / span, t_end]"),
    ]),
    "shrink3d": ("Time for square defect loops to collapse at h = 0", [
        Param("L", int, 48, "linear size"),
        Param("R", _ints, (4, 8, 16), "patch sides"),
        Param("n_traj", int, 40, "trajectories per size"),
        Param("max_sweeps", float, 1e6, "per-trajectory cap"),
    ]),
    "spectrum": ("Exact generator null space, splitting and gap on a small 2d torus", [
        Param("L", int, 2, "linear size (2 or 3)"),
        Param("h", float, 0.0, "field strength"),
        Param("basis", str, "full", "full or dual"),
        Param("n_eigs", int, 8, "eigenvalues reported"),
    ]),
    "perturb": ("First-order splitting of the four 2d steady states", [
        Param("L", _ints, (8, 16, 32, 64), "linear sizes"),
        Param("h", float, 1.0, "field strength"),
    ]),
    "entropy": ("Brute-force subsystem entropies against the closed forms", [
        Param("L", int, 2, "linear size (2 or 3)"),
        Param("h", float, 0.1, "field strength"),
        Param("max_plaquettes", int, 4, "largest plaquette region"),
    ]),
    "oracle-check": ("Residuals of the enumerated steady state under the exact generator", [
        Param("L", int, 2, "linear size (2 or 3)"),
        Param("h", float, 0.1, "field strength"),
    ]),
}


def _dest(name: str) -> str:
    return name.replace("-", "_")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtolab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, (desc, params) in SUBCOMMANDS.items():
        sp = sub.add_parser(cmd, help=desc, description=desc,
                            argument_default=argparse.SUPPRESS)
        for prm in params + _common_params():
            flag = "--" + prm.name.replace("_", "-")
            sp.add_argument(flag, dest=prm.name, type=prm.type, help=f"{prm.help} (default {prm.default})")
        sp.add_argument("--out", type=Path, help="output directory for <command>.csv and <command>.json")
        sp.add_argument("--config", type=Path, help="INI file with a section per subcommand")
    return p


def _resolve(cmd: str, ns: argparse.Namespace) -> dict[str, Any]:
    params = SUBCOMMANDS[cmd][1] + _common_params()
    cfg: dict[str, Any] = {p.name: p.default for p in params}
    cfg_path = getattr(ns, "config", None)
    if cfg_path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(cfg_path):
            raise UsageError(f"cannot read config file {cfg_path}")
        if cp.has_section(cmd):
            by_name = {p.name.lower(): p for p in params}
            for key, raw in cp.items(cmd):
                prm = by_name.get(_dest(key).lower())
                if prm is None:
                    raise UsageError(f"unknown key {key!r} in [{cmd}]")
                k = prm.name
                try:
                    cfg[k] = prm.type(raw)
                except ValueError as exc:
                    raise UsageError(f"bad value for {key}: {exc}") from None
    for p in params:
        if hasattr(ns, p.name):
            cfg[p.name] = getattr(ns, p.name)
    missing = [p.name for p in params if p.required and cfg[p.name] is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + m for m in missing))
    if cfg["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        f = float(x)
        return f if math.isfinite(f) else str(f)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# ---------------------------------------------------------------------------
# subcommands; each returns (csv_text, extra manifest fields)


def _run_wilson2d(c):
    from .analytics import beta_of_h, wilson_2d
    from .dynamics import Model, estimate_wilson_rectangles
    from .lattice import build_torus

    L, h = c["L"], c["h"]
    if L < 2 or any(s < 1 or s >= L for s in c["sizes"]):
        raise UsageError("need L >= 2 and 1 <= size < L")
    torus = build_torus(2, (L, L))
    model = Model(dim=2, h=h)
    shapes = [(s, s) for s in c["sizes"]]
    est = estimate_wilson_rectangles(model, torus, shapes, sweeps=c["sweeps"],
                                     burn_in=c["burn_in"], every=c["every"], seed=c["seed"],
                                     planes=((0, 1),), method=c["method"])
    beta = beta_of_h(h)
    rows = []
    for s in c["sizes"]:
        e = est[(s, s)]
        m = s * s
        rows.append([m, e.mean, e.stderr, wilson_2d(beta, m, L * L), wilson_2d(beta, m)])
    text = _csv(["m", "mc_mean", "mc_stderr", "exact_finite", "exact_limit"], rows)
    return text, {"seeds": [c["seed"]], "beta": beta}


def _run_wilson3d(c):
    from .dynamics import Model, estimate_wilson_rectangles
    from .fits import hc_bracket, loop_law_comparison
    from .lattice import build_torus

    L = c["L"]
    shapes = [(w, hh) for w in range(1, c["max_size"] + 1) for hh in range(w, c["max_size"] + 1)]
    if c["max_size"] >= L:
        raise UsageError("max_size must be < L")
    torus = build_torus(3, (L, L, L))
    rows, fits = [], {}
    for h in c["h"]:
        est = estimate_wilson_rectangles(Model(dim=3, h=h), torus, shapes, sweeps=c["sweeps"],
                                         burn_in=c["burn_in"], every=c["every"],
                                         seed=c["seed"], threads=c["threads"], method=c["method"])
        P, A, W, E = [], [], [], []
        for (w, hh), e in est.items():
            rows.append([h, w, hh, 2 * (w + hh), w * hh, e.mean, e.stderr])
            P.append(2 * (w + hh)); A.append(w * hh); W.append(e.mean); E.append(e.stderr)
        try:
            cmp_ = loop_law_comparison(P, A, W, E)
            fits[repr(h)] = {"r2_perimeter": cmp_.perimeter.r2, "r2_area": cmp_.area.r2,
                             "preferred": cmp_.preferred, "n_used": cmp_.n_used}
        except ValueError as exc:
            fits[repr(h)] = {"preferred": None, "error": str(exc)}
    extra: dict[str, Any] = {"seeds": [c["seed"]], "fits": fits}
    usable = [(float(k), v["preferred"]) for k, v in fits.items() if v["preferred"]]
    try:
        extra["hc_bracket"] = list(hc_bracket([u[0] for u in usable], [u[1] for u in usable]))
    except ValueError as exc:
        extra["hc_bracket"] = None
        extra["hc_bracket_error"] = str(exc)
    text = _csv(["h", "w", "l", "perimeter", "area", "W", "stderr"], rows)
    return text, extra


def _run_lifetime3d(c):
    from .dynamics import Model, lifetime_ensemble
    from .fits import power_law_exponent

    model = Model(dim=3, h=c["h"])
    rows, med, timeouts = [], [], 0
    for k, L in enumerate(c["L"]):
        base = c["seed"] + k
        taus = lifetime_ensemble(model, L, c["n_traj"], base, c["tau0"], c["max_sweeps"],
                                 width=c["width"], threads=c["threads"])
        n_to = int(np.isnan(taus).sum())
        timeouts += n_to
        ok = taus[~np.isnan(taus)]
        m = float(np.median(ok)) if ok.size else float("nan")
        se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else float("nan")
        rows.append([L, c["n_traj"], m, float(ok.mean()) if ok.size else float("nan"), se, n_to])
        med.append(m)
    extra: dict[str, Any] = {"seeds": {str(L): c["seed"] + k for k, L in enumerate(c["L"])}}
    if len(c["L"]) >= 2 and all(np.isfinite(med)) and min(med) > 0:
        f = power_law_exponent(c["L"], med)
        extra["alpha"] = f.slope
        extra["alpha_err"] = f.slope_err
    text = _csv(["L", "n_traj", "median_tau", "mean_tau", "stderr_tau", "timeouts"], rows)
    if timeouts:
        return text, extra, Timeout(f"{timeouts} trajectories hit max_sweeps")
    return text, extra


def relax_times(t_max: float, n: int) -> tuple[float, ...]:
    """Distinct integer-rounded log-spaced times in ``[1, t_max]``."""
    return tuple(float(x) for x in np.unique(np.round(np.geomspace(1.0, t_max, n))))


def relax_schedule(c) -> tuple[float, ...]:
    times = relax_times(c["t_max"], c["n_times"])
    if c["baseline"] == "tail":
        if c["tail_from"] <= c["t_max"] or c["tail_to"] < c["tail_from"]:
            raise UsageError("tail window must lie after t_max")
        tail = np.arange(c["tail_from"], c["tail_to"] + 1e-9, c["tail_every"])
        times = times + tuple(float(x) for x in tail)
    return times


def relax_run(c):
    """Run the relaxation ensemble; returns ``(stats, extra)``."""
    from .dynamics import Model, Schedule, defect_density_series, estimate_baseline
    from .lattice import build_torus

    L = c["L"]
    torus = build_torus(3, (L, L, L))
    model = Model(dim=3, h=c["h"])
    sched = Schedule(times=relax_schedule(c))
    extra: dict[str, Any] = {"seeds": {"ensemble": c["seed"]}}
    if c["baseline"] == "run":
        base_seed = c["seed"] ^ 0x5EED
        baseline, berr = estimate_baseline(model, torus, c["baseline_sweeps"], seed=base_seed,
                                           burn_in=c["baseline_burn_in"])
        extra["seeds"]["baseline"] = base_seed
        extra.update(baseline=baseline, baseline_stderr=berr)
        st = defect_density_series(model, torus, None, sched, baseline, n_traj=c["n_traj"],
                                   base_seed=c["seed"], threads=c["threads"])
    elif c["baseline"] == "tail":
        st = defect_density_series(model, torus, None, sched, "tail", n_traj=c["n_traj"],
                                   base_seed=c["seed"], threads=c["threads"],
                                   tail_from=c["tail_from"])
    else:
        raise UsageError("baseline must be run or tail")
    return st, extra


def _run_relax3d(c):
    from .fits import decay_law_comparison

    st, extra = relax_run(c)
    d, e = st.mean["delta_D"], st.stderr["delta_D"]
    fit = st.times <= c["t_max"]
    try:
        cmp_ = decay_law_comparison(st.times[fit], d[fit], e[fit], snr=c["snr"], span=c["span"])
        extra.update(window=list(cmp_.window), rss_power=cmp_.power.rss,
                     rss_exponential=cmp_.exponential.rss, ratio=cmp_.ratio,
                     preferred=cmp_.preferred, power_exponent=cmp_.power.slope,
                     exponential_rate=-cmp_.exponential.slope)
    except ValueError as exc:
        extra["fit_error"] = str(exc)
    text = _csv(["t", "delta_D", "stderr"], zip(st.times, d, e))
    return text, extra


def _run_shrink3d(c):
    from .dynamics import Model, _map, shrink_time, trajectory_seed
    from .fits import power_law_exponent
    from .lattice import build_torus

    L = c["L"]
    if any(R < 1 or R >= L for R in c["R"]):
        raise UsageError("need 1 <= R < L")
    torus = build_torus(3, (L, L, L))
    model = Model(dim=3, h=0.0)
    rows, means, timeouts = [], [], 0
    for R in c["R"]:
        def one(i, R=R):
            return shrink_time(model, torus, R, trajectory_seed(c["seed"] + R, i), c["max_sweeps"])

        ts = _map(one, c["n_traj"], c["threads"])
        ok = np.array([t for t in ts if t is not None], dtype=float)
        timeouts += len(ts) - ok.size
        mean = float(ok.mean()) if ok.size else float("nan")
        se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else float("nan")
        rows.append([R, c["n_traj"], mean, se, len(ts) - ok.size])
        means.append(mean)
    extra: dict[str, Any] = {"seeds": {str(R): c["seed"] + R for R in c["R"]}}
    if len(c["R"]) >= 2 and all(np.isfinite(means)):
        f = power_law_exponent(c["R"], means)
        extra["z"] = f.slope
        extra["z_err"] = f.slope_err
    text = _csv(["R", "n_traj", "mean_tau", "stderr_tau", "timeouts"], rows)
    if timeouts:
        return text, extra, Timeout(f"{timeouts} trajectories hit max_sweeps")
    return text, extra


def _run_spectrum(c):
    from .dynamics import Model
    from .exact import build_generator_dual, build_generator_full, steady_space
    from .lattice import build_torus

    L, h = c["L"], c["h"]
    if L not in (2, 3):
        raise UsageError("spectrum supports L = 2 or 3")
    if c["basis"] == "full":
        gen = build_generator_full(build_torus(2, (L, L)), Model(dim=2, h=h))
    elif c["basis"] == "dual":
        gen = build_generator_dual(L, h)
    else:
        raise UsageError("basis must be full or dual")
    R, rep = steady_space(gen, n_eigs=c["n_eigs"])
    cons = gen.conservation_residual()
    null_res = float(np.abs(gen.matrix @ R).max())
    ev = rep.eigenvalues
    text = _csv(["k", "re", "im"], [[k, z.real, z.imag] for k, z in enumerate(ev)])
    extra = {"seeds": [], "report": json.loads(rep.to_json()),
             "conservation_residual": cons, "null_residual": null_res}
    if cons > RESIDUAL_TOL or null_res > RESIDUAL_TOL:
        return text, extra, NumericalFailure(f"residual above tolerance: {cons:.3g}, {null_res:.3g}")
    return text, extra


def _run_perturb(c):
    from .perturb1 import alpha_solutions, build_alpha_system, effective_matrix

    rows = []
    worst = 0.0
    for L in c["L"]:
        if L < 2:
            raise UsageError("L must be >= 2")
        eff = effective_matrix(alpha_solutions(build_alpha_system(L), L), c["h"], L)
        d = eff.deltas
        worst = max(worst, abs(d[3]), abs(d[1] - d[2]))
        rows.append([L, *d, d[1] * math.log(L), eff.n * c["h"] * d[1]])
    text = _csv(["L", "delta1", "delta2", "delta3", "delta4", "delta2_logL", "nh_delta2"], rows)
    extra = {"seeds": [], "max_symmetry_residual": worst}
    if worst > RESIDUAL_TOL:
        return text, extra, NumericalFailure(f"delta4 or delta2-delta3 off by {worst:.3g}")
    return text, extra


def entropy_regions(L: int, max_plaquettes: int):
    """Plaquette regions with a connected nonempty complement that do not wrap.

    Yields ``(plaquettes, links, RegionCounts)``.
    """
    from .lattice import build_torus, plaquette_region, region_counts

    torus = build_torus(2, (L, L))
    seen = set()
    for k in range(1, max_plaquettes + 1):
        for ps in itertools.combinations(range(torus.n_plaquettes), k):
            links = plaquette_region(torus, ps)
            key = tuple(links)
            if key in seen:
                continue
            seen.add(key)
            cnt = region_counts(torus, links)
            if cnt.n_links == torus.n_links or cnt.p_bar != 1 or cnt.wraps:
                continue
            yield ps, links, cnt


def _run_entropy(c):
    from .analytics import EntropyInput, beta_of_h, entropy_model1
    from .oracle import entropy_bruteforce, exact_steady_state_2d

    L, h = c["L"], c["h"]
    if L not in (2, 3):
        raise UsageError("entropy supports L = 2 or 3")
    p = exact_steady_state_2d(L, h)
    beta = beta_of_h(h)
    rows, worst = [], 0.0
    for ps, links, cnt in entropy_regions(L, c["max_plaquettes"]):
        bf = entropy_bruteforce(p, links)
        fm = entropy_model1(EntropyInput.from_counts(cnt, beta=beta, n=L * L))
        worst = max(worst, abs(bf - fm))
        rows.append([" ".join(map(str, ps)), cnt.n_links, cnt.inside, cnt.boundary, cnt.m, cnt.p,
                     cnt.p_bar, bf, fm, bf - fm])
    text = _csv(["plaquettes", "n_links", "inside", "boundary", "m", "p", "p_bar",
                 "bruteforce", "formula", "difference"], rows)
    extra = {"seeds": [], "n_regions": len(rows), "max_abs_difference": worst}
    if worst > RESIDUAL_TOL:
        return text, extra, NumericalFailure(f"entropy mismatch {worst:.3g}")
    return text, extra


def _run_oracle_check(c):
    from .dynamics import Model
    from .exact import build_generator_full
    from .lattice import build_torus
    from .oracle import (detailed_balance_residual, exact_steady_state_2d,
                         orbit_steady_state_2d, steady_state_residual)

    L, h = c["L"], c["h"]
    if L not in (2, 3):
        raise UsageError("oracle-check supports L = 2 or 3")
    gen = build_generator_full(build_torus(2, (L, L)), Model(dim=2, h=h))
    p = exact_steady_state_2d(L, h)
    vals = {
        "steady_state_residual": steady_state_residual(gen, p),
        "detailed_balance_residual": detailed_balance_residual(gen, p),
        "conservation_residual": gen.conservation_residual(),
        "orbit_sum_difference": float(np.abs(orbit_steady_state_2d(L, h) - p).max()),
        "min_offdiagonal": gen.min_offdiagonal(),
    }
    text = _csv(["check", "value"], list(vals.items()))
    extra = {"seeds": [], **vals}
    bad = {k: v for k, v in vals.items() if k != "min_offdiagonal" and v > RESIDUAL_TOL}
    if bad or vals["min_offdiagonal"] < 0:
        return text, extra, NumericalFailure(f"checks failed: {bad}")
    return text, extra


RUNNERS = {
    "wilson2d": _run_wilson2d,
    "wilson3d": _run_wilson3d,
    "lifetime3d": _run_lifetime3d,
    "relax3d": _run_relax3d,
    "shrink3d": _run_shrink3d,
    "spectrum": _run_spectrum,
    "perturb": _run_perturb,
    "entropy": _run_entropy,
    "oracle-check": _run_oracle_check,
}


def _package_version() -> str:
    from . import __version__

    return __version__


def run(cmd: str, cfg: dict[str, Any], out: Path | None, stdout=None) -> int:
    """Execute a subcommand with a fully resolved configuration."""
    stdout = sys.stdout if stdout is None else stdout
    t0 = time.perf_counter()
    res = RUNNERS[cmd](cfg)
    failure = res[2] if len(res) == 3 else None
    text, extra = res[0], res[1]
    digest = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "command": cmd,
        "config": cfg,
        "sha256": digest,
        "wall_time_s": time.perf_counter() - t0,
        "version": _package_version(),
        "status": "ok" if failure is None else type(failure).__name__,
        **extra,
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cmd}.csv").write_text(text)
        (out / f"{cmd}.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    else:
        stdout.write(text)
    if isinstance(failure, NumericalFailure):
        print(f"dtolab {cmd}: numerical failure: {failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    if isinstance(failure, Timeout):
        print(f"dtolab {cmd}: timeout: {failure}", file=sys.stderr)
        return EXIT_TIMEOUT
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _resolve(ns.command, ns)
        return run(ns.command, cfg, getattr(ns, "out", None))
    except UsageError as exc:
        parser.error(str(exc))
    except ValueError as exc:
        print(f"dtolab {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
