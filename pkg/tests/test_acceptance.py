"""Acceptance criteria AC-1 .. AC-10.

Each test prints one ``AC-k PASS|FAIL`` line (outside pytest's capture)
before asserting.  The Monte Carlo criteria are slow; run this file alone
with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math

import numpy as np
import pytest

from dtolab import cli
from dtolab.analytics import (
    LOG2,
    EntropyInput,
    beta_of_h,
    entropy_model1,
    f_beta,
    stopo_kp,
    stopo_lw_model1,
    stopo_model2,
    wilson_2d,
)
from dtolab.dynamics import Model, Sampler
from dtolab.exact import (
    build_generator_dual,
    build_generator_full,
    lump_to_dual,
    steady_space,
    xy_couplings,
    xy_spectrum_check,
)
from dtolab.lattice import build_torus, region_counts
from dtolab.oracle import (
    detailed_balance_residual,
    entropy_bruteforce,
    exact_steady_state_2d,
    model2_unperturbed_entropy,
)
from dtolab.perturb1 import alpha_solutions, build_alpha_system, effective_matrix
from dtolab.spins import random_config

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def _report(name, ok, detail):
        with capsys.disabled():
            print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return _report


def run_cli(cmd, tmp_path, **overrides):
    params = cli.SUBCOMMANDS[cmd][1] + cli._common_params()
    cfg = {p.name: p.default for p in params}
    cfg.update(overrides)
    code = cli.run(cmd, cfg, tmp_path)
    man = json.loads((tmp_path / f"{cmd}.json").read_text())
    text = (tmp_path / f"{cmd}.csv").read_text()
    return code, man, text


def test_ac1_degeneracy(report):
    detail, ok = [], True
    for L in (2, 3):
        torus = build_torus(2, (L, L))
        _, rep0 = steady_space(build_generator_full(torus, Model(h=0.0)))
        R1, rep1 = steady_space(build_generator_full(torus, Model(h=0.1)))
        err = float(np.abs(R1[:, 0] - exact_steady_state_2d(L, 0.1)).max())
        ok &= rep0.null_dim == 4 and rep0.splitting < 1e-12
        ok &= rep1.null_dim == 1 and err < 1e-10
        detail.append(f"L={L} dim(h=0)={rep0.null_dim} split={rep0.splitting:.1e} "
                      f"dim(h=0.1)={rep1.null_dim} |p-enum|={err:.1e}")
    report("AC-1", ok, "; ".join(detail))


def test_ac2_wilson_2d(report, tmp_path):
    code, man, text = run_cli("wilson2d", tmp_path, L=32, h=0.2, sizes=(1, 2, 3))
    beta = beta_of_h(0.2)
    ok, detail = code == 0, []
    for line in text.splitlines()[1:]:
        m, mean, se, _, _ = (float(x) for x in line.split(","))
        exact = wilson_2d(beta, int(m))
        ok &= abs(mean - exact) < 3 * se and se < 0.005
        detail.append(f"m={int(m)} mc={mean:.4f}+-{se:.4f} exact={exact:.4f}")
    report("AC-2", ok, "; ".join(detail))


def test_ac3_confinement(report, tmp_path):
    code, man, _ = run_cli("wilson3d", tmp_path, L=16)
    fits = man["fits"]
    pref = {float(k): v["preferred"] for k, v in fits.items()}
    br = man["hc_bracket"]
    ok = (code == 0 and pref.get(0.005) == "perimeter" and pref.get(0.05) == "area"
          and br is not None and 0.005 <= br[0] < br[1] <= 0.02)
    report("AC-3", ok, f"preferred={pref} bracket={br}")


def test_ac4_lifetime_scaling(report, tmp_path):
    code, man, text = run_cli("lifetime3d", tmp_path, L=(8, 12, 16), h=0.005, n_traj=500)
    alpha = man.get("alpha", float("nan"))
    ok = code == 0 and 3 <= alpha <= 5
    med = [line.split(",")[2] for line in text.splitlines()[1:]]
    report("AC-4", ok, f"alpha={alpha:.3f}+-{man.get('alpha_err', float('nan')):.3f} medians={med}")


def test_ac5_relaxation_laws(report, tmp_path):
    _, low, _ = run_cli("relax3d", tmp_path / "low", L=16, h=0.004, n_traj=1000,
                        t_max=3000.0, baseline="run")
    _, high, _ = run_cli("relax3d", tmp_path / "high", L=16, h=0.02, n_traj=1000,
                         t_max=60.0, n_times=60, baseline="tail",
                         tail_from=100.0, tail_to=200.0, tail_every=5.0)
    r_low = low.get("ratio", float("nan"))
    r_high = high.get("ratio", float("nan"))
    ok_low = r_low > 2
    ok_high = r_high < 0.5
    report("AC-5", ok_low and ok_high,
           f"h=0.004 rss_exp/rss_pow={r_low:.2f} ({'ok' if ok_low else 'not >2'}); "
           f"h=0.02 rss_pow/rss_exp={1 / r_high:.2f} ({'ok' if ok_high else 'not >2'})")


def test_ac6_loop_shrinking(report, tmp_path):
    code, man, text = run_cli("shrink3d", tmp_path, L=48, R=(4, 8, 16), n_traj=40)
    z = man.get("z", float("nan"))
    ok = code == 0 and abs(z - 2) <= 0.3
    report("AC-6", ok, f"z={z:.3f}+-{man.get('z_err', float('nan')):.3f}")


def test_ac7_perturbation(report):
    rows = {}
    ok = True
    for L in (8, 16, 32, 64):
        d = effective_matrix(alpha_solutions(build_alpha_system(L), L), 1.0, L).deltas
        ok &= abs(d[3]) < 1e-10 and abs(d[1] - d[2]) < 1e-10
        rows[L] = float(d[1] * math.log(L))
    top = [rows[L] for L in (16, 32, 64)]
    spread = (max(top) - min(top)) / max(abs(x) for x in top)
    ok &= spread < 0.25
    report("AC-7", ok, f"delta2*logL={ {k: round(v, 4) for k, v in rows.items()} } "
                       f"spread={spread:.3f}")


def test_ac8_entropy(report):
    ok, worst, n_regions = True, 0.0, 0
    torus = build_torus(2, (2, 2))
    for h in (0.0, 0.1, 1.0):
        p = exact_steady_state_2d(2, h)
        for _, links, cnt in cli.entropy_regions(2, 4):
            inp = EntropyInput.from_counts(cnt, beta=beta_of_h(h), n=4)
            worst = max(worst, abs(entropy_bruteforce(p, links) - entropy_model1(inp)))
            n_regions += 1
    ok &= worst < 1e-10 and n_regions > 0
    b = 0.3
    kp = (stopo_kp(1, 0, b), stopo_kp(0, 1, b))
    ok &= kp[0] == 0 and abs(kp[1] - (LOG2 - f_beta(b))) < 1e-14
    lw = (stopo_lw_model1(0.0), stopo_lw_model1(b))
    ok &= abs(lw[0] - LOG2) < 1e-12 and abs(lw[1]) < 1e-12
    m2 = tuple(stopo_model2(c) for c in ("both-zero", "hx-only", "both-nonzero"))
    ok &= np.allclose(m2, (2 * LOG2, LOG2, 0.0), atol=1e-12)
    qworst = 0.0
    for mask in range(1, 1 << torus.n_links):
        links = [l for l in range(torus.n_links) if mask >> l & 1]
        c = region_counts(torus, links)
        target = (c.boundary + 1 - c.p - c.p_bar) * LOG2
        qworst = max(qworst, abs(model2_unperturbed_entropy(links) - target))
    ok &= qworst < 1e-10
    report("AC-8", ok, f"classical max diff={worst:.1e} over {n_regions} region-fields; "
                       f"KP={kp[0]:.3g},{kp[1]:.4f} LW={lw[0]:.4f},{lw[1]:.1e} "
                       f"model2={[round(x, 4) for x in m2]} quantum max diff={qworst:.1e}")


def test_ac9_xy_equivalence(report):
    ok, detail = True, []
    for h in (0.1, 0.3, 1.0):
        r = xy_spectrum_check(3, h)
        c = xy_couplings(h)
        ident = max(abs(c["beta1"] * c["beta2"] - 0.25),
                    abs(c["eta"] ** 2 + (c["h_z"] / 2) ** 2 - 1))
        ok &= r["mismatch"] < 1e-9 and ident < 1e-14
        detail.append(f"h={h} mismatch={r['mismatch']:.1e} identities={ident:.1e}")
    report("AC-9", ok, "; ".join(detail))


def test_ac10_hygiene(report):
    ok, worst_cons, worst_db, n_gen = True, 0.0, 0.0, 0
    gens = []
    for L in (2, 3):
        torus = build_torus(2, (L, L))
        for h in (0.0, 0.05, 0.5):
            full = build_generator_full(torus, Model(h=h))
            gens += [full, build_generator_dual(L, h)]
            if L == 2:
                gens.append(lump_to_dual(full))
                gens.append(build_generator_full(torus, Model(h=h, kappa_v=0.7)))
            if h > 0:
                worst_db = max(worst_db, detailed_balance_residual(full, exact_steady_state_2d(L, h)))
    for g in gens:
        ok &= g.min_offdiagonal() >= 0
        worst_cons = max(worst_cons, g.conservation_residual())
        n_gen += 1
    ok &= worst_cons < 1e-12 and worst_db < 1e-12
    steps = 0
    for dim, ext in ((2, (16, 16)), (3, (8, 8, 8))):
        t = build_torus(dim, ext)
        for method in ("metropolis", "rejection-free"):
            s = Sampler(Model(dim=dim, h=0.0), random_config(t, np.random.default_rng(dim)),
                        seed=17, method=method, monotone_check=True)
            steps += s.advance(1_000_000)
            ok &= s.cfg.cache_ok()
    report("AC-10", ok, f"{n_gen} generators, conservation={worst_cons:.1e}, "
                        f"detailed balance={worst_db:.1e}, monotone steps={steps}")
