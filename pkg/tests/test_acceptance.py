"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even with
output capture on) or directly as ``python tests/test_acceptance.py``.
"""
import glob
import json
import os
import subprocess
import sys

import numpy as np

from swlp import heat, kernels
from swlp import schrodinger as sch
from swlp.config import load_config, with_overrides
from swlp.estimates import concatenation_check, gain_extension_curve, io_gain, weak_residual
from swlp.harness import MULTIPLIER_ABLATION, MULTIPLIER_ITO, MULTIPLIER_SMOOTH, build_instance
from swlp.presets import scalar_system
from swlp.solvers import mild_solve_picard, mild_solve_stepping
from swlp.spaces import adjoint, inner
from swlp.stochastics import (TimeGrid, coarsen_brownian, mc_estimate, refine_brownian, sample_brownian)
from swlp.system import (control_admissibility_constant, input_map_phi, observation_admissibility_constant,
                         output_map_psi)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = {name: os.path.join(ROOT, "configs", f"{name}.json") for name in ("scalar", "heat", "schrodinger")}
SEED = 20240601
MACHINE = 1e-10
PICARD_TOL = 1e-6
RATIO_BAND = (1.3, 2.8)
CHANGE_LIMIT = 0.25


def preset(name, **over):
    return with_overrides(load_config(CONFIGS[name]), **over)


def heat_instance(a, b, steps=64, cells=16):
    m = heat.HeatModel(np.pi, cells, a, b, TimeGrid(1.0, steps))
    u = np.tile([0.2, -0.1], (steps, 1))
    return m, heat.build_heat_system(m), u


def in_band(r, band=RATIO_BAND):
    return band[0] <= r <= band[1]


def verdict(number, title, checks, capsys=None):
    """Print one line for the criterion and fail the test on any failed check."""
    ok = all(passed for _, _, passed in checks)
    detail = "; ".join(f"{name}={value:.3g}{'' if passed else ' [x]'}" for name, value, passed in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


# -- 1 ---------------------------------------------------------------------------------

def criterion_1():
    checks = []
    rng = np.random.default_rng(SEED)
    for name in ("scalar", "heat", "schrodinger"):
        inst = build_instance(preset(name))
        s = inst.sys
        S, dt = s.A.propagator, s.grid.dt
        checks.append((f"{name}.semigroup", np.max(np.abs(S(dt) @ S(2 * dt) - S(3 * dt))), None))
        f = rng.standard_normal(s.dim) + (1j * rng.standard_normal(s.dim) if s.H.is_complex else 0)
        u = rng.standard_normal(s.U.dim) + (1j * rng.standard_normal(s.U.dim) if s.U.is_complex else 0)
        pair = abs(inner(s.H, s.B(u), f) - inner(s.U, u, adjoint(s.B)(f)))
        checks.append((f"{name}.adjoint", pair / (s.H.norm(f) * s.U.norm(u) * max(1, s.B.operator_norm())), None))
        useq = rng.standard_normal((s.grid.steps, s.U.dim)).astype(s.dtype)
        scale = max(1.0, float(np.max(s.H.norm(input_map_phi(s, s.grid.steps, useq)))))
        checks.append((f"{name}.concatenation", concatenation_check(s, s.grid.steps // 2, useq) / scale, None))
        ens = sample_brownian(s.grid, 256, SEED)
        zero = mild_solve_stepping(s, np.zeros(s.dim), None, ens)
        checks.append((f"{name}.zero_data", np.max(np.abs(weak_residual(s, zero, inst.psi, None, ens))), None))
    ens = sample_brownian(TimeGrid(1.0, 64), 1000, SEED)
    fine = refine_brownian(refine_brownian(ens))
    checks.append(("brownian_coupling",
                   np.max(np.abs(coarsen_brownian(coarsen_brownian(fine)).increments - ens.increments)), None))
    return [(n, v, v <= MACHINE) for n, v, _ in checks]


# -- 2 ---------------------------------------------------------------------------------

def criterion_2():
    checks = []
    sys = scalar_system(a=-1.0, sigma=0.5, grid=TimeGrid(1.0, 256))
    N, dt = 256, sys.grid.dt
    exact = -np.expm1(-2.0) / 2
    phi = input_map_phi(sys, N, np.ones(N))[0]
    checks.append(("phi", abs(phi - (1 - np.exp(-1.0))), 5 * dt))
    psi = output_map_psi(sys, N, np.ones(1))[:, 0]
    checks.append(("psi", np.max(np.abs(psi - np.exp(-sys.grid.nodes))), 5 * dt))
    checks.append(("C_B", abs(control_admissibility_constant(sys, N) - exact), 5 * dt))
    checks.append(("C_C", abs(observation_admissibility_constant(sys, N) - exact), 5 * dt))
    Y = mild_solve_stepping(sys, np.ones(1), None, sample_brownian(sys.grid, 10_000, SEED)).states[:, -1, 0]
    est = mc_estimate(Y ** 2)
    checks.append(("ou_second_moment", abs(est.mean - np.exp(-2 + 0.25)), 3 * est.sem + 5 * dt))
    m = sch.SchrodingerModel(16, 0.0, 0.0, (0.0, np.pi))
    k = m.k
    expect = np.stack([1j * sch.SQ / k, -1j * sch.SQ * (-1.0) ** k / k], axis=-1)
    checks.append(("bstar_traces", np.max(np.abs(sch.bstar_trace(m, np.eye(16)) - expect)), 1e-12))
    hm = heat.HeatModel(np.pi, 16)
    lap = heat.neumann_laplacian(hm.cells, hm.h)
    worst = max(np.max(np.abs(lap @ hm.cosine_mode(j) - hm.eigenvalue(j) * hm.cosine_mode(j)))
                / max(1.0, abs(hm.eigenvalue(j))) for j in range(hm.cells))
    checks.append(("neumann_eigenvalues", worst, 1e-12))
    return [(n, v, v <= tol) for n, v, tol in checks]


# -- 3 ---------------------------------------------------------------------------------

def weak_ratio(name, paths=10_000):
    cfg = preset(name, paths=paths)
    coarse = build_instance(cfg, steps=cfg.steps // 2)
    ens = sample_brownian(coarse.sys.grid, paths, cfg.seed)
    values = []
    for inst in (coarse, build_instance(cfg)):
        traj = mild_solve_stepping(inst.sys, inst.y0, inst.u, ens)
        values.append(np.mean(np.abs(weak_residual(inst.sys, traj, inst.psi, inst.u, ens)[:, -1])))
        ens = refine_brownian(ens)
    return values[0] / values[1]


def criterion_3():
    return [(f"{name}.ratio", r, in_band(r)) for name in ("scalar", "heat", "schrodinger")
            for r in [weak_ratio(name)]]


# -- 4 ---------------------------------------------------------------------------------

def picard_matrix():
    yield "scalar", scalar_system(sigma=0.5), np.ones(1), np.zeros(256)
    yield "scalar_f1", scalar_system(f1=0.5, sigma=0.8), np.ones(1), np.ones(256)
    for a, b in ((0.0, 0.0), (1.0, 0.3)):
        m, s, u = heat_instance(a, b)
        yield f"heat({a:g},{b:g})", s, m.cosine_mode(1), u
    for a, b in ((0.0, 0.0), (0.5, 0.3)):
        m = sch.SchrodingerModel(16, (lambda x, c=a: c * np.sin(x)) if a else 0.0,
                                 (lambda x, c=b: c * np.sin(x)) if b else 0.0, (0.0,), TimeGrid(1.0, 64))
        y0 = np.zeros(16, dtype=complex)
        y0[:3] = [1, 0.5j, 0.25]
        yield f"schrodinger({a:g},{b:g})", sch.build_schrodinger_system(m), y0, np.full((64, 1), 0.3 + 0j)


def criterion_4():
    checks = []
    for name, s, y0, u in picard_matrix():
        ens = None if s.noise_free else sample_brownian(s.grid, 2000, SEED)
        traj, info = mild_solve_picard(s, y0, u, ens, tol=PICARD_TOL)
        ref = mild_solve_stepping(s, y0, u, ens)
        dist = float(np.sqrt(np.max(np.mean(s.H.norm(traj.states - ref.states) ** 2, axis=0))))
        checks.append((f"{name}.dist", dist, dist <= 5 * PICARD_TOL))
        contraction = max(info["contraction"])
        checks.append((f"{name}.contraction", contraction, contraction < 0.5))
    return checks


# -- 5 ---------------------------------------------------------------------------------

def criterion_5():
    checks = []
    for a, b in ((0.0, 0.0), (1.0, 0.3)):
        m, s, u = heat_instance(a, b)
        ens = sample_brownian(m.grid, 2000, SEED) if b else None
        traj = mild_solve_stepping(s, m.cosine_mode(1), u, ens)
        value, sem = heat.energy_identity_residual(m, traj, u, ens)
        checks.append((f"heat({a:g},{b:g})", value, value <= 3 * sem + 5 * m.grid.dt))
    # deterministic sub-case: free dynamics under coupled refinement, controlled at fixed h
    for tag, control, space in (("free", 0.0, 2), ("controlled_fixed_h", 1.0, 1)):
        res = []
        for level in range(3):
            m, s, u = heat_instance(0.0, 0.0, 64 * 2 ** level, 16 * space ** level)
            u = control * u
            res.append(heat.energy_identity_residual(m, mild_solve_stepping(s, m.cosine_mode(1), u), u)[0])
        for i in range(2):
            r = res[i] / res[i + 1]
            checks.append((f"{tag}.halving_{i}", r, in_band(r)))
    return checks


# -- 6 ---------------------------------------------------------------------------------

def criterion_6():
    grid = TimeGrid(1.0, 64)
    det = sch.multiplier_identity_residual(sch.MultiplierFieldSpec(points=65, **MULTIPLIER_SMOOTH), grid, levels=3)
    ens = sample_brownian(grid, 200, SEED)
    ito = sch.multiplier_identity_residual(sch.MultiplierFieldSpec(points=65, **MULTIPLIER_ITO), grid, ens, levels=1)
    abl = sch.multiplier_identity_residual(sch.MultiplierFieldSpec(points=65, **MULTIPLIER_ABLATION), grid, ens,
                                           levels=1)
    inflation = min(abl.ablation.values())
    return [("deterministic_order", det.order, det.order >= 1.0),
            ("stochastic_expectation", ito.value, ito.value <= 3 * ito.sem + 5 * grid.dt),
            ("min_ablation_inflation", inflation, inflation >= 10.0)]


# -- 7 ---------------------------------------------------------------------------------

def criterion_7():
    rng = np.random.default_rng(SEED)
    y0 = np.zeros(16, dtype=complex)
    y0[:3] = [1, 0.5j, 0.25]
    free = sch.SchrodingerModel(16, 0.0, 0.0, (0.0, np.pi), TimeGrid(1.0, 64))
    v_T = sch.low_mode_terminal(free, rng, 4)
    pathwise = float(np.max(np.abs(sch.duality_pairing(free, y0, np.full((64, 2), 0.3 + 0.1j), v_T))))
    noisy = sch.SchrodingerModel(16, lambda x: 0.5 * np.sin(x), lambda x: 0.3 * np.sin(x), (0.0,))
    ens = sample_brownian(TimeGrid(1.0, 32), 2000, SEED)
    rows = []
    for _ in range(2):
        m = noisy.with_grid(ens.grid)
        rows.append((m.grid.dt,) + sch.duality_residual(m, y0, np.full((m.grid.steps, 1), 0.3 + 0j), v_T, ens))
        ens = refine_brownian(ens)
    dt, value, sem = rows[-1]
    ratio = rows[0][1] / rows[1][1]
    return [("unitary_pathwise", pathwise, pathwise < 1e-9),
            ("noisy_expectation", value, value <= 3 * sem + 5 * dt),
            ("halving_ratio", ratio, in_band(ratio))]


# -- 8 ---------------------------------------------------------------------------------

def criterion_8(trials=8, paths=200):
    checks = []
    hm = heat.HeatModel(np.pi, 16, 1.0, 0.3, TimeGrid(1.0, 64))
    sm = sch.SchrodingerModel(16, lambda x: 0.5 * np.sin(x), lambda x: 0.3 * np.sin(x), (0.0,), TimeGrid(1.0, 64))
    for name, model, fn, sampler, build in (
            ("heat", hm, heat.heat_wellposed_constant, heat.low_mode_sampler, heat.build_heat_system),
            ("schrodinger", sm, sch.schrodinger_wellposed_constant, sch.low_mode_sampler,
             sch.build_schrodinger_system)):
        base = fn(model, trials, paths, SEED)
        checks.append((f"{name}.space_refinement", base["relative_change"], base["relative_change"] < CHANGE_LIMIT))
        doubled = fn(model, trials, 2 * paths, SEED)
        change = abs(doubled["value"] - base["value"]) / base["value"]
        checks.append((f"{name}.path_doubling", change, change < CHANGE_LIMIT))
        s = build(model)
        ens, ens2 = sample_brownian(s.grid, paths, SEED), sample_brownian(s.grid, 2 * paths, SEED)
        g1 = io_gain(s, 64, trials, ens, SEED, sampler(model)).value
        g2 = io_gain(s, 64, trials, ens2, SEED, sampler(model)).value
        checks.append((f"{name}.io_gain_path_doubling", abs(g2 - g1) / g1, abs(g2 - g1) / g1 < CHANGE_LIMIT))
        nodes = [8, 16, 24, 32, 40, 48, 56, 64]
        gains = [c for _, c in gain_extension_curve(s, nodes, trials, ens, SEED, sampler(model))]
        cb = [control_admissibility_constant(s, k) for k in nodes]
        cc = [observation_admissibility_constant(s, k) for k in nodes]
        defect = max(max(0.0, np.max(np.subtract(c[:-1], c[1:]))) for c in (gains, cb, cc))
        checks.append((f"{name}.monotone_defect", defect, defect <= 1e-12))
    return checks


# -- 9 ---------------------------------------------------------------------------------

RUNS = (("scalar", "simulate"), ("scalar", "admissibility"), ("scalar", "verify"),
        ("heat", "simulate"), ("heat", "admissibility"), ("schrodinger", "simulate"))


def _cli_outputs(tmp, name, command, threads):
    cfg = json.load(open(CONFIGS[name]))
    cfg.update(paths=min(cfg["paths"], 2000), export_paths=64)
    path = os.path.join(tmp, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    out = os.path.join(tmp, f"{name}-{command}-t{threads}")
    env = dict(os.environ, SWLP_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "swlp.cli", command, "--config", path, "--out", out], env=env,
                   capture_output=True, check=False)
    files = sorted(glob.glob(os.path.join(out, "*.csv")))
    return {os.path.basename(f): open(f, "rb").read() for f in files}


def criterion_9(tmp):
    checks = []
    for name, command in RUNS:
        one = _cli_outputs(tmp, name, command, 1)
        four = _cli_outputs(tmp, name, command, 4)
        again = _cli_outputs(tmp, name, command, 1)
        differing = sum(one.get(f) != four.get(f) or one.get(f) != again.get(f) for f in set(one) | set(four))
        checks.append((f"{name}.{command}.files_differing", differing, bool(one) and differing == 0))
    z1 = kernels.normals(SEED, 0, 997, 33, threads=1)
    z8 = kernels.normals(SEED, 0, 997, 33, threads=8)
    checks.append(("kernel_threads_differing", float(not np.array_equal(z1, z8)), np.array_equal(z1, z8)))
    return checks


TITLES = {
    1: "exact identities to machine precision",
    2: "closed-form oracles",
    3: "mild solutions satisfy the weak form (refinement ratio)",
    4: "Picard construction agrees with stepping",
    5: "heat energy identity",
    6: "multiplier identity",
    7: "forward-backward duality",
    8: "well-posedness constants are stable",
    9: "byte-identical reruns across thread counts",
}


def test_criterion_1_exact_identities(capsys):
    verdict(1, TITLES[1], criterion_1(), capsys)


def test_criterion_2_closed_form_oracles(capsys):
    verdict(2, TITLES[2], criterion_2(), capsys)


def test_criterion_3_mild_weak(capsys):
    verdict(3, TITLES[3], criterion_3(), capsys)


def test_criterion_4_picard(capsys):
    verdict(4, TITLES[4], criterion_4(), capsys)


def test_criterion_5_energy(capsys):
    verdict(5, TITLES[5], criterion_5(), capsys)


def test_criterion_6_multiplier(capsys):
    verdict(6, TITLES[6], criterion_6(), capsys)


def test_criterion_7_duality(capsys):
    verdict(7, TITLES[7], criterion_7(), capsys)


def test_criterion_8_wellposed(capsys):
    verdict(8, TITLES[8], criterion_8(), capsys)


def test_criterion_9_reproducibility(capsys, tmp_path):
    verdict(9, TITLES[9], criterion_9(str(tmp_path)), capsys)


if __name__ == "__main__":
    import tempfile

    failed = 0
    for n in range(1, 10):
        fn = globals()[f"criterion_{n}"]
        try:
            if n == 9:
                with tempfile.TemporaryDirectory() as tmp:
                    verdict(n, TITLES[n], fn(tmp))
            else:
                verdict(n, TITLES[n], fn())
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
