"""Experiment orchestration: manifests, deterministic artifact writing,
resume, and the exit-code contract (0 pass/complete, 2 experiment finding,
1 error)."""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import (CHECK_NOISE_MODES, CHECK_NOISE_TRUNCATION, SCHEMA_VERSION,
                     ConfigError, load_config)
from .fbm import sample_fbm, two_sided_extend
from .gridfn import InvalidInput
from .noise import (VELOCITY, ConvolutionPath, NoiseSpec, batch_paths,
                    check_trace_conditions, growth_experiment,
                    holder_experiment, moment_experiment)
from .pesolver import Params, SpectralState, norms, step
from .attractor import (PullbackConfig, absorbing_radius, contraction_diagnostic,
                        make_noise_pair, pullback_experiment,
                        random_state_on_sphere)
from .spectral import Domain, SpectralBasis, build_basis

SNAP_MAGIC = b"FRSN"
SUMMARY_COLUMNS = ("s_start", "diameter", "entry_time", "r_estimate", "c_star")


@dataclass
class RunResult:
    exit_code: int
    run_dir: str
    summary: str


def canonical_manifest(cfg: dict) -> dict:
    return {"config": cfg, "code_version": __version__,
            "schema_version": SCHEMA_VERSION}


def manifest_hash(manifest: dict) -> str:
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_objects(cfg: dict):
    dom = Domain(Lx=cfg["domain"]["Lx"], Ly=cfg["domain"]["Ly"],
                 alpha_robin=cfg["domain"]["alpha_robin"])
    basis = build_basis(dom, (cfg["truncation"]["M_h"], cfg["truncation"]["K_v"]))
    noise = NoiseSpec(**cfg["noise"])
    p = cfg["params"]
    Q = None
    if p.get("Q_first_mode", 0.0) != 0.0:
        Q = np.zeros(basis.n_temperature)
        Q[0] = p["Q_first_mode"]
    params = Params(f0=p["f0"], beta_coriolis=p["beta_coriolis"], Q_coeffs=Q,
                    nonlinear=p["nonlinear"], coriolis=p["coriolis"],
                    coupling=p["coupling"])
    return basis, noise, params


def _write_ndjson(path, records, mode="w"):
    with open(path, mode) as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _write_summary_csv(path, rows, mhash):
    cols = SUMMARY_COLUMNS
    with open(path, "w") as fh:
        fh.write(",".join(cols) + ",manifest_hash\n")
        for r in rows:
            vals = [("" if r.get(c) is None else f"{r[c]:.17g}") for c in cols]
            fh.write(",".join(vals) + f",{mhash}\n")


def _prepare_run_dir(out_dir, cfg):
    os.makedirs(out_dir, exist_ok=True)
    manifest = canonical_manifest(cfg)
    mhash = manifest_hash(manifest)
    manifest_out = dict(manifest)
    manifest_out["manifest_hash"] = mhash
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest_out, fh, indent=1, sort_keys=True)
    return mhash


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def write_snapshot(path, mhash: str, step_index: int, state: SpectralState):
    with open(path, "wb") as fh:
        fh.write(SNAP_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(bytes.fromhex(mhash))
        fh.write(struct.pack("<Qd", step_index, state.t))
        fh.write(struct.pack("<II", state.vel_coeffs.size, state.temp_coeffs.size))
        fh.write(np.ascontiguousarray(state.vel_coeffs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.temp_coeffs, dtype="<f8").tobytes())


def read_snapshot(path, basis: SpectralBasis):
    with open(path, "rb") as fh:
        if fh.read(4) != SNAP_MAGIC:
            raise InvalidInput(f"not a snapshot file: {path}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != 1:
            raise InvalidInput(f"unsupported snapshot version {version}")
        mhash = fh.read(32).hex()
        step_index, t = struct.unpack("<Qd", fh.read(16))
        nv, nt = struct.unpack("<II", fh.read(8))
        vel = np.frombuffer(fh.read(8 * nv), dtype="<f8").copy()
        temp = np.frombuffer(fh.read(8 * nt), dtype="<f8").copy()
    return mhash, step_index, SpectralState(t, vel, temp, basis)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _run_check_noise(cfg, out_dir, mhash):
    dom = Domain(Lx=cfg["domain"]["Lx"], Ly=cfg["domain"]["Ly"],
                 alpha_robin=cfg["domain"]["alpha_robin"])
    catalog = build_basis(dom, (CHECK_NOISE_TRUNCATION["M_h"],
                                CHECK_NOISE_TRUNCATION["K_v"]))
    spec = NoiseSpec(**{**cfg["noise"],
                        "truncation": max(cfg["noise"]["truncation"],
                                          CHECK_NOISE_MODES)})
    rep = check_trace_conditions(spec, catalog)
    recs = []
    for name in ("velocity", "temperature"):
        r = rep[name]
        recs.append({"field": name, "truncation": r.truncation,
                     "partial_sum": r.partial_sum, "tail_bound": r.tail_bound,
                     "tail_fraction": r.tail_fraction,
                     "growth_constant": r.growth_constant,
                     "extrapolation_uncertain": r.extrapolation_uncertain,
                     "passed": r.passed, "manifest_hash": mhash})
    _write_ndjson(os.path.join(out_dir, "trace.ndjson"), recs)
    verdict = "PASS" if rep["passed"] else "FAIL"
    lines = [f"trace conditions: {verdict}"]
    for r in recs:
        lines.append(f"  {r['field']}: partial={r['partial_sum']:.6g} "
                     f"tail<={r['tail_bound']:.3g} ({100 * r['tail_fraction']:.2f}%)")
    return (0 if rep["passed"] else 2), "\n".join(lines)


def _run_gen_fbm(cfg, out_dir, mhash):
    f = cfg["fbm"]
    path = sample_fbm(f["H"], (0.0, f["dt"], f["n"]), cfg["seed"], f["stream_id"])
    if f["two_sided"]:
        path = two_sided_extend(path)
    path.to_files(os.path.join(out_dir, "fbm.csv"),
                  os.path.join(out_dir, "fbm.json"))
    return 0, (f"fBm path: H={f['H']} n={path.n} span=[{path.t0:.6g}, "
               f"{path.times()[-1]:.6g}] seed={cfg['seed']}")


def _run_ou_stats(cfg, out_dir, mhash):
    basis, spec, _ = build_objects(cfg)
    o = cfg["ou_stats"]
    kind = o["kind"]
    if kind == "moment":
        rows = moment_experiment(spec, basis, o["m"], o["n_samples"],
                                 o["beta_grid"], seed=cfg["seed"],
                                 dt=o["sample_dt"])
        for r in rows:
            r["manifest_hash"] = mhash
        _write_ndjson(os.path.join(out_dir, "moments.ndjson"), rows)
        dec = all(rows[i]["estimate"] - rows[i + 1]["estimate"]
                  > 2.0 * math.hypot(rows[i]["stderr"], rows[i + 1]["stderr"])
                  for i in range(len(rows) - 1))
        lines = [f"moment decay in beta: {'PASS' if dec else 'FAIL'}"]
        lines += [f"  beta={r['beta']:g}: {r['estimate']:.4e} +- {r['stderr']:.1e}"
                  for r in rows]
        return (0 if dec else 2), "\n".join(lines)
    if kind == "growth":
        rep = growth_experiment(spec, basis, o["T_lookbacks"], o["n_samples"],
                                seed=cfg["seed"], dt=o["sample_dt"])
        recs = [dict(r, manifest_hash=mhash) for r in rep["rows"]]
        _write_ndjson(os.path.join(out_dir, "growth.ndjson"), recs)
        return (0 if rep["passed"] else 2), (
            f"lookback growth exponent {rep['fit_exponent']:.3f} "
            f"{'PASS' if rep['passed'] else 'FAIL'} (< 0.5 required)")
    # holder
    n = int(round(1.0 / o["sample_dt"])) + 1
    z, gam, lam, midx = batch_paths(spec, basis, VELOCITY, cfg["seed"],
                                    o["n_samples"], (0.0, o["sample_dt"], n))
    paths = [ConvolutionPath(spec=spec, field=VELOCITY, gammas=gam, lambdas=lam,
                             mode_indices=midx, t0=0.0, dt=o["sample_dt"],
                             z=z[i], seed=cfg["seed"], sample_id=i)
             for i in range(z.shape[0])]
    rep = holder_experiment(paths)
    _write_ndjson(os.path.join(out_dir, "holder.ndjson"),
                  [{"lag": L, "median": m, "manifest_hash": mhash}
                   for L, m in zip(rep["lags"], rep["medians"])])
    return (0 if rep["passed"] else 2), (
        f"increment exponent {rep['slope']:.3f} "
        f"{'PASS' if rep['passed'] else 'FAIL'} (>= 0.45 required)")


def _simulate_loop(cfg, out_dir, mhash, basis, spec, params, state, start_step,
                   append):
    dt = cfg["dt"]
    horizon = cfg["horizon"]
    n_steps = int(round(horizon / dt))
    snap_every = cfg["simulate"]["snapshot_every"]
    n_grid = n_steps + 1
    z1, z2 = make_noise_pair(spec, basis, cfg["seed"], (0.0, dt, n_grid))
    energy_path = os.path.join(out_dir, "energy.ndjson")
    mode = "a" if append else "w"
    fh = open(energy_path, mode)
    try:
        if start_step == 0:
            fh.write(json.dumps(norms(state)) + "\n")
        for k in range(start_step, n_steps):
            state = step(state, dt, z1, z2, params, beta_shift=spec.beta_shift)
            fh.write(json.dumps(norms(state)) + "\n")
            done = k + 1
            if done % snap_every == 0 or done == n_steps:
                write_snapshot(os.path.join(out_dir, f"state_{done:08d}.snap"),
                               mhash, done, state)
    finally:
        fh.close()
    return state, n_steps


def _run_simulate(cfg, out_dir, mhash):
    basis, spec, params = build_objects(cfg)
    st = random_state_on_sphere(basis, cfg["simulate"]["rho"],
                                cfg["simulate"]["state_seed"])
    state, n_steps = _simulate_loop(cfg, out_dir, mhash, basis, spec, params,
                                    st, 0, append=False)
    basis.write_manifest(os.path.join(out_dir, "basis.json"))
    row = norms(state)
    return 0, (f"simulate: {n_steps} steps to t={state.t:.6g}; "
               f"|u|_2={row['u_l2']:.4g} ||u||_1={row['u_h1']:.4g} "
               f"|th|_2={row['th_l2']:.4g}")


def _run_pullback(cfg, out_dir, mhash):
    basis, spec, params = build_objects(cfg)
    pb = cfg["pullback"]
    seeds = list(range(cfg["seed"], cfg["seed"] + pb["n_seeds"]))

    def cell(seed):
        c = PullbackConfig(start_times=tuple(pb["start_times"]), rho=pb["rho"],
                           n_states=pb["n_states"], state_seed=100 + seed,
                           noise_seed=seed, dt=cfg["dt"])
        return pullback_experiment(c, basis, spec, params)

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as ex:
        results = list(ex.map(cell, seeds))
    recs, summary_rows = [], []
    n_pass = 0
    for seed, rep in zip(seeds, results):
        n_pass += bool(rep["passed"])
        for r in rep["rows"]:
            recs.append({"seed": seed, "s_start": r["s_start"],
                         "diameter": r["diameter"], "passed": rep["passed"],
                         "manifest_hash": mhash})
            summary_rows.append({"s_start": r["s_start"],
                                 "diameter": r["diameter"]})
    _write_ndjson(os.path.join(out_dir, "pullback.ndjson"), recs)
    _write_summary_csv(os.path.join(out_dir, "summary.csv"), summary_rows, mhash)
    frac = n_pass / len(seeds)
    ok = frac >= 0.9
    return (0 if ok else 2), (
        f"pullback attraction: {n_pass}/{len(seeds)} seeds PASS "
        f"({'PASS' if ok else 'FAIL'} at the 9/10 bar)")


def _run_absorb(cfg, out_dir, mhash):
    basis, spec, params = build_objects(cfg)
    ab = cfg["absorb"]
    rep = absorbing_radius(basis, spec, params, rhos=tuple(ab["rhos"]),
                           horizon=cfg["horizon"], dt=cfg["dt"],
                           noise_seed=cfg["seed"], window=ab["window"])
    recs = [dict(r, manifest_hash=mhash) for r in rep["per_rho"]]
    _write_ndjson(os.path.join(out_dir, "absorb.ndjson"), recs)
    rows = [{"entry_time": r.get("entry_time"), "r_estimate": rep["r_estimate"]}
            for r in rep["per_rho"]]
    _write_summary_csv(os.path.join(out_dir, "summary.csv"), rows, mhash)
    ok = rep["verdict"] == "ABSORBED"
    return (0 if ok else 2), (
        f"absorbing radius: {rep['verdict']} r(omega)={rep['r_estimate']:.4g}")


def _run_contract(cfg, out_dir, mhash):
    basis, spec, params = build_objects(cfg)
    ct = cfg["contract"]
    dt = cfg["dt"]
    horizon = cfg["horizon"]
    seeds = list(range(cfg["seed"], cfg["seed"] + ct["n_seeds"]))

    def cell(seed):
        n = int(round(horizon / dt)) + 1
        z1, z2 = make_noise_pair(spec, basis, seed, (0.0, dt, n))
        base = random_state_on_sphere(basis, ct["rho"], 1000 + seed)
        cs = []
        for scale in ct["perturbation_scales"]:
            pert = np.zeros(basis.n_velocity)
            pert[0] = ct["perturbation_size"] * scale
            sa = SpectralState(0.0, base.vel_coeffs + pert, base.temp_coeffs, basis)
            d = contraction_diagnostic(sa, base, z1, z2, params,
                                       spec.beta_shift, horizon, dt)
            cs.append(d["c_star"])
        spread = (max(cs) - min(cs)) / max(abs(np.mean(cs)), 1e-300)
        return cs, spread

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as ex:
        results = list(ex.map(cell, seeds))
    recs, rows = [], []
    ok = True
    for seed, (cs, spread) in zip(seeds, results):
        ok = ok and spread <= ct["spread_tolerance"]
        for scale, c in zip(ct["perturbation_scales"], cs):
            recs.append({"seed": seed, "scale": scale, "c_star": c,
                         "spread": spread, "manifest_hash": mhash})
            rows.append({"c_star": c})
    _write_ndjson(os.path.join(out_dir, "contract.ndjson"), recs)
    _write_summary_csv(os.path.join(out_dir, "summary.csv"), rows, mhash)
    return (0 if ok else 2), (
        f"contraction c* stability across scales: {'PASS' if ok else 'FAIL'} "
        f"(tolerance {ct['spread_tolerance']:.0%})")


_DISPATCH = {
    "check-noise": _run_check_noise,
    "gen-fbm": _run_gen_fbm,
    "ou-stats": _run_ou_stats,
    "simulate": _run_simulate,
    "pullback": _run_pullback,
    "absorb": _run_absorb,
    "contract": _run_contract,
}


def run(config_path, out_dir=None, overrides=None, expected=None) -> RunResult:
    """Execute the configured experiment; writes manifest + artifacts."""
    cfg = load_config(config_path, overrides)
    if expected is not None and cfg["experiment"] != expected:
        raise ConfigError(
            f"config declares experiment {cfg['experiment']!r} but the "
            f"{expected!r} subcommand was invoked")
    if out_dir is None:
        out_dir = cfg.get("out_dir") or os.path.join(".", "fracpe-out",
                                                     cfg["experiment"])
    try:
        mhash = _prepare_run_dir(out_dir, cfg)
    except OSError as exc:
        raise ConfigError(f"cannot prepare output directory {out_dir}: {exc}")
    code, summary = _DISPATCH[cfg["experiment"]](cfg, out_dir, mhash)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    return RunResult(exit_code=code, run_dir=out_dir, summary=summary)


def resume(run_dir) -> RunResult:
    """Continue a simulate run from its last snapshot, bit-exactly.

    The noise is regenerated from its keys, never stored; refuses on
    manifest/code-version mismatch or missing snapshot.
    """
    mpath = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(mpath):
        raise ConfigError(f"resume: no manifest in {run_dir}")
    with open(mpath) as fh:
        stored = json.load(fh)
    declared = stored.pop("manifest_hash", None)
    recomputed = manifest_hash(stored)
    if declared != recomputed:
        raise ConfigError(
            "resume: manifest has been edited (hash mismatch); refusing")
    if stored["code_version"] != __version__:
        raise ConfigError(
            f"resume: manifest written by code version {stored['code_version']}, "
            f"running {__version__}; refusing")
    cfg = stored["config"]
    if cfg["experiment"] != "simulate":
        raise ConfigError("resume: only simulate runs are resumable")
    snaps = sorted(f for f in os.listdir(run_dir) if f.endswith(".snap"))
    if not snaps:
        raise ConfigError(f"resume: no snapshot found in {run_dir}")
    basis, spec, params = build_objects(cfg)
    snap_hash, step_index, state = read_snapshot(
        os.path.join(run_dir, snaps[-1]), basis)
    if snap_hash != recomputed:
        raise ConfigError("resume: snapshot belongs to a different manifest")
    n_steps = int(round(cfg["horizon"] / cfg["dt"]))
    if step_index >= n_steps:
        return RunResult(0, run_dir, "resume: run already complete")
    # drop any energy rows past the snapshot so the continued file matches
    # an unbroken run byte for byte
    energy_path = os.path.join(run_dir, "energy.ndjson")
    with open(energy_path) as fh:
        lines = fh.readlines()
    with open(energy_path, "w") as fh:
        fh.writelines(lines[: step_index + 1])
    mhash = recomputed
    state, n_steps = _simulate_loop(cfg, run_dir, mhash, basis, spec, params,
                                    state, step_index, append=True)
    row = norms(state)
    summary = (f"resumed simulate: steps {step_index}..{n_steps} to "
               f"t={state.t:.6g}; |u|_2={row['u_l2']:.4g}")
    with open(os.path.join(run_dir, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    return RunResult(0, run_dir, summary)
