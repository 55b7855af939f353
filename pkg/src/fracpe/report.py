"""Post-run reporting: renders figures from a run directory's delimited
outputs and collects a combined summary CSV next to them."""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .config import ConfigError  # noqa: E402


def _load_ndjson(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _save(fig, out_dir, name, written):
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)


def _fig_energy(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "energy.ndjson"))
    t = [r["t"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for key, label in (("u_l2", "|u|_2"), ("u_h1", "||u||_1"),
                       ("u_tilde_l4", "|u~|_4"), ("uz_l2", "|u_z|_2"),
                       ("grad_ubar_l2", "|grad ubar|_2")):
        ax1.plot(t, [r[key] for r in rows], label=label, lw=1)
    ax1.set_ylabel("velocity norms")
    ax1.legend(fontsize=8, ncol=3)
    for key, label in (("th_l2", "|th|_2"), ("th_l4", "|th|_4"),
                       ("th_h1", "||th||_1")):
        ax2.plot(t, [r[key] for r in rows], label=label, lw=1)
    ax2.set_xlabel("t")
    ax2.set_ylabel("temperature norms")
    ax2.legend(fontsize=8, ncol=3)
    fig.suptitle("energy functionals")
    _save(fig, run_dir, "energy.png", written)
    # plot-ready CSV alongside the figure
    csv = os.path.join(run_dir, "energy.csv")
    keys = ["t", "u_l2", "u_h1", "u_tilde_l4", "grad_ubar_l2", "uz_l2",
            "th_l2", "th_l4", "th_h1"]
    with open(csv, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[k]:.17g}" for k in keys) + "\n")
    written.append(csv)


def _fig_pullback(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "pullback.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    seeds = sorted({r["seed"] for r in rows})
    for seed in seeds:
        rs = [r for r in rows if r["seed"] == seed]
        ax.semilogy([-r["s_start"] for r in rs], [max(r["diameter"], 1e-300)
                                                  for r in rs],
                    marker="o", lw=1, label=f"seed {seed}")
    ax.set_xlabel("|s|  (pullback start)")
    ax.set_ylabel("time-0 image diameter (V-norm)")
    ax.set_title("pullback attraction")
    if len(seeds) <= 10:
        ax.legend(fontsize=7)
    _save(fig, run_dir, "pullback.png", written)


def _fig_absorb(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "absorb.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    rhos = [r["rho"] for r in rows]
    entry = [r.get("entry_time") for r in rows]
    ax.plot(rhos, entry, marker="s")
    ax.set_xscale("log")
    ax.set_xlabel("initial radius rho")
    ax.set_ylabel("entry time into the absorbing ball")
    ax.set_title("absorbing-ball entry times")
    _save(fig, run_dir, "absorb.png", written)


def _fig_moments(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "moments.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar([r["beta"] for r in rows], [r["estimate"] for r in rows],
                yerr=[2 * r["stderr"] for r in rows], marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("OU shift beta")
    ax.set_ylabel("E ||Z(0)||_3^m")
    ax.set_title("moment decay in beta (2 s.e. bars)")
    _save(fig, run_dir, "moments.png", written)


def _fig_growth(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "growth.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    for q in ("median", "q90", "q99"):
        ax.loglog([r["T"] for r in rows], [r[q] for r in rows], marker="o",
                  label=q)
    ax.set_xlabel("lookback T")
    ax.set_ylabel("sup ||Z(t)||_3 over [-T, 0]")
    ax.set_title("lookback growth of the OU supremum")
    ax.legend(fontsize=8)
    _save(fig, run_dir, "growth.png", written)


def _fig_holder(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "holder.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog([r["lag"] for r in rows], [r["median"] for r in rows], marker="o")
    ax.set_xlabel("lag")
    ax.set_ylabel("median ||Z(t)-Z(s)||_3")
    ax.set_title("increment scaling")
    _save(fig, run_dir, "holder.png", written)


def _fig_contract(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "contract.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    seeds = sorted({r["seed"] for r in rows})
    for seed in seeds:
        rs = [r for r in rows if r["seed"] == seed]
        ax.plot([r["scale"] for r in rs], [r["c_star"] for r in rs],
                marker="o", lw=1, label=f"seed {seed}")
    ax.set_xscale("log")
    ax.set_xlabel("perturbation scale")
    ax.set_ylabel("c*")
    ax.set_title("contraction-budget constant across perturbation scales")
    ax.legend(fontsize=7)
    _save(fig, run_dir, "contract.png", written)


def _fig_fbm(run_dir, written):
    import numpy as np

    data = np.genfromtxt(os.path.join(run_dir, "fbm.csv"), delimiter=",",
                         skip_header=1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data[:, 0], data[:, 1], lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("B^H(t)")
    ax.set_title("fBm sample path")
    _save(fig, run_dir, "fbm.png", written)


def _fig_trace(run_dir, written):
    rows = _load_ndjson(os.path.join(run_dir, "trace.ndjson"))
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r["field"] for r in rows]
    ax.bar(names, [r["tail_fraction"] * 100 for r in rows])
    ax.axhline(1.0, color="r", ls="--", label="1% bar")
    ax.set_ylabel("certified tail / partial sum  [%]")
    ax.set_title("trace-condition tail check")
    ax.legend()
    _save(fig, run_dir, "trace.png", written)


_ARTIFACTS = (
    ("energy.ndjson", _fig_energy),
    ("pullback.ndjson", _fig_pullback),
    ("absorb.ndjson", _fig_absorb),
    ("moments.ndjson", _fig_moments),
    ("growth.ndjson", _fig_growth),
    ("holder.ndjson", _fig_holder),
    ("contract.ndjson", _fig_contract),
    ("fbm.csv", _fig_fbm),
    ("trace.ndjson", _fig_trace),
)


def render_report(run_dir) -> list[str]:
    """Render figures for every recognized artifact in run_dir."""
    if not os.path.isdir(run_dir):
        raise ConfigError(f"report: {run_dir} is not a run directory")
    written = []
    for fname, fn in _ARTIFACTS:
        if os.path.exists(os.path.join(run_dir, fname)):
            fn(run_dir, written)
    if not written:
        raise ConfigError(f"report: no recognized artifacts in {run_dir}")
    return written
