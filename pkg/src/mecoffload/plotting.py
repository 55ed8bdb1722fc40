"""Static SVG line charts for experiment tables."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "mecoffload"   # stable element ids across reruns

XLABELS = {
    "convergence": "outer iteration",
    "sweep_users": "number of users U",
    "sweep_capacity": "MEC capacity per server (cycles/s)",
    "sweep_parallel": "maximum parallelism Q",
    "sweep_weight": "weight L (grid chosen, not read from a figure)",
}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_experiment(spec, table, path) -> None:
    if spec.experiment == "convergence":
        plot_traces(table, path)
    elif spec.experiment == "sweep_weight":
        plot_weight(spec, table, path)
    else:
        plot_sweep(spec, table, path)


def plot_sweep(spec, table, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in spec.schemes:
        for bw in spec.bandwidths:
            m = table.means("utility", scheme, bw)
            if m:
                ax.plot(list(m), list(m.values()), marker="o",
                        label=f"{scheme}, B={bw / 1e6:g} MHz")
    ax.set_xlabel(XLABELS[spec.experiment])
    ax.set_ylabel("mean system utility")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_weight(spec, table, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in spec.schemes:
        for bw in spec.bandwidths:
            sr = table.means("revenue", scheme, bw)
            sc = table.means("cost", scheme, bw)
            if sr:
                tag = f"{scheme}, B={bw / 1e6:g} MHz"
                ax.plot(list(sr), list(sr.values()), marker="o", label=f"SR {tag}")
                ax.plot(list(sc), list(sc.values()), marker="s", ls="--", label=f"SC {tag}")
    ax.set_xscale("log")
    ax.set_xlabel(XLABELS["sweep_weight"])
    ax.set_ylabel("system revenue / negative system cost")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_traces(table, path) -> None:
    """Relaxed objective per outer iteration, averaged over seeds."""
    acc: dict[tuple, dict[int, list[float]]] = {}
    for exp, scheme, value, bw, seed, it, relaxed, _ in table.traces:
        acc.setdefault((scheme, bw), {}).setdefault(int(it), []).append(float(relaxed))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (scheme, bw), per_it in acc.items():
        its = sorted(per_it)
        ax.plot(its, [sum(per_it[i]) / len(per_it[i]) for i in its], marker="o",
                label=f"{scheme}, B={bw / 1e6:g} MHz")
    ax.set_xlabel(XLABELS["convergence"])
    ax.set_ylabel("relaxed objective (seed mean)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)
