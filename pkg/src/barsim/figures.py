"""Render experiment output tables as matplotlib figures.

Each sweep experiment gets one PNG next to its delimited output file.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_figure"]


def _rows_with(rows, key):
    return [r for r in rows if r.get(key) not in (None, "", "nan")]


def render_figure(experiment: str, rows: list, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    if experiment == "rate-vs-snr":
        _plot_rate_sweep(ax, rows, x_key="snr_db", x_label="P/sigma^2 (dB)")
    elif experiment == "rate-vs-m":
        _plot_rate_sweep(ax, rows, x_key="m", x_label="number of relays M")
    elif experiment == "analytical-only":
        _plot_analytical(ax, rows)
    elif experiment == "mu-convergence":
        _plot_mu(ax, rows)
    elif experiment == "delay-convergence":
        _plot_delay(ax, rows)
    else:
        raise ValueError(f"no figure defined for experiment {experiment!r}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _series_labels(rows):
    labels = []
    for r in rows:
        label = r["protocol"]
        if r.get("delay_target"):
            label = f"{label} T0={r['delay_target']}"
        if label not in labels:
            labels.append(label)
    return labels


def _plot_rate_sweep(ax, rows, x_key, x_label):
    for label in _series_labels(rows):
        pts = [
            r for r in rows
            if (r["protocol"] + (f" T0={r['delay_target']}" if r.get("delay_target") else "")) == label
        ]
        xs = [r[x_key] for r in pts]
        sim = [r["rate_sim"] for r in pts if r.get("rate_sim") is not None]
        if len(sim) == len(pts):
            ax.plot(xs, sim, marker="o", label=f"{label} (sim)")
        ana = [r.get("rate_analytical") for r in pts]
        if all(a is not None for a in ana):
            ax.plot(xs, ana, linestyle="--", label=f"{label} (analytical)")
    ax.set_xlabel(x_label)
    ax.set_ylabel("average rate (bits/symbol)")
    ax.legend()


def _plot_analytical(ax, rows):
    for m in sorted({r["m"] for r in rows}):
        pts = [r for r in rows if r["m"] == m]
        xs = [r["snr_db"] for r in pts]
        ax.plot(xs, [r["rate_ba"] for r in pts], marker="o", label=f"buffer-aided M={m}")
        ax.plot(xs, [r["rate_conv"] for r in pts], marker="s", linestyle="--",
                label=f"conventional M={m}")
    ax.set_xlabel("P/sigma^2 (dB)")
    ax.set_ylabel("average rate (bits/symbol)")
    ax.legend()


def _plot_mu(ax, rows):
    mu_cols = sorted(c for c in rows[0] if c.startswith("mu_e_"))
    slots = [r["slot"] for r in rows]
    for col in mu_cols:
        k = col.rsplit("_", 1)[1]
        line, = ax.plot(slots, [r[col] for r in rows], label=f"mu_e {k}")
        ref = rows[-1].get(f"mu_star_{k}")
        if ref is not None:
            ax.axhline(ref, color=line.get_color(), linestyle=":", alpha=0.6)
    ax.set_xscale("log")
    ax.set_xlabel("time slot")
    ax.set_ylabel("estimated weight")
    ax.legend()


def _plot_delay(ax, rows):
    keys = sorted({(r["snr_db"], r["delay_target"]) for r in rows})
    for snr_db, t0 in keys:
        pts = [r for r in rows if r["snr_db"] == snr_db and r["delay_target"] == t0]
        ax.plot([r["slot"] for r in pts], [r["running_delay"] for r in pts],
                label=f"{snr_db} dB, T0={t0}")
        ax.axhline(t0, linestyle=":", alpha=0.5)
    ax.set_xlabel("time slot")
    ax.set_ylabel("running average delay (slots)")
    ax.legend()
