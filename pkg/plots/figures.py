"""The three figure generators.

All output is SVG with a pinned hash salt and stripped date metadata, so
regenerating a figure from the same CSV bytes yields the same file bytes
(for a fixed matplotlib version).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .frames import MetricsFrame, load_convergence, load_trace  # noqa: E402

plt.rcParams["svg.hashsalt"] = "solver-plots"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}

#: tasks grouped into the three schedule phases; the volume integral is
#: drawn with its corrector (it contributes to the committed increment)
PHASE_OF_TASK = {
    "predict": "prediction",
    "extrapolate": "prediction",
    "solveRiemann": "riemann",
    "integrateVolume": "corrector",
    "integrateFace": "corrector",
    "update": "corrector",
    "calcTimeStep": "corrector",
}

PHASE_COLORS = {
    "prediction": "#1f77b4",
    "riemann": "#d62728",
    "corrector": "#2ca02c",
}

RATIO_BAND = (0.875, 1.125)


def plot_traffic_ratio(fused_csv, straightforward_csv, out_path):
    """Bar of measured fused/straightforward memory traffic per step,
    against the 0.875-1.125 model band.  Returns the measured ratio."""
    fused = MetricsFrame.from_csv(fused_csv)
    plain = MetricsFrame.from_csv(straightforward_csv)
    if fused.fingerprint() != plain.fingerprint():
        raise ValueError(
            "traffic comparison needs matching (d, p, m, grid) runs; "
            f"got per-step volumes {fused.fingerprint()} vs "
            f"{plain.fingerprint()}")
    ratio = (fused.total_bus_doubles() / fused.n_steps) \
        / (plain.total_bus_doubles() / plain.n_steps)

    fig, ax = plt.subplots(figsize=(4.0, 3.2))
    ax.axhspan(*RATIO_BAND, color="#dddddd",
               label=f"model band [{RATIO_BAND[0]}, {RATIO_BAND[1]}]")
    ax.axhline(1.0, color="#888888", linewidth=0.8, linestyle="--")
    ax.bar(["measured"], [ratio], width=0.4, color="#1f77b4")
    ax.annotate(f"{ratio:.3f}", ("measured", ratio),
                textcoords="offset points", xytext=(0, 4), ha="center")
    ax.set_ylabel("fused / straightforward traffic")
    ax.set_ylim(0, 1.4)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("memory traffic ratio per realisation step")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return ratio


def plot_convergence(convergence_csv, out_path):
    """Log-log error-vs-h plot with a fitted slope annotation.  Returns
    the fitted slope."""
    table = load_convergence(convergence_csv)
    h = table["h"]
    err = table["error"]
    if len(h) < 2:
        raise ValueError("convergence plot needs at least two levels")
    if np.all(err == err[0]):
        slope = 0.0
        print("warning: identical errors across levels; slope 0")
    else:
        slope = float(np.polyfit(np.log(h), np.log(err), 1)[0])

    fig, ax = plt.subplots(figsize=(4.0, 3.2))
    ax.loglog(h, err, "o-", color="#1f77b4", label="measured error")
    ref = err[0] * (h / h[0]) ** slope
    ax.loglog(h, ref, "--", color="#888888",
              label=f"slope {slope:.2f}")
    ax.set_xlabel("cell size h")
    ax.set_ylabel("L2 error")
    ax.legend(fontsize=8)
    ax.set_title("grid convergence")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return slope


def plot_task_timeline(trace_csv, out_path):
    """Per-sweep strip of schedule phases in execution order.  Phase-pure
    sweeps show contiguous bands, interleaved schedules show fine
    striping.  Returns the total number of within-sweep color changes."""
    table = load_trace(trace_csv)
    sweeps = table["sweep"]
    tasks = table["task"]

    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    changes = 0
    if len(sweeps) == 0:
        ax.text(0.5, 0.5, "empty trace", ha="center", va="center",
                transform=ax.transAxes)
        ax.set_axis_off()
    else:
        for sweep in np.unique(sweeps):
            row = [PHASE_OF_TASK[t] for t in tasks[sweeps == sweep]]
            start = 0
            for i in range(1, len(row) + 1):
                if i == len(row) or row[i] != row[start]:
                    ax.broken_barh([(start, i - start)], (sweep - 0.4, 0.8),
                                   facecolors=PHASE_COLORS[row[start]])
                    if i < len(row):
                        changes += 1
                    start = i
        handles = [plt.Rectangle((0, 0), 1, 1, color=c)
                   for c in PHASE_COLORS.values()]
        ax.legend(handles, PHASE_COLORS.keys(), fontsize=7, ncol=3,
                  loc="upper right")
        ax.set_xlabel("task order within sweep")
        ax.set_ylabel("sweep")
        ax.set_yticks(np.unique(sweeps))
    ax.set_title("task interleaving per sweep")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return changes
