"""Figures for evaluation reports, rendered to files with the Agg backend."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib import dates as mdates  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
    "figure.figsize": (6.4, 3.6),
    # fixed hash salt keeps the SVG/PNG byte stream reproducible
    "svg.hashsalt": "flowcast",
}

COLORS = {"actual": "black", "normal": "#d95f02", "optimized": "#1b9e77"}


def _fmt_rmse(v):
    return "n/a" if v is None else f"{v:.3f}"


def plot_fleet_curves(report, path, title=None):
    """Fleet-average actual flow against both models' one-step predictions."""
    s = report.summary
    times = report.fleet_avg_actual.timestamps()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(times, report.fleet_avg_actual.values, color=COLORS["actual"], label="actual")
        ax.plot(
            times,
            report.fleet_avg_normal.values,
            color=COLORS["normal"],
            ls="--",
            label=f"normal ARIMA (mean RMSE {_fmt_rmse(s.get('mean_normal_rmse'))})",
        )
        ax.plot(
            times,
            report.fleet_avg_optimized.values,
            color=COLORS["optimized"],
            label=f"optimized ARIMA (mean RMSE {_fmt_rmse(s.get('mean_optimized_rmse'))})",
        )
        ax.xaxis.set_major_formatter(mdates.DateFormatter("%H:%M"))
        ax.set_xlabel("time of day (UTC)")
        ax.set_ylabel("vehicles per 15 min")
        n_ok = s.get("n_roads", 0) - s.get("n_failed", 0)
        ax.set_title(title or f"Fleet average over {n_ok} roads, {times[0]:%Y-%m-%d}")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def plot_road(actual, normal, optimized, path, title=""):
    """Single-road version of :func:`plot_fleet_curves` from raw arrays."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(actual, color=COLORS["actual"], label="actual")
        ax.plot(normal, color=COLORS["normal"], ls="--", label="normal ARIMA")
        ax.plot(optimized, color=COLORS["optimized"], label="optimized ARIMA")
        ax.set_xlabel("bin")
        ax.set_ylabel("vehicles per 15 min")
        ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
