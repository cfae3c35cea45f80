"""Convergence-trace figures.

Renders error (or gap estimate) against wall time and against iterations on
a logarithmic vertical axis, one series per trace, with the continuation
steps of gap-driven runs marked by dots.  Output is vector markup (SVG by
default); text is kept as text elements so the files stay inspectable.
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_convergence"]

_LOG_FLOOR = 1e-16


def _series(trace, f_star):
    k = trace.column("k")
    seconds = trace.column("seconds")
    if f_star is not None:
        y = trace.column("f") - f_star
    else:
        y = trace.column("gap")
    return k, seconds, np.maximum(y, _LOG_FLOOR)


def _continuation_indices(trace):
    """Index of the last record of each continuation stage (outer >= 1)."""
    last = {}
    for i, rec in enumerate(trace.records):
        if rec.outer >= 1:
            last[rec.outer] = i
    return [last[o] for o in sorted(last)]


def render_convergence(traces, out_path, f_star=None, title=None):
    """Render one figure for a mapping of series name -> SolverTrace.

    Returns per-series metadata, including the number of continuation dots
    drawn.  The y quantity is the true error when f_star is given, the
    recorded gap estimate otherwise.
    """
    out_path = str(out_path)
    fig, (ax_time, ax_iter) = plt.subplots(2, 1, figsize=(7.0, 7.5))
    info = {}
    for name, trace in traces.items():
        if len(trace) == 0:
            info[name] = {"continuation_dots": 0, "points": 0}
            continue
        k, seconds, y = _series(trace, f_star)
        (line_t,) = ax_time.plot(seconds, y, linewidth=1.2, label=name)
        ax_iter.plot(k, y, linewidth=1.2, color=line_t.get_color())
        dots = _continuation_indices(trace)
        if dots:
            (d_t,) = ax_time.plot(seconds[dots], y[dots], "o", markersize=4,
                                  color=line_t.get_color(), linestyle="none")
            d_t.set_gid(f"continuation-dots-time-{name}")
            (d_k,) = ax_iter.plot(k[dots], y[dots], "o", markersize=4,
                                  color=line_t.get_color(), linestyle="none")
            d_k.set_gid(f"continuation-dots-iter-{name}")
        info[name] = {"continuation_dots": len(dots), "points": len(trace)}

    for ax, xlabel in ((ax_time, "seconds"), (ax_iter, "iterations")):
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("error")
        ax.grid(True, which="both", alpha=0.25)
    ax_time.legend(loc="best", fontsize=8)
    if title:
        ax_time.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return info
