"""SVG rendering of series, measures, ROC curves, and lead-time sweeps.

Plots are a convenience layer: nothing downstream consumes them, and
the CSV/JSON files stay the authoritative outputs.  matplotlib is
imported lazily so the rest of the package works without a display
stack, and SVG timestamps are suppressed to keep reruns comparable.
"""

from .pipeline import critical_threshold, scalar_component

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_series_plot(series, path: str, heatmap: bool | None = None) -> None:
    """Line plot per coordinate; wide fields switch to a heatmap."""
    plt = _pyplot()
    if heatmap is None:
        heatmap = series.n_vars >= 16
    t = series.times()
    fig, ax = plt.subplots(figsize=(9, 3.2))
    if heatmap:
        im = ax.imshow(
            series.values.T,
            aspect="auto",
            origin="lower",
            extent=(float(t[0]), float(t[-1]), 0, series.n_vars),
            cmap="RdBu_r",
        )
        fig.colorbar(im, ax=ax, label="value")
        ax.set_ylabel("space index")
    else:
        for j in range(series.n_vars):
            ax.plot(t, series.values[:, j], lw=0.7, label=f"x{j + 1}")
        if series.n_vars <= 6:
            ax.legend(loc="best", fontsize=8)
        ax.set_ylabel("value")
    ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def _warning_band(kind: str, tau_c: float, epsilon: float) -> tuple[float, float]:
    # MLE warns on approach from above, the others from below
    if kind == "MLE":
        return tau_c, tau_c + epsilon
    return tau_c - epsilon, tau_c


def save_measures_plot(series_by_kind, mode: str, path: str, forecasts=None) -> None:
    """Measure components against time, one panel per kind.

    Accepted points are filled, flagged ones hollow.  When a forecast
    is supplied its fitted trend is drawn through the fit range and
    dashed beyond the cutoff, with the critical threshold and warning
    band behind it.
    """
    import numpy as np

    plt = _pyplot()
    if not isinstance(series_by_kind, dict):
        series_by_kind = {series_by_kind.kind: series_by_kind}
    forecasts = forecasts or {}
    kinds = list(series_by_kind)
    fig, axes = plt.subplots(
        len(kinds), 1, figsize=(9, 2.8 * len(kinds)), sharex=True, squeeze=False
    )
    for ax, kind in zip(axes[:, 0], kinds):
        series = series_by_kind[kind]
        fc = forecasts.get(kind)
        component = "real" if (
            kind == "MLE" or (kind == "DEJ" and mode == "continuous")
        ) else "modulus"
        tau_c = critical_threshold(kind, mode)

        good = series.accepted()
        bad = [p for p in series.points if not p.accepted and p.value is not None]
        if good:
            ax.plot(
                [p.t_mid for p in good],
                [scalar_component(p.value, kind, mode) for p in good],
                "o", ms=3, color="C0", label="accepted",
            )
        if bad:
            ax.plot(
                [p.t_mid for p in bad],
                [scalar_component(p.value, kind, mode) for p in bad],
                "o", ms=3, mfc="none", color="C3", label="flagged",
            )
        ax.axhline(tau_c, color="k", lw=0.8, ls=":")

        if fc is not None:
            lo, hi = _warning_band(kind, tau_c, fc.epsilon)
            ax.axhspan(lo, hi, color="C1", alpha=0.15, lw=0)
            t_stop = fc.t_hat_p if fc.t_hat_p is not None else fc.t_l
            t_fit = np.linspace(fc.trend.t_first, fc.t_l, 200)
            ax.plot(t_fit, fc.trend(t_fit), color="C1", lw=1.2, label="trend")
            if t_stop > fc.t_l:
                t_ext = np.linspace(fc.t_l, t_stop, 200)
                ax.plot(t_ext, fc.trend(t_ext), color="C1", lw=1.2, ls="--")
            if fc.t_hat_p is not None:
                ax.axvline(fc.t_hat_p, color="C3", lw=0.8, ls="--")
        ax.set_ylabel(f"{kind} ({component})")
        ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_roc_plot(roc, path: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.plot(roc.fpr, roc.tpr, color="C0", lw=1.4)
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"AUC = {roc.auc:.3f}")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_leadtime_plot(rows, path: str, max_lead: float | None = None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.2))
    got = [(r.lead_time, r.abs_error) for r in rows if r.abs_error is not None]
    if got:
        lead, err = zip(*got)
        ax.plot(lead, err, "o-", ms=4, color="C0")
    missing = [r.lead_time for r in rows if r.abs_error is None]
    for lt in missing:
        ax.axvline(lt, color="0.85", lw=0.8)
    if max_lead is not None:
        ax.axvline(max_lead, color="C3", lw=1.0, ls="--", label="max admissible lead")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("lead time (t_p - t_l)")
    ax.set_ylabel("|t_p - t_hat_p|")
    ax.invert_xaxis()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
