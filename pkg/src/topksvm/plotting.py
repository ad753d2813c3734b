"""Figure rendering for CLI reports (headless: Agg backend, files only)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def save_benchmark_plot(rows, path):
    """Log-log scaling plot of total projection time versus dimension.

    One line per (method, k); a dotted reference line shows exact linear
    scaling anchored at the smallest dimension.
    """
    series = {}
    for r in rows:
        series.setdefault((r.method, r.k), []).append((r.dim, r.seconds))
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for (method, k), pts in sorted(series.items()):
        pts.sort()
        dims = [p[0] for p in pts]
        secs = [p[1] for p in pts]
        style = "-o" if method == "topk_simplex" else "--s"
        ax.loglog(dims, secs, style, markersize=4, label=f"{method} k={k}")
    if series:
        pts = min(series.values(), key=lambda v: v[0][0])
        d0, t0 = sorted(pts)[0]
        dims = sorted({r.dim for r in rows})
        ax.loglog(dims, [t0 * d / d0 for d in dims], ":", color="gray",
                  label="linear reference")
    ax.set_xlabel("dimension")
    ax.set_ylabel("total seconds")
    ax.set_title("Projection scaling")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_accuracy_plot(ks, accuracies, path):
    """Top-k accuracy (%) versus k."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(ks, accuracies, "-o")
    ax.set_xlabel("k")
    ax.set_ylabel("top-k accuracy (%)")
    ax.set_ylim(0.0, 100.5)
    ax.set_xticks(list(ks))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
