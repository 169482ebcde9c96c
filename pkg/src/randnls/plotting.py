"""Report figures written next to the CSV/JSON outputs (matplotlib, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (5.5, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return str(path)


def spectrum(phi, profile, path, title="random data"):
    """``|phi_hat(n)|`` against ``<n>`` with the deterministic profile overlaid."""
    fig, ax = plt.subplots()
    br = phi.spec.bracket.ravel()
    ax.loglog(br, np.abs(phi.coeffs).ravel() + 1e-300, ".", ms=2, alpha=0.5, label="|coefficient|")
    order = np.argsort(br)
    ax.loglog(br[order], np.abs(profile.coeffs).ravel()[order], "k-", lw=1, label="profile")
    ax.set_xlabel(r"$\langle n\rangle$")
    ax.set_ylabel(r"$|\hat\phi(n)|$")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def block_norms(times, blocks: dict, path, title="free evolution"):
    """L^2 norm of each dyadic block over time."""
    fig, ax = plt.subplots()
    for N, vals in blocks.items():
        ax.plot(times, vals, label=f"N={N}")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|P_N u(t)\|_{L^2}$")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def picard_history(histories: dict, path):
    """Successive Picard differences per seed."""
    fig, ax = plt.subplots()
    for seed, diffs in histories.items():
        diffs = np.asarray(diffs, float)
        if diffs.size and np.any(diffs > 0):
            ax.semilogy(np.arange(1, diffs.size + 1), np.where(diffs > 0, diffs, np.nan), "o-", ms=3,
                        label=f"seed {seed}")
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\sup_t\|w_{k}-w_{k-1}\|_{H^s}$")
    ax.set_title("Picard iteration")
    if 0 < len(ax.get_lines()) <= 10:
        ax.legend(fontsize=7)
    return _save(fig, path)


def dyadic_terms(terms: dict, path, ylabel="term", title="dyadic terms"):
    fig, ax = plt.subplots()
    Ns = sorted(terms)
    vals = np.array([terms[N] for N in Ns], float)
    keep = vals > 0
    ax.loglog(np.array(Ns)[keep], vals[keep], "o-")
    ax.set_xlabel("N")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def window_maxima(ends, maxima, slope, intercept, path):
    fig, ax = plt.subplots()
    ax.loglog(ends, maxima, "o", label="max over window")
    x = np.asarray(ends, float)
    ax.loglog(x, np.exp(intercept) * x ** slope, "k--", lw=1, label=f"slope {slope:.3f}")
    ax.set_xlabel("A")
    ax.set_ylabel(r"$\max r_d$")
    ax.legend()
    return _save(fig, path)


def _loglog_fit(ax, x, y, report):
    x = np.asarray(x, float)
    if np.isfinite(report.slope) and np.isfinite(report.intercept):
        ax.loglog(x, np.exp(report.intercept) * x ** report.slope, "k--", lw=1,
                  label=f"fit slope {report.slope:.3f}")


def probe_figure(report, path):
    """One summary figure per probe report; returns the path or ``None`` when nothing is plottable."""
    cols, rows = report.columns, report.rows
    if not rows:
        return None
    col = {c: i for i, c in enumerate(cols)}
    fig, ax = plt.subplots()
    name = report.probe
    if name == "linear_chaos_tail":
        tail = [r for r in rows if r[col["check"]] == "tail"]
        lv = [r[col["level"]] for r in tail]
        ax.semilogy(lv, [r[col["empirical"]] for r in tail], "o", label="empirical")
        ax.semilogy(lv, [r[col["analytic"]] for r in tail], "k-", label="exact")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$P(|F|>\lambda\sigma)$")
    elif name == "trilinear_chaos_tail":
        lv = np.array([r[0] for r in rows], float)
        p = np.array([r[1] for r in rows], float)
        keep = p > 0
        ax.semilogy(lv[keep], p[keep], "o-", ms=3, label="empirical")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$P(|F|>\lambda\sigma)$")
    elif name == "random_lp_decay":
        N = [r[col["N"]] for r in rows]
        ax.loglog(N, [r[col["median"]] for r in rows], "o", label="median")
        ax.loglog(N, [r[col["p99"]] for r in rows], "s", mfc="none", label="99%")
        _loglog_fit(ax, N, None, report)
        ax.set_xlabel("N")
        ax.set_ylabel(r"$\|P_N S(t)\phi\|_{L^p_tL^q_x}$")
    elif name == "strichartz_scaling":
        N = np.array([r[col["N"]] for r in rows], float)
        v = np.array([r[col["norm"]] for r in rows], float)
        ax.loglog(N, v, ".", alpha=0.4, label="trials")
        Ns = np.unique(N)
        ax.loglog(Ns, [v[N == n].max() for n in Ns], "o-", label="worst")
        _loglog_fit(ax, Ns, None, report)
        ax.set_xlabel("N")
        ax.set_ylabel(r"$\|e^{it\Delta}\phi\|_{L^p}$")
    elif name == "trilinear_estimate":
        N1 = [r[col["N1"]] for r in rows]
        med = np.array([r[col["median"]] for r in rows], float)
        if np.any(med > 0):
            ax.loglog(N1, med, "o-", label="median")
            ax.loglog(N1, [r[col["q90"]] for r in rows], "s--", mfc="none", label="90%")
        ax.set_xlabel(r"$N_1$")
        ax.set_ylabel("|pairing|")
    elif name == "coefficient_growth":
        ax.plot([r[col["delta"]] for r in rows], [r[col["target_exclusion"]] for r in rows], "o-")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(r"$\delta$")
        ax.set_ylabel("target exclusion")
    elif name == "gauge_and_solution":
        ok = [r for r in rows if r[col["status"]] == "ok"]
        ax.semilogy([r[col["seed"]] for r in ok], [max(r[col["sup_l2_mismatch"]], 1e-300) for r in ok],
                    "o", label="mismatch")
        ax.semilogy([r[col["seed"]] for r in ok], [max(r[col["nls_residual"]], 1e-300) for r in ok],
                    "s", mfc="none", label="NLS residual")
        ax.set_xlabel("seed")
    else:
        plt.close(fig)
        return None
    ax.set_title(name.replace("_", " "))
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)
    return _save(fig, path)
