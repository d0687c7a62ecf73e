"""Figures for scenario reports, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from cfuc.sim import ExecutionRecord  # noqa: E402


def timeline(rec: ExecutionRecord, path: str | Path, title: str = "") -> Path:
    """One lane per process: operation intervals, crashes, solo windows and
    the release step of the second phase."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(10, 0.8 + 0.6 * rec.n))
    end = max(len(rec.steps), 1)
    for o in rec.operations():
        y = o["process"]
        stop = o["resp"] if o["resp"] is not None else end
        color = "tab:blue" if o["resp"] is not None else "tab:gray"
        ax.plot([o["inv"], stop], [y, y], color=color, lw=6, solid_capstyle="butt", alpha=0.8)
        ax.text(o["inv"], y + 0.22, str(o["op"]), fontsize=7)
    for s in rec.steps:
        ax.plot(s.index, s.process, marker="|", color="black", ms=4, alpha=0.4)
    for p, at in rec.crashed.items():
        ax.plot(at, p, marker="x", color="tab:red", ms=10, mew=2)
    for w in rec.windows:
        ax.axvspan(w["start"], w["end"], color="tab:orange", alpha=0.15)
    if rec.release_step:
        ax.axvline(rec.release_step, ls="--", color="black", lw=1)
    ax.set_yticks(range(1, rec.n + 1), [f"p{p}" for p in range(1, rec.n + 1)])
    ax.set_ylim(0.4, rec.n + 0.7)
    ax.invert_yaxis()
    ax.set_xlabel("step")
    ax.set_title(title or f"{rec.algorithm} on {rec.spec_name}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def rounds(rec: ExecutionRecord, path: str | Path, title: str = "") -> Path:
    """Highest GCA round each process has finished, against the step index."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    done = []
    for instance, entry in rec.gca_ledger.items():
        if isinstance(instance, int):
            done.extend((span[1], p, instance) for p, span in entry.spans.items())
    done.sort()
    best: dict[int, int] = {}
    series: dict[int, tuple[list, list]] = {p: ([0], [0]) for p in range(1, rec.n + 1)}
    for step, p, r in done:
        best[p] = max(best.get(p, 0), r)
        xs, ys = series[p]
        xs.append(step)
        ys.append(best[p])
    for p, (xs, ys) in series.items():
        ax.step(xs, ys, where="post", label=f"p{p}")
    for r, _s, p, step in rec.committed_log:
        ax.plot(step, r, "k.", ms=5)
    ax.set_xlabel("step")
    ax.set_ylabel("round")
    ax.legend(fontsize=8)
    ax.set_title(title or "rounds reached (dots: commits)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render(rec: ExecutionRecord, outdir: str | Path, stem: str) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return [timeline(rec, outdir / f"{stem}-timeline.png"), rounds(rec, outdir / f"{stem}-rounds.png")]
