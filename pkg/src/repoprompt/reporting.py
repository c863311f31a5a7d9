"""Report rendering: JSON documents, aligned text tables, PNG figures.

Every evaluation artifact is written in three forms next to each other:
a machine-readable JSON file, a fixed-width text table, and a rendered
figure. Figure rendering uses the Agg backend so it works headless.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import MethodReport  # noqa: E402


def method_report_dict(report: MethodReport) -> dict:
    return {
        "method": report.method,
        "sr_holewise": report.sr_holewise,
        "sr_repowise": report.sr_repowise,
        "mean_norm_edit_distance": report.mean_ned,
        "per_repo": report.per_repo,
        "records": [asdict(rec) for rec in report.records],
    }


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_method_table(report: MethodReport) -> str:
    rows = [["method", "holes", "sr_holewise", "sr_repowise", "mean_ned"]]
    rows.append([
        report.method,
        str(len(report.records)),
        f"{report.sr_holewise:.4f}",
        f"{report.sr_repowise:.4f}",
        f"{report.mean_ned:.4f}",
    ])
    out = _table(rows)
    repo_rows = [["repo", "holes", "sr"]]
    for repo, stats in report.per_repo.items():
        repo_rows.append([repo, str(int(stats["n"])), f"{stats['sr']:.4f}"])
    return out + "\n" + _table(repo_rows)


def save_method_report(report: MethodReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"eval.{report.method}"
    paths = {
        "json": out / f"{stem}.json",
        "txt": out / f"{stem}.txt",
        "png": out / f"{stem}.png",
    }
    paths["json"].write_text(
        json.dumps(method_report_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    paths["txt"].write_text(render_method_table(report), encoding="utf-8")

    repos = list(report.per_repo)
    rates = [report.per_repo[r]["sr"] for r in repos]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(repos)), 3.2))
    ax.bar(range(len(repos)), rates, color="#4878cf")
    ax.axhline(report.sr_holewise, color="#d65f5f", linestyle="--",
               label=f"hole-wise {report.sr_holewise:.2f}")
    ax.set_xticks(range(len(repos)))
    ax.set_xticklabels(repos, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("success rate")
    ax.set_title(f"method: {report.method}")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(paths["png"], dpi=120)
    plt.close(fig)
    return paths


def save_attempts_report(
    ranking: str, curve: list[tuple[int, float]], out_dir: str | Path
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "attempts.json",
        "txt": out / "attempts.txt",
        "png": out / "attempts.png",
    }
    doc = {"ranking": ranking, "points": [[k, sr] for k, sr in curve]}
    paths["json"].write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    rows = [["k", "sr"]] + [[str(k), f"{sr:.4f}"] for k, sr in curve]
    paths["txt"].write_text(_table(rows), encoding="utf-8")

    ks = [k for k, _ in curve]
    srs = [sr for _, sr in curve]
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(ks, srs, marker="o", color="#4878cf")
    ax.set_xlabel("attempts (k)")
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"attempts curve: {ranking}")
    fig.tight_layout()
    fig.savefig(paths["png"], dpi=120)
    plt.close(fig)
    return paths
