"""Report rendering: canonical JSON, aligned text tables, CSV, figures.

Reports are deterministic: the same runs produce byte-identical JSON
(apart from the one ``generated_at`` field), text, and CSV artifacts, and
every report embeds the seeds, the resolved configuration and its hash,
the corpus provenance, and the package version.  Figures are rendered
with the Agg backend straight to PNG files next to the delimited output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "canonical_json",
    "config_hash",
    "build_meta",
    "write_json",
    "write_csv",
    "format_table",
    "render_benchmark",
    "render_ablation",
]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def build_meta(command: str, config_dict: dict, corpus_provenance: dict, seeds) -> dict:
    from . import __version__

    hashed = {
        "command": command,
        "config": config_dict,
        "corpus": corpus_provenance,
        "seeds": list(seeds),
    }
    return {
        **hashed,
        "config_hash": config_hash(hashed),
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
        for i, h in enumerate(headers)
    ]
    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(headers), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def _pct(ms: dict) -> str:
    return f"{ms['mean'] * 100:.2f}±{ms['std'] * 100:.2f}"


def _frac(ms: dict) -> str:
    return f"{ms['mean']:.2f}±{ms['std']:.2f}"


def render_benchmark(report: dict, out_dir) -> list[Path]:
    """Emit benchmark JSON, accuracy/F1 tables (text + CSV), and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "benchmark.json"
    write_json(path, report)
    written.append(path)

    models = report["model_order"]
    class_names = report["class_names"]

    acc_headers = ["model", "train acc (%)", "val acc (%)", "test acc (%)"]
    acc_rows = []
    csv_rows = []
    for m in models:
        agg = report["models"][m]["aggregate"]
        acc_rows.append(
            [m, _pct(agg["train_accuracy"]), _pct(agg["val_accuracy"]), _pct(agg["test_accuracy"])]
        )
        csv_rows.append(
            [
                m,
                agg["train_accuracy"]["mean"],
                agg["train_accuracy"]["std"],
                agg["val_accuracy"]["mean"],
                agg["val_accuracy"]["std"],
                agg["test_accuracy"]["mean"],
                agg["test_accuracy"]["std"],
            ]
        )
    table = format_table(acc_headers, acc_rows)
    path = out / "benchmark_accuracy.txt"
    path.write_text(table)
    written.append(path)
    path = out / "benchmark_accuracy.csv"
    write_csv(
        path,
        ["model", "train_mean", "train_std", "val_mean", "val_std", "test_mean", "test_std"],
        csv_rows,
    )
    written.append(path)

    f1_headers = ["class"] + [f"{m} F1" for m in models]
    f1_rows = []
    f1_csv_rows = []
    for c, name in enumerate(class_names):
        row = [name]
        csv_row = [name]
        for m in models:
            ms = report["models"][m]["aggregate"]["test_per_class"][c]["f1"]
            row.append(_frac(ms))
            csv_row.extend([ms["mean"], ms["std"]])
        f1_rows.append(row)
        f1_csv_rows.append(csv_row)
    path = out / "benchmark_f1.txt"
    path.write_text(format_table(f1_headers, f1_rows))
    written.append(path)
    path = out / "benchmark_f1.csv"
    write_csv(
        path,
        ["class"] + [f"{m}_{s}" for m in models for s in ("f1_mean", "f1_std")],
        f1_csv_rows,
    )
    written.append(path)

    written.append(_fig_accuracy(report, out / "benchmark_accuracy.png"))
    written.append(_fig_per_class_f1(report, out / "benchmark_f1.png"))
    written.append(_fig_curves(report, out / "benchmark_curves.png"))
    return written


def _fig_accuracy(report: dict, path: Path) -> Path:
    models = report["model_order"]
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    x = np.arange(len(models))
    width = 0.26
    for i, split_name in enumerate(("train_accuracy", "val_accuracy", "test_accuracy")):
        means = [report["models"][m]["aggregate"][split_name]["mean"] * 100 for m in models]
        stds = [report["models"][m]["aggregate"][split_name]["std"] * 100 for m in models]
        ax.bar(
            x + (i - 1) * width,
            means,
            width,
            yerr=stds,
            capsize=3,
            label=split_name.replace("_accuracy", ""),
        )
    ax.set_xticks(x)
    ax.set_xticklabels(models)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _fig_per_class_f1(report: dict, path: Path) -> Path:
    models = report["model_order"]
    class_names = report["class_names"]
    fig, ax = plt.subplots(figsize=(10.0, 4.5))
    x = np.arange(len(class_names))
    width = 0.8 / len(models)
    for i, m in enumerate(models):
        per_class = report["models"][m]["aggregate"]["test_per_class"]
        means = [per_class[c]["f1"]["mean"] for c in range(len(class_names))]
        stds = [per_class[c]["f1"]["std"] for c in range(len(class_names))]
        ax.bar(x + (i - (len(models) - 1) / 2) * width, means, width, yerr=stds, capsize=2, label=m)
    ax.set_xticks(x)
    ax.set_xticklabels(class_names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("test F1")
    ax.set_ylim(0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _fig_curves(report: dict, path: Path) -> Path:
    models = report["model_order"]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10.0, 4.0))
    for m in models:
        curves = report["models"][m]["mean_curves"]
        epochs = np.arange(1, len(curves["label_loss"]) + 1)
        ax_loss.plot(epochs, curves["label_loss"], label=f"{m} label")
        if curves.get("domain_loss"):
            ax_loss.plot(epochs, curves["domain_loss"], "--", label=f"{m} domain")
        ax_acc.plot(epochs, np.array(curves["val_accuracy"]) * 100, label=m)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.grid(alpha=0.3)
    ax_loss.legend(fontsize=8)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("val accuracy (%)")
    ax_acc.grid(alpha=0.3)
    ax_acc.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_ablation(report: dict, out_dir) -> list[Path]:
    """Emit ablation JSON, table (text + CSV), and the comparison figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "ablation.json"
    write_json(path, report)
    written.append(path)

    models = report["model_order"]
    headers = ["model", "real-only acc (%)", "twin-supported acc (%)", "note"]
    rows = []
    csv_rows = []
    for m in models:
        entry = report["models"][m]
        note = "transductive" if entry["twin"]["transductive"] else ""
        rows.append(
            [
                m,
                _pct(entry["real"]["aggregate"]["test_accuracy"]),
                _pct(entry["twin"]["aggregate"]["test_accuracy"]),
                note,
            ]
        )
        csv_rows.append(
            [
                m,
                entry["real"]["aggregate"]["test_accuracy"]["mean"],
                entry["real"]["aggregate"]["test_accuracy"]["std"],
                entry["twin"]["aggregate"]["test_accuracy"]["mean"],
                entry["twin"]["aggregate"]["test_accuracy"]["std"],
            ]
        )
    path = out / "ablation.txt"
    path.write_text(format_table(headers, rows))
    written.append(path)
    path = out / "ablation.csv"
    write_csv(
        path,
        ["model", "real_mean", "real_std", "twin_mean", "twin_std"],
        csv_rows,
    )
    written.append(path)

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    x = np.arange(len(models))
    width = 0.35
    for i, key in enumerate(("real", "twin")):
        means = [report["models"][m][key]["aggregate"]["test_accuracy"]["mean"] * 100 for m in models]
        stds = [report["models"][m][key]["aggregate"]["test_accuracy"]["std"] * 100 for m in models]
        label = "real data only" if key == "real" else "twin-supported"
        ax.bar(x + (i - 0.5) * width, means, width, yerr=stds, capsize=3, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(models)
    ax.set_ylabel("test accuracy (%)")
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = out / "ablation.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
