#!/usr/bin/env python3
"""
Sweep Report
Persists SNR-sweep results as CSV, JSON, score-vs-SNR plots and a Markdown summary.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ssc_errors import ContractViolationError  # noqa: E402

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "scheme",
    "snr_db",
    "bleu1_bob",
    "bleu3_bob",
    "bleu1_eve",
    "bleu3_eve",
    "sbleu1",
    "sbleu3",
    "secrecy_proxy",
]
SCORE_FIELDS = RESULT_COLUMNS[2:8]
SCHEME_ORDER = ("deepssc", "no_ii", "integrated")
SCHEME_LABELS = {"deepssc": "DeepSSC", "no_ii": "No-II", "integrated": "Int."}
PLOT_FILES = {
    "bleu1": "bleu1_vs_snr.png",
    "bleu3": "bleu3_vs_snr.png",
    "sbleu": "sbleu_vs_snr.png",
}


@dataclass
class SweepRow:
    scheme: str
    snr_db: float
    bleu1_bob: float
    bleu3_bob: float
    bleu1_eve: float
    bleu3_eve: float
    sbleu1: float
    sbleu3: float
    secrecy_proxy: float
    capacity_secrecy_bits: float = float("nan")

    def __post_init__(self):
        for name in SCORE_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractViolationError(f"{name}={value} outside [0, 1] for {self.scheme} @ {self.snr_db} dB")
        if self.secrecy_proxy < 0:
            raise ContractViolationError(f"secrecy_proxy must be >= 0, got {self.secrecy_proxy}")

    def csv_row(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in RESULT_COLUMNS}


def _scheme_rank(scheme: str) -> int:
    return SCHEME_ORDER.index(scheme) if scheme in SCHEME_ORDER else len(SCHEME_ORDER)


@dataclass
class SweepResult:
    """One row per (scheme, SNR), kept in canonical order."""

    rows: List[SweepRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add(self, row: SweepRow):
        if any(r.scheme == row.scheme and r.snr_db == row.snr_db for r in self.rows):
            raise ContractViolationError(f"Duplicate result row for {row.scheme} @ {row.snr_db} dB")
        self.rows.append(row)
        self.rows.sort(key=lambda r: (_scheme_rank(r.scheme), r.scheme, r.snr_db))

    @property
    def schemes(self) -> List[str]:
        return list(dict.fromkeys(row.scheme for row in self.rows))

    def for_scheme(self, scheme: str) -> List[SweepRow]:
        return [row for row in self.rows if row.scheme == scheme]

    def lookup(self, scheme: str, snr_db: float) -> SweepRow:
        for row in self.rows:
            if row.scheme == scheme and math.isclose(row.snr_db, snr_db):
                return row
        raise KeyError(f"No result for {scheme} @ {snr_db} dB")

    def to_json(self) -> str:
        payload = {"metadata": self.metadata, "rows": [asdict(row) for row in self.rows]}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        payload = json.loads(text)
        result = cls(metadata=payload.get("metadata", {}))
        for row in payload["rows"]:
            result.add(SweepRow(**row))
        return result

    @classmethod
    def read_csv(cls, path: str) -> "SweepResult":
        result = cls()
        with open(path, "r", newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                values = {name: float(row[name]) for name in RESULT_COLUMNS[1:]}
                result.add(SweepRow(scheme=row["scheme"], **values))
        return result


def write_csv(result: SweepResult, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(row.csv_row() for row in result.rows)


def _plot_pairs(result: SweepResult, path: Path, title: str, ylabel: str, series: Dict[str, str]):
    """One line per (scheme, series); series maps column -> legend suffix/style key."""
    styles = ["-o", "--s", ":^"]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for scheme in result.schemes:
        rows = result.for_scheme(scheme)
        snrs = [row.snr_db for row in rows]
        for style, (column, suffix) in zip(styles, series.items()):
            ax.plot(snrs, [getattr(row, column) for row in rows], style, label=f"{SCHEME_LABELS.get(scheme, scheme)} {suffix}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_results(result: SweepResult, out_dir: Path) -> Dict[str, Path]:
    paths = {key: out_dir / name for key, name in PLOT_FILES.items()}
    _plot_pairs(result, paths["bleu1"], "1-gram BLEU vs SNR", "BLEU (1-gram)", {"bleu1_bob": "Bob", "bleu1_eve": "Eve"})
    _plot_pairs(result, paths["bleu3"], "3-gram BLEU vs SNR", "BLEU (3-gram)", {"bleu3_bob": "Bob", "bleu3_eve": "Eve"})
    _plot_pairs(result, paths["sbleu"], "S-BLEU vs SNR", "S-BLEU", {"sbleu1": "1-gram", "sbleu3": "3-gram"})
    return paths


def write_summary(result: SweepResult, path: Path):
    lines = [
        "# SSC Sweep Summary",
        "",
        f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
        "",
    ]
    for key, value in result.metadata.items():
        lines.append(f"- **{key}**: {value}")
    lines += ["", "| " + " | ".join(RESULT_COLUMNS + ["capacity_secrecy_bits"]) + " |"]
    lines.append("|" + "---|" * (len(RESULT_COLUMNS) + 1))
    for row in result.rows:
        cells = [SCHEME_LABELS.get(row.scheme, row.scheme), f"{row.snr_db:g}"]
        cells += [f"{getattr(row, column):.4f}" for column in RESULT_COLUMNS[2:]]
        cells.append(f"{row.capacity_secrecy_bits:.3f}")
        lines.append("| " + " | ".join(cells) + " |")
    lines += ["", "Plots: " + ", ".join(PLOT_FILES.values()), ""]
    path.write_text("\n".join(lines), encoding="utf-8")


def emit_outputs(result: SweepResult, out_dir: str, plots: bool = True) -> Dict[str, Path]:
    """Write results.csv, results.json, the three plots and SUMMARY.md.

    Args:
        result: Non-empty sweep result
        out_dir: Output directory (created if needed)
        plots: Skip image rendering when False

    Returns:
        Mapping of artifact name to written path
    """
    if not result.rows:
        raise ContractViolationError("emit_outputs() needs at least one result row")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {"csv": out / "results.csv", "json": out / "results.json", "summary": out / "SUMMARY.md"}

    write_csv(result, written["csv"])
    written["json"].write_text(result.to_json(), encoding="utf-8")
    if plots:
        written.update(plot_results(result, out))
    write_summary(result, written["summary"])

    logger.info(f"Wrote {len(result.rows)} result rows to {out}")
    return written
