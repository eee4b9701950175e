"""
Export Service
Writes result tables (CSV, optionally Markdown), run manifests, the skip
list and the assembled Markdown/Excel report bundle.

CSV output is deterministic: fixed file names, fixed column order and
floats printed with ``%.10g``.
"""

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import pandas as pd

from models.result_model import SKIP_COLUMNS, RunManifest, SkipRecord
from utils.exceptions import DataNotFoundError, ExportError
from utils.formatters import (
    format_ci,
    format_count,
    format_markdown_table,
    format_odds_ratio,
    format_p,
    format_ppv_ci,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.10g"
SKIPPED_FILE = "skipped.csv"
REPORT_MD = "report.md"
REPORT_XLSX = "report.xlsx"
MANIFEST_SUFFIX = ".manifest.json"
# Too long to print; they stay in the CSV and Excel outputs.
BULK_TABLES = ("derived", "roc")


def manifest_name(command: str) -> str:
    return f"{command}{MANIFEST_SUFFIX}"


def file_digest(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _num(value, spec: str = ".4f") -> str:
    if value is None or pd.isna(value):
        return "-"
    return format(float(value), spec)


# Human-readable layouts per table; tables without one print their raw columns.
def _eval_rows(frame: pd.DataFrame):
    headers = ["Target", "N / positives", "Baseline AUC", "DLS AUC", "Improvement", "p", "Significant"]
    rows = [
        [
            r.target if r.subset == "All" else f"{r.target} [{r.subset}]",
            format_count(r.n, r.n_pos),
            format_ci(r.baseline_auc, r.baseline_ci_low, r.baseline_ci_high),
            format_ci(r.dls_auc, r.dls_ci_low, r.dls_ci_high),
            format_ci(r.improvement, r.improvement_ci_low, r.improvement_ci_high),
            format_p(r.p_one_sided),
            "yes" if r.significant else "no",
        ]
        for r in frame.itertuples(index=False)
    ]
    return headers, rows


def _subgroup_rows(frame: pd.DataFrame):
    headers = ["Target", "Subgroup", "N / positives", "Baseline AUC", "DLS AUC", "Improvement", "p"]
    rows = []
    for r in frame.to_dict("records"):
        if r["omitted_small"]:
            rows.append([r["target"], r["subgroup"], format_count(r["n"], r["n_pos"]),
                         "N < 25", "", "", ""])
            continue
        dls = format_ci(r["dls_auc"], r["dls_ci_low"], r["dls_ci_high"])
        if r["drop_gt_5pct"]:
            dls = f"*{dls}*"
        rows.append(
            [
                r["target"],
                r["subgroup"],
                format_count(r["n"], r["n_pos"]),
                format_ci(r["baseline_auc"], r["baseline_ci_low"], r["baseline_ci_high"]),
                dls,
                format_ci(r["improvement"], r["improvement_ci_low"], r["improvement_ci_high"]),
                format_p(r["p_one_sided"], flag_above=0.05),
            ]
        )
    return headers, rows


def _ppv_rows(frame: pd.DataFrame):
    headers = ["Target", "N / positives", "Baseline PPV", "DLS PPV", "Improvement", "p"]
    rows = [
        [
            r.target,
            format_count(r.n, r.n_pos),
            format_ppv_ci(r.baseline_ppv, r.baseline_ppv_low, r.baseline_ppv_high),
            format_ppv_ci(r.dls_ppv, r.dls_ppv_low, r.dls_ppv_high),
            format_ppv_ci(r.improvement, r.improvement_low, r.improvement_high),
            format_p(r.p_one_sided),
        ]
        for r in frame.itertuples(index=False)
    ]
    return headers, rows


def _adjusted_rows(frame: pd.DataFrame):
    headers = ["Target", "Variable", "Odds ratio (95% CI)", "p"]
    rows = [
        [r.target, r.variable, format_odds_ratio(r.odds_ratio, r.ci_low, r.ci_high), _num(r.p)]
        for r in frame.itertuples(index=False)
    ]
    return headers, rows


MARKDOWN_LAYOUTS: Dict[str, Callable] = {
    "evaluate": _eval_rows,
    "sensitivity": _eval_rows,
    "augmented": _eval_rows,
    "subgroup": _subgroup_rows,
    "ppv": _ppv_rows,
    "adjust": _adjusted_rows,
}


def _raw_rows(frame: pd.DataFrame):
    rows = [
        [_num(v, ".4g") if isinstance(v, float) else v for v in row]
        for row in frame.itertuples(index=False)
    ]
    return list(frame.columns), rows


def render_markdown(name: str, frame: pd.DataFrame, manifest: Optional[str] = None) -> str:
    headers, rows = MARKDOWN_LAYOUTS.get(name, _raw_rows)(frame)
    text = format_markdown_table(headers, rows)
    if manifest:
        text += f"\nManifest: {manifest}\n"
    return text


class ExportService:
    def __init__(self, out_dir: PathLike, fmt: str = "csv"):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.artifacts: List[str] = []

    def _record(self, path: Path) -> str:
        self.artifacts.append(path.name)
        return str(path)

    def write_csv(self, frame: pd.DataFrame, filename: str) -> str:
        path = self.out_dir / filename
        try:
            frame.to_csv(
                path,
                index=False,
                float_format=FLOAT_FORMAT,
                lineterminator="\n",
                na_rep="",
                encoding="utf-8",
            )
        except OSError as e:
            raise ExportError(f"cannot write {path}: {e}")
        return self._record(path)

    def export_table(
        self,
        name: str,
        rows: Iterable[Mapping],
        columns: Sequence[str],
        command: Optional[str] = None,
    ) -> List[str]:
        """
        Write ``<name>.csv`` with exactly ``columns``; with the Markdown
        format also ``<name>.md`` ending in a manifest reference.
        """
        frame = pd.DataFrame(list(rows), columns=list(columns))
        written = [self.write_csv(frame, f"{name}.csv")]
        if self.fmt == "md":
            path = self.out_dir / f"{name}.md"
            text = render_markdown(name, frame, manifest_name(command or name))
            path.write_text(text, encoding="utf-8", newline="\n")
            written.append(self._record(path))
        logger.info(f"Wrote {len(frame)} {name} rows to {self.out_dir}")
        return written

    def export_skips(self, skips: Sequence[SkipRecord]) -> Optional[str]:
        if not skips:
            return None
        frame = pd.DataFrame([s.to_dict() for s in skips], columns=list(SKIP_COLUMNS))
        # Nullable ints leave missing counts blank
        frame = frame.astype({"n_pos": "Int64", "n_neg": "Int64"})
        return self.write_csv(frame, SKIPPED_FILE)

    def build_manifest(
        self,
        command: str,
        config_hash: str,
        seeds: Mapping[str, int],
        inputs: Iterable[PathLike],
        tool_version: str,
    ) -> RunManifest:
        digests = {}
        for path in inputs:
            if path and Path(path).exists():
                digests[Path(path).name] = file_digest(path)
        return RunManifest(
            command=command,
            config_hash=config_hash,
            seeds=dict(seeds),
            input_digests=dict(sorted(digests.items())),
            tool_version=tool_version,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            artifacts=sorted(set(self.artifacts)),
        )

    def write_manifest(self, manifest: RunManifest) -> str:
        path = self.out_dir / manifest_name(manifest.command)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(manifest.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        return str(path)

    def _tables(self) -> List[Path]:
        tables = sorted(self.out_dir.glob("*.csv"))
        if not tables:
            raise DataNotFoundError(f"no result tables found in {self.out_dir}")
        return tables

    def export_report(self, command: str = "report") -> List[str]:
        """Assemble every CSV in the output directory into report.md and report.xlsx"""
        tables = self._tables()
        sections = []
        for path in tables:
            if path.stem in BULK_TABLES:
                sections.append(f"## {path.stem}\n\nSee {path.name}.\n")
                continue
            frame = pd.read_csv(path)
            sections.append(f"## {path.stem}\n\n" + render_markdown(path.stem, frame))
        sections.append(f"Manifest: {manifest_name(command)}\n")
        md_path = self.out_dir / REPORT_MD
        md_path.write_text("\n".join(sections), encoding="utf-8", newline="\n")
        return [self._record(md_path), self.export_excel(tables)]

    def export_excel(self, tables: Sequence[Path]) -> str:
        """One sheet per table with column widths fitted to the contents"""
        path = self.out_dir / REPORT_XLSX
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            for table in tables:
                # Excel caps sheet names at 31 characters
                sheet = table.stem[:31]
                pd.read_csv(table).to_excel(writer, sheet_name=sheet, index=False)
                worksheet = writer.sheets[sheet]
                # Auto-adjust column widths
                for column in worksheet.columns:
                    max_length = max(len(str(cell.value or "")) for cell in column)
                    column_letter = column[0].column_letter
                    worksheet.column_dimensions[column_letter].width = min(max_length + 2, 50)
        return self._record(path)
