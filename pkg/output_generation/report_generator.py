"""
Report Generator for Pair Scout
Writes search traces, Pareto tables, run summaries and manifests as CSV, JSON and Excel
"""

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import openpyxl
import pandas as pd
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils.dataframe import dataframe_to_rows
from openpyxl.worksheet.worksheet import Worksheet

from config import OUTPUT_CONFIG
from search.pareto import OBJECTIVES, pareto_front
from search.performance import PerfRecord, performance_summary

VERSION = "0.3.0"
RECORD_COLUMNS = ("latency_ms", "area_mm2", "e_dyn_mJ", "e_leak_mJ", "accuracy")
PARETO_SHEETS = ("area", "energy", "latency", "edp")


def config_checksum(config: Dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: Optional[int] = None
    config_checksum: str = ""
    version: str = VERSION
    started: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    status: str = "running"
    exit_code: Optional[int] = None
    error: str = ""

    def __post_init__(self):
        self._clock = time.perf_counter()

    def lap(self, phase: str) -> None:
        now = time.perf_counter()
        self.timings[phase] = round(now - self._clock, 3)
        self._clock = now

    def to_json(self) -> Dict:
        return asdict(self)


def record_from_row(row: Dict) -> PerfRecord:
    return PerfRecord(float(row["latency_ms"]), float(row["area_mm2"]), float(row["e_dyn_mJ"]),
                      float(row["e_leak_mJ"]), float(row["accuracy"]))


def load_trace(path: str) -> List[Dict]:
    """Trace rows from CSV or JSON; rows without a hardware record are dropped"""
    if path.endswith(".json"):
        with open(path, "r") as f:
            data = json.load(f)
        rows = data["trace"] if isinstance(data, dict) else data
    else:
        rows = pd.read_csv(path).to_dict(orient="records")
    kept = [row for row in rows
            if all(row.get(c) is not None and not pd.isna(row.get(c)) for c in RECORD_COLUMNS)
            and row.get("status", "ok") == "ok"]
    return kept


def pareto_rows(rows: Sequence[Dict], objective: str) -> List[Dict]:
    front = pareto_front(list(rows), objective, record=record_from_row)
    cost = OBJECTIVES[objective]
    return [{**row, "objective": objective, "objective_value": cost(record_from_row(row))} for row in front]


class ReportGenerator:
    def __init__(self, output_dir: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.output_dir = output_dir or OUTPUT_CONFIG["output_dir"]
        self.outputs: List[str] = []

    def _path(self, name: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)

    def _written(self, path: str) -> str:
        if path not in self.outputs:
            self.outputs.append(path)
        self.logger.info(f"💾 Wrote {path}")
        return path

    def write_trace_csv(self, rows: Sequence[Dict], name: str = OUTPUT_CONFIG["trace_csv"]) -> str:
        path = self._path(name)
        pd.DataFrame(list(rows)).to_csv(path, index=False)
        return self._written(path)

    def write_json(self, data: Dict, name: str) -> str:
        path = self._path(name)
        with open(path, "w") as f:
            json.dump(data, f, indent=2, default=str)
        return self._written(path)

    def write_summary(self, summary: Dict, rows: Sequence[Dict], name: str = OUTPUT_CONFIG["summary_json"]) -> str:
        """Search summary plus statistics over the successful trace rows and the Pareto fronts"""
        records = [record_from_row(row) for row in rows]
        scores = [float(row["performance"]) for row in rows if row.get("performance") is not None]
        statistics = performance_summary(records, scores, [row.get("mem_type") for row in rows]) if scores else {}
        fronts = {objective: [row["iteration"] for row in pareto_rows(rows, objective)]
                  for objective in PARETO_SHEETS} if rows else {}
        return self.write_json({**summary, "statistics": statistics, "pareto_iterations": fronts}, name)

    def write_manifest(self, manifest: RunManifest, name: str = OUTPUT_CONFIG["manifest_json"]) -> str:
        path = self._path(name)
        manifest.outputs = list(self.outputs)
        with open(path, "w") as f:
            json.dump(manifest.to_json(), f, indent=2)
        self.logger.info(f"🧾 Manifest written: {path}")
        return path

    def write_trace_xlsx(self, rows: Sequence[Dict], summary: Optional[Dict] = None,
                         name: str = OUTPUT_CONFIG["trace_xlsx"]) -> str:
        """Trace sheet, one Pareto sheet per objective and a summary sheet"""
        path = self._path(name)
        workbook = openpyxl.Workbook()
        workbook.remove(workbook.active)

        self._create_table_sheet(workbook, "Trace", list(rows))
        for objective in PARETO_SHEETS:
            self._create_table_sheet(workbook, f"Pareto {objective}", pareto_rows(rows, objective) if rows else [])
        self._create_summary_sheet(workbook, summary or {})

        workbook.save(path)
        return self._written(path)

    def export(self, rows: Sequence[Dict], fmt: str, summary: Optional[Dict] = None) -> str:
        if fmt == "csv":
            return self.write_trace_csv(rows)
        if fmt == "json":
            return self.write_json({"trace": list(rows), "summary": summary or {}}, "trace.json")
        if fmt == "xlsx":
            return self.write_trace_xlsx(rows, summary)
        raise ValueError(f"Unknown export format '{fmt}'")

    def _create_table_sheet(self, workbook: openpyxl.Workbook, title: str, rows: List[Dict]):
        sheet = workbook.create_sheet(title)
        df = pd.DataFrame(rows)
        if df.empty:
            sheet.append(["no rows"])
            return
        for row in dataframe_to_rows(df, index=False, header=True):
            sheet.append(row)
        self._format_headers(sheet, len(df.columns))
        self._fit_columns(sheet)

    def _create_summary_sheet(self, workbook: openpyxl.Workbook, summary: Dict):
        sheet = workbook.create_sheet("Summary")
        sheet.append(["Report Generated", datetime.now().strftime("%Y-%m-%d %H:%M:%S")])
        for key, value in summary.items():
            sheet.append([key, json.dumps(value, default=str) if isinstance(value, (dict, list)) else value])
        self._format_headers(sheet, 2)
        self._fit_columns(sheet)

    def _format_headers(self, sheet: Worksheet, num_columns: int):
        """Format header row with styling"""
        header_fill = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
        header_font = Font(color="FFFFFF", bold=True)
        header_alignment = Alignment(horizontal="center", vertical="center")

        for col in range(1, num_columns + 1):
            cell = sheet.cell(row=1, column=col)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = header_alignment

    def _fit_columns(self, sheet: Worksheet):
        for column in sheet.columns:
            width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
            sheet.column_dimensions[column[0].column_letter].width = min(width + 2, 50)
