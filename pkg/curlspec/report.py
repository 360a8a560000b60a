# curlspec/report.py
"""
报告模型与输出：Markdown 表 + JSON，以及逐层原始谱的 CSV。
同样的输入谱与容差 -> 字节相同的报告（不含时间戳，时间记在运行目录里）。
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field
from slugify import slugify

from .config import OUTPUT_DIR
from .utils import fmt17

log = logging.getLogger(__name__)


class InterlaceRecord(BaseModel):
    k: int
    alpha_2k1: float
    lambda_k: float
    margin: float
    tol: float = 0.0
    verdict: bool
    strict: bool
    resolved: bool = True


class ConvergenceTable(BaseModel):
    """tracks[i][l] 为第 i 条轨道在第 l 层的值；rates 只在 >= 3 层时给出"""
    operator: str
    provenance: str = "fem"
    levels: List[int] = Field(default_factory=list)
    h: List[float] = Field(default_factory=list)
    dofs: List[int] = Field(default_factory=list)
    tracks: List[List[float]] = Field(default_factory=list)
    extrapolated: List[float] = Field(default_factory=list)
    uncertainty: List[float] = Field(default_factory=list)
    rates: List[Optional[float]] = Field(default_factory=list)
    resolved: List[bool] = Field(default_factory=list)


class CheckReport(BaseModel):
    """passed 为 None 表示探索性报告（不做门控）"""
    check: str
    domain: str = ""
    passed: Optional[bool] = None
    records: List[Dict[str, Any]] = Field(default_factory=list)
    provenance: Dict[str, str] = Field(default_factory=dict)
    convergence: List[ConvergenceTable] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
    config_hash: str = ""
    run_config: Dict[str, Any] = Field(default_factory=dict)
    # 逐层原始谱（Spectrum），只用于 CSV 导出，不进 JSON
    raw_spectra: List[Any] = Field(default_factory=list, exclude=True)

    @property
    def gated(self) -> bool:
        return self.passed is not None

    def record_rows(self) -> List[Dict[str, Any]]:
        return [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in self.records]


class InterlaceReport(CheckReport):
    check: str = "interlace"
    records: List[InterlaceRecord] = Field(default_factory=list)

    @property
    def violations(self) -> List[InterlaceRecord]:
        return [r for r in self.records if not r.verdict]


# ---------- 渲染 ----------
def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "pass" if v else "FAIL"
    if isinstance(v, float):
        return fmt17(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_cell(x) for x in v) + "]"
    if v is None:
        return "-"
    return str(v)


def _table(rows: Sequence[Dict[str, Any]]) -> List[str]:
    if not rows:
        return ["(no records)"]
    cols = list(rows[0].keys())
    out = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        out.append("| " + " | ".join(_cell(r.get(c)) for c in cols) + " |")
    return out


def render_markdown(report: CheckReport) -> str:
    if report.passed is None:
        verdict = "exploratory (not gated)"
    else:
        verdict = "PASS" if report.passed else "FAIL"
    lines = [f"# {report.check}: {report.domain}", "", f"verdict: **{verdict}**", ""]
    if report.config_hash:
        lines += [f"config: `{report.config_hash}`", ""]
    if report.run_config:
        lines += ["```json", json.dumps(report.run_config, sort_keys=True, ensure_ascii=False), "```", ""]
    if report.provenance:
        lines += ["## provenance", ""]
        lines += [f"- {k}: {v}" for k, v in sorted(report.provenance.items())]
        lines.append("")
    if report.summary:
        lines += ["## summary", ""]
        nested = []
        for k, v in sorted(report.summary.items()):
            if isinstance(v, list) and v and all(isinstance(x, dict) for x in v):
                nested.append((k, v))
            else:
                lines.append(f"- {k}: {_cell(v)}")
        lines.append("")
        for k, rows in nested:
            lines += [f"### {k}", ""] + _table(rows) + [""]
    lines += ["## records", ""] + _table(report.record_rows()) + [""]
    for table in report.convergence:
        lines += [f"## convergence ({table.operator}, {table.provenance})", ""]
        rows = []
        for i, track in enumerate(table.tracks):
            row: Dict[str, Any] = {"track": i + 1}
            for lvl, v in zip(table.levels, track):
                row[f"n={lvl}"] = v
            row["extrapolated"] = table.extrapolated[i] if i < len(table.extrapolated) else None
            row["uncertainty"] = table.uncertainty[i] if i < len(table.uncertainty) else None
            row["rate"] = table.rates[i] if i < len(table.rates) else None
            rows.append(row)
        lines += _table(rows)
        lines += ["", "h: " + _cell([float(x) for x in table.h]), "dofs: " + _cell(list(table.dofs)), ""]
    if report.notes:
        lines += ["## notes", ""] + [f"- {n}" for n in report.notes] + [""]
    return "\n".join(lines)


def report_json(report: CheckReport) -> str:
    data = report.model_dump(mode="json")
    data["records"] = report.record_rows()
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False)


# ---------- 写文件 ----------
def artifact_stem(check: str, domain: str, config_hash: str = "") -> str:
    stem = slugify(f"{check} {domain}", max_length=80) or check
    return f"{stem}-{config_hash[:8]}" if config_hash else stem


def write_report(report: CheckReport, stem: Optional[str] = None, out_dir=None) -> Tuple[Path, Path]:
    out_dir = Path(out_dir) if out_dir is not None else OUTPUT_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or artifact_stem(report.check, report.domain, report.config_hash)
    md = out_dir / f"{stem}.md"
    js = out_dir / f"{stem}.json"
    md.write_text(render_markdown(report), encoding="utf-8")
    js.write_text(report_json(report), encoding="utf-8")
    log.info("report written: %s, %s", md.name, js.name)
    return md, js


def write_spectrum(spectrum, path, extra: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = spectrum.to_dict()
    data.update(extra or {})
    path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    return path


def write_spectra_csv(levels: Sequence, path, config_hash: str = "") -> Path:
    """逐层原始谱：每行一个特征值"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["level", "operator", "mesh", "h", "dofs", "k", "value", "residual", "converged", "config_hash"])
        for lvl, spec in enumerate(levels):
            for k, (v, r) in enumerate(zip(spec.values, spec.residuals), start=1):
                conv = spec.converged[k - 1] if k - 1 < len(spec.converged) else True
                w.writerow([lvl, spec.operator, spec.mesh, fmt17(spec.h), spec.dofs, k, fmt17(v), fmt17(r), int(conv), config_hash])
    return path
