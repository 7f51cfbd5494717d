"""
Result Reporting

Writes Monte Carlo result rows, per-cell summaries and solver convergence
traces. Column order is fixed by CSV_COLUMNS; the schema_version column
changes whenever that order does.
"""

from dataclasses import dataclass, asdict
from typing import List, Dict, Optional, Any
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version",
    "strategy",
    "snr_db",
    "trial",
    "seed",
    "r_total",
    "per_slot_payoff",
    "embedded_evaluations",
    "embedded_solves",
    "dinkelbach_iterations",
]

CONVERGENCE_COLUMNS = ["instance", "sweep", "relay", "iteration", "q", "F", "J"]


@dataclass
class ResultRow:
    """One (strategy, SNR, trial) outcome"""
    strategy: str
    snr_db: float
    trial: int
    seed: int
    r_total: float
    per_slot_payoff: List[float]
    embedded_evaluations: int = 0
    embedded_solves: int = 0
    dinkelbach_iterations: int = 0
    wall_time_s: Optional[float] = None

    @staticmethod
    def from_plan(strategy: str, snr_db: float, trial: int, seed: int, plan,
                  wall_time_s: Optional[float] = None) -> "ResultRow":
        stats = plan.solver_stats
        return ResultRow(
            strategy=strategy,
            snr_db=snr_db,
            trial=trial,
            seed=seed,
            r_total=plan.r_total,
            per_slot_payoff=[float(p) for p in plan.per_slot_payoff],
            embedded_evaluations=int(stats.get("embedded_evaluations", 0)),
            embedded_solves=int(stats.get("embedded_solves", 0)),
            dinkelbach_iterations=int(stats.get("dinkelbach_iterations", 0)),
            wall_time_s=wall_time_s,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary"""
        return asdict(self)

    def to_record(self) -> Dict[str, Any]:
        """Flat CSV record"""
        record = self.to_dict()
        record["schema_version"] = SCHEMA_VERSION
        record["r_total"] = repr(float(self.r_total))
        record["per_slot_payoff"] = ";".join(repr(float(p)) for p in self.per_slot_payoff)
        return record


@dataclass
class CellSummary:
    """Mean and spread of r_total over the trials of one (strategy, SNR) cell"""
    strategy: str
    snr_db: float
    count: int
    mean: float
    std: Optional[float]
    sem: Optional[float]


def summarize(rows: List[ResultRow]) -> List[CellSummary]:
    """Group rows by (strategy, SNR) preserving first-seen strategy order"""
    if not rows:
        return []

    df = pd.DataFrame([{"strategy": r.strategy, "snr_db": r.snr_db, "r_total": r.r_total} for r in rows])
    order = {name: i for i, name in enumerate(dict.fromkeys(df["strategy"]))}

    summaries = []
    grouped = df.groupby(["strategy", "snr_db"], sort=False)["r_total"]
    for (strategy, snr_db), values in grouped:
        count = int(values.count())
        std = float(values.std(ddof=1)) if count > 1 else None
        summaries.append(CellSummary(
            strategy=strategy,
            snr_db=float(snr_db),
            count=count,
            mean=float(values.mean()),
            std=std,
            sem=std / np.sqrt(count) if std is not None else None,
        ))
    summaries.sort(key=lambda s: (order[s.strategy], s.snr_db))
    return summaries


class ResultWriter:
    """Writes experiment artifacts into one output directory"""

    def __init__(self, output_dir: str = "results"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, rows: List[ResultRow], filename: str = "results.csv",
                  include_wall_time: bool = False) -> str:
        """RFC-4180 CSV with the fixed column order"""
        columns = CSV_COLUMNS + (["wall_time_s"] if include_wall_time else [])
        df = pd.DataFrame([r.to_record() for r in rows], columns=columns)
        path = self.output_dir / filename
        df.to_csv(path, index=False, encoding='utf-8', lineterminator='\r\n')
        logger.info(f"Wrote {len(rows)} result rows to {path}")
        return str(path)

    def write_summary(self, rows: List[ResultRow], filename: str = "summary.json",
                      metadata: Optional[Dict[str, Any]] = None) -> str:
        """JSON summary with mean, std and standard error per cell"""
        payload = {
            "schema_version": SCHEMA_VERSION,
            "metadata": metadata or {},
            "cells": [asdict(s) for s in summarize(rows)],
        }
        path = self.output_dir / filename
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        logger.info(f"Summary written to {path}")
        return str(path)

    def write_convergence(self, records: List[Dict[str, Any]], filename: str = "convergence.csv") -> str:
        """Per-iteration solver traces"""
        df = pd.DataFrame(records, columns=CONVERGENCE_COLUMNS)
        path = self.output_dir / filename
        df.to_csv(path, index=False, encoding='utf-8', lineterminator='\r\n', float_format="%.17g")
        logger.info(f"Wrote {len(records)} convergence records to {path}")
        return str(path)

    def write_json(self, payload: Dict[str, Any], filename: str) -> str:
        path = self.output_dir / filename
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        return str(path)
