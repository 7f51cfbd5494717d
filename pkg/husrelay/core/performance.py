"""
Evaluation Accounting

Counts embedded-solver work and times planner operations so the cost of each
strategy can be compared against its closed-form complexity.
"""

import time
import threading
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Optional, Any

logger = logging.getLogger(__name__)


@dataclass
class ComponentStats:
    """Aggregated timing for one component"""
    component: str
    total_calls: int = 0
    total_time_ms: float = 0.0
    min_time_ms: float = float('inf')
    max_time_ms: float = 0.0
    errors: int = 0

    @property
    def avg_time_ms(self) -> float:
        return self.total_time_ms / self.total_calls if self.total_calls else 0.0

    def update(self, duration_ms: float, success: bool) -> None:
        self.total_calls += 1
        self.total_time_ms += duration_ms
        self.min_time_ms = min(self.min_time_ms, duration_ms)
        self.max_time_ms = max(self.max_time_ms, duration_ms)
        if not success:
            self.errors += 1


class EvaluationCounter:
    """Thread-safe event counters plus per-component timing"""

    def __init__(self):
        self.counts: Dict[str, int] = defaultdict(int)
        self.component_stats: Dict[str, ComponentStats] = {}
        self.lock = threading.Lock()

    def increment(self, name: str, amount: int = 1) -> None:
        with self.lock:
            self.counts[name] += amount

    def count(self, name: str) -> int:
        with self.lock:
            return self.counts.get(name, 0)

    def record_timing(self, component: str, duration_ms: float, success: bool = True) -> None:
        with self.lock:
            if component not in self.component_stats:
                self.component_stats[component] = ComponentStats(component)
            self.component_stats[component].update(duration_ms, success)

    def get_stats(self, include_timing: bool = False) -> Dict[str, Any]:
        """Counts as a plain dict, sorted by name"""
        with self.lock:
            stats: Dict[str, Any] = {name: self.counts[name] for name in sorted(self.counts)}
            if include_timing:
                stats['timing_ms'] = {
                    name: round(s.total_time_ms, 3)
                    for name, s in sorted(self.component_stats.items())
                }
        return stats

    def print_report(self) -> str:
        """Human-readable summary"""
        with self.lock:
            lines = ["", "=" * 70, "EVALUATION REPORT", "=" * 70]
            for name in sorted(self.counts):
                lines.append(f"{name:32} | {self.counts[name]:10}")
            if self.component_stats:
                lines.append("-" * 70)
                for component, stats in sorted(self.component_stats.items()):
                    lines.append(
                        f"{component:20} | Calls: {stats.total_calls:6} | "
                        f"Avg: {stats.avg_time_ms:8.2f}ms | "
                        f"Max: {stats.max_time_ms:8.2f}ms"
                    )
            lines.append("=" * 70)
            return "\n".join(lines)


class TimerContext:
    """Context manager for measuring operation time"""

    def __init__(self, counter: EvaluationCounter, component: str):
        self.counter = counter
        self.component = component
        self.start_time: Optional[float] = None
        self.elapsed_seconds = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed_seconds = time.perf_counter() - self.start_time
        self.counter.record_timing(
            self.component,
            self.elapsed_seconds * 1000,
            success=exc_type is None,
        )
        if exc_type is not None:
            logger.debug(f"{self.component} failed after {self.elapsed_seconds:.3f}s: {exc_val}")
        return False
