"""Result tables for the terminal."""

import math
from collections.abc import Sequence
from typing import Any

from rich.console import Console
from rich.table import Table

from fusedet.application.services import DatasetSummary, SuiteResult, TrainingReport
from fusedet.domain.services import EvaluationResult

console = Console()


def _fmt(value: float, digits: int = 4) -> str:
    return "-" if value is None or math.isnan(value) else f"{value:.{digits}f}"


def metrics_table(result: EvaluationResult) -> Table:
    title = "Average precision"
    if result.difficulty is not None:
        title += f" ({result.difficulty})"
    table = Table(title=title)
    table.add_column("Class")
    table.add_column("IoU", justify="center")
    table.add_column("AP", justify="right")
    table.add_column("GT", justify="right")
    for row in result.per_class:
        table.add_row(row.class_name, str(row.iou_kind), _fmt(row.ap), str(row.num_gt))
    table.add_section()
    table.add_row("[bold]mAP[/bold]", "3d", _fmt(result.map_3d), "")
    table.add_row("[bold]mAP[/bold]", "bev", _fmt(result.map_bev), "")
    return table


def ablation_table(summary: Sequence[dict[str, Any]], keys: Sequence[str]) -> Table:
    table = Table(title="Ablation (mean over seeds)")
    for key in keys:
        table.add_column(key)
    for metric in ("mAP 3d", "mAP bev", "latency s", "runs"):
        table.add_column(metric, justify="right")
    for entry in summary:
        table.add_row(
            *(str(entry[k]) for k in keys),
            _fmt(entry["map_3d"]),
            _fmt(entry["map_bev"]),
            _fmt(entry["latency_s"], 3),
            str(entry["runs"]),
        )
    return table


def selftest_table(results: Sequence[SuiteResult]) -> Table:
    table = Table(title="Selftest")
    table.add_column("Suite")
    table.add_column("Result", justify="center")
    table.add_column("Time", justify="right")
    table.add_column("Detail")
    for r in results:
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, status, f"{r.seconds:.1f}s", r.detail)
    return table


def show_dataset(summary: DatasetSummary) -> None:
    console.print(
        f"[green]Dataset written[/green] {summary.root} "
        f"[dim](train {summary.num_train}, val {summary.num_val}, objects {summary.num_objects})[/dim]"
    )


def show_training(report: TrainingReport) -> None:
    last = report.step_losses[-1] if report.step_losses else float("nan")
    console.print(
        f"[green]Training done[/green] epochs={report.epochs_run} steps={report.steps} "
        f"last_loss={_fmt(last)} best={_fmt(report.best_map)}"
    )
    if report.best_checkpoint is not None:
        console.print(f"[dim]Best checkpoint: {report.best_checkpoint}[/dim]")
    if report.last_checkpoint is not None:
        console.print(f"[dim]Last checkpoint: {report.last_checkpoint}[/dim]")
