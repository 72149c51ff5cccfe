#!/usr/bin/env python3
# reporter.py - Console output formatting and result file writers.

import csv
import json
import os
from pathlib import Path

import colorama
import numpy as np
from colorama import Fore, Style

# autoreset=True ensures that color/style changes are reset after each print.
colorama.init(autoreset=True)

COLOR_SUCCESS = Fore.GREEN
COLOR_FAILURE = Fore.RED
COLOR_WARNING = Fore.YELLOW
COLOR_INFO = Fore.BLUE
COLOR_HEADER = Fore.CYAN

STYLE_BOLD = Style.BRIGHT
STYLE_NORMAL = Style.NORMAL


def _status_color(status: str) -> str:
    if status == "PASSED":
        return COLOR_SUCCESS
    if status == "FAILED":
        return COLOR_FAILURE
    return COLOR_WARNING


def print_step_start(step_id: str, *, color_enabled: bool = True) -> None:
    """Print a message indicating the start of a task step."""
    color = COLOR_INFO if color_enabled else ""
    reset = Style.RESET_ALL if color_enabled else ""
    print(f"{color}RUNNING: {step_id} ...{reset}")


def print_step_result(
    step_id: str,
    status: str,
    duration: float | None = None,
    *,
    color_enabled: bool = True,
) -> None:
    """Print the result of a task step with optional color."""
    status_text = status.upper()
    duration_str = f" ({duration:.2f}s)" if duration is not None else ""
    color_prefix = _status_color(status_text) + STYLE_BOLD if color_enabled else ""
    color_reset = Style.RESET_ALL if color_enabled else ""
    style_normal = STYLE_NORMAL if color_enabled else ""
    print(f"{color_prefix}{status_text}:{style_normal} {step_id}{duration_str}{color_reset}")


def print_summary_table(
    step_results: list,
    overall_duration: float | None = None,
    *,
    title: str = "Run Summary",
    color_enabled: bool = True,
) -> None:
    """Print a summary table of all step results."""
    reset = Style.RESET_ALL if color_enabled else ""
    if not step_results:
        prefix = COLOR_WARNING if color_enabled else ""
        print(f"{prefix}No steps to summarize.{reset}")
        return

    num_total = len(step_results)
    num_passed = sum(1 for r in step_results if r.get('status', '').lower() == 'passed')
    num_failed = sum(1 for r in step_results if r.get('status', '').lower() == 'failed')
    num_flagged = num_total - num_passed - num_failed

    max_id_len = max(max(len(r.get('id', '')) for r in step_results), len("Step"))
    status_col_len = len("  FLAGGED  ")
    duration_col_len = len("(0000.00s)")

    header_prefix = COLOR_HEADER + STYLE_BOLD if color_enabled else ""
    print(f"\n{header_prefix}{'=' * 20} {title} {'=' * 20}{reset}")

    style_bold = STYLE_BOLD if color_enabled else ""
    style_normal = STYLE_NORMAL if color_enabled else ""
    header = f"{style_bold}{'Step':<{max_id_len}}  {'Status':^{status_col_len}}  {'Duration':>{duration_col_len}}{style_normal}"
    print(header)
    rule = '-' * (max_id_len + status_col_len + duration_col_len + 4)
    print(rule)

    for result in step_results:
        s_status = result.get('status', 'UNKNOWN').upper()
        s_duration = result.get('duration')
        duration_display = f"({s_duration:.2f}s)" if s_duration is not None else ""
        prefix = _status_color(s_status) + STYLE_BOLD if color_enabled else ""
        print(
            f"{result.get('id', 'N/A'):<{max_id_len}}  {prefix}{s_status:^{status_col_len}}{style_normal}  "
            f"{duration_display:>{duration_col_len}}{reset}"
        )

    print(rule)
    summary_line = (
        f"{style_bold}Total Steps: {num_total}{style_normal} | "
        f"{(COLOR_SUCCESS + STYLE_BOLD) if color_enabled else ''}Passed: {num_passed}{style_normal} | "
        f"{(COLOR_FAILURE + STYLE_BOLD) if color_enabled else ''}Failed: {num_failed}{style_normal}"
    )
    if num_flagged > 0:
        summary_line += f" | {(COLOR_WARNING + STYLE_BOLD) if color_enabled else ''}Flagged: {num_flagged}{style_normal}"
    print(summary_line)
    if overall_duration is not None:
        print(f"{style_bold}Total Execution Time: {overall_duration:.2f}s{style_normal}")
    footer_prefix = COLOR_HEADER + STYLE_BOLD if color_enabled else ""
    print(f"{footer_prefix}{'=' * len(header)}{reset}")


def _plain(value):
    """Convert numpy scalars/arrays and tuples to JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _atomic_write(path: Path, write) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        with open(tmp_path, 'w', encoding='utf-8', newline='') as f:
            write(f)
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()
    return path


def write_csv(path, columns: list, rows: list, config: dict, spec_hash: str) -> Path:
    """CSV with the resolved config and Hamiltonian hash as leading ``#`` comment lines."""
    def write(f):
        f.write(f"# spec_hash: {spec_hash}\n")
        f.write(f"# config: {json.dumps(_plain(config), sort_keys=True)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(_plain(row))

    return _atomic_write(path, write)


def write_json(path, columns: list, rows: list, config: dict, spec_hash: str, diagnostics: dict) -> Path:
    """One top-level object: config, results, diagnostics."""
    report = {
        "config": _plain(config),
        "spec_hash": spec_hash,
        "results": {"columns": list(columns), "rows": _plain(rows)},
        "diagnostics": _plain(diagnostics),
    }

    def write(f):
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")

    return _atomic_write(path, write)
