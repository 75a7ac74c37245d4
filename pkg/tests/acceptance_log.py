"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS: list[str] = []


def report(criterion: str, passed: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
