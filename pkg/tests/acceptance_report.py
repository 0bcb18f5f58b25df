"""Collects one line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(num: int, title: str, passed: bool, detail: str) -> str:
    line = f"criterion {num:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    LINES[num] = line
    print(line)
    return line
