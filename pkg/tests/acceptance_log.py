"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def verdict(number: int, title: str, checks: dict, detail: str = "") -> bool:
    """Record a PASS/FAIL line for a criterion; returns True when every check holds."""
    ok = all(checks.values())
    failed = [name for name, good in checks.items() if not good]
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    if failed:
        line += f"  failed: {', '.join(failed)}"
    LINES.append((number, line))
    print(line)
    return ok
