"""Best-known objective values and gap arithmetic."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


class BksFormatError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def parse_bks(text: str) -> dict[str, float]:
    """Rows are `<instance> <value>`; `#` starts a comment."""
    table: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BksFormatError(f"expected '<instance> <value>', got {raw.strip()!r}", lineno)
        name, val = parts
        try:
            v = float(val)
        except ValueError:
            raise BksFormatError(f"value {val!r} is not a number", lineno) from None
        if not v > 0:
            raise BksFormatError(f"value {val!r} must be positive", lineno)
        if name in table:
            raise BksFormatError(f"duplicate entry for {name}", lineno)
        table[name] = int(v) if v.is_integer() else v
    return table


def load_bks(path=None) -> dict[str, float]:
    """Read a BKS table; the shipped table when `path` is None."""
    if path is None:
        text = resources.files("ailskit").joinpath("data/bks.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_bks(text)


def gap_percent(cost: float, bks: float) -> float:
    return 100.0 * (cost - bks) / bks


def instance_key(path_or_name) -> str:
    """Instance id used in the table: the file name without `.vrp`."""
    name = Path(str(path_or_name)).name
    return name[:-4] if name.endswith(".vrp") else name
