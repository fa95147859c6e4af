"""Comparison records between analytic values and their checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

Z_BOUND = 3.5
CSV_COLUMNS = ("quantity", "analytic", "empirical", "se", "z_score", "tolerance", "pass")


def fmt_number(x) -> str:
    """17 significant digits; infinities as ``inf``; ``None`` as an empty cell."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        raise ValueError("refusing to emit NaN")
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    analytic: float | None
    empirical: float | None
    se: float | None = None
    z_score: float | None = None
    tolerance: float | None = None
    passed: bool = True
    kind: str = "info"

    @classmethod
    def z_test(cls, quantity, analytic, empirical, se, bound=Z_BOUND):
        """Pass when ``|empirical - analytic| <= bound * se``.

        With ``se == 0`` (a degenerate estimate) the values must agree to 1e-12.
        """
        diff = empirical - analytic
        if se > 0:
            z = diff / se
            ok = abs(z) <= bound
        else:
            ok = abs(diff) <= 1e-12
            z = 0.0 if ok else math.copysign(math.inf, diff)
        return cls(quantity, analytic, empirical, se, z, bound, ok, "z")

    @classmethod
    def absolute(cls, quantity, expected, value, tolerance):
        ok = abs(value - expected) <= tolerance
        return cls(quantity, expected, value, None, None, tolerance, ok, "abs")

    @classmethod
    def info(cls, quantity, value, analytic=None):
        return cls(quantity, analytic, value)

    def cells(self) -> list[str]:
        return [
            self.quantity,
            fmt_number(self.analytic),
            fmt_number(self.empirical),
            fmt_number(self.se),
            fmt_number(self.z_score),
            fmt_number(self.tolerance),
            "pass" if self.passed else "FAIL",
        ]

    def as_dict(self) -> dict:
        return dict(zip(CSV_COLUMNS, self.cells()))


@dataclass
class CoalescenceReport:
    rows: list[ReportRow] = field(default_factory=list)

    def add(self, row: ReportRow) -> ReportRow:
        self.rows.append(row)
        return row

    def extend(self, other: "CoalescenceReport") -> None:
        self.rows.extend(other.rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.passed]

    def __getitem__(self, quantity: str) -> ReportRow:
        for r in self.rows:
            if r.quantity == quantity:
                return r
        raise KeyError(quantity)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)
