"""Genotype contingency tables for a single SNP.

A table holds case counts ``r0, r1, r2`` and control counts ``s0, s1, s2``
indexed by the number of minor alleles an individual carries.  Two tables
are neighbors when exactly one individual changes genotype within its own
row, so the number of cases ``R`` and controls ``S`` never changes.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Literal

CSV_HEADER = ("snp_id", "r0", "r1", "r2", "s0", "s1", "s2")

Row = Literal["case", "control"]


class InvalidTableError(ValueError):
    """Raised when an operation needs a valid table and gets an invalid one."""

    def __init__(self, violations: list[str], snp_id: str = ""):
        self.violations = list(violations)
        self.snp_id = snp_id
        label = f"table {snp_id!r}" if snp_id else "table"
        super().__init__(f"invalid {label}: {', '.join(self.violations)}")


class TableFormatError(ValueError):
    """A CSV row could not be turned into a valid table."""

    def __init__(self, row_number: int, violations: list[str]):
        self.row_number = row_number
        self.violations = list(violations)
        super().__init__(f"row {row_number}: {', '.join(self.violations)}")


@dataclass(frozen=True)
class GenotypeTable:
    snp_id: str
    r0: int
    r1: int
    r2: int
    s0: int
    s1: int
    s2: int

    @classmethod
    def from_counts(cls, counts: Iterable[int], snp_id: str = "") -> "GenotypeTable":
        c = tuple(int(x) for x in counts)
        if len(c) != 6:
            raise ValueError(f"expected 6 counts, got {len(c)}")
        return cls(snp_id, *c)

    @property
    def counts(self) -> tuple[int, int, int, int, int, int]:
        return (self.r0, self.r1, self.r2, self.s0, self.s1, self.s2)

    @property
    def cases(self) -> tuple[int, int, int]:
        return (self.r0, self.r1, self.r2)

    @property
    def controls(self) -> tuple[int, int, int]:
        return (self.s0, self.s1, self.s2)

    @property
    def R(self) -> int:
        return self.r0 + self.r1 + self.r2

    @property
    def S(self) -> int:
        return self.s0 + self.s1 + self.s2

    @property
    def N(self) -> int:
        return self.R + self.S

    @property
    def margins(self) -> tuple[int, int, int]:
        return (self.r0 + self.s0, self.r1 + self.s1, self.r2 + self.s2)

    @property
    def s_max(self) -> int:
        return max(self.controls)


@dataclass(frozen=True)
class AllelicView:
    """2x2 allele-count collapse of a genotype table."""

    case_minor: int
    case_major: int
    control_minor: int
    control_major: int

    @property
    def minor_total(self) -> int:
        return self.case_minor + self.control_minor

    @property
    def major_total(self) -> int:
        return self.case_major + self.control_major


@dataclass(frozen=True)
class NeighborMove:
    row: Row
    from_genotype: int
    to_genotype: int

    def __post_init__(self):
        if self.row not in ("case", "control"):
            raise ValueError(f"row must be 'case' or 'control', got {self.row!r}")
        if {self.from_genotype, self.to_genotype} - {0, 1, 2}:
            raise ValueError("genotypes must be 0, 1 or 2")
        if self.from_genotype == self.to_genotype:
            raise ValueError("a move must change the genotype")

    @property
    def delta(self) -> tuple[int, ...]:
        d = [0] * 6
        offset = 0 if self.row == "case" else 3
        d[offset + self.from_genotype] -= 1
        d[offset + self.to_genotype] += 1
        return tuple(d)


# Fixed enumeration order; greedy search tie-breaks on it.
ALL_MOVES: tuple[NeighborMove, ...] = tuple(
    NeighborMove(row, a, b)
    for row in ("case", "control")
    for a in range(3)
    for b in range(3)
    if a != b
)


def validate(table: GenotypeTable) -> list[str]:
    """Return every violated invariant; an empty list means the table is valid."""
    violations = []
    names = ("r0", "r1", "r2", "s0", "s1", "s2")
    for name, value in zip(names, table.counts):
        if value < 0:
            violations.append(f"{name} < 0")
    if table.R < 1:
        violations.append(f"R = {table.R}" if table.R == 0 else "R < 1")
    if table.S < 1:
        violations.append(f"S = {table.S}" if table.S == 0 else "S < 1")
    for i, n in enumerate(table.margins):
        if n <= 0:
            violations.append(f"n{i} = {n}" if n == 0 else f"n{i} < 0")
    return violations


def is_valid(table: GenotypeTable) -> bool:
    return not validate(table)


def require_valid(table: GenotypeTable) -> None:
    violations = validate(table)
    if violations:
        raise InvalidTableError(violations, table.snp_id)


def allelic_view(table: GenotypeTable) -> AllelicView:
    require_valid(table)
    return AllelicView(
        case_minor=table.r1 + 2 * table.r2,
        case_major=2 * table.r0 + table.r1,
        control_minor=table.s1 + 2 * table.s2,
        control_major=2 * table.s0 + table.s1,
    )


def apply_move(table: GenotypeTable, move: NeighborMove) -> GenotypeTable | None:
    """Apply ``move``; None when the result is not a valid table."""
    counts = [c + d for c, d in zip(table.counts, move.delta)]
    moved = replace(table, r0=counts[0], r1=counts[1], r2=counts[2],
                    s0=counts[3], s1=counts[4], s2=counts[5])
    return moved if is_valid(moved) else None


def admissible_moves(table: GenotypeTable) -> Iterator[tuple[NeighborMove, GenotypeTable]]:
    """Yield ``(move, neighbor)`` for every admissible move, in ALL_MOVES order."""
    require_valid(table)
    for move in ALL_MOVES:
        moved = apply_move(table, move)
        if moved is not None:
            yield move, moved


def neighbors(table: GenotypeTable) -> set[GenotypeTable]:
    return {t for _, t in admissible_moves(table)}


def _compositions(n: int) -> Iterator[tuple[int, int, int]]:
    for a in range(n + 1):
        for b in range(n + 1 - a):
            yield (a, b, n - a - b)


def enumerate_tables(R: int, S: int, snp_id: str = "") -> Iterator[GenotypeTable]:
    """Every valid table with ``R`` cases and ``S`` controls, each exactly once.

    The table space grows like ``R**2 * S**2``; meant for oracle checks on
    small cohorts.
    """
    if R < 1 or S < 1:
        return
    for case_row, control_row in itertools.product(_compositions(R), _compositions(S)):
        if all(case_row[i] + control_row[i] > 0 for i in range(3)):
            yield GenotypeTable(snp_id, *case_row, *control_row)


def read_tables(path: str | Path) -> list[GenotypeTable]:
    """Load a ``snp_id,r0,r1,r2,s0,s1,s2`` CSV, rejecting bad rows by row number.

    Row numbers count the header as row 1, so the first data row is row 2.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_tables(fh)


def parse_tables(lines: Iterable[str]) -> list[GenotypeTable]:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise TableFormatError(1, [f"header must be {','.join(CSV_HEADER)}"])
    tables = []
    seen: set[str] = set()
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 7:
            raise TableFormatError(row_number, [f"expected 7 fields, got {len(row)}"])
        snp_id = row[0].strip()
        if not snp_id:
            raise TableFormatError(row_number, ["empty snp_id"])
        if snp_id in seen:
            raise TableFormatError(row_number, [f"duplicate snp_id {snp_id!r}"])
        try:
            counts = [int(f) for f in row[1:]]
        except ValueError:
            raise TableFormatError(row_number, ["counts must be integers"]) from None
        table = GenotypeTable(snp_id, *counts)
        violations = validate(table)
        if violations:
            raise TableFormatError(row_number, violations)
        seen.add(snp_id)
        tables.append(table)
    return tables


def format_tables(tables: Iterable[GenotypeTable]) -> str:
    out = [",".join(CSV_HEADER)]
    for t in tables:
        out.append(",".join([t.snp_id, *(str(c) for c in t.counts)]))
    return "\n".join(out) + "\n"
