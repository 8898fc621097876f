"""
Quotient bookkeeping for G-symmetric surfaces M in S^3: the image of M in
the orbifold S^3/R_{m,k} is described by its genus g_hat and the numbers
v1, v2 of points where it meets the two singular circles. Everything
here is exact rational arithmetic.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, List, Tuple

from app.domain.errors import InconsistentPatternError, PreconditionError

logger = logging.getLogger(__name__)


class LRelation(str, Enum):
    CONTAINS_L = "contains_L"
    MEETS_L_TWICE = "meets_L_twice"


BOTH_RELATIONS: FrozenSet[LRelation] = frozenset(LRelation)


@dataclass(frozen=True)
class OrbifoldPattern:
    m: int
    k: int
    g_hat: int
    v1: int
    v2: int
    boundary: bool = False
    l_relations: FrozenSet[LRelation] = field(default=BOTH_RELATIONS, compare=False)

    def __post_init__(self) -> None:
        if self.m < 1 or self.k < 1:
            raise PreconditionError("m and k must be positive", {"m": self.m, "k": self.k})
        if min(self.g_hat, self.v1, self.v2) < 0:
            raise PreconditionError(
                "g_hat, v1 and v2 must be non-negative",
                {"g_hat": self.g_hat, "v1": self.v1, "v2": self.v2},
            )
        if self.boundary and self.k != 1:
            raise PreconditionError("the bounded quotient only occurs for k = 1", {"k": self.k})

    @property
    def triple(self) -> Tuple[int, int, int]:
        return (self.g_hat, self.v1, self.v2)

    @property
    def parity_ok(self) -> bool:
        """Closed quotients cross each singular circle an even number of times; a quotient bounded by S2 crosses S1 an odd number."""
        if self.boundary:
            return self.v1 % 2 == 1
        return self.v1 % 2 == 0 and self.v2 % 2 == 0


def chi_orbifold(pattern: OrbifoldPattern) -> Fraction:
    m, k = pattern.m, pattern.k
    if pattern.boundary:
        return 1 - 2 * pattern.g_hat - pattern.v1 + Fraction(pattern.v1, m + 1)
    return (
        2 - 2 * pattern.g_hat - pattern.v1 - pattern.v2
        + Fraction(pattern.v1, m + 1) + Fraction(pattern.v2, k + 1)
    )


def genus_from_pattern(pattern: OrbifoldPattern) -> int:
    """Genus of the closed surface upstairs."""
    if pattern.boundary:
        return boundary_case_genus(pattern.m, pattern.g_hat, pattern.v1)
    m, k = pattern.m, pattern.k
    correction = Fraction(m * (k + 1) * (2 - pattern.v1) + k * (m + 1) * (2 - pattern.v2), 2)
    g = m * k + (m + 1) * (k + 1) * pattern.g_hat - correction
    if g.denominator != 1:
        raise InconsistentPatternError(
            "pattern gives a non-integer genus",
            {"m": m, "k": k, "g_hat": pattern.g_hat, "v1": pattern.v1, "v2": pattern.v2, "g": str(g)},
        )
    return int(g)


def boundary_case_genus(m: int, g_hat: int, v1: int) -> int:
    """Genus when k = 1 and the quotient is bounded by S2."""
    if v1 % 2 == 0:
        raise PreconditionError("v1 must be odd when the quotient is bounded by S2", {"v1": v1})
    return 2 * g_hat * (m + 1) + m * (v1 - 1)


@dataclass(frozen=True)
class HatGBound:
    value: Fraction
    relaxed: Fraction

    @property
    def below_one(self) -> bool:
        return self.value < 1


def hat_g_bound(m: int, k: int, v1: int, v2: int) -> HatGBound:
    """Upper bound for g_hat when g <= mk + k, together with its v-free relaxation."""
    value = Fraction(m * (2 - v1), 2 * m + 2) + Fraction(k * (2 - v2), 2 * k + 2) + Fraction(k, (m + 1) * (k + 1))
    relaxed = Fraction(2 * m, 2 * m + 2) + Fraction(k, (m + 1) * (k + 1))
    return HatGBound(value=value, relaxed=relaxed)


# ==============================================================
# CLASSIFICATION
# ==============================================================

def _closed_candidates(m: int, k: int, g: int) -> List[OrbifoldPattern]:
    found = []
    for g_hat in range(g + 1):
        for v1 in range(0, 2 * g + 3, 2):
            for v2 in range(0, 2 * g + 3, 2):
                pattern = OrbifoldPattern(m, k, g_hat, v1, v2)
                if genus_from_pattern(pattern) != g:
                    continue
                # v1 = v2 = 0 forces g = 1 or g > mk + k
                if v1 == 0 and v2 == 0:
                    continue
                if g_hat > hat_g_bound(m, k, v1, v2).value:
                    continue
                # a sphere quotient meets both singular circles
                if g_hat == 0 and (v1 < 2 or v2 < 2):
                    continue
                found.append(pattern)
    return found


def _boundary_candidates(m: int, k: int, g: int) -> List[OrbifoldPattern]:
    found = []
    for g_hat in range(g + 1):
        for v1 in range(1, 2 * g + 3, 2):
            pattern = OrbifoldPattern(m, k, g_hat, v1, 0, boundary=True)
            if boundary_case_genus(m, g_hat, v1) == g:
                found.append(pattern)
    return found


def classify(m: int, k: int, g: int) -> FrozenSet[OrbifoldPattern]:
    """
    All (g_hat, v1, v2) compatible with a closed embedded G_{m,k}-symmetric
    surface of genus g, for 1 < g <= mk + k. The L-relation is carried as
    a tag with both values.
    """
    if not (m >= k >= 1):
        raise PreconditionError("expected m >= k >= 1", {"m": m, "k": k})
    if not (1 < g <= m * k + k):
        raise PreconditionError("classification covers 1 < g <= mk + k", {"g": g, "mk+k": m * k + k})
    patterns = _closed_candidates(m, k, g)
    if k == 1 and m * k > 1:
        patterns += _boundary_candidates(m, k, g)
    for pattern in patterns:
        expected = (m + 1) * (k + 1) * chi_orbifold(pattern)
        if 2 - 2 * genus_from_pattern(pattern) != expected:
            raise InconsistentPatternError(
                "Euler characteristic does not lift", {"pattern": pattern.triple, "expected": str(expected)}
            )
    logger.debug("classify(m=%d, k=%d, g=%d): %d patterns", m, k, g, len(patterns))
    return frozenset(patterns)


def has_full_order_element(m: int, k: int) -> bool:
    """Whether R_{m,k} is cyclic of order (m+1)(k+1)."""
    if m < 1 or k < 1:
        raise PreconditionError("m and k must be positive", {"m": m, "k": k})
    return math.gcd(m + 1, k + 1) == 1


# ==============================================================
# TABLES
# ==============================================================

@dataclass(frozen=True)
class TableRow:
    m: int
    k: int
    mk: int
    feasible: Tuple[Tuple[int, int, int], ...]
    other_genera_empty: bool
    chi_lawson: Fraction
    gcd: int
    full_order_element: bool

    def as_strings(self) -> Dict[str, str]:
        return {
            "m": str(self.m),
            "k": str(self.k),
            "mk": str(self.mk),
            "feasible": " ".join(f"({a},{b},{c})" for a, b, c in self.feasible) or "-",
            "other_genera_empty": str(self.other_genera_empty).lower(),
            "chi_lawson": str(self.chi_lawson),
            "gcd": str(self.gcd),
            "full_order_element": str(self.full_order_element).lower(),
        }


TABLE_COLUMNS = ("m", "k", "mk", "feasible", "other_genera_empty", "chi_lawson", "gcd", "full_order_element")


def orbifold_table(max_m: int, max_k: int) -> List[TableRow]:
    rows = []
    for m in range(1, max_m + 1):
        for k in range(1, min(m, max_k) + 1):
            mk = m * k
            feasible = tuple(sorted(p.triple for p in classify(m, k, mk))) if mk > 1 else ()
            others = [g for g in range(2, m * k + k + 1) if g != mk]
            rows.append(
                TableRow(
                    m=m,
                    k=k,
                    mk=mk,
                    feasible=feasible,
                    other_genera_empty=all(not classify(m, k, g) for g in others),
                    chi_lawson=chi_orbifold(OrbifoldPattern(m, k, 0, 2, 2)),
                    gcd=math.gcd(m + 1, k + 1),
                    full_order_element=has_full_order_element(m, k),
                )
            )
    return rows


def render_markdown(rows: List[TableRow]) -> str:
    lines = [
        "| " + " | ".join(TABLE_COLUMNS) + " |",
        "|" + "|".join("---" for _ in TABLE_COLUMNS) + "|",
    ]
    for row in rows:
        cells = row.as_strings()
        lines.append("| " + " | ".join(cells[c] for c in TABLE_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def render_csv(rows: List[TableRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_strings())
    return buffer.getvalue()
