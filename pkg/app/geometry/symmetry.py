"""
Isometries of S^3 generated by the reflections and rotations of the
Lawson construction, finite groups generated by them, and quotients.

All isometries act on rows in the layout (Re z1, Im z1, Re z2, Im z2).
Group elements are compared by rounding their matrices to a fixed grid
(``settings.GROUP_QUANTUM``), which is robust for the products that
occur here since every entry is a sum of cosines of rational multiples
of pi.
"""

from __future__ import annotations

import logging
import math
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.config.settings import settings
from app.domain.errors import GroupClosureError, PreconditionError
from app.geometry.s3 import S3Point

logger = logging.getLogger(__name__)

ORTHOGONAL_TOL = 1e-12


# ==============================================================
# ISOMETRY
# ==============================================================

@dataclass(frozen=True, eq=False)
class Isometry:
    matrix: np.ndarray
    name: str = ""
    det_sign: int = field(init=False)

    def __post_init__(self) -> None:
        M = np.array(self.matrix, dtype=np.float64)
        if M.shape != (4, 4):
            raise PreconditionError("isometry matrix must be 4x4", {"shape": M.shape})
        err = float(np.max(np.abs(M.T @ M - np.eye(4))))
        if err > ORTHOGONAL_TOL:
            raise PreconditionError("matrix is not orthogonal", {"name": self.name, "error": err})
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "det_sign", 1 if np.linalg.det(M) > 0 else -1)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        name = f"{self.name}*{other.name}" if self.name and other.name else ""
        return Isometry(self.matrix @ other.matrix, name)

    def __call__(self, point: S3Point) -> S3Point:
        return S3Point.from_vector(self.matrix @ point.to_vector())

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.matrix.T

    def inverse(self) -> "Isometry":
        return Isometry(self.matrix.T, f"({self.name})^-1" if self.name else "")

    def power(self, n: int) -> "Isometry":
        return Isometry(np.linalg.matrix_power(self.matrix, n), f"({self.name})^{n}" if self.name else "")

    def key(self, quantum: float = settings.GROUP_QUANTUM) -> bytes:
        return np.rint(self.matrix / quantum).astype(np.int64).tobytes()

    def is_block_diagonal(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix[:2, 2:])) < tol and np.max(np.abs(self.matrix[2:, :2])) < tol)

    def is_close(self, other: "Isometry", tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) < tol)


def identity() -> Isometry:
    return Isometry(np.eye(4), "1")


def _block(phase: float, conjugate: bool) -> np.ndarray:
    """Real 2x2 block of z -> e^{i phase} z or z -> e^{i phase} conj(z)."""
    c, s = math.cos(phase), math.sin(phase)
    if conjugate:
        return np.array([[c, s], [s, -c]])
    return np.array([[c, -s], [s, c]])


def _diagonal(phase1: float, conj1: bool, phase2: float, conj2: bool, name: str) -> Isometry:
    M = np.zeros((4, 4))
    M[:2, :2] = _block(phase1, conj1)
    M[2:, 2:] = _block(phase2, conj2)
    return Isometry(M, name)


# ==============================================================
# NAMED GENERATORS
# ==============================================================

def rotation_RP(m: int) -> Isometry:
    """Rotation about the circle through the P_j, z1 -> e^{2 pi i/(m+1)} z1."""
    return _diagonal(2.0 * math.pi / (m + 1), False, 0.0, False, "R_P")


def rotation_RQ(k: int) -> Isometry:
    """Rotation about the circle through the Q_l, z2 -> e^{2 pi i/(k+1)} z2."""
    return _diagonal(0.0, False, 2.0 * math.pi / (k + 1), False, "R_Q")


def reflection_sigma_P(j: int, k: int) -> Isometry:
    """Reflection in the great sphere through P_j orthogonal to the circle of the P's."""
    return _diagonal(0.0, False, 2.0 * j * math.pi / (k + 1), True, f"Sigma_P{j}")


def reflection_sigma_Q(l: int, m: int) -> Isometry:
    return _diagonal(2.0 * l * math.pi / (m + 1), True, 0.0, False, f"Sigma_Q{l}")


def reflection_sigma_Pstar(j: int, k: int) -> Isometry:
    return _diagonal(0.0, False, (2 * j + 1) * math.pi / (k + 1), True, f"Sigma_P*{j}")


def reflection_sigma_Qstar(l: int, m: int) -> Isometry:
    return _diagonal((2 * l + 1) * math.pi / (m + 1), True, 0.0, False, f"Sigma_Q*{l}")


def halfturn_gamma(j: int, l: int, m: int, k: int) -> Isometry:
    """Halfturn about the great circle through P_j and Q_l."""
    g = reflection_sigma_Q(l, m) @ reflection_sigma_P(j, k)
    return Isometry(g.matrix, f"gamma_{j},{l}")


def halfturn_gamma_star(j: int, l: int, m: int, k: int) -> Isometry:
    """Halfturn about the great circle through P*_j and Q*_l."""
    g = reflection_sigma_Qstar(l, m) @ reflection_sigma_Pstar(j, k)
    return Isometry(g.matrix, f"gamma*_{j},{l}")


def quarter_rotation(m: int, k: int) -> Isometry:
    """Half-step rotation taking every P_j, Q_l to P*_j, Q*_l."""
    return _diagonal(math.pi / (2 * (m + 1)), False, math.pi / (2 * (k + 1)), False, "Rq")


def epsilon_swap() -> Isometry:
    """(z1, z2) -> (z2, z1)."""
    M = np.zeros((4, 4))
    M[:2, 2:] = np.eye(2)
    M[2:, :2] = np.eye(2)
    return Isometry(M, "epsilon")


_NAME_PATTERNS: Tuple[Tuple[re.Pattern, str], ...] = (
    (re.compile(r"^(?:1|id|identity)$"), "identity"),
    (re.compile(r"^R_P$"), "R_P"),
    (re.compile(r"^R_Q$"), "R_Q"),
    (re.compile(r"^Rq$"), "Rq"),
    (re.compile(r"^epsilon$"), "epsilon"),
    (re.compile(r"^Sigma_P(\*?)_?(-?\d+)$"), "Sigma_P"),
    (re.compile(r"^Sigma_Q(\*?)_?(-?\d+)$"), "Sigma_Q"),
    (re.compile(r"^gamma(\*?)_(-?\d+)[,_](-?\d+)$"), "gamma"),
)


def isometry_from_name(name: str, m: int, k: int) -> Isometry:
    """
    Parse a generator name such as ``R_P``, ``Sigma_P*0``, ``Sigma_Q2``,
    ``gamma_1,1`` or ``gamma*_0,0``.
    """
    text = name.strip()
    for pattern, kind in _NAME_PATTERNS:
        match = pattern.match(text)
        if not match:
            continue
        if kind == "identity":
            return identity()
        if kind == "R_P":
            return rotation_RP(m)
        if kind == "R_Q":
            return rotation_RQ(k)
        if kind == "Rq":
            return quarter_rotation(m, k)
        if kind == "epsilon":
            if m != k:
                raise PreconditionError("epsilon is a symmetry only when m == k", {"m": m, "k": k})
            return epsilon_swap()
        star, idx = match.group(1), int(match.group(2))
        if kind == "Sigma_P":
            return reflection_sigma_Pstar(idx, k) if star else reflection_sigma_P(idx, k)
        if kind == "Sigma_Q":
            return reflection_sigma_Qstar(idx, m) if star else reflection_sigma_Q(idx, m)
        j, l = int(match.group(2)), int(match.group(3))
        return halfturn_gamma_star(j, l, m, k) if star else halfturn_gamma(j, l, m, k)
    raise PreconditionError(f"unknown isometry name: {name!r}")


# ==============================================================
# GROUPS
# ==============================================================

class GroupName(str, Enum):
    R = "R"
    R_P = "R^P"
    R_Q = "R^Q"
    R_HAT = "R_hat"
    G = "G"
    G_STAR = "G*"
    G_CHECK = "G_check"
    G_TILDE = "G_tilde"
    G_P = "G^P"
    G_Q = "G^Q"
    G_HAT = "G_hat"
    G_BAR = "G_bar"
    CUSTOM = "custom"


# multiple of (m+1)(k+1)
_ORDER_FACTOR: Dict[GroupName, int] = {
    GroupName.R: 1,
    GroupName.R_P: 2,
    GroupName.R_Q: 2,
    GroupName.R_HAT: 4,
    GroupName.G: 2,
    GroupName.G_STAR: 2,
    GroupName.G_CHECK: 4,
    GroupName.G_TILDE: 4,
    GroupName.G_P: 4,
    GroupName.G_Q: 4,
    GroupName.G_HAT: 8,
    GroupName.G_BAR: 16,
}


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    name: str
    m: int
    k: int
    elements: Tuple[Isometry, ...]
    generators: Tuple[Isometry, ...]
    quantum: float = settings.GROUP_QUANTUM
    _lookup: Dict[bytes, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        lookup = {g.key(self.quantum): i for i, g in enumerate(self.elements)}
        if len(lookup) != len(self.elements):
            raise GroupClosureError("duplicate elements in group", {"name": self.name})
        object.__setattr__(self, "_lookup", lookup)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def matrices(self) -> np.ndarray:
        return np.stack([g.matrix for g in self.elements])

    def contains(self, g: Isometry) -> bool:
        return g.key(self.quantum) in self._lookup

    def index_of(self, g: Isometry) -> int:
        try:
            return self._lookup[g.key(self.quantum)]
        except KeyError as exc:
            raise PreconditionError("isometry is not an element of the group", {"group": self.name, "element": g.name}) from exc

    def keys(self) -> frozenset:
        return frozenset(self._lookup)

    def __len__(self) -> int:
        return self.order

    def __iter__(self):
        return iter(self.elements)


def generate_group(
    generators: Sequence[Isometry],
    max_order: int,
    name: str = GroupName.CUSTOM.value,
    m: int = 0,
    k: int = 0,
    quantum: float = settings.GROUP_QUANTUM,
) -> SymmetryGroup:
    """Breadth-first closure of the generators under composition."""
    gens = tuple(generators)
    ident = identity()
    elements: List[Isometry] = [ident]
    seen = {ident.key(quantum)}
    queue = deque([ident])
    while queue:
        current = queue.popleft()
        for gen in gens:
            candidate = gen @ current
            key = candidate.key(quantum)
            if key in seen:
                continue
            seen.add(key)
            elements.append(candidate)
            if len(elements) > max_order:
                raise GroupClosureError(
                    f"closure exceeded max_order={max_order}",
                    {"group": name, "reached": len(elements), "generators": [g.name for g in gens]},
                )
            queue.append(candidate)
    logger.debug("Generated group %s(m=%d, k=%d) of order %d", name, m, k, len(elements))
    return SymmetryGroup(name=name, m=m, k=k, elements=tuple(elements), generators=gens, quantum=quantum)


def _check_mk(m: int, k: int) -> None:
    if m < 1 or k < 1:
        raise PreconditionError("m and k must be positive", {"m": m, "k": k})
    if m > settings.MAX_MK or k > settings.MAX_MK:
        raise PreconditionError(f"m and k are limited to {settings.MAX_MK}", {"m": m, "k": k})


def named_generators(name: GroupName, m: int, k: int) -> List[Isometry]:
    base = [rotation_RP(m), rotation_RQ(k)]
    if name is GroupName.R:
        return base
    if name is GroupName.R_P:
        return base + [reflection_sigma_Pstar(0, k)]
    if name is GroupName.R_Q:
        return base + [reflection_sigma_Qstar(0, m)]
    if name is GroupName.R_HAT:
        return [
            reflection_sigma_Pstar(0, k),
            reflection_sigma_Pstar(1, k),
            reflection_sigma_Qstar(0, m),
            reflection_sigma_Qstar(1, m),
        ]
    if name is GroupName.G:
        return base + [halfturn_gamma(1, 1, m, k)]
    if name is GroupName.G_STAR:
        return base + [halfturn_gamma_star(1, 1, m, k)]
    if name is GroupName.G_CHECK:
        return named_generators(GroupName.G_STAR, m, k) + [reflection_sigma_Pstar(0, k)]
    if name is GroupName.G_TILDE:
        return base + [halfturn_gamma(1, 1, m, k), halfturn_gamma_star(1, 1, m, k)]
    if name is GroupName.G_P:
        return named_generators(GroupName.G, m, k) + [reflection_sigma_Pstar(0, k)]
    if name is GroupName.G_Q:
        return named_generators(GroupName.G, m, k) + [reflection_sigma_Qstar(0, m)]
    if name is GroupName.G_HAT:
        return named_generators(GroupName.G_TILDE, m, k) + [reflection_sigma_Pstar(0, k)]
    if name is GroupName.G_BAR:
        if m != k:
            raise PreconditionError("G_bar is defined only for m == k", {"m": m, "k": k})
        return named_generators(GroupName.G_HAT, m, k) + [epsilon_swap()]
    raise PreconditionError(f"no generators for group {name!r}")


def predicted_order(name: GroupName | str, m: int, k: int) -> int:
    return _ORDER_FACTOR[GroupName(name)] * (m + 1) * (k + 1)


def build_named_group(name: GroupName | str, m: int, k: int, max_order: Optional[int] = None) -> SymmetryGroup:
    try:
        gname = GroupName(name)
    except ValueError as exc:
        raise PreconditionError(f"unknown group name: {name!r}") from exc
    if gname is GroupName.CUSTOM:
        raise PreconditionError("custom groups are built with generate_group")
    _check_mk(m, k)
    cap = max_order if max_order is not None else 16 * (m + 1) * (k + 1)
    return generate_group(named_generators(gname, m, k), cap, name=gname.value, m=m, k=k)


def verify_order(group: SymmetryGroup) -> bool:
    return group.order == predicted_order(group.name, group.m, group.k)


def conjugate_group(group: SymmetryGroup, h: Isometry) -> SymmetryGroup:
    """The group h G h^-1, with elements listed in the same order."""
    h_inv = h.inverse()
    elements = tuple(Isometry((h @ g @ h_inv).matrix, g.name) for g in group.elements)
    gens = tuple(Isometry((h @ g @ h_inv).matrix, g.name) for g in group.generators)
    return SymmetryGroup(
        name=f"{h.name or 'h'}.{group.name}",
        m=group.m,
        k=group.k,
        elements=elements,
        generators=gens,
        quantum=group.quantum,
    )


# ==============================================================
# SUBGROUPS AND QUOTIENTS
# ==============================================================

def is_subgroup(H: SymmetryGroup, G: SymmetryGroup) -> bool:
    return all(G.contains(h) for h in H.elements)


def is_normal(H: SymmetryGroup, G: SymmetryGroup) -> bool:
    """Normality checked on the generators of G, which suffices for finite groups."""
    if not is_subgroup(H, G):
        return False
    for g in G.generators:
        g_inv = g.inverse()
        for h in H.elements:
            if not H.contains(g @ h @ g_inv):
                return False
    return True


def index(H: SymmetryGroup, G: SymmetryGroup) -> int:
    if not is_subgroup(H, G):
        raise PreconditionError(f"{H.name} is not a subgroup of {G.name}")
    return G.order // H.order


def flip_label(g: Isometry, m: int, k: int, tol: float = 1e-9) -> Optional[str]:
    """
    Name of the coset of g modulo R in terms of the flips of the two
    circle factors: F1v/F1h act on the z2 circle, F2v/F2h on the z1
    circle. Returns None for elements that exchange the factors.
    """
    if not g.is_block_diagonal(tol):
        return None
    flags = {"F1v": 0, "F2v": 0, "F1h": 0, "F2h": 0}
    for block, n, vert, horiz in ((g.matrix[2:, 2:], k, "F1v", "F1h"), (g.matrix[:2, :2], m, "F2v", "F2h")):
        phase = math.atan2(block[1, 0], block[0, 0])
        steps_f = phase / (math.pi / (n + 1))
        steps = int(round(steps_f))
        if abs(steps_f - steps) > 1e-6:
            return None
        odd = steps % 2 == 1
        reflection = np.linalg.det(block) < 0
        if reflection:
            flags[horiz if odd else vert] = 1
        elif odd:
            flags[vert] = 1
            flags[horiz] = 1
    parts = [label for label in ("F1v", "F2v", "F1h", "F2h") if flags[label]]
    return "·".join(parts) if parts else "1"


@dataclass(frozen=True)
class QuotientTable:
    group: str
    normal: str
    representatives: Tuple[Isometry, ...]
    labels: Tuple[str, ...]
    table: np.ndarray

    @property
    def order(self) -> int:
        return len(self.representatives)

    @property
    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    def element_order(self, i: int) -> int:
        current, n = i, 1
        while current != 0:
            current = int(self.table[current, i])
            n += 1
        return n

    @property
    def exponent(self) -> int:
        return math.lcm(*(self.element_order(i) for i in range(self.order)))

    def is_elementary_abelian_2(self) -> bool:
        return self.is_abelian and all(self.element_order(i) <= 2 for i in range(self.order))

    def label_set(self) -> frozenset:
        return frozenset(self.labels)


def quotient_group(G: SymmetryGroup, N: SymmetryGroup) -> QuotientTable:
    if not is_normal(N, G):
        raise PreconditionError(f"{N.name} is not normal in {G.name}")
    coset_of: Dict[bytes, int] = {}
    reps: List[Isometry] = []
    for g in G.elements:
        if g.key(G.quantum) in coset_of:
            continue
        c = len(reps)
        reps.append(g)
        for n in N.elements:
            coset_of[(g @ n).key(G.quantum)] = c
    size = len(reps)
    table = np.zeros((size, size), dtype=np.int64)
    for a, ga in enumerate(reps):
        for b, gb in enumerate(reps):
            table[a, b] = coset_of[(ga @ gb).key(G.quantum)]
    labels = []
    for i, g in enumerate(reps):
        label = flip_label(g, G.m, G.k)
        labels.append(label if label is not None else (g.name or f"c{i}"))
    return QuotientTable(G.name, N.name, tuple(reps), tuple(labels), table)


def element_order(g: Isometry, limit: int, quantum: float = settings.GROUP_QUANTUM) -> int:
    ident = identity().key(quantum)
    current = g
    for n in range(1, limit + 1):
        if current.key(quantum) == ident:
            return n
        current = current @ g
    raise GroupClosureError("element order exceeds limit", {"limit": limit, "element": g.name})


def max_element_order(G: SymmetryGroup) -> int:
    return max(element_order(g, G.order, G.quantum) for g in G.elements)


# ==============================================================
# LATTICE
# ==============================================================

# (subgroup, supergroup, index) for the inclusions of the symmetry lattice
LATTICE_EDGES: Tuple[Tuple[GroupName, GroupName, int], ...] = (
    (GroupName.R, GroupName.G, 2),
    (GroupName.R, GroupName.G_STAR, 2),
    (GroupName.R, GroupName.G_TILDE, 4),
    (GroupName.R, GroupName.R_P, 2),
    (GroupName.R, GroupName.R_Q, 2),
    (GroupName.R_P, GroupName.R_HAT, 2),
    (GroupName.R_Q, GroupName.R_HAT, 2),
    (GroupName.G, GroupName.G_P, 2),
    (GroupName.G, GroupName.G_Q, 2),
    (GroupName.G, GroupName.G_TILDE, 2),
    (GroupName.G_STAR, GroupName.G_TILDE, 2),
    (GroupName.G_STAR, GroupName.G_CHECK, 2),
    (GroupName.G_TILDE, GroupName.G_HAT, 2),
    (GroupName.G_P, GroupName.G_HAT, 2),
    (GroupName.G_Q, GroupName.G_HAT, 2),
    (GroupName.G_CHECK, GroupName.G_HAT, 2),
)


@dataclass(frozen=True)
class LatticeEdgeReport:
    subgroup: str
    supergroup: str
    expected_index: int
    index: Optional[int]
    normal: bool

    @property
    def ok(self) -> bool:
        return self.index == self.expected_index and self.normal


def catalog(m: int, k: int, names: Optional[Iterable[GroupName | str]] = None) -> Dict[str, SymmetryGroup]:
    wanted = [GroupName(n) for n in names] if names is not None else [
        n for n in GroupName if n is not GroupName.CUSTOM and (n is not GroupName.G_BAR or m == k)
    ]
    return {n.value: build_named_group(n, m, k) for n in wanted}


def verify_lattice(m: int, k: int, groups: Optional[Dict[str, SymmetryGroup]] = None) -> List[LatticeEdgeReport]:
    groups = groups if groups is not None else catalog(m, k)
    reports = []
    for sub, sup, expected in LATTICE_EDGES:
        H, G = groups[sub.value], groups[sup.value]
        if is_subgroup(H, G):
            reports.append(LatticeEdgeReport(sub.value, sup.value, expected, G.order // H.order, is_normal(H, G)))
        else:
            reports.append(LatticeEdgeReport(sub.value, sup.value, expected, None, False))
    return reports
