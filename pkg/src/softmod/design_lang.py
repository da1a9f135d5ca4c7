"""Assembly-script language for block-grid robot designs.

A design is a set of occupied unit cells on an integer grid. Its textual
form is a line-oriented script:

    robot with 3 blocks:
    block b0 at origin.
    attach block b1 to the right of block b0.
    attach block b2 to the top of block b1.

Parsing tolerates case, surplus whitespace, and trailing punctuation.
Serialization is canonical: breadth-first from the lexicographically
smallest cell, neighbors visited in right/top/left/bottom order, ids
renumbered in visit order. `bfs_augment` enumerates alternative valid
linearizations of the same geometry by randomizing BFS tie-breaks.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

Cell = tuple[int, int]

# Neighbor offsets in canonical visit order. Keys double as script words.
DIRECTIONS: dict[str, Cell] = {
    "right": (1, 0),
    "top": (0, 1),
    "left": (-1, 0),
    "bottom": (0, -1),
}


class DesignError(Exception):
    """Base class for design-language failures."""


class DesignSyntaxError(DesignError):
    """A line does not match the grammar, or ids are malformed."""


class UnknownBlockError(DesignError):
    """An attach statement references a block id not yet placed."""


class OverlapError(DesignError):
    """A statement targets a cell that is already occupied."""


class CountMismatchError(DesignError):
    """Declared block count differs from the number of placements."""


class EmptyDesignError(DesignError):
    """Operation requires at least one block."""


class IllegalDesignError(DesignError):
    """Design fails validation (disconnected, overlapping ids, ...)."""


class InfeasibleRangeError(DesignError):
    """Requested block-count range cannot fit the grid."""


@dataclass(frozen=True)
class Place:
    """Root placement: `block b<id> at origin.`"""

    block: int


@dataclass(frozen=True)
class Attach:
    """`attach block b<id> to the <direction> of block b<anchor>.`"""

    block: int
    direction: str
    anchor: int


Statement = Place | Attach


@dataclass(frozen=True)
class DesignScript:
    """Parsed script: declared count plus ordered statements."""

    block_count: int
    statements: tuple[Statement, ...]


@dataclass(frozen=True)
class GridDesign:
    """Geometric ground truth: occupied cells plus block-id labels.

    `ids` maps each block id to its cell; stored as a sorted tuple so the
    value is hashable. Geometric identity is the cell set; id labels are
    bookkeeping carried along from whichever script produced the design.
    """

    cells: frozenset[Cell]
    ids: tuple[tuple[int, Cell], ...] = ()

    @property
    def block_count(self) -> int:
        return len(self.cells)

    def id_map(self) -> dict[int, Cell]:
        return dict(self.ids)


@dataclass(frozen=True)
class Verdict:
    """Validation outcome with machine-readable reason codes."""

    legal: bool
    reasons: tuple[str, ...] = ()


_HEADER_RE = re.compile(r"^robot with (\d+) blocks?$")
_PLACE_RE = re.compile(r"^block b(\d+) at origin$")
_ATTACH_RE = re.compile(
    r"^attach block b(\d+) to the (right|top|left|bottom) of block b(\d+)$"
)


def _normalize_line(line: str) -> str:
    line = " ".join(line.lower().split())
    return line.rstrip(" .,:;!")


def parse(text: str) -> DesignScript:
    """Parse script text into a `DesignScript`.

    Besides the grammar, enforces statement-level semantics: the first
    statement places the root, every anchor must already be placed, no
    cell may be claimed twice, ids may not repeat, and the declared block
    count must match the number of placements.
    """
    lines = [ln for ln in (_normalize_line(ln) for ln in text.splitlines()) if ln]
    if not lines:
        raise DesignSyntaxError("empty script")

    header = _HEADER_RE.match(lines[0])
    if header is None:
        raise DesignSyntaxError(f"expected header line, got: {lines[0]!r}")
    declared = int(header.group(1))

    statements: list[Statement] = []
    occupied: dict[int, Cell] = {}
    cells: set[Cell] = set()

    for lineno, line in enumerate(lines[1:], start=2):
        place = _PLACE_RE.match(line)
        attach = _ATTACH_RE.match(line)
        if place is not None:
            if statements:
                raise DesignSyntaxError(
                    f"line {lineno}: origin placement must be the first statement"
                )
            block = int(place.group(1))
            statements.append(Place(block))
            occupied[block] = (0, 0)
            cells.add((0, 0))
        elif attach is not None:
            block, direction, anchor = (
                int(attach.group(1)),
                attach.group(2),
                int(attach.group(3)),
            )
            if not statements:
                raise DesignSyntaxError(
                    f"line {lineno}: attach before any origin placement"
                )
            if anchor not in occupied:
                raise UnknownBlockError(
                    f"line {lineno}: anchor block b{anchor} is not placed"
                )
            if block in occupied:
                raise DesignSyntaxError(
                    f"line {lineno}: block b{block} is already placed"
                )
            ax, ay = occupied[anchor]
            dx, dy = DIRECTIONS[direction]
            cell = (ax + dx, ay + dy)
            if cell in cells:
                raise OverlapError(
                    f"line {lineno}: cell {cell} is already occupied"
                )
            statements.append(Attach(block, direction, anchor))
            occupied[block] = cell
            cells.add(cell)
        else:
            raise DesignSyntaxError(f"line {lineno}: unrecognized statement: {line!r}")

    if not statements:
        raise DesignSyntaxError("script has a header but no placements")
    if declared != len(statements):
        raise CountMismatchError(
            f"header declares {declared} blocks, script places {len(statements)}"
        )
    return DesignScript(declared, tuple(statements))


def execute(script: DesignScript) -> GridDesign:
    """Replay a script into a `GridDesign`, normalized so min col/row are 0."""
    occupied: dict[int, Cell] = {}
    cells: set[Cell] = set()
    for st in script.statements:
        if isinstance(st, Place):
            if occupied:
                raise DesignSyntaxError("origin placement must come first")
            cell = (0, 0)
        else:
            if st.anchor not in occupied:
                raise UnknownBlockError(f"anchor block b{st.anchor} is not placed")
            ax, ay = occupied[st.anchor]
            dx, dy = DIRECTIONS[st.direction]
            cell = (ax + dx, ay + dy)
        if st.block in occupied:
            raise DesignSyntaxError(f"block b{st.block} is already placed")
        if cell in cells:
            raise OverlapError(f"cell {cell} is already occupied")
        occupied[st.block] = cell
        cells.add(cell)
    if not cells:
        raise EmptyDesignError("script places no blocks")
    if script.block_count != len(cells):
        raise CountMismatchError(
            f"header declares {script.block_count} blocks, script places {len(cells)}"
        )
    return _normalized(cells, occupied)


def _normalized(cells: set[Cell], ids: dict[int, Cell]) -> GridDesign:
    min_x = min(c[0] for c in cells)
    min_y = min(c[1] for c in cells)
    shift = lambda c: (c[0] - min_x, c[1] - min_y)  # noqa: E731
    return GridDesign(
        cells=frozenset(shift(c) for c in cells),
        ids=tuple(sorted((b, shift(c)) for b, c in ids.items())),
    )


def _neighbors(cell: Cell) -> list[tuple[str, Cell]]:
    x, y = cell
    return [(d, (x + dx, y + dy)) for d, (dx, dy) in DIRECTIONS.items()]


def _bfs_script(
    cells: frozenset[Cell], root: Cell, rng: random.Random | None
) -> DesignScript:
    """Linearize `cells` by BFS from `root`.

    With `rng` None, neighbors are visited in fixed right/top/left/bottom
    order (the canonical form). With an rng, the direction order is
    shuffled independently at every dequeue, which reaches every valid
    BFS linearization for the chosen root.
    """
    order: dict[Cell, int] = {root: 0}
    queue: list[Cell] = [root]
    statements: list[Statement] = [Place(0)]
    head = 0
    while head < len(queue):
        cell = queue[head]
        head += 1
        neigh = _neighbors(cell)
        if rng is not None:
            rng.shuffle(neigh)
        for direction, nb in neigh:
            if nb in cells and nb not in order:
                order[nb] = len(order)
                queue.append(nb)
                statements.append(Attach(order[nb], direction, order[cell]))
    if len(order) != len(cells):
        raise IllegalDesignError("design is not 4-connected")
    return DesignScript(len(cells), tuple(statements))


def canonical_script(design: GridDesign) -> DesignScript:
    """Deterministic linearization: BFS from the smallest cell, fixed order."""
    if not design.cells:
        raise EmptyDesignError("cannot serialize an empty design")
    return _bfs_script(design.cells, min(design.cells), rng=None)


def to_text(script: DesignScript) -> str:
    """Render a script in the exact emission format (no trailing newline)."""
    lines = [f"robot with {script.block_count} blocks:"]
    for st in script.statements:
        if isinstance(st, Place):
            lines.append(f"block b{st.block} at origin.")
        else:
            lines.append(
                f"attach block b{st.block} to the {st.direction} of block b{st.anchor}."
            )
    return "\n".join(lines)


def serialize(design: GridDesign) -> str:
    """Canonical script text for a valid design."""
    return to_text(canonical_script(design))


def canonical_key(design: GridDesign) -> bytes:
    """Translation-invariant identity: normalized sorted cells, ASCII-encoded.

    Two designs get equal keys iff their cell sets coincide after shifting
    minima to the origin. Rotations and reflections are distinct.
    """
    if not design.cells:
        raise EmptyDesignError("empty design has no canonical key")
    min_x = min(c[0] for c in design.cells)
    min_y = min(c[1] for c in design.cells)
    cells = sorted((x - min_x, y - min_y) for x, y in design.cells)
    return ";".join(f"{x},{y}" for x, y in cells).encode("ascii")


def validate(design: GridDesign, max_grid: tuple[int, int] | None = None) -> Verdict:
    """Check legality; never raises.

    Reason codes: `empty`, `overlap` (id labels collide or point outside
    the cell set), `disconnected`, `out-of-bounds` (only when `max_grid`
    is given; checked on the normalized footprint).
    """
    reasons: list[str] = []
    if not design.cells:
        return Verdict(False, ("empty",))

    if design.ids:
        id_cells = [c for _, c in design.ids]
        if len(set(id_cells)) != len(id_cells) or not set(id_cells) <= design.cells:
            reasons.append("overlap")

    seen = {min(design.cells)}
    queue = [min(design.cells)]
    while queue:
        cell = queue.pop()
        for _, nb in _neighbors(cell):
            if nb in design.cells and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    if len(seen) != len(design.cells):
        reasons.append("disconnected")

    if max_grid is not None:
        width = max(c[0] for c in design.cells) - min(c[0] for c in design.cells) + 1
        height = max(c[1] for c in design.cells) - min(c[1] for c in design.cells) + 1
        if width > max_grid[0] or height > max_grid[1]:
            reasons.append("out-of-bounds")

    return Verdict(not reasons, tuple(reasons))


def bfs_augment(design: GridDesign, k: int, seed: int) -> list[DesignScript]:
    """Draw `k` valid linearizations of `design` (duplicates allowed).

    Each draw picks a uniform root cell, then runs BFS with the direction
    order reshuffled at every dequeue. Every returned script executes back
    to the same cell set.
    """
    if not design.cells:
        raise EmptyDesignError("cannot augment an empty design")
    if k < 0:
        raise ValueError("k must be non-negative")
    rng = random.Random(seed)
    cells_sorted = sorted(design.cells)
    scripts = []
    for _ in range(k):
        root = rng.choice(cells_sorted)
        scripts.append(_bfs_script(design.cells, root, rng))
    return scripts


def sample_design(
    grid: tuple[int, int], blocks: tuple[int, int], seed: int
) -> GridDesign:
    """Sample a connected design by random frontier growth.

    The block count is drawn uniformly from `blocks` (clipped above by the
    grid area), the first cell uniformly from the grid, and each later
    cell uniformly from the empty 4-neighbors of the occupied set. Ids are
    assigned in growth order; the result is normalized.
    """
    width, height = grid
    lo, hi = blocks
    if width < 1 or height < 1:
        raise InfeasibleRangeError(f"grid {grid} has no cells")
    if lo < 1 or hi < lo:
        raise InfeasibleRangeError(f"invalid block range {blocks}")
    area = width * height
    if lo > area:
        raise InfeasibleRangeError(f"block range {blocks} cannot fit grid {grid}")
    rng = random.Random(seed)
    n = rng.randint(lo, min(hi, area))

    start = (rng.randrange(width), rng.randrange(height))
    cells: set[Cell] = {start}
    ids: dict[int, Cell] = {0: start}
    while len(cells) < n:
        frontier = sorted(
            {
                nb
                for cell in cells
                for _, nb in _neighbors(cell)
                if 0 <= nb[0] < width and 0 <= nb[1] < height and nb not in cells
            }
        )
        cell = rng.choice(frontier)
        ids[len(cells)] = cell
        cells.add(cell)
    return _normalized(cells, ids)
