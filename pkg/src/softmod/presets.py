"""Named block layouts used for calibration and efficacy checks."""

from __future__ import annotations

from .design_lang import GridDesign


def _design(cells: set[tuple[int, int]]) -> GridDesign:
    return GridDesign(frozenset(cells), tuple(enumerate(sorted(cells))))


# 4-module linear chain.
CHAIN_4 = _design({(x, 0) for x in range(4)})

# 5 modules: a 3-block body with a leg under each end.
TWO_LEG_5 = _design({(0, 1), (1, 1), (2, 1), (0, 0), (2, 0)})

# 7 modules: a 5-block body with a leg under each end.
TWO_LEG_7 = _design({(x, 1) for x in range(5)} | {(0, 0), (4, 0)})

# 8 modules: a 5-block body with legs under both ends and the middle.
THREE_LEG_8 = _design({(x, 1) for x in range(5)} | {(0, 0), (2, 0), (4, 0)})

# 5 modules in an L: one floor block beside a 4-block tower.
L_SHAPE_5 = _design({(0, 0), (1, 0), (0, 1), (0, 2), (0, 3)})

PRESETS: dict[str, GridDesign] = {
    "chain4": CHAIN_4,
    "twoleg5": TWO_LEG_5,
    "twoleg7": TWO_LEG_7,
    "threeleg8": THREE_LEG_8,
    "lshape5": L_SHAPE_5,
}
