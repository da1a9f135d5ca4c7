"""Mesh a block design into a 2D mass-spring robot.

Each unit cell contributes four corner particles (shared corners are
deduplicated), four axis-aligned edge springs, and two diagonal springs.
Every unique edge spring is an actuator; diagonals are passive shear
bracing. Cell mass is split equally over the four corners, so shared
corners accumulate mass from every adjacent cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design_lang import GridDesign, IllegalDesignError, validate

BLOCK_EDGE = 1.0


@dataclass(frozen=True)
class MaterialParams:
    """Structural constants shared by every robot."""

    cell_mass: float = 1.0
    edge_stiffness: float = 3.0e4
    diagonal_stiffness: float = 3.0e4
    spring_damping: float = 30.0

    def __post_init__(self) -> None:
        if self.cell_mass <= 0:
            raise ValueError("cell_mass must be positive")
        if self.edge_stiffness < 0 or self.diagonal_stiffness < 0:
            raise ValueError("stiffness must be non-negative")
        if self.spring_damping < 0:
            raise ValueError("spring_damping must be non-negative")


@dataclass(frozen=True)
class RobotMesh:
    """Array-of-struct mass-spring robot in rest pose.

    `actuator[s]` is the actuator index driving spring `s`, or -1 for a
    passive spring. Actuator indices are dense in `[0, n_actuators)`.
    """

    positions: np.ndarray  # (n, 2) float64 rest coordinates
    masses: np.ndarray  # (n,) float64
    spring_i: np.ndarray  # (m,) int64
    spring_j: np.ndarray  # (m,) int64
    rest_length: np.ndarray  # (m,) float64
    stiffness: np.ndarray  # (m,) float64
    damping: np.ndarray  # (m,) float64
    actuator: np.ndarray  # (m,) int64, -1 when passive
    n_actuators: int

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def n_springs(self) -> int:
        return self.spring_i.shape[0]

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def to_json_dict(self) -> dict:
        return {
            "particles": [
                {"position": [float(x), float(y)], "mass": float(m)}
                for (x, y), m in zip(self.positions, self.masses)
            ],
            "springs": [
                {
                    "i": int(i),
                    "j": int(j),
                    "rest_length": float(l0),
                    "stiffness": float(k),
                    "damping": float(c),
                    "actuator": None if a < 0 else int(a),
                }
                for i, j, l0, k, c, a in zip(
                    self.spring_i,
                    self.spring_j,
                    self.rest_length,
                    self.stiffness,
                    self.damping,
                    self.actuator,
                )
            ],
            "n_actuators": self.n_actuators,
        }


def build_mesh(design: GridDesign, params: MaterialParams | None = None) -> RobotMesh:
    """Mesh a valid design. Raises `IllegalDesignError` otherwise.

    Deterministic layout: cells are processed in sorted order; particles
    are numbered first-seen (per cell: bottom-left, bottom-right, top-left,
    top-right); edge springs and their actuator indices likewise first-seen
    (per cell: bottom, right, top, left), followed by the two diagonals of
    each cell.
    """
    params = params or MaterialParams()
    verdict = validate(design)
    if not verdict.legal:
        raise IllegalDesignError(f"cannot mesh illegal design: {verdict.reasons}")

    corner_index: dict[tuple[int, int], int] = {}
    masses: list[float] = []

    def corner(pt: tuple[int, int]) -> int:
        idx = corner_index.get(pt)
        if idx is None:
            idx = len(corner_index)
            corner_index[pt] = idx
            masses.append(0.0)
        return idx

    quarter = params.cell_mass / 4.0
    cells = sorted(design.cells)

    edge_index: dict[tuple[int, int], int] = {}
    springs: list[tuple[int, int, float, float, float, int]] = []
    diagonals: list[tuple[int, int]] = []

    for cx, cy in cells:
        bl = corner((cx, cy))
        br = corner((cx + 1, cy))
        tl = corner((cx, cy + 1))
        tr = corner((cx + 1, cy + 1))
        for p in (bl, br, tl, tr):
            masses[p] += quarter
        for a, b in ((bl, br), (br, tr), (tl, tr), (bl, tl)):
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                edge_index[key] = len(edge_index)
                springs.append(
                    (
                        key[0],
                        key[1],
                        BLOCK_EDGE,
                        params.edge_stiffness,
                        params.spring_damping,
                        edge_index[key],
                    )
                )
        diagonals.append((bl, tr))
        diagonals.append((br, tl))

    n_actuators = len(edge_index)
    diag_rest = BLOCK_EDGE * math.sqrt(2.0)
    for a, b in diagonals:
        springs.append(
            (a, b, diag_rest, params.diagonal_stiffness, params.spring_damping, -1)
        )

    positions = np.array(
        [[float(x) * BLOCK_EDGE, float(y) * BLOCK_EDGE] for x, y in corner_index],
        dtype=np.float64,
    )
    arr = np.array(springs, dtype=np.float64)
    return RobotMesh(
        positions=positions,
        masses=np.array(masses, dtype=np.float64),
        spring_i=arr[:, 0].astype(np.int64),
        spring_j=arr[:, 1].astype(np.int64),
        rest_length=arr[:, 2].copy(),
        stiffness=arr[:, 3].copy(),
        damping=arr[:, 4].copy(),
        actuator=arr[:, 5].astype(np.int64),
        n_actuators=n_actuators,
    )


def center_of_mass(mesh: RobotMesh, positions: np.ndarray | None = None) -> np.ndarray:
    """Mass-weighted mean position; defaults to the rest pose."""
    pos = mesh.positions if positions is None else positions
    return (mesh.masses[:, None] * pos).sum(axis=0) / mesh.masses.sum()
