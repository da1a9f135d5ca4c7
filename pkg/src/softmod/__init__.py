"""Toolkit for 2D soft modular robots built from unit blocks.

The package covers the full loop: textual assembly scripts for block
layouts, meshing into mass-spring robots, differentiable simulation of
locomotion, gradient-based controller optimization, training-data
synthesis, and batch evaluation of externally generated designs.

Submodules are imported explicitly (`softmod.design_lang`, ...) so that
light uses of the design language do not pay the simulator's JIT import
cost.
"""

from __future__ import annotations

__version__ = "0.1.0"
