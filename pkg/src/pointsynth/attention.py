"""Segmented attention layout for an instruction/perception/action token stream.

The mask encodes which token may attend to which: instruction tokens split
into a bidirectional prefix and a causal remainder, perception tokens see the
whole instruction plus each other, and action tokens see perception and each
other but read the instruction only through perception (unless explicitly
allowed). Row i, column j true means token i may attend to token j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSchedule


@dataclass(frozen=True)
class SegmentLayout:
    len_int: int  # instruction tokens
    int_prefix: int  # leading instruction tokens that attend bidirectionally
    len_per: int  # perception tokens
    len_act: int  # action tokens
    allow_act_to_int: bool = False  # let action rows read instruction directly

    def __post_init__(self) -> None:
        if min(self.len_int, self.len_per, self.len_act) < 0:
            raise InvalidSchedule("segment lengths must be >= 0")
        if not 0 <= self.int_prefix <= self.len_int:
            raise InvalidSchedule("int_prefix must be within the instruction segment")

    @property
    def total(self) -> int:
        return self.len_int + self.len_per + self.len_act


@dataclass
class AttentionMask:
    layout: SegmentLayout
    matrix: np.ndarray  # (L, L) bool


def build_attention_mask(layout: SegmentLayout) -> AttentionMask:
    """Materialize the segment rules as a boolean matrix."""
    n_i, n_p, n_a = layout.len_int, layout.len_per, layout.len_act
    total = layout.total
    m = np.zeros((total, total), dtype=bool)

    for r in range(n_i):
        if r < layout.int_prefix:
            m[r, : layout.int_prefix] = True
        else:
            m[r, : r + 1] = True

    p0 = n_i
    for r in range(p0, p0 + n_p):
        m[r, :n_i] = True
        m[r, p0 : p0 + n_p] = True

    a0 = n_i + n_p
    for r in range(a0, a0 + n_a):
        if layout.allow_act_to_int:
            m[r, :n_i] = True
        m[r, p0 : p0 + n_p] = True
        m[r, a0 : a0 + n_a] = True

    return AttentionMask(layout=layout, matrix=m)


def format_mask(mask: AttentionMask) -> str:
    """Render the matrix as 0/1 rows, one row per line."""
    return "\n".join("".join("1" if x else "0" for x in row) for row in mask.matrix)


def inference_cost(n_perception: int, n_action: int) -> tuple[int, int, int]:
    """Relative decode cost (instruction, perception, action) per episode.

    The instruction prefix is encoded once; each of the T perception updates
    re-encodes the perception block; every update decodes N action tokens,
    giving (1, T, T * N).
    """
    if n_perception < 1 or n_action < 1:
        raise InvalidSchedule("perception and action counts must be >= 1")
    return (1, n_perception, n_perception * n_action)
