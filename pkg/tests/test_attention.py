"""Segmented attention masks and the per-episode decode cost model.

Segment rules, with row = attender and column = attended:

    instruction prefix  <-> instruction prefix (bidirectional)
    instruction rest    ->  everything at or before itself (causal)
    perception          ->  all instruction + all perception
    action              ->  all perception + all action
                            (+ all instruction only when explicitly allowed)
"""

from __future__ import annotations

import numpy as np
import pytest

from pointsynth.attention import (
    SegmentLayout,
    build_attention_mask,
    format_mask,
    inference_cost,
)
from pointsynth.errors import InvalidSchedule


def _mask(*args, **kw) -> np.ndarray:
    return build_attention_mask(SegmentLayout(*args, **kw)).matrix


# ── frozen small layouts ─────────────────────────────────────────────────


class TestFrozenLayouts:
    def test_2_2_2_2_rows(self):
        """Worked by hand. Tokens 0-1 instruction (prefix 2), 2-3 perception,
        4-5 action. Prefix rows see the prefix; perception sees instruction +
        itself; action sees perception + action only."""
        expected = [
            "110000",
            "110000",
            "111100",
            "111100",
            "001111",
            "001111",
        ]
        text = format_mask(build_attention_mask(SegmentLayout(2, 2, 2, 2)))
        assert text.split("\n") == expected

    def test_causal_instruction_tail(self):
        """Layout (4, 2, 0, 0): two bidirectional rows, then strict causal."""
        expected = [
            "1100",
            "1100",
            "1110",
            "1111",
        ]
        text = format_mask(build_attention_mask(SegmentLayout(4, 2, 0, 0)))
        assert text.split("\n") == expected

    def test_act_to_int_toggle(self):
        m = _mask(2, 2, 1, 1, allow_act_to_int=True)
        np.testing.assert_array_equal(m[3], [1, 1, 1, 1])  # action row reads everything
        m = _mask(2, 2, 1, 1)
        np.testing.assert_array_equal(m[3], [0, 0, 1, 1])  # instruction blocked

    def test_zero_length_segments(self):
        assert _mask(0, 0, 0, 0).shape == (0, 0)
        assert _mask(0, 0, 3, 0).shape == (3, 3)
        assert _mask(0, 0, 3, 0).all()  # perception block is fully bidirectional


# ── structural properties ────────────────────────────────────────────────


class TestMaskProperties:
    def test_instruction_never_attends_downstream(self):
        rng = np.random.default_rng(40)
        for _ in range(100):
            n_i = int(rng.integers(0, 8))
            prefix = int(rng.integers(0, n_i + 1))
            n_p = int(rng.integers(0, 8))
            n_a = int(rng.integers(0, 8))
            allow = bool(rng.integers(0, 2))
            m = _mask(n_i, prefix, n_p, n_a, allow_act_to_int=allow)
            assert not m[:n_i, n_i:].any()  # instruction rows stop at the boundary
            # perception rows: instruction + perception only, never action
            assert not m[n_i : n_i + n_p, n_i + n_p :].any()
            assert m[n_i : n_i + n_p, : n_i + n_p].all() if n_p else True
            # action rows see all perception and all action
            if n_a:
                assert m[n_i + n_p :, n_i : n_i + n_p].all() if n_p else True
                assert m[n_i + n_p :, n_i + n_p :].all()
                assert m[n_i + n_p :, :n_i].all() == allow if n_i else True

    def test_every_token_attends_to_itself(self):
        m = _mask(5, 3, 4, 2)
        assert np.diag(m).all()

    def test_prefix_bidirectional_tail_causal(self):
        m = _mask(6, 3, 0, 0)
        assert m[:3, :3].all()
        for r in range(3, 6):
            np.testing.assert_array_equal(m[r, : r + 1], True)
            np.testing.assert_array_equal(m[r, r + 1 :], False)

    def test_layout_validation(self):
        with pytest.raises(InvalidSchedule):
            SegmentLayout(-1, 0, 1, 1)
        with pytest.raises(InvalidSchedule):
            SegmentLayout(2, 3, 1, 1)  # prefix longer than the segment
        assert SegmentLayout(2, 2, 3, 4).total == 9


# ── decode cost ──────────────────────────────────────────────────────────


class TestInferenceCost:
    def test_frozen_episode(self):
        """10 perception updates, 5 action tokens each: the instruction is
        encoded once, perception 10 times, actions 10 * 5 = 50 times."""
        assert inference_cost(10, 5) == (1, 10, 50)

    def test_single_step(self):
        assert inference_cost(1, 1) == (1, 1, 1)

    def test_action_cost_scales_with_both(self):
        for t in (1, 3, 7):
            for n in (1, 4, 9):
                assert inference_cost(t, n) == (1, t, t * n)

    def test_invalid_counts(self):
        with pytest.raises(InvalidSchedule):
            inference_cost(0, 5)
        with pytest.raises(InvalidSchedule):
            inference_cost(3, 0)
