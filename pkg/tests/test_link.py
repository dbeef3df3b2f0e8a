import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualbrain.link import LinkConfig, LinkState, next_window_start, try_send


def link(**kw):
    return LinkState(LinkConfig(**kw), np.random.default_rng(0))


def test_outside_window_not_delivered():
    assert not try_send(link(), b"x", 150.0)


def test_inside_window_delivered_after_latency():
    lk = link()
    assert try_send(lk, b"plan", 0.0)
    assert lk.receive(0.5) == []
    (msg,) = lk.receive(1.0)
    assert msg.payload == b"plan" and msg.arrives_at == 1.0


def test_budget_exhaustion():
    lk = link(byte_budget_per_window=100)
    assert try_send(lk, b"a" * 60, 1.0)
    assert not try_send(lk, b"b" * 60, 2.0)
    assert lk.remaining(2.0) == 40
    # the next window has a fresh budget
    assert try_send(lk, b"b" * 60, 301.0)


def test_drops_are_seeded():
    results = []
    for _ in range(2):
        lk = link(drop_probability=0.5)
        results.append([try_send(lk, b"x", float(i) / 10) for i in range(50)])
    assert results[0] == results[1]
    assert 0 < sum(results[0]) < 50


def test_infinite_period_has_one_window():
    cfg = LinkConfig(surfacing_period=math.inf)
    assert cfg.window_index(5.0) == 0
    assert cfg.window_index(25.0) is None
    assert next_window_start(cfg, 25.0) == math.inf
    assert next_window_start(LinkConfig(), 25.0) == 300.0
    assert next_window_start(LinkConfig(), 5.0) == 5.0


def test_config_validation():
    with pytest.raises(ValueError):
        LinkConfig(surfacing_period=10, window_length=20)
    with pytest.raises(ValueError):
        LinkConfig(drop_probability=1.5)


@given(st.lists(st.tuples(st.integers(1, 900), st.floats(0, 1000)), max_size=40))
def test_budget_conservation(sends):
    lk = link(byte_budget_per_window=2048, drop_probability=0.2)
    delivered = {}
    for size, t in sorted(sends, key=lambda s: s[1]):
        if try_send(lk, b"x" * size, t):
            k = lk.config.window_index(t)
            delivered[k] = delivered.get(k, 0) + size
    assert all(v <= 2048 for v in delivered.values())
