import numpy as np
import pytest

import switchflock as sf


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_hk_spec(kernel, schedule, N, d):
    return sf.ModelSpec("HK", kernel, schedule, N, d)


def make_cs_spec(kernel, schedule, N, d):
    return sf.ModelSpec("CS", kernel, schedule, N, d)


def suite_run_config(i: int) -> dict:
    """Seeded random first-order runs shared by several certificate tests:
    N in 3..12, d in 1..3, rational kernel, geometric repulsion lengths."""
    gen = np.random.default_rng(1000 + i)
    return {
        "model": "HK",
        "N": int(gen.integers(3, 13)),
        "d": int(gen.integers(1, 4)),
        "kernel": {"family": "rational", "beta": 1.0, "sup_norm_K": 1.0},
        "schedule": {"family": "geometric", "good_len": 1.0, "bad0": 0.1,
                     "ratio": 0.5},
        "horizon": 8.0,
        "h_max": 1e-3,
        "record_stride": 1,
        "seed": 1000 + i,
        "init": {"positions_box": [-1.0, 1.0]},
    }
