import os
import subprocess
import sys

import numpy as np
import pytest

from offload_commons import kernels as K
from offload_commons._jit import HAVE_NUMBA
from offload_commons.errors import InfeasibleStrategyError
from offload_commons.market import StrategyProfile
from offload_commons.scenario import random_scenario
from offload_commons.strategy import apply_strategy

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _tables(sc, steps, backend):
    return K.joint_payoffs(K.pack(sc), K.wifi_grid(steps), K.combined_grid(steps), backend)


@needs_numba
@pytest.mark.parametrize("seed", range(8))
def test_numba_and_numpy_backends_agree_bit_for_bit(seed):
    sc = random_scenario(np.random.default_rng(seed), "any")
    a = _tables(sc, 3, "numba")
    b = _tables(sc, 3, "numpy")
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("seed", range(6))
def test_kernel_matches_object_model_exactly(seed):
    sc = random_scenario(np.random.default_rng(100 + seed), "any")
    si, sj = K.wifi_grid(2), K.combined_grid(2)
    pi, pj, feas, qu, ul = K.joint_payoffs(K.pack(sc), si, sj, "numpy")
    for a in range(len(si)):
        for b in range(len(sj)):
            prof = (StrategyProfile("i", *si[a], 0.0), StrategyProfile("j", *sj[b]))
            try:
                st = apply_strategy(sc, prof)
            except InfeasibleStrategyError:
                assert not feas[a, b]
                continue
            assert feas[a, b]
            assert st.profits["i"] == pi[a, b]
            assert st.profits["j"] == pj[a, b]
            assert st.q_unlicensed == qu[a, b]


def test_grids():
    assert K.grid(4).tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert K.wifi_grid(2).shape == (9, 2)
    assert K.combined_grid(3).shape == (64, 3)


def test_nash_mask_on_prisoners_dilemma():
    # row player i, column player j; defect = index 1
    pi = np.array([[3.0, 0.0], [5.0, 1.0]])
    pj = np.array([[3.0, 5.0], [0.0, 1.0]])
    mask = K.nash_mask(pi, pj, np.ones((2, 2), bool))
    assert mask.tolist() == [[False, False], [False, True]]


def test_unknown_backend():
    with pytest.raises(ValueError):
        K.joint_payoffs(np.zeros(K.N_PARAMS), np.zeros((1, 2)), np.zeros((1, 3)), "fortran")


def test_env_flag_selects_numpy_backend():
    code = "from offload_commons._jit import default_backend; print(default_backend())"
    env = {**os.environ, "OFFLOAD_COMMONS_NO_JIT": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["OFFLOAD_COMMONS_NO_JIT"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if HAVE_NUMBA else "numpy")
