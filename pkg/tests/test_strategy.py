import itertools

import numpy as np
import pytest

from offload_commons.errors import DomainError, InfeasibleStrategyError
from offload_commons.market import ClassId, NetworkKind, StrategyProfile
from offload_commons.market import network_profit
from offload_commons.scenario import build, random_scenario
from offload_commons.strategy import NoFeasibleStrategyError, apply_strategy, best_response, dominance_check

B, V = ClassId.BULK, ClassId.PREMIUM


def SP(pid, b, v, r=0.0):
    return StrategyProfile(pid, b, v, r)


def test_apply_strategy_examples():
    sc = build(wifi_subs=(30.0, 0.0), combined_subs=(40.0, 0.0), cl=100.0)
    assert apply_strategy(sc, (SP("i", 0, 0), SP("j", 0, 0))).q_unlicensed == 1.0
    assert apply_strategy(sc, (SP("i", 1, 0), SP("j", 1, 0))).q_unlicensed == pytest.approx(0.3)
    full = build(wifi_subs=(60.0, 0.0), combined_subs=(40.0, 0.0), cl=100.0)
    assert apply_strategy(full, (SP("i", 1, 0), SP("j", 1, 0))).q_unlicensed == 0.0


@pytest.mark.parametrize("kw,prof,constraint", [
    (dict(wifi_subs=(70.0, 0.0), combined_subs=(40.0, 0.0)), (1, 1), "shared"),
    (dict(wifi_subs=(30.0, 0.0), combined_subs=(40.0, 0.0), cb_i=20.0), (1, 0), "backhaul:i"),
    (dict(wifi_subs=(30.0, 0.0), combined_subs=(40.0, 0.0), cb_j=10.0), (0, 1), "backhaul:j"),
])
def test_apply_strategy_names_violated_constraint(kw, prof, constraint):
    sc = build(cl=100.0, **kw)
    with pytest.raises(InfeasibleStrategyError) as exc:
        apply_strategy(sc, (SP("i", prof[0], 0), SP("j", prof[1], 0)))
    assert exc.value.constraint == constraint


def test_resale_fills_licensed_capacity_and_overflow_is_rejected():
    sc = build(wifi_subs=(0.0, 0.0), combined_subs=(40.0, 20.0), latent=100.0, cl=80.0)
    st = apply_strategy(sc, (SP("i", 0, 0), SP("j", 1, 0, 1)))
    assert st.licensed_load("j") == pytest.approx(80.0)
    assert st.pools[V].total == pytest.approx(120.0)


def test_wifi_provider_cannot_resell():
    sc = build()
    with pytest.raises(DomainError):
        apply_strategy(sc, (SP("i", 0, 0, 0.5), SP("j", 0, 0)))


def test_pools_conserve_totals():
    rng = np.random.default_rng(3)
    for _ in range(20):
        sc = random_scenario(rng, "any")
        g = np.linspace(0, 1, 3)
        for b, v in itertools.product(g, g):
            try:
                st = apply_strategy(sc, (SP("i", b, v), SP("j", v, b, b)))
            except InfeasibleStrategyError:
                continue
            for pool in st.pools.values():
                assert abs(sum(pool.allocation.values()) - pool.total) <= 1e-9


def _brute_best(sc, provider, opponent, steps):
    """Independent enumeration over the object model."""
    g = [k / steps for k in range(steps + 1)]
    best = None
    shape = itertools.product(g, g) if provider == "i" else itertools.product(g, g, g)
    for fr in shape:
        mine = SP(provider, *fr)
        prof = (mine, opponent) if provider == "i" else (opponent, mine)
        try:
            st = apply_strategy(sc, prof)
        except InfeasibleStrategyError:
            continue
        if best is None or st.profits[provider] > best:
            best = st.profits[provider]
    return best


@pytest.mark.parametrize("seed", range(12))
def test_best_response_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, ["scarcity", "abundance", "any"][seed % 3])
    steps = 2 + seed % 3
    opp_j = SP("j", *rng.choice(np.arange(steps + 1) / steps, 3))
    opp_i = SP("i", *rng.choice(np.arange(steps + 1) / steps, 2))
    for provider, opp in (("i", opp_j), ("j", opp_i)):
        try:
            br = best_response(sc, provider, opp, steps)
        except NoFeasibleStrategyError:
            assert _brute_best(sc, provider, opp, steps) is None
            continue
        prof = (br, opp) if provider == "i" else (opp, br)
        got = apply_strategy(sc, prof).profits[provider]
        assert got == _brute_best(sc, provider, opp, steps)


def test_best_response_places_everything_without_opponent():
    sc = build(wifi_subs=(30.0, 10.0), combined_subs=(20.0, 5.0), cu=1000.0)
    assert best_response(sc, "i", SP("j", 0, 0), 4).key() == (1.0, 1.0, 0.0)


def test_best_response_two_point_grid_favours_offload():
    sc = build(wifi_subs=(30.0, 0.0), combined_subs=(20.0, 0.0), cu=1000.0)
    assert best_response(sc, "j", SP("i", 1, 0), 2).bulk == 1.0


def test_best_response_zero_prices_prefers_no_premium_offload():
    sc = build(wifi_prices=(0.0, 0.0), licensed_prices=(0.0, 0.0), backhaul_cost=(0.0, 0.0),
               licensed_cost=0.0, wifi_subs=(30.0, 10.0), combined_subs=(20.0, 10.0))
    assert best_response(sc, "i", SP("j", 0, 0), 4).premium == 0.0
    assert best_response(sc, "j", SP("i", 0, 0), 4).premium == 0.0


def test_best_response_rejects_coarse_grid_and_unknown_provider():
    sc = build()
    with pytest.raises(DomainError):
        best_response(sc, "i", SP("j", 0, 0), 1)
    with pytest.raises(DomainError):
        best_response(sc, "k", SP("j", 0, 0), 2)


def test_best_response_respects_opponent_load():
    sc = build(wifi_subs=(30.0, 0.0), combined_subs=(80.0, 0.0), cl=100.0)
    assert best_response(sc, "i", SP("j", 1, 0), 2).bulk <= 0.5


def test_best_response_infeasible_everywhere():
    # the opponent alone overfills the band, so nothing i does is feasible
    sc = build(wifi_subs=(30.0, 0.0), combined_subs=(120.0, 0.0), cl=150.0)
    with pytest.raises(NoFeasibleStrategyError):
        best_response(sc, "i", SP("j", 1, 0), 2)


@pytest.mark.parametrize("seed", range(5))
def test_negative_externality(seed):
    sc = random_scenario(np.random.default_rng(seed), "scarcity")
    for sj in (SP("j", 0.25, 0.0), SP("j", 0.5, 0.5, 1.0)):
        prev_q, prev_un = None, None
        for b in np.linspace(0, 1, 9):
            try:
                st = apply_strategy(sc, (SP("i", b, 0.0), sj))
            except InfeasibleStrategyError:
                break
            un = network_profit(sc.combined, st, NetworkKind.UNLICENSED_AIR)
            if prev_q is not None:
                assert st.q_unlicensed <= prev_q
                assert un <= prev_un + 1e-12
            prev_q, prev_un = st.q_unlicensed, un


def test_dominance_condition_i_orientation():
    # licensed 0.9 against an almost idle band at 0.95
    sc = build(wifi_subs=(5.0, 0.0), combined_subs=(10.0, 0.0), cl=100.0)
    rep = dominance_check(sc, "j", (SP("i", 1, 0), SP("j", 0, 0)))
    assert rep.diagnostics["q_licensed"] == pytest.approx(0.9)
    assert rep.diagnostics["q_unlicensed"] == pytest.approx(0.95)
    assert rep.condition_i is True
    assert rep.condition_i == (rep.diagnostics["q_licensed"] - rep.diagnostics["q_unlicensed"] < 0)


def test_dominance_condition_ii_false_without_any_gain():
    sc = build(wifi_subs=(10.0, 0.0), combined_subs=(40.0, 10.0), cl=200.0,
               licensed_prices=(2.0, 5.0), combined_unlicensed_prices=(2.0, 5.0),
               licensed_cost=0.1, backhaul_cost=(0.1, 0.1), latent=0.0)
    rep = dominance_check(sc, "j", (SP("i", 1, 0), SP("j", 0, 0)))
    assert rep.condition_ii is False
    assert rep.condition_iii is True
    assert rep.any == (rep.condition_i or rep.condition_ii or rep.condition_iii)


def test_dominance_resale_makes_condition_ii_hold():
    sc = build(wifi_subs=(10.0, 0.0), combined_subs=(40.0, 10.0), latent=30.0, cl=200.0)
    rep = dominance_check(sc, "j", (SP("i", 1, 0), SP("j", 0, 0)))
    assert rep.condition_ii is True
    assert rep.diagnostics["licensed_yield"] > 0
    assert rep.diagnostics["resale_revenue"] > 0


def test_dominance_premium_step_is_not_bulk_only():
    sc = build(wifi_subs=(10.0, 0.0), combined_subs=(40.0, 10.0), cl=100.0)
    rep = dominance_check(sc, "j", (SP("i", 1, 0), SP("j", 1, 0)))
    assert rep.diagnostics["moved_class"] == "premium"
    assert rep.condition_iii is False


def test_dominance_requires_licensed_provider():
    with pytest.raises(DomainError):
        dominance_check(build(), "i", (SP("i", 0, 0), SP("j", 0, 0)))


@pytest.mark.parametrize("seed", range(15))
def test_bulk_step_never_hurts_in_scarcity_free_markets(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, "abundance")
    steps = 4
    for _ in range(10):
        si = SP("i", *rng.choice(np.arange(steps + 1) / steps, 2))
        b, v, r = rng.choice(np.arange(steps) / steps, 3)
        sj, nxt = SP("j", b, v, r), SP("j", b + 1 / steps, v, r)
        try:
            before = apply_strategy(sc, (si, sj))
            after = apply_strategy(sc, (si, nxt))
        except InfeasibleStrategyError:
            continue
        if before.q_unlicensed > before.q_licensed:
            assert after.profits["j"] >= before.profits["j"] - 1e-9
