"""Vectorized payoff kernels for the two-provider offload game.

A scenario is flattened into a float64 parameter vector (``pack``). The
payoff of every (Wi-Fi provider strategy, combined operator strategy) pair
is then computed either by a numba double loop or by numpy broadcasting.
Both paths run the same expression, ``_evaluate``, so they agree exactly.

The operation order inside ``_evaluate`` mirrors ``strategy.apply_strategy``
and ``market.provider_profit``; keep the three in step.
"""

from __future__ import annotations

import numpy as np

from ._jit import HAVE_NUMBA, default_backend, njit

TOL = 1e-9

(CU, CL, CB_I, CB_J, EU_I, EU_J, EL,
 QB, QV,
 PU_I_B, PU_I_V, PU_J_B, PU_J_V, PL_B, PL_V,
 BI_B, BI_V, BJ_B, BJ_V, LAT, VIS_I, VIS_J) = range(22)
N_PARAMS = 22


def pack(scenario, subscribers=None, latent=None, visitors=None) -> np.ndarray:
    """Flatten a scenario (plus optional market overrides) into the kernel vector."""
    from .market import ClassId, NetworkKind

    i, j = scenario.wifi, scenario.combined
    subs = subscribers if subscribers is not None else scenario.subscribers
    vis = visitors or {}
    u, l_ = NetworkKind.UNLICENSED_AIR, NetworkKind.LICENSED_AIR
    b, v = ClassId.BULK, ClassId.PREMIUM
    p = np.empty(N_PARAMS)
    p[CU] = scenario.shared.capacity
    p[CL] = j.licensed.capacity
    p[CB_I] = i.backhaul_capacity
    p[CB_J] = j.backhaul_capacity
    p[EU_I] = i.unlicensed_cost(scenario.shared)
    p[EU_J] = j.unlicensed_cost(scenario.shared)
    p[EL] = j.licensed.cost_per_unit
    p[QB] = scenario.classes[b].min_quality
    p[QV] = scenario.classes[v].min_quality
    p[PU_I_B] = i.price(u, b)
    p[PU_I_V] = i.price(u, v)
    p[PU_J_B] = j.price(u, b)
    p[PU_J_V] = j.price(u, v)
    p[PL_B] = j.price(l_, b)
    p[PL_V] = j.price(l_, v)
    p[BI_B] = subs[i.id][b]
    p[BI_V] = subs[i.id][v]
    p[BJ_B] = subs[j.id][b]
    p[BJ_V] = subs[j.id][v]
    p[LAT] = scenario.latent_premium if latent is None else latent
    p[VIS_I] = vis.get(i.id, 0.0)
    p[VIS_J] = vis.get(j.id, 0.0)
    return p


def _evaluate(p, ib, iv, jb, jv, jr):
    # Works on scalars (numba) and on broadcastable arrays (numpy).
    iu_b = ib * p[BI_B]
    iu_v = iv * p[BI_V]
    ju_b = jb * p[BJ_B]
    ju_v = jv * p[BJ_V]
    jl_b = (1.0 - jb) * p[BJ_B]
    jl_v = (1.0 - jv) * p[BJ_V]
    room = p[CL] - jl_b - jl_v
    admitted = jr * np.maximum(np.minimum(p[LAT], room), 0.0)
    jl_v_tot = jl_v + admitted

    load_i = iu_b + iu_v + p[VIS_I]
    load_j = ju_b + ju_v + p[VIS_J]
    shared = load_i + load_j
    lic = jl_b + jl_v_tot
    qu = 1.0 - shared / p[CU]
    ql = 1.0 - lic / p[CL]
    feasible = ((shared <= p[CU] + TOL) & (load_i <= p[CB_I] + TOL)
                & (load_j <= p[CB_J] + TOL) & (lic <= p[CL] + TOL))

    ok_ub = qu >= p[QB] - TOL
    ok_uv = qu >= p[QV] - TOL
    ok_lb = ql >= p[QB] - TOL
    ok_lv = ql >= p[QV] - TOL

    profit_i = iu_b * (p[PU_I_B] * ok_ub) - p[EU_I] * iu_b
    profit_i = profit_i + (iu_v * (p[PU_I_V] * ok_uv) - p[EU_I] * iu_v)
    profit_i = profit_i + (p[VIS_I] * (p[PU_I_B] * ok_ub) - p[EU_I] * p[VIS_I])

    unlic_j = ju_b * (p[PU_J_B] * ok_ub) - p[EU_J] * ju_b
    unlic_j = unlic_j + (ju_v * (p[PU_J_V] * ok_uv) - p[EU_J] * ju_v)
    unlic_j = unlic_j + (p[VIS_J] * (p[PU_J_B] * ok_ub) - p[EU_J] * p[VIS_J])
    lic_j = jl_b * (p[PL_B] * ok_lb) - p[EL] * jl_b
    lic_j = lic_j + (jl_v_tot * (p[PL_V] * ok_lv) - p[EL] * jl_v_tot)
    profit_j = unlic_j + lic_j
    return profit_i, profit_j, feasible, qu, ql, load_i, load_j


if HAVE_NUMBA:
    _evaluate_nb = njit(_evaluate)

    @njit
    def _joint_numba(p, si, sj):
        na = si.shape[0]
        nb = sj.shape[0]
        pi = np.empty((na, nb))
        pj = np.empty((na, nb))
        qu = np.empty((na, nb))
        ul = np.empty((na, nb))
        feas = np.empty((na, nb), dtype=np.bool_)
        for a in range(na):
            for b in range(nb):
                r = _evaluate_nb(p, si[a, 0], si[a, 1], sj[b, 0], sj[b, 1], sj[b, 2])
                pi[a, b] = r[0]
                pj[a, b] = r[1]
                feas[a, b] = r[2]
                qu[a, b] = r[3]
                ul[a, b] = r[5] + r[6]
        return pi, pj, feas, qu, ul


def _joint_numpy(p, si, sj):
    ib = si[:, 0][:, None]
    iv = si[:, 1][:, None]
    jb = sj[:, 0][None, :]
    jv = sj[:, 1][None, :]
    jr = sj[:, 2][None, :]
    pi, pj, feas, qu, _, load_i, load_j = _evaluate(p, ib, iv, jb, jv, jr)
    shape = (si.shape[0], sj.shape[0])
    return (np.broadcast_to(pi, shape).copy(), np.broadcast_to(pj, shape).copy(),
            np.broadcast_to(feas, shape).copy(), np.broadcast_to(qu, shape).copy(),
            np.broadcast_to(load_i + load_j, shape).copy())


def joint_payoffs(params, wifi_strategies, combined_strategies, backend: str | None = None):
    """Payoff matrices over all strategy pairs.

    ``wifi_strategies`` is an ``(n, 2)`` array of (bulk, premium) fractions,
    ``combined_strategies`` an ``(m, 3)`` array of (bulk, premium, resale).
    Returns ``(profit_i, profit_j, feasible, q_unlicensed, unlicensed_load)``,
    each of shape ``(n, m)``.
    """
    backend = backend or default_backend()
    si = np.ascontiguousarray(wifi_strategies, dtype=np.float64).reshape(-1, 2)
    sj = np.ascontiguousarray(combined_strategies, dtype=np.float64).reshape(-1, 3)
    params = np.ascontiguousarray(params, dtype=np.float64)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _joint_numba(params, si, sj)
    if backend == "numpy":
        return _joint_numpy(params, si, sj)
    raise ValueError(f"unknown backend {backend!r}")


def grid(steps: int) -> np.ndarray:
    return np.arange(steps + 1) / steps


def wifi_grid(steps: int) -> np.ndarray:
    g = grid(steps)
    return np.array([(a, b) for a in g for b in g])


def combined_grid(steps: int) -> np.ndarray:
    g = grid(steps)
    return np.array([(a, b, c) for a in g for b in g for c in g])


def nash_mask(pi, pj, feas, slack: float = TOL) -> np.ndarray:
    """Pairs where neither provider gains from a feasible unilateral deviation."""
    neg = -np.inf
    best_i = np.where(feas, pi, neg).max(axis=0)  # per combined strategy
    best_j = np.where(feas, pj, neg).max(axis=1)  # per Wi-Fi strategy
    return feas & (pi >= best_i[None, :] - slack) & (pj >= best_j[:, None] - slack)
