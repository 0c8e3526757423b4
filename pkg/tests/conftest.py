"""Shared fixtures: random small instances and simulation helpers."""

import numpy as np
import pytest

from recapture import (
    BehaviorSpec,
    CaptureHistory,
    ModelSpec,
    ParamState,
    build_context,
)


def random_instance(seed, n_max=10, p=1, classic=True, time_varying=True):
    """Small random dataset plus a generic parameter state.

    Returns ``(ctx, params, rho)`` with event times in (0, 1), positive
    jumps summing to the state's total hazard, and positive frailty means.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    hists = []
    for i in range(n):
        k = int(rng.integers(1, 5))
        times = np.sort(rng.uniform(0.02, 0.98, size=k))
        z = tuple(rng.normal(0.0, 1.0, size=p)) if p else ()
        hists.append(CaptureHistory(f"s{i:03d}", tuple(times), z))
    if classic:
        behavior = BehaviorSpec()
    else:
        behavior = BehaviorSpec(
            onset=2,
            expiry_count=None if rng.random() < 0.5 else 3,
            memory_window=None if rng.random() < 0.5 else float(rng.uniform(0.3, 0.9)),
        )
    spec = ModelSpec(
        tau=1.0,
        frailty=True,
        covariates=tuple(f"x{j}" for j in range(p)),
        time_varying=time_varying,
        behavior=behavior,
    )
    ctx = build_context(hists, spec)
    omega = float(rng.uniform(0.5, 2.0))
    if time_varying:
        raw = rng.uniform(0.2, 1.0, size=ctx.n_events)
        jumps = omega * raw / raw.sum()
    else:
        jumps = np.empty(0)
    params = ParamState(
        coef=rng.uniform(-0.8, 0.8, size=p),
        log_behavior=float(np.log(rng.uniform(0.4, 1.4))),
        log_frailty_shape=float(np.log(rng.uniform(0.6, 4.0))),
        log_total_hazard=float(np.log(omega)),
        jumps=jumps,
    )
    rho = rng.uniform(0.4, 2.2, size=ctx.n)
    return ctx, params, rho


def simulate_dataset(
    n_population=1000,
    frailty_shape=None,
    behavior_factor=1.0,
    onset=1,
    coef=(),
    rate=1.3,
    tau=1.0,
    seed=0,
):
    """Plain-python thinning simulator used as an independent data source.

    Deliberately separate from :mod:`recapture.simulate` so fits can be
    validated against data that never touched the package's generator.
    """
    rng = np.random.default_rng(seed)
    hists = []
    for i in range(n_population):
        z = tuple(float(rng.integers(0, 2)) for _ in coef)
        gamma = float(np.exp(np.dot(coef, z))) if coef else 1.0
        rho = rng.gamma(frailty_shape, 1.0 / frailty_shape) if frailty_shape else 1.0
        cap = max(behavior_factor, 1.0)
        majorant = rho * gamma * cap * rate
        t, times = 0.0, []
        while True:
            t += rng.exponential(1.0 / majorant)
            if t > tau:
                break
            factor = behavior_factor if len(times) >= onset else 1.0
            if rng.random() * majorant < rho * gamma * factor * rate:
                times.append(t)
        if times:
            hists.append(CaptureHistory(f"s{i:05d}", tuple(times), z))
    return hists


@pytest.fixture(scope="session")
def plain_poisson_histories():
    """Homogeneous Poisson data (no frailty, no behavior), ~2600 subjects."""
    return simulate_dataset(n_population=4000, rate=1.2, seed=101)
