"""k-means++ seeding of initial server sites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Seeding:
    indices: list[int]
    uniform_fallbacks: int = 0  # draws where no remaining AP had positive mass


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Independent generator for one restart, derived from the master seed.

    Derivation depends only on ``(seed, restart)``, never on execution order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(restart),))
    return np.random.Generator(np.random.PCG64(ss))


def kmeanspp_init(dist, weights, k: int, rng_seed, weighted: bool = True) -> Seeding:
    """Pick ``k`` distinct AP indices as starting server sites.

    The first site is drawn with probability proportional to the AP weight,
    each later one proportional to ``weight * D(i)`` where ``D(i)`` is the
    distance from AP ``i`` to its closest chosen site. ``dist`` is used as
    is, so with squared-Euclidean distances this is classical D^2 seeding.
    With ``weighted=False`` weights are ignored (uniform first draw, then
    proportional to ``D(i)``).

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    d = np.asarray(getattr(dist, "values", dist), dtype=float)
    n = d.shape[0]
    if k > n:
        raise ValueError(f"cannot choose {k} sites among {n} access points")
    w = np.asarray(weights, dtype=float)
    if weighted and not np.any(w > 0):
        raise ValueError("all weights are zero")
    mass = w if weighted else np.ones(n)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else restart_rng(rng_seed, 0)

    chosen: list[int] = []
    taken = np.zeros(n, dtype=bool)
    closest = np.full(n, np.inf)
    fallbacks = 0
    for step in range(k):
        p = mass.copy() if step == 0 else mass * closest
        p[taken] = 0.0
        total = p.sum()
        if not total > 0 or not np.isfinite(total):
            p = (~taken).astype(float)
            total = p.sum()
            fallbacks += 1
        idx = int(rng.choice(n, p=p / total))
        chosen.append(idx)
        taken[idx] = True
        closest = np.minimum(closest, d[:, idx])
    return Seeding(chosen, fallbacks)
