"""Joint-distribution ("getting it right") checks of the transition kernels.

The marginal-conditional simulator draws ``(G, y)`` independently from the
prior model.  The successive-conditional simulator alternates one MCMC
sweep with a fresh draw of ``y`` given the current parameters.  If the
sweep leaves the posterior invariant, both simulators share the same
stationary law, so the distributions of any parameter statistic agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import FourierProjectionKernel
from .mixture import Dataset, Hyperparameters
from .samplers import SamplerKind, simulate_data, simulate_prior, sweep
from .summaries import effective_sample_size

STATISTICS = ("k", "location", "variance")


def _stats(state) -> tuple[float, float, float]:
    comp = state.components
    h = state.allocations[0]
    return float(state.k), float(comp.locations[h, 0]), float(comp.covariances[h, 0, 0])


def forward_draws(n: int, hyper: Hyperparameters, kernel: FourierProjectionKernel, draws: int, rng) -> np.ndarray:
    """Statistics ``(k, atom of observation 1, its variance)`` of independent prior draws."""
    out = np.empty((draws, 3))
    for t in range(draws):
        state, _ = simulate_prior(n, hyper, kernel, rng)
        out[t] = _stats(state)
    return out


def successive_draws(kind: SamplerKind | str, n: int, hyper: Hyperparameters,
                     kernel: FourierProjectionKernel, draws: int, rng) -> np.ndarray:
    """Same statistics along the successive-conditional chain."""
    if isinstance(kind, str):
        kind = SamplerKind(kind)
    state, data = simulate_prior(n, hyper, kernel, rng)
    out = np.empty((draws, 3))
    for t in range(draws):
        sweep(kind, state, data, hyper, kernel, rng)
        data = Dataset(simulate_data(state.components, state.allocations, rng))
        out[t] = _stats(state)
    return out


@dataclass(frozen=True)
class Comparison:
    statistic: str
    threshold: float
    forward: float
    successive: float
    z: float


def compare(forward: np.ndarray, successive: np.ndarray, *, m: int) -> list[Comparison]:
    """Compare CDFs at the forward deciles (and the mass of every ``k``).

    Standard errors combine the binomial error of the independent forward
    draws with the autocorrelation-adjusted error of the chain indicator.
    """
    out = []

    def one(name, fx, sx, t, below):
        f_ind = below(fx, t).astype(float)
        s_ind = below(sx, t).astype(float)
        pf, ps = f_ind.mean(), s_ind.mean()
        ess = effective_sample_size(s_ind).value if np.ptp(s_ind) > 0 else len(s_ind)
        p = 0.5 * (pf + ps)
        se = np.sqrt(p * (1 - p) * (1.0 / len(f_ind) + 1.0 / ess))
        z = 0.0 if se == 0 else (ps - pf) / se
        out.append(Comparison(name, float(t), float(pf), float(ps), float(z)))

    for k in range(1, m + 1):
        one("k", forward[:, 0], successive[:, 0], k, lambda x, t: x == t)
    for j, name in ((1, "location"), (2, "variance")):
        for t in np.quantile(forward[:, j], np.linspace(0.1, 0.9, 9)):
            one(name, forward[:, j], successive[:, j], t, lambda x, t: x <= t)
    return out
