"""Layered parallel servers under Poisson arrivals with gated static speeds.

Jobs arrive at rate ``lambda`` and visit layers 1..K in order.  In each
layer a job joins one of the ``m`` servers uniformly at random and brings a
fresh exponential size with rate ``mu``.  A busy server runs at the fixed
speed ``1 + rho/m`` (``rho = lambda/mu``) and idles at zero power.

The closed forms below give the per-layer cost rate and two lower bounds on
any policy's cost rate.  ``simulate_network`` estimates the same quantities
by simulation: each FIFO server is solved with the max-plus form of the
Lindley recursion, which vectorises over a whole sample path.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

N_BATCHES = 20
DEFAULT_WARMUP_FRACTION = 0.1


class ConfigError(ValueError):
    """A network configuration violates its domain constraints."""


@dataclass(frozen=True)
class Layer:
    m: int
    mu: float
    c: float = 1.0
    alpha: float = 2.0

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"layer server count must be an integer >= 1, got {self.m!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ConfigError(f"service rate must be positive, got {self.mu!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigError(f"power coefficient must be positive, got {self.c!r}")
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise ConfigError(f"power exponent must exceed 1, got {self.alpha!r}")
        object.__setattr__(self, "m", int(self.m))

    def power(self, s):
        return self.c * np.power(s, self.alpha)


@dataclass(frozen=True)
class NetworkConfig:
    lam: float
    layers: tuple

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"arrival rate must be positive, got {self.lam!r}")
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def K(self) -> int:
        return len(self.layers)

    def load(self, i: int) -> float:
        """Offered load ``rho_i = lambda / mu_i`` of layer ``i`` (0-based)."""
        return self.lam / self.layers[i].mu

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        try:
            lam = float(d["lambda"])
            raw = d["layers"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config needs 'lambda' and 'layers': {exc}") from None
        if not isinstance(raw, list):
            raise ConfigError("'layers' must be a list")
        layers = []
        for i, item in enumerate(raw):
            try:
                layers.append(Layer(item["m"], float(item["mu"]),
                                    float(item.get("c", 1.0)), float(item.get("alpha", 2.0))))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise ConfigError(f"layer {i}: {exc}") from None
                raise ConfigError(f"layer {i}: malformed entry {item!r}") from None
        return cls(lam, tuple(layers))

    @classmethod
    def loads(cls, text: str) -> "NetworkConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {"lambda": self.lam,
                "layers": [{"m": L.m, "mu": L.mu, "c": L.c, "alpha": L.alpha} for L in self.layers]}


# ----------------------------------------------------------------------
# closed forms; each takes the offered load explicitly
# ----------------------------------------------------------------------
def gated_speed(rho: float, m: int) -> float:
    return 1.0 + rho / m


def layer_cost_closed_form(rho: float, m: int, c: float, alpha: float) -> float:
    """Cost per unit time (``lambda`` times per-job cost) of one layer."""
    return rho + c * rho * gated_speed(rho, m) ** (alpha - 1.0)


def lb1(rho: float, m: int, c: float, alpha: float) -> float:
    """Energy-only lower bound on any policy's cost rate."""
    return c * rho ** alpha / m ** (alpha - 1.0)


def lb2(rho: float, c: float, alpha: float) -> float:
    """Each job in isolation at its best constant speed."""
    return c ** (1.0 / alpha) * rho * alpha * (alpha - 1.0) ** (1.0 / alpha - 1.0)


def ratio_certificate(c: float, alpha: float) -> float:
    """Upper bound on closed-form cost over the best lower bound; load-free."""
    return (1.0 + c * 2.0 ** (alpha - 1.0)) / min(
        c ** (1.0 / alpha) * alpha * (alpha - 1.0) ** (1.0 / alpha - 1.0), c)


def network_certificate(cfg: NetworkConfig) -> float:
    return max(ratio_certificate(L.c, L.alpha) for L in cfg.layers)


def layer_summary(cfg: NetworkConfig, i: int) -> dict:
    L = cfg.layers[i]
    rho = cfg.load(i)
    closed = layer_cost_closed_form(rho, L.m, L.c, L.alpha)
    lo1, lo2 = lb1(rho, L.m, L.c, L.alpha), lb2(rho, L.c, L.alpha)
    return {
        "layer": i + 1,
        "rho": rho,
        "speed": gated_speed(rho, L.m),
        "closed_form": closed,
        "lb1": lo1,
        "lb2": lo2,
        "closed_over_lb": closed / max(lo1, lo2),
        "certificate": ratio_certificate(L.c, L.alpha),
    }


# ----------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------
def fifo_departures(arrivals: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Departure times of a FIFO single server; ``arrivals`` sorted.

    ``D_i = max(A_i, D_{i-1}) + X_i`` unrolls to
    ``D_i = S_i + max_{k<=i}(A_k - S_{k-1})`` with ``S`` the service prefix sums.
    """
    if arrivals.size == 0:
        return arrivals.copy()
    S = np.cumsum(services)
    return S + np.maximum.accumulate(arrivals - (S - services))


def batch_means(x: np.ndarray, batches: int = N_BATCHES) -> tuple:
    """Mean, standard error, and 95% half-width from contiguous batch means."""
    if x.size < batches:
        mean = float(x.mean()) if x.size else math.nan
        return mean, math.nan, math.nan
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    se = float(means.std(ddof=1) / math.sqrt(batches))
    return float(x.mean()), se, float(stats.t.ppf(0.975, batches - 1) * se)


@dataclass
class LayerStats:
    layer: int
    rho: float
    speed: float
    closed_form: float
    lb1: float
    lb2: float
    certificate: float
    jobs: int
    mean_response: float
    response_se: float
    response_halfwidth: float
    mean_energy: float
    energy_halfwidth: float
    simulated_cost: float  # lambda * (E[T] + E[E])
    cost_halfwidth: float
    mm1_response: float  # 1 / (mu s - lambda/m)
    jensen_lhs: float  # sum over servers of P(mean speed)
    jensen_rhs: float  # sum over servers of mean power

    @property
    def relative_error(self) -> float:
        return abs(self.simulated_cost - self.closed_form) / self.closed_form


@dataclass
class StochasticReport:
    config: dict
    horizon: float
    warmup: float
    seed: int
    layers: list = field(default_factory=list)

    @property
    def closed_form(self) -> float:
        return math.fsum(L.closed_form for L in self.layers)

    @property
    def simulated_cost(self) -> float:
        return math.fsum(L.simulated_cost for L in self.layers)

    @property
    def certificate(self) -> float:
        return max(L.certificate for L in self.layers)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "seed": self.seed,
            "layers": [asdict(L) for L in self.layers],
            "network": {"closed_form": self.closed_form,
                        "simulated_cost": self.simulated_cost,
                        "certificate": self.certificate},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f for f in LayerStats.__dataclass_fields__]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for L in self.layers:
            w.writerow([getattr(L, f) for f in names])
        return buf.getvalue()


def simulate_network(cfg: NetworkConfig, horizon: float, warmup: Optional[float] = None,
                     seed: int = 0) -> StochasticReport:
    """Simulate every job arriving in ``[0, horizon]`` through all layers.

    Statistics for a layer use the jobs that reach it during
    ``[warmup, horizon]``; every such job is followed to completion.
    """
    if warmup is None:
        warmup = DEFAULT_WARMUP_FRACTION * horizon
    if not (horizon > warmup > 0):
        raise ConfigError(f"need horizon > warmup > 0, got horizon={horizon}, warmup={warmup}")
    rng = np.random.default_rng(seed)
    lam = cfg.lam
    count = int(rng.poisson(lam * horizon))
    t_in = np.sort(rng.uniform(0.0, horizon, size=count))
    window = horizon - warmup
    report = StochasticReport(cfg.to_dict(), horizon, warmup, seed)

    for i, L in enumerate(cfg.layers):
        info = layer_summary(cfg, i)
        s = info["speed"]
        sizes = rng.exponential(1.0 / L.mu, size=count)
        route = rng.integers(0, L.m, size=count)
        durations = sizes / s
        t_out = np.empty_like(t_in)
        jensen_lhs = jensen_rhs = 0.0
        measured = (t_in >= warmup) & (t_in <= horizon)
        for k in range(L.m):
            idx = np.flatnonzero(route == k)
            idx = idx[np.argsort(t_in[idx], kind="stable")]
            t_out[idx] = fifo_departures(t_in[idx], durations[idx])
            busy = float(durations[idx][measured[idx]].sum()) / window
            jensen_lhs += float(L.power(busy * s))
            jensen_rhs += busy * float(L.power(s))
        order = np.argsort(t_in[measured], kind="stable")
        resp = (t_out - t_in)[measured][order]
        energy = durations[measured][order] * float(L.power(s))
        T, T_se, T_hw = batch_means(resp)
        E, _, E_hw = batch_means(energy)
        C, _, C_hw = batch_means(lam * (resp + energy))
        report.layers.append(LayerStats(
            layer=i + 1, rho=info["rho"], speed=s, closed_form=info["closed_form"],
            lb1=info["lb1"], lb2=info["lb2"], certificate=info["certificate"],
            jobs=int(resp.size), mean_response=T, response_se=T_se, response_halfwidth=T_hw,
            mean_energy=E, energy_halfwidth=E_hw, simulated_cost=C, cost_halfwidth=C_hw,
            mm1_response=1.0 / (L.mu * s - lam / L.m),
            jensen_lhs=jensen_lhs, jensen_rhs=jensen_rhs))
        t_in = t_out
        # the next layer sorts per server; a global order is not needed
    return report


def _run_one(args):
    cfg_dict, horizon, warmup, seed = args
    return simulate_network(NetworkConfig.from_dict(cfg_dict), horizon, warmup, seed)


def replicate(cfg: NetworkConfig, horizon: float, seeds: Sequence[int],
              warmup: Optional[float] = None, workers: int = 1) -> dict:
    """Independent replications, each treated as one batch of the estimate."""
    jobs = [(cfg.to_dict(), horizon, warmup, int(s)) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    costs = np.array([r.simulated_cost for r in reports])
    n = costs.size
    hw = (float(stats.t.ppf(0.975, n - 1) * costs.std(ddof=1) / math.sqrt(n))
          if n > 1 else math.nan)
    return {"replications": n, "simulated_cost": float(costs.mean()), "halfwidth": hw,
            "closed_form": reports[0].closed_form if reports else math.nan,
            "reports": reports}
