"""Closed-loop simulation runner for the two use cases."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .codec import QuantScheme, payload_bits
from .dmpc import MpcParams, Network, VehicleModel, mpc_step
from .errors import ConfigError
from .imputation import ExtrapolationMethod
from .mac import MacConfig, Scheme, data_rate
from .metrics import MetricsSeries, default_thresholds, error_series, verdict, windowed_mse
from .scenario import FormationSpec, PathSpec, helix6, lawnmower4

__all__ = ["ScenarioName", "SimConfig", "SimResult", "run_simulation", "scenario_geometry"]


class ScenarioName(str, enum.Enum):
    LAWNMOWER4 = "lawnmower4"
    HELIX6 = "helix6"


def scenario_geometry(name: ScenarioName, octahedron_edge: float = 10.0) -> tuple[PathSpec, FormationSpec]:
    name = ScenarioName(name)
    if name is ScenarioName.LAWNMOWER4:
        return lawnmower4()
    return helix6(octahedron_edge)


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one run.

    ``imputation=None`` holds the edge variable on loss instead of
    replaying an extrapolated packet; ``quant=None`` exchanges exact floats.
    """

    scenario: ScenarioName = ScenarioName.LAWNMOWER4
    mac: MacConfig = field(default_factory=MacConfig)
    mpc: MpcParams = field(default_factory=MpcParams)
    quant: QuantScheme | None = field(default_factory=QuantScheme)
    imputation: ExtrapolationMethod | None = field(default_factory=ExtrapolationMethod)
    vehicle: VehicleModel = field(default_factory=VehicleModel)
    duration: float = 500.0
    seed: int = 0
    window_len: float = 10.0
    transient: float = 100.0
    init_spread: float = 2.0
    octahedron_edge: float = 10.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", ScenarioName(self.scenario))
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        V = scenario_geometry(self.scenario, self.octahedron_edge)[1].V
        if self.mac.V != V:
            raise ConfigError(f"{self.scenario.value} has {V} agents, mac.V={self.mac.V}")
        if abs(self.mac.Ts - self.mpc.Ts) > 1e-12 or self.mac.Nips != self.mpc.Nips:
            raise ConfigError("mac.Ts/Nips must equal mpc.Ts/Nips")

    def with_hyper(self, **kw) -> "SimConfig":
        """Copy with any of ``hp, Ts, Nips, w_fi, loss_prob, scheme`` changed."""
        mpc, mac, quant = self.mpc, self.mac, self.quant
        if "hp" in kw:
            mpc = replace(mpc, hp=int(kw.pop("hp")))
        for key in ("Ts", "Nips"):
            if key in kw:
                val = kw.pop(key)
                val = int(val) if key == "Nips" else float(val)
                mpc = replace(mpc, **{key: val})
                mac = replace(mac, **{key: val})
        if "loss_prob" in kw:
            mac = replace(mac, loss_prob=float(kw.pop("loss_prob")))
        if "scheme" in kw:
            mac = replace(mac, scheme=Scheme(kw.pop("scheme")))
        if "w_fi" in kw:
            w = int(kw.pop("w_fi"))
            base = quant or QuantScheme()
            quant = base.replace(f_bits=w - base.i_bits)
        if kw:
            raise ConfigError(f"unknown hyperparameters {sorted(kw)}")
        return replace(self, mpc=mpc, mac=mac, quant=quant)

    @property
    def n_pk(self) -> int:
        if self.quant is None:
            # exact floats: 64-bit start value and 64-bit residuals
            return payload_bits(self.mac.V, 64, 64, self.mpc.hp)
        return payload_bits(self.mac.V, self.quant.w1_bits, self.quant.w_fi, self.mpc.hp)

    @property
    def data_rate(self) -> float:
        return data_rate(self.n_pk, self.mpc.Nips, self.mpc.Ts)


@dataclass
class SimResult:
    config: SimConfig
    trace: np.ndarray
    eps_y: np.ndarray
    eps_s: np.ndarray
    metrics: MetricsSeries
    summary: dict


def _initial_conditions(cfg: SimConfig, V: int) -> tuple[np.ndarray, np.ndarray]:
    ss = np.random.SeedSequence([cfg.seed, 1])
    rng = np.random.default_rng(ss)
    sig = rng.uniform(-cfg.init_spread, cfg.init_spread, V)
    return sig - sig.mean(), np.zeros(V)


def run_simulation(cfg: SimConfig) -> SimResult:
    """Deterministic closed-loop run of ``cfg.duration`` seconds."""
    path, form = scenario_geometry(cfg.scenario, cfg.octahedron_edge)
    V = form.V
    sig0, sd0 = _initial_conditions(cfg, V)
    net = Network(cfg.mpc, cfg.mac, cfg.quant, cfg.imputation, cfg.vehicle, sig0, sd0, cfg.seed)
    n_steps = int(np.ceil(cfg.duration / cfg.mpc.Ts - 1e-9))
    n_samples = int(round(cfg.duration / cfg.vehicle.dt))
    chunks = []
    for _ in range(n_steps):
        chunks.append(mpc_step(net))
        if not np.all(np.isfinite(net.sigma)):
            break
    if chunks:
        trace = np.vstack(chunks)[:n_samples]
    else:
        trace = np.zeros((0, 1 + 2 * V))
    eps_y, eps_s = error_series(trace, V, path, cfg.mpc.v_target)
    metrics = windowed_mse(
        eps_y, eps_s, cfg.vehicle.dt, cfg.window_len, default_thresholds(form)
    )
    summary = {
        "scenario": cfg.scenario.value,
        "scheme": cfg.mac.scheme.value,
        "V": V,
        "hp": cfg.mpc.hp,
        "Ts": cfg.mpc.Ts,
        "Nips": cfg.mpc.Nips,
        "w_fi": cfg.quant.w_fi if cfg.quant else 0,
        "loss_prob": cfg.mac.loss_prob,
        "seed": cfg.seed,
        "duration": cfg.duration,
        "n_pk_bits": cfg.n_pk,
        "data_rate_bps": cfg.data_rate,
        "packets": net.packets,
        "lost": net.lost,
        "imputed": net.imputed,
        "saturations": net.saturations,
        "finite": bool(np.all(np.isfinite(trace))),
    }
    keep = metrics.t - metrics.window_len >= cfg.transient - 1e-9
    summary["max_mse_pos"] = float(metrics.mse_pos[keep].max()) if keep.any() else 0.0
    summary["max_mse_speed"] = float(metrics.mse_speed[keep].max()) if keep.any() else 0.0
    v = verdict(metrics, cfg.transient)
    summary.update({"pos_ok": v["pos"], "speed_ok": v["speed"], "feasible": v["both"] and summary["finite"]})
    return SimResult(cfg, trace, eps_y, eps_s, metrics, summary)
