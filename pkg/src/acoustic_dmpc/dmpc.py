"""Distributed MPC over spline forecasts with relaxed consensus ADMM.

Every agent ``A`` plans its own path-parameter trajectory ``s_A(t)`` and a
local copy ``r_A`` of the shared forecast the network agrees on. The local
problem is

    min  w_track * I[(s' - v)^2] + w_smooth * I[s''^2] + w_consensus/2 * I[(s - r)^2]
         - r . sum_B z_A[B] + rho * deg / 2 * |r|^2
    s.t. s(t0) = sigma,  s'(t0) = sigma_dot

where ``I[.]`` integrates over the horizon with 4 Gauss points per interval
and divides by the interval length, and ``z_A[B]`` are the edge variables
of relaxed ADMM. ``A`` sends ``w = 2 rho r_A - z_A[B]`` to ``B``, which
updates ``z_B[A] <- (1 - alpha) z_B[A] + alpha w``. A lost packet leaves the
receiver either holding ``z`` or, as configured, replaying an extrapolated
copy of the last packet received. At the fixed point all ``r_A`` coincide
and minimize the sum of local costs.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np

from . import codec as _codec
from .bspline import BSpline, basis_matrix, ideal_line_coeffs, shift_domain
from .errors import ConfigError, LengthError, SolveError
from .imputation import ExtrapolationMethod, imputation_matrix
from .mac import MacConfig, Scheme, broadcast, detect_loss, schedule

__all__ = [
    "MpcParams",
    "VehicleModel",
    "AgentState",
    "LocalSolver",
    "local_update",
    "build_message",
    "consume_message",
    "agent_cost",
    "centralized_solve",
    "consensus_residual",
    "Network",
    "mpc_step",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class MpcParams:
    hp: int = 6
    Ts: float = 8.0
    Nips: int = 3
    v_target: float = 1.0
    w_track: float = 1.0
    w_smooth: float = 0.1
    w_consensus: float = 1.0
    rho: float = 1.0
    alpha: float = 0.5
    accel_max: float = 0.5

    def __post_init__(self) -> None:
        # four intervals separate all distinct basis shapes
        if self.hp < 4:
            raise ConfigError(f"hp must be >= 4, got {self.hp}")
        if self.Nips < 1:
            raise ConfigError(f"Nips must be >= 1, got {self.Nips}")
        if not self.Ts > 0:
            raise ConfigError("Ts must be positive")
        if min(self.w_track, self.w_smooth, self.w_consensus) < 0:
            raise ConfigError("weights must be non-negative")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if not self.accel_max > 0:
            raise ConfigError("accel_max must be positive")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w_track, self.w_smooth, self.w_consensus)

    @property
    def n_coeffs(self) -> int:
        return self.hp + 3


@dataclass(frozen=True)
class VehicleModel:
    """Path-parameter double integrator following a planned trajectory.

    The command is the plan's acceleration plus PD feedback on the plan
    error, clipped to ``accel_max``. A bounded zero-mean disturbance
    acceleration (clipped AR(1) with time constant ``dist_tau``) acts on the
    speed.
    """

    dt: float = 0.1
    kp: float = 0.5
    kd: float = 1.0
    dist_std: float = 0.02
    dist_max: float = 0.05
    dist_tau: float = 5.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError("vehicle dt must be positive")
        if self.dist_std < 0 or self.dist_max < 0 or not self.dist_tau > 0:
            raise ConfigError("invalid disturbance parameters")


@dataclass
class AgentState:
    """Per-agent ADMM and vehicle state.

    ``z`` holds the edge variables keyed by neighbor; ``last_rx`` the last
    decoded message from each neighbor with the start of its domain.
    """

    id: int
    t0: float
    sigma: float
    sigma_dot: float
    rho: float
    s_plan: BSpline
    r: BSpline
    z: dict[int, BSpline] = field(default_factory=dict)
    last_rx: dict[int, tuple[BSpline, float]] = field(default_factory=dict)


@functools.lru_cache(maxsize=64)
def _grams(hp: int, Ts: float) -> tuple[np.ndarray, ...]:
    """Normalized Gram matrices of values, first and second derivatives.

    Returns ``(G, D1, D2, b1)`` with ``G = I[B B^T]``, ``D1 = I[B' B'^T]``,
    ``D2 = I[B'' B''^T]`` and ``b1 = I[B']``.
    """
    n = hp
    ncoef = n + 3
    mid = (np.arange(n)[:, None] + 0.5 + 0.5 * _GAUSS_X[None, :]).ravel() * Ts
    wq = np.tile(0.5 * _GAUSS_W, n)
    B0 = basis_matrix(mid, 0.0, n, Ts)
    eye = np.eye(ncoef)
    B1 = np.empty_like(B0)
    B2 = np.empty_like(B0)
    for j in range(ncoef):
        sp = BSpline(0.0, Ts, eye[j])
        B1[:, j] = sp.derivative(1)(mid)
        B2[:, j] = sp.derivative(2)(mid)
    G = (B0 * wq[:, None]).T @ B0
    D1 = (B1 * wq[:, None]).T @ B1
    D2 = (B2 * wq[:, None]).T @ B2
    b1 = wq @ B1
    return G, D1, D2, b1


def agent_cost(params: MpcParams, s_coeffs, r_coeffs) -> float:
    """Local cost without ADMM terms."""
    G, D1, D2, b1 = _grams(params.hp, params.Ts)
    c = np.asarray(s_coeffs, dtype=float)
    e = c - np.asarray(r_coeffs, dtype=float)
    v = params.v_target
    track = c @ D1 @ c - 2.0 * v * (b1 @ c) + v * v * params.hp
    return float(
        params.w_track * track
        + params.w_smooth * (c @ D2 @ c)
        + 0.5 * params.w_consensus * (e @ G @ e)
    )


def _pin_rows(params: MpcParams, offset: int, width: int) -> np.ndarray:
    E = np.zeros((2, width))
    E[0, offset] = 1.0
    E[1, offset] = -3.0 / params.Ts
    E[1, offset + 1] = 3.0 / params.Ts
    return E


def _own_hessian(params: MpcParams) -> tuple[np.ndarray, np.ndarray]:
    G, D1, D2, b1 = _grams(params.hp, params.Ts)
    Hs = 2.0 * params.w_track * D1 + 2.0 * params.w_smooth * D2 + params.w_consensus * G
    return Hs, -2.0 * params.w_track * params.v_target * b1


def _solve_kkt(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"singular KKT system: {exc}") from None
    res = np.linalg.norm(K @ x - rhs)
    scale = np.linalg.norm(K, np.inf) * np.linalg.norm(x) + np.linalg.norm(rhs)
    if not np.isfinite(res) or res > 1e-8 * max(scale, 1e-300):
        raise SolveError(f"KKT residual {res:.3e} too large")
    return x


class LocalSolver:
    """Factor-once solver for the local problem of an agent with ``degree`` neighbors."""

    def __init__(self, params: MpcParams, degree: int) -> None:
        self.params = params
        self.degree = degree
        N = params.n_coeffs
        G = _grams(params.hp, params.Ts)[0]
        Hs, self._lin = _own_hessian(params)
        wc = params.w_consensus
        H = np.block(
            [[Hs, -wc * G], [-wc * G, wc * G + params.rho * degree * np.eye(N)]]
        )
        E = _pin_rows(params, 0, 2 * N)
        K = np.block([[H, E.T], [E, np.zeros((2, 2))]])
        if np.linalg.cond(K) > 1e12:
            raise SolveError("ill-conditioned local KKT system")
        self.K = K
        self._inv = np.linalg.inv(K)
        self.N = N

    def solve(self, sigma: float, sigma_dot: float, z_sum) -> tuple[np.ndarray, np.ndarray]:
        N = self.N
        rhs = np.concatenate([-self._lin, np.asarray(z_sum, dtype=float), [sigma, sigma_dot]])
        x = self._inv @ rhs
        res = np.linalg.norm(self.K @ x - rhs)
        if res > 1e-8 * (np.linalg.norm(self.K, np.inf) * np.linalg.norm(x) + np.linalg.norm(rhs)):
            x = _solve_kkt(self.K, rhs)
        return x[:N], x[N : 2 * N]


def local_update(state: AgentState, params: MpcParams, solver: LocalSolver | None = None) -> AgentState:
    """Primal step: minimize the augmented local cost given the current ``z``."""
    if solver is None:
        solver = LocalSolver(params, len(state.z))
    N = params.n_coeffs
    z_sum = np.zeros(N)
    for zb in state.z.values():
        if len(zb.coeffs) != N:
            raise LengthError(f"belief has {len(zb.coeffs)} coefficients, expected {N}")
        z_sum += zb.coeffs
    c, r = solver.solve(state.sigma, state.sigma_dot, z_sum)
    return replace(
        state,
        s_plan=BSpline(state.t0, params.Ts, c),
        r=BSpline(state.t0, params.Ts, r),
    )


def build_message(state: AgentState, neighbor: int) -> np.ndarray:
    """``2 rho r - z[neighbor]`` coefficient-wise."""
    return 2.0 * state.rho * state.r.coeffs - state.z[neighbor].coeffs


def consume_message(
    state: AgentState, sender: int, w, params: MpcParams, timestamp: float | None = None
) -> AgentState:
    """Relaxed ADMM edge update from a neighbor's message."""
    w = np.asarray(w, dtype=float).ravel()
    if len(w) != params.n_coeffs:
        raise LengthError(f"message has {len(w)} coefficients, expected {params.n_coeffs}")
    a = params.alpha
    old = state.z[sender].coeffs
    z = dict(state.z)
    z[sender] = BSpline(state.t0, params.Ts, (1.0 - a) * old + a * w)
    last = dict(state.last_rx)
    last[sender] = (BSpline(state.t0, params.Ts, w), state.t0 if timestamp is None else timestamp)
    return replace(state, z=z, last_rx=last)


def consensus_residual(states) -> float:
    """``max_{A,B} |r_A - r_B|_inf`` over coefficients."""
    R = np.array([s.r.coeffs for s in states])
    return float(np.max(R.max(axis=0) - R.min(axis=0)))


def centralized_solve(
    params: MpcParams, sigmas, sigma_dots
) -> tuple[np.ndarray, np.ndarray, float]:
    """Joint minimizer of the summed local costs with a common forecast.

    Returns ``(S, r, objective)`` where ``S`` has one row of plan
    coefficients per agent.
    """
    sig = np.asarray(sigmas, dtype=float)
    sd = np.asarray(sigma_dots, dtype=float)
    V = len(sig)
    N = params.n_coeffs
    G = _grams(params.hp, params.Ts)[0]
    Hs, lin = _own_hessian(params)
    wc = params.w_consensus
    n_var = (V + 1) * N
    H = np.zeros((n_var, n_var))
    q = np.zeros(n_var)
    rr = slice(V * N, n_var)
    for a in range(V):
        blk = slice(a * N, (a + 1) * N)
        H[blk, blk] = Hs
        H[blk, rr] = -wc * G
        H[rr, blk] = -wc * G
        H[rr, rr] += wc * G
        q[blk] = lin
    E = np.vstack([_pin_rows(params, a * N, n_var) for a in range(V)])
    e = np.column_stack([sig, sd]).ravel()
    K = np.block([[H, E.T], [E, np.zeros((2 * V, 2 * V))]])
    x = _solve_kkt(K, np.concatenate([-q, e]))
    S = x[: V * N].reshape(V, N)
    r = x[rr]
    obj = sum(agent_cost(params, S[a], r) for a in range(V))
    return S, r, obj


def _shift_forward(sp: BSpline, tau: float, method: ExtrapolationMethod) -> BSpline:
    """``impute_missing(sp, tau, method)`` through its cached linear map."""
    M = imputation_matrix(sp.n_intervals, sp.interval_len, tau, method)
    return BSpline(sp.t0 + tau, sp.interval_len, M @ sp.coeffs)


class Network:
    """Complete-graph network of agents with vehicles, channel and codec.

    Parameters
    ----------
    params : MpcParams
    mac : MacConfig
        Exchange scheme and loss model. ``Scheme.SYNC`` bypasses the codec
        and the channel.
    quant : QuantScheme or None
        Codec used on the channel; ``None`` sends exact floats.
    imputation : ExtrapolationMethod or None
        Replacement of lost packets; ``None`` holds ``z`` instead.
    vehicle : VehicleModel
    sigma0, sigma_dot0 : array_like
        Initial path parameters and speeds.
    seed : int
        Seeds the loss and disturbance streams (independent sub-streams).
    """

    def __init__(
        self,
        params: MpcParams,
        mac: MacConfig,
        quant: _codec.QuantScheme | None,
        imputation: ExtrapolationMethod | None,
        vehicle: VehicleModel,
        sigma0,
        sigma_dot0,
        seed: int = 0,
    ) -> None:
        if abs(mac.Ts - params.Ts) > 1e-12 or mac.Nips != params.Nips:
            raise ConfigError("MAC and MPC disagree on Ts or Nips")
        sub = params.Ts / vehicle.dt
        if abs(sub - round(sub)) > 1e-9:
            raise ConfigError(f"Ts={params.Ts} is not a multiple of dt={vehicle.dt}")
        self.params = params
        self.mac = mac
        self.V = mac.V
        self.quant = quant
        if quant is not None:
            self.quant = quant.replace(k_ref=params.rho * params.v_target * params.Ts)
        self.imputation = imputation
        self.vehicle = vehicle
        self.substeps = int(round(sub))
        loss_ss, dist_ss = np.random.SeedSequence(seed).spawn(2)
        self.rng_loss = np.random.default_rng(loss_ss)
        self.rng_dist = np.random.default_rng(dist_ss)
        self.solver = LocalSolver(params, self.V - 1)
        self.sigma = np.asarray(sigma0, dtype=float).copy()
        self.sigma_dot = np.asarray(sigma_dot0, dtype=float).copy()
        if self.sigma.shape != (self.V,) or self.sigma_dot.shape != (self.V,):
            raise ConfigError("initial conditions must have one entry per agent")
        self.dist = np.zeros(self.V)
        self.step_index = 0
        self.packets = 0
        self.lost = 0
        self.imputed = 0
        self.saturations = 0
        self.payload_bits = 0
        self.states = [self._initial_state(a) for a in range(self.V)]

    def _initial_state(self, a: int) -> AgentState:
        p = self.params
        line = BSpline(0.0, p.Ts, ideal_line_coeffs(self.sigma[a], p.v_target * p.Ts, p.hp))
        z = {b: line.with_coeffs(p.rho * line.coeffs) for b in range(self.V) if b != a}
        return AgentState(a, 0.0, float(self.sigma[a]), float(self.sigma_dot[a]), p.rho, line, line, z)

    @property
    def t(self) -> float:
        return self.step_index * self.params.Ts

    # ------------------------------------------------------------------ ADMM
    def _update(self, a: int) -> None:
        self.states[a] = local_update(self.states[a], self.params, self.solver)

    def _messages(self, a: int) -> dict[int, np.ndarray]:
        st = self.states[a]
        return {b: build_message(st, b) for b in range(self.V) if b != a}

    def _transmit(self, a: int, send_time: float) -> tuple[object, dict[int, np.ndarray]]:
        """Encode and broadcast agent ``a``'s packet; return event and decoded messages."""
        msgs = self._messages(a)
        if self.mac.scheme is Scheme.SYNC:
            return None, msgs
        if self.quant is not None:
            bits, enc = _codec.encode_payload(a, msgs, self.quant, self.V)
            self.saturations += sum(m.saturations for m in enc.values())
            _, decoded = _codec.decode_payload(bits, self.quant, self.V, self.params.hp)
        else:
            bits, decoded = "", msgs
        self.payload_bits = len(bits)
        event = broadcast(a, bits, send_time, self.mac, self.rng_loss)
        return event, decoded

    def _deliver(self, a: int, event, decoded: dict[int, np.ndarray], slot_time: float) -> None:
        window = self.mac.allowed_time
        for b in range(self.V):
            if b == a:
                continue
            self.packets += 1
            if event is None:
                lost = False
            else:
                lost = bool(detect_loss([(a, slot_time)], [event], slot_time + window, b, window))
            st = self.states[b]
            if not lost:
                self.states[b] = consume_message(st, a, decoded[b], self.params, st.t0)
                continue
            self.lost += 1
            if self.imputation is None or a not in st.last_rx:
                continue
            w_old, t_old = st.last_rx[a]
            w_hat = _shift_forward(w_old, st.t0 - t_old, self.imputation) if st.t0 > t_old else w_old
            self.imputed += 1
            z = dict(st.z)
            alpha = self.params.alpha
            z[a] = z[a].with_coeffs((1.0 - alpha) * z[a].coeffs + alpha * w_hat.coeffs)
            self.states[b] = replace(st, z=z)

    def admm_round(self, iteration: int) -> None:
        k = self.step_index
        if self.mac.scheme is Scheme.TDMA:
            for a, t_send in schedule(self.mac, k, iteration):
                self._update(a)
                event, decoded = self._transmit(a, t_send)
                self._deliver(a, event, decoded, t_send)
            return
        t_send = k * self.params.Ts + iteration * self.mac.dT
        for a in range(self.V):
            self._update(a)
        outgoing = [self._transmit(a, t_send) for a in range(self.V)]
        for a, (event, decoded) in enumerate(outgoing):
            self._deliver(a, event, decoded, t_send)

    # -------------------------------------------------------------- vehicles
    def _execute(self) -> np.ndarray:
        """Run every vehicle for one step; returns ``(substeps, 1 + 2V)`` trace rows."""
        p, veh = self.params, self.vehicle
        t0 = self.t
        ts = t0 + np.arange(self.substeps) * veh.dt
        plans = [st.s_plan for st in self.states]
        ref = np.array([sp(ts) for sp in plans]).T
        ref_d = np.array([sp.derivative(1)(ts) for sp in plans]).T
        ref_dd = np.array([sp.derivative(2)(ts) for sp in plans]).T
        a_coef = np.exp(-veh.dt / veh.dist_tau)
        b_coef = veh.dist_std * np.sqrt(1.0 - a_coef * a_coef)
        rows = np.empty((self.substeps, 1 + 2 * self.V))
        for i in range(self.substeps):
            rows[i, 0] = ts[i]
            rows[i, 1 : 1 + self.V] = self.sigma
            rows[i, 1 + self.V :] = self.sigma_dot
            u = ref_dd[i] + veh.kp * (ref[i] - self.sigma) + veh.kd * (ref_d[i] - self.sigma_dot)
            u = np.clip(u, -p.accel_max, p.accel_max)
            noise = self.rng_dist.standard_normal(self.V)
            self.dist = np.clip(a_coef * self.dist + b_coef * noise, -veh.dist_max, veh.dist_max)
            self.sigma_dot = self.sigma_dot + (u + self.dist) * veh.dt
            self.sigma = self.sigma + self.sigma_dot * veh.dt
        return rows

    def _advance(self) -> None:
        p = self.params
        method = self.imputation or ExtrapolationMethod()
        t_new = self.t
        for a, st in enumerate(self.states):
            z = {b: _shift_forward(zb, p.Ts, method) for b, zb in st.z.items()}
            self.states[a] = replace(
                st,
                t0=t_new,
                sigma=float(self.sigma[a]),
                sigma_dot=float(self.sigma_dot[a]),
                s_plan=_shift_forward(st.s_plan, p.Ts, method),
                r=_shift_forward(st.r, p.Ts, method),
                z=z,
            )

    def current_rows(self) -> np.ndarray:
        row = np.concatenate([[self.t], self.sigma, self.sigma_dot])
        return row[None, :]


def mpc_step(net: Network) -> np.ndarray:
    """One MPC step: ``Nips`` ADMM rounds, plan execution and horizon shift.

    Returns the vehicle trace sampled every ``dt`` over the step (start
    included, end excluded).
    """
    for it in range(net.params.Nips):
        net.admm_round(it)
    rows = net._execute()
    net.step_index += 1
    net._advance()
    return rows
