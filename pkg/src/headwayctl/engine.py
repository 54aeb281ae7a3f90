"""Discrete-time network simulator with per-link headway control.

State is kept as vehicle counts per (link, path, class) cohort, which makes
flow conservation an exact bookkeeping identity. Each step:

1. evaluate the fundamental diagram with the current autonomy fractions and
   controlled headways,
2. move each link's sending flow downstream (cohorts split proportionally,
   receiving links cap inflow by their free space, excess is rationed
   proportionally and stays upstream),
3. inject new demand into origin queues and drain the queues onto each
   path's first link according to the current route shares,
4. advance the route shares with this step's path latencies,
5. emit the reward: minus the scaled total of vehicles in the network and
   in the origin queues.

One engine instance is single-writer; run several instances in parallel if
you need concurrent rollouts (they share only the immutable Network).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fundamental as fd
from .network import ConfigError, demand_at
from .routing import AUTO, HUMAN, PathShares, step_shares
from .scenario import Scenario

# Tolerance for float bookkeeping noise when clamping counts at zero.
_NEGATIVE_TOL = 1e-6

EXIT = -1  # next-link sentinel for the last link of a path


class InvariantViolation(RuntimeError):
    """The engine reached a state that should be unreachable."""


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


@dataclass
class EpisodeTrace:
    """Per-step, per-link history of one episode."""

    seed: int
    dt_s: float
    reward_scale: float
    t_s: np.ndarray          # (T,)
    count: np.ndarray        # (T, L) state at t
    density: np.ndarray      # (T, L)
    autonomy: np.ndarray     # (T, L)
    congested: np.ndarray    # (T, L) 0/1
    flow_vps: np.ndarray     # (T, L) sending flow used during [t, t+dt)
    latency_s: np.ndarray    # (T, L)
    beta_a_m: np.ndarray     # (T, L)
    queued: np.ndarray       # (T,)
    reward: np.ndarray       # (T,) reward received for the step starting at t
    injected_cum: np.ndarray # (T,)
    exited_cum: np.ndarray   # (T,)

    @property
    def ttt(self) -> float:
        return total_travel_time(self)

    @property
    def total_exited(self) -> float:
        return float(self.exited_cum[-1])


def total_travel_time(trace: EpisodeTrace) -> float:
    """Vehicle-steps spent in the network and queues: -(sum of rewards)/scale."""
    return -float(trace.reward.sum()) / trace.reward_scale


class TrafficEnv:
    """Simulator plus the decision-step MDP wrapper used for control.

    Observations: per-link count normalized by jam count, per-link autonomy
    fraction, episode progress t/T, and the current demand rate normalized
    by the profile peak; every component lies in [0, 1].
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        net = scenario.network
        self.net = net
        self.sim = scenario.sim
        self.n_links = net.n_links

        self._lanes = net.lanes_array()
        self._length = net.length_array()
        self._speed = net.speed_array()
        self._jam = net.jam_density_array()
        self._jam_count = self._jam * self._length

        # Global path table across O/D pairs.
        self._paths: list[tuple[int, ...]] = []
        self._path_od: list[int] = []
        for od_idx, od in enumerate(net.od_pairs):
            for p in od.paths:
                self._paths.append(tuple(p.links))
                self._path_od.append(od_idx)
        self.n_paths = len(self._paths)
        self._od_path_ids: list[list[int]] = [[] for _ in net.od_pairs]
        for gp, od_idx in enumerate(self._path_od):
            self._od_path_ids[od_idx].append(gp)

        # next_link[l, p]: successor of link l on path p, EXIT for the last
        # link, or -2 when l is not on p.
        self._next_link = np.full((self.n_links, self.n_paths), -2, dtype=int)
        self._first_link = np.zeros(self.n_paths, dtype=int)
        for gp, links in enumerate(self._paths):
            self._first_link[gp] = links[0]
            for i, l in enumerate(links):
                self._next_link[l, gp] = links[i + 1] if i + 1 < len(links) else EXIT

        self._peak_rate = sum(d.peak_rate for d in scenario.demands)
        self._beta_h = net.beta_h_m

        self.reset(self.sim.seed)

    # ------------------------------------------------------------------
    # episode lifecycle

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Start a new episode; deterministic for a given seed."""
        if seed is None:
            seed = self.sim.seed
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)

        self.t_s = 0.0
        self.step_index = 0
        self.counts = np.zeros((self.n_links, self.n_paths, 2))
        self.queues = np.zeros((len(self.net.od_pairs), 2))
        self.beta_a = np.full(self.n_links, self._beta_h)
        self.shares = [
            PathShares.uniform(len(od.paths), self.sim.mu_h, self.sim.mu_a)
            for od in self.net.od_pairs
        ]
        self.injected = 0.0
        self.exited = 0.0
        self._last_info: dict = {}

        for link_id, base in sorted(self.sim.initial_counts.items()):
            count = base
            if self.sim.initial_jitter > 0.0:
                count = base * (1.0 + self.sim.initial_jitter * rng.uniform(-1.0, 1.0))
            if count / self._length[link_id] > self._jam[link_id]:
                raise ConfigError(f"initial count on link {link_id} exceeds jam density")
            self._seed_link(link_id, count)
        self.injected += float(self.counts.sum())
        return self.observe()

    def _seed_link(self, link_id: int, count: float) -> None:
        # Split the initial cohort across the paths that traverse this link
        # (per current shares, i.e. uniformly at reset) and across classes
        # by the O/D autonomy fraction.
        carriers = [gp for gp in range(self.n_paths) if self._next_link[link_id, gp] != -2]
        if not carriers:
            raise ConfigError(f"initial count on link {link_id}, which no path uses")
        weights = np.array([
            self.shares[self._path_od[gp]].shares[HUMAN][self._local_path_index(gp)]
            for gp in carriers
        ])
        weights = weights / weights.sum()
        for gp, w in zip(carriers, weights):
            od_idx = self._path_od[gp]
            alpha_od = self.scenario.demands[od_idx].autonomy_fraction
            self.counts[link_id, gp, AUTO] += count * w * alpha_od
            self.counts[link_id, gp, HUMAN] += count * w * (1.0 - alpha_od)

    def _local_path_index(self, global_path: int) -> int:
        od_idx = self._path_od[global_path]
        return self._od_path_ids[od_idx].index(global_path)

    # ------------------------------------------------------------------
    # control

    def apply_action(self, beta_a_m: np.ndarray) -> bool:
        """Set per-link autonomous headways; returns True if clamping occurred.

        Only legal at action-period boundaries. Out-of-bounds components are
        clamped so that stochastic policies remain valid during training.
        """
        period = self.sim.action_period_s
        if self.t_s % period != 0.0:
            raise ValueError(f"action applied at t={self.t_s}, not a multiple of {period}")
        beta = np.asarray(beta_a_m, dtype=float)
        if beta.shape != (self.n_links,):
            raise ValueError(f"action must have shape ({self.n_links},)")
        clipped = np.clip(beta, self.net.beta_min_m, self.net.beta_max_m)
        clamped = bool(np.any(clipped != beta))
        self.beta_a = clipped
        return clamped

    # ------------------------------------------------------------------
    # dynamics

    def step_sim(self) -> StepResult:
        """Advance one dt: transfer, inject, reroute, reward."""
        sim = self.sim
        dt = sim.dt_s
        counts = self.counts

        n_link = counts.sum(axis=(1, 2))
        n_auto = counts[:, :, AUTO].sum(axis=1)
        with np.errstate(invalid="ignore"):
            alpha = np.where(n_link > 0.0, n_auto / np.where(n_link > 0.0, n_link, 1.0), 0.0)

        ncrit = fd.critical_density(self._lanes, alpha, self.beta_a, self._beta_h)
        rho = n_link / self._length
        flow = fd.sending_flow(n_link, self._length, self._speed, ncrit, self._jam)
        congested = fd.congestion_state(rho, ncrit)
        latency = fd.link_latency(flow, congested, self._length, self._speed, ncrit, self._jam)
        path_lat = np.array([fd.path_latency(p, latency) for p in self._paths])

        state_row = {
            "t_s": self.t_s,
            "count": n_link.copy(),
            "density": rho.copy(),
            "autonomy": alpha.copy(),
            "congested": congested.copy(),
            "flow_vps": flow.copy(),
            "latency_s": latency.copy(),
            "beta_a_m": self.beta_a.copy(),
            "queued": float(self.queues.sum()),
        }

        # Desired sends, proportional across cohorts resident on each link.
        out_total = np.minimum(flow * dt, n_link)
        with np.errstate(invalid="ignore"):
            out_frac = np.where(n_link > 0.0, out_total / np.where(n_link > 0.0, n_link, 1.0), 0.0)
        send = counts * out_frac[:, None, None]

        # Demand arrives at the origin queues before the drain attempt.
        arrivals = np.zeros_like(self.queues)
        for od_idx, profile in enumerate(self.scenario.demands):
            rate = demand_at(profile, self.t_s)
            vol = rate * dt
            arrivals[od_idx, AUTO] = vol * profile.autonomy_fraction
            arrivals[od_idx, HUMAN] = vol * (1.0 - profile.autonomy_fraction)
        self.queues += arrivals
        self.injected += float(arrivals.sum())

        # Claims on each receiving link: cohort transfers plus queue drains.
        claim = np.zeros(self.n_links)
        for gp in range(self.n_paths):
            dests = self._next_link[:, gp]
            for l in np.nonzero(dests >= 0)[0]:
                claim[dests[l]] += send[l, gp, :].sum()
        inject_attempt = np.zeros((self.n_paths, 2))
        for od_idx in range(len(self.net.od_pairs)):
            share = self.shares[od_idx].shares  # (2, n_paths_od)
            for local, gp in enumerate(self._od_path_ids[od_idx]):
                for cls in (HUMAN, AUTO):
                    amount = self.queues[od_idx, cls] * share[cls, local]
                    inject_attempt[gp, cls] = amount
                    claim[self._first_link[gp]] += amount

        space = self._jam_count - n_link
        ration = np.ones(self.n_links)
        oversubscribed = claim > space
        ration[oversubscribed] = space[oversubscribed] / claim[oversubscribed]
        ration = np.clip(ration, 0.0, 1.0)

        # Move cohorts downstream (or out of the network).
        exited_now = 0.0
        for gp in range(self.n_paths):
            dests = self._next_link[:, gp]
            for l in np.nonzero(dests != -2)[0]:
                moving = send[l, gp, :]
                if not moving.any():
                    continue
                dest = dests[l]
                if dest == EXIT:
                    counts[l, gp, :] -= moving
                    exited_now += moving.sum()
                else:
                    actual = moving * ration[dest]
                    counts[l, gp, :] -= actual
                    counts[dest, gp, :] += actual
        self.exited += exited_now

        # Drain the origin queues onto first links, subject to the same cap.
        for od_idx in range(len(self.net.od_pairs)):
            for gp in self._od_path_ids[od_idx]:
                first = self._first_link[gp]
                for cls in (HUMAN, AUTO):
                    moved = inject_attempt[gp, cls] * ration[first]
                    counts[first, gp, cls] += moved
                    self.queues[od_idx, cls] -= moved

        self._scrub_negatives()
        self._check_state()

        # Routing reacts to the latencies realized this step. The knob
        # latency_unit_s sets the time unit mu is expressed in.
        scaled = path_lat / sim.latency_unit_s
        for od_idx in range(len(self.net.od_pairs)):
            local = self._od_path_ids[od_idx]
            self.shares[od_idx] = step_shares(self.shares[od_idx], scaled[local])

        self.t_s += dt
        self.step_index += 1
        reward = self.current_reward()
        done = self.t_s >= sim.horizon_s

        state_row["reward"] = reward
        state_row["injected_cum"] = self.injected
        state_row["exited_cum"] = self.exited
        self._last_info = state_row
        info = dict(state_row)
        info["exited_step"] = exited_now
        return StepResult(obs=self.observe(), reward=reward, done=done, info=info)

    def decision_step(self, beta_a_m: np.ndarray) -> StepResult:
        """Apply an action and run one full action period of sim steps.

        The returned reward is the sum over the inner steps; ``info`` carries
        the last inner step plus whether the action needed clamping.
        """
        clamped = self.apply_action(beta_a_m)
        total = 0.0
        result = None
        for _ in range(self.sim.steps_per_action):
            result = self.step_sim()
            total += result.reward
            if result.done:
                break
        assert result is not None
        info = dict(result.info)
        info["action_clamped"] = clamped
        return StepResult(obs=result.obs, reward=total, done=result.done, info=info)

    # ------------------------------------------------------------------
    # readouts

    def current_reward(self) -> float:
        """-scale * (vehicles on links + vehicles queued at origins)."""
        return -self.sim.reward_scale * float(self.counts.sum() + self.queues.sum())

    def observe(self) -> np.ndarray:
        n_link = self.counts.sum(axis=(1, 2))
        n_auto = self.counts[:, :, AUTO].sum(axis=1)
        alpha = np.where(n_link > 0.0, n_auto / np.where(n_link > 0.0, n_link, 1.0), 0.0)
        density_part = np.clip(n_link / self._jam_count, 0.0, 1.0)
        t_part = min(self.t_s / self.sim.horizon_s, 1.0)
        rate = sum(demand_at(d, self.t_s) for d in self.scenario.demands)
        rate_part = min(rate / self._peak_rate, 1.0) if self._peak_rate > 0 else 0.0
        return np.concatenate([density_part, np.clip(alpha, 0.0, 1.0), [t_part, rate_part]])

    @property
    def obs_dim(self) -> int:
        return 2 * self.n_links + 2

    @property
    def done(self) -> bool:
        return self.t_s >= self.sim.horizon_s

    @property
    def n_decisions(self) -> int:
        return self.sim.n_steps // self.sim.steps_per_action

    # ------------------------------------------------------------------
    # internal guards

    def _scrub_negatives(self) -> None:
        for arr in (self.counts, self.queues):
            bad = arr < 0.0
            if np.any(bad):
                worst = arr[bad].min()
                if worst < -_NEGATIVE_TOL:
                    raise InvariantViolation(self._diagnostic(f"negative count {worst}"))
                arr[bad] = 0.0

    def _check_state(self) -> None:
        if not np.all(np.isfinite(self.counts)) or not np.all(np.isfinite(self.queues)):
            raise InvariantViolation(self._diagnostic("non-finite state"))
        n_link = self.counts.sum(axis=(1, 2))
        over = n_link - self._jam_count
        if np.any(over > _NEGATIVE_TOL * np.maximum(self._jam_count, 1.0)):
            raise InvariantViolation(self._diagnostic("link above jam density"))

    def _diagnostic(self, message: str) -> str:
        return (
            f"{message} at t={self.t_s}s (step {self.step_index}, seed {self.seed}); "
            f"link counts={self.counts.sum(axis=(1, 2))}, queues={self.queues.sum()}, "
            f"beta_a={self.beta_a}"
        )


def run_episode(scenario: Scenario, controller, seed: int) -> EpisodeTrace:
    """Roll one full episode under a controller and record the trace.

    ``controller`` is called with the observation at every action-period
    boundary and must return the per-link headway action.
    """
    env = TrafficEnv(scenario)
    obs = env.reset(seed)
    rows: list[dict] = []
    while not env.done:
        action = np.asarray(controller(obs), dtype=float)
        env.apply_action(action)
        for _ in range(env.sim.steps_per_action):
            result = env.step_sim()
            rows.append(result.info)
            if result.done:
                break
        obs = result.obs

    L = env.n_links
    T = len(rows)

    def stack(key):
        return np.array([r[key] for r in rows])

    return EpisodeTrace(
        seed=seed,
        dt_s=env.sim.dt_s,
        reward_scale=env.sim.reward_scale,
        t_s=np.array([r["t_s"] for r in rows]),
        count=stack("count").reshape(T, L),
        density=stack("density").reshape(T, L),
        autonomy=stack("autonomy").reshape(T, L),
        congested=stack("congested").reshape(T, L),
        flow_vps=stack("flow_vps").reshape(T, L),
        latency_s=stack("latency_s").reshape(T, L),
        beta_a_m=stack("beta_a_m").reshape(T, L),
        queued=np.array([r["queued"] for r in rows]),
        reward=np.array([r["reward"] for r in rows]),
        injected_cum=np.array([r["injected_cum"] for r in rows]),
        exited_cum=np.array([r["exited_cum"] for r in rows]),
    )


def trace_to_csv_rows(trace: EpisodeTrace) -> list[list]:
    """Flatten a trace to one row per (t, link), schema-stable."""
    rows = []
    T, L = trace.count.shape
    for ti in range(T):
        for l in range(L):
            rows.append([
                trace.t_s[ti],
                l,
                trace.count[ti, l],
                trace.density[ti, l],
                trace.autonomy[ti, l],
                int(trace.congested[ti, l]),
                trace.flow_vps[ti, l],
                trace.latency_s[ti, l],
                trace.beta_a_m[ti, l],
            ])
    return rows


TRACE_CSV_HEADER = [
    "t_s", "link_id", "count", "density", "autonomy_fraction",
    "s_l", "flow_vps", "latency_s", "beta_a_m",
]
