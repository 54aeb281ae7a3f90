"""Clipped policy-gradient training of the headway policy, from scratch.

The agent acts once per action period (the 10 inner one-minute sim steps are
rolled into a single decision-step reward), collects fixed-size rollouts
from several sequentially-stepped environments, estimates advantages with
GAE, and ascends the PPO clipped surrogate with Adam. Policy and value
networks are separate tanh MLPs; all gradients are exact reverse-mode
(see nn.py), no autodiff framework involved.

Everything is seeded: same config -> same parameters, same learning curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import TrafficEnv
from .nn import (
    Adam,
    LOG_STD_MAX,
    LOG_STD_MIN,
    gaussian_log_prob,
    gaussian_log_prob_grads,
    init_layers,
    mlp_backward,
    mlp_forward,
)
from .policies import PolicyParams, policy_act, squash_to_bounds
from .scenario import Scenario


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    n_steps: int = 2048            # decision steps gathered per update
    batch_size: int = 64
    clip_range: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    n_epochs: int = 10
    total_steps: int = 40_960      # decision-step budget
    seed: int = 0
    n_envs: int = 8
    value_coef: float = 0.5
    hidden: tuple[int, ...] = (64, 64)
    log_std_init: float = 0.0
    # Rewards are divided by a running std of the discounted return so the
    # value head regresses O(1) targets regardless of vehicle counts.
    normalize_rewards: bool = True
    eval_seeds: tuple[int, ...] = (9001, 9002, 9003)

    def __post_init__(self):
        if not 0.0 < self.clip_range < 1.0:
            raise ValueError("clip_range must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0 or not 0.0 < self.gae_lambda <= 1.0:
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if self.n_steps % self.batch_size != 0:
            raise ValueError("batch_size must divide n_steps")
        if self.n_steps % self.n_envs != 0:
            raise ValueError("n_envs must divide n_steps")


@dataclass
class ActorCritic:
    policy: PolicyParams
    value_layers: list

    @classmethod
    def new(cls, obs_dim: int, n_links: int, beta_min: float, beta_max: float,
            config: TrainConfig, rng) -> "ActorCritic":
        policy = PolicyParams.new(
            obs_dim, n_links, rng, hidden=config.hidden,
            beta_min_m=beta_min, beta_max_m=beta_max,
            log_std_init=config.log_std_init,
        )
        value_layers = init_layers([obs_dim, *config.hidden, 1], rng, out_scale=1.0)
        return cls(policy=policy, value_layers=value_layers)

    def param_list(self) -> list[np.ndarray]:
        """Canonical flat ordering: policy layers, log_std, value layers."""
        out = []
        for W, b in self.policy.layers:
            out.extend((W, b))
        out.append(self.policy.log_std)
        for W, b in self.value_layers:
            out.extend((W, b))
        return out

    def copy_policy(self) -> PolicyParams:
        return PolicyParams(
            layers=[(W.copy(), b.copy()) for W, b in self.policy.layers],
            log_std=self.policy.log_std.copy(),
            beta_min_m=self.policy.beta_min_m,
            beta_max_m=self.policy.beta_max_m,
            obs_version=self.policy.obs_version,
        )

    def value(self, obs_batch: np.ndarray) -> np.ndarray:
        v, _ = mlp_forward(self.value_layers, obs_batch)
        return v[:, 0]


@dataclass
class RolloutBuffer:
    """One update's worth of aligned decision-step records."""

    obs: np.ndarray        # (N, obs_dim)
    actions_u: np.ndarray  # (N, A) pre-squash samples
    log_probs: np.ndarray  # (N,)
    rewards: np.ndarray    # (N,) possibly normalized
    values: np.ndarray     # (N,)
    dones: np.ndarray      # (N,)
    advantages: np.ndarray # (N,)
    returns: np.ndarray    # (N,)


def compute_gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantage estimation over one trajectory stream.

    ``values`` must carry one extra trailing element: the bootstrap value of
    the state after the last transition. Returns (advantages, returns).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    T = len(rewards)
    if len(values) != T + 1 or len(dones) != T:
        raise ValueError("misaligned GAE inputs")
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values[:-1]


class _ReturnNormalizer:
    """Running std of the discounted return, used to scale rewards."""

    def __init__(self, gamma: float, n_envs: int):
        self.gamma = gamma
        self.ret = np.zeros(n_envs)
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, rewards: np.ndarray, dones: np.ndarray) -> np.ndarray:
        self.ret = self.ret * self.gamma + rewards
        for r in self.ret:
            self.count += 1
            delta = r - self.mean
            self.mean += delta / self.count
            self.m2 += delta * (r - self.mean)
        self.ret[dones > 0.0] = 0.0
        return rewards / self.std

    @property
    def std(self) -> float:
        if self.count < 2:
            return 1.0
        return max(math.sqrt(self.m2 / (self.count - 1)), 1e-8)


def loss_and_grads(ac: ActorCritic, obs, actions_u, log_probs_old, advantages, returns,
                   clip_range: float, value_coef: float):
    """PPO loss on one minibatch and its exact gradients.

    Returns (loss, grads aligned with ac.param_list(), stats dict).
    """
    B = obs.shape[0]
    mean, pol_caches = mlp_forward(ac.policy.layers, obs)
    log_std = ac.policy.log_std
    logp = gaussian_log_prob(mean, log_std, actions_u)
    ratio = np.exp(logp - log_probs_old)
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    surrogate = np.minimum(surr1, surr2)
    policy_loss = -surrogate.mean()

    v_out, val_caches = mlp_forward(ac.value_layers, obs)
    v = v_out[:, 0]
    value_err = v - returns
    value_loss = float(np.mean(value_err ** 2))

    loss = policy_loss + value_coef * value_loss

    # d(policy_loss)/d(ratio): zero where the clipped branch is active.
    unclipped_active = (surr1 <= surr2).astype(float)
    dratio = -(advantages * unclipped_active) / B
    dlogp = dratio * ratio
    dmean, dlog_std = gaussian_log_prob_grads(mean, log_std, actions_u, dlogp)
    pol_grads = mlp_backward(ac.policy.layers, pol_caches, dmean)

    dv = (value_coef * 2.0 / B) * value_err
    val_grads = mlp_backward(ac.value_layers, val_caches, dv[:, None])

    grads: list[np.ndarray] = []
    for gW, gb in pol_grads:
        grads.extend((gW, gb))
    grads.append(dlog_std)
    for gW, gb in val_grads:
        grads.extend((gW, gb))

    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": value_loss,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_range)),
    }
    return float(loss), grads, stats


def ppo_update(ac: ActorCritic, buffer: RolloutBuffer, config: TrainConfig,
               adam: Adam, rng) -> dict:
    """Run the epochs/minibatch schedule over a full buffer, in place."""
    N = buffer.obs.shape[0]
    adv = buffer.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    agg = {"policy_loss": 0.0, "value_loss": 0.0, "clip_fraction": 0.0}
    batches = 0
    params = ac.param_list()
    for _ in range(config.n_epochs):
        order = rng.permutation(N)
        for start in range(0, N, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads, stats = loss_and_grads(
                ac, buffer.obs[idx], buffer.actions_u[idx], buffer.log_probs[idx],
                adv[idx], buffer.returns[idx], config.clip_range, config.value_coef,
            )
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite PPO loss: {loss}")
            adam.step(params, grads)
            np.clip(ac.policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=ac.policy.log_std)
            for key in agg:
                agg[key] += stats[key]
            batches += 1
    return {key: val / batches for key, val in agg.items()}


def evaluate_policy(scenario: Scenario, params: PolicyParams, seeds) -> list[float]:
    """Deterministic-episode TTT for each seed."""
    env = TrafficEnv(scenario)
    ttts = []
    for seed in seeds:
        obs = env.reset(seed)
        total = 0.0
        while not env.done:
            action = policy_act(params, obs, mode="deterministic")
            result = env.decision_step(action)
            total += result.reward
            obs = result.obs
        ttts.append(-total / scenario.sim.reward_scale)
    return ttts


def train(scenario: Scenario, config: TrainConfig = TrainConfig()):
    """Train the headway policy; returns (best PolicyParams, learning curve).

    The curve has one row per update with the running best evaluation TTT;
    the returned parameters are the best-so-far evaluation checkpoint.
    """
    rng = np.random.default_rng(config.seed)
    probe = TrafficEnv(scenario)
    net = scenario.network
    ac = ActorCritic.new(probe.obs_dim, net.n_links, net.beta_min_m, net.beta_max_m,
                         config, rng)

    n_updates = config.total_steps // config.n_steps
    curve: list[dict] = []
    best_params = ac.copy_policy()
    if n_updates == 0:
        return best_params, curve

    steps_per_env = config.n_steps // config.n_envs
    envs = [TrafficEnv(scenario) for _ in range(config.n_envs)]
    episode_counter = 0

    def next_episode_seed() -> int:
        nonlocal episode_counter
        episode_counter += 1
        return (config.seed * 1_000_003 + episode_counter) % (2**63)

    obs_now = np.stack([env.reset(next_episode_seed()) for env in envs])
    normalizer = _ReturnNormalizer(config.gamma, config.n_envs)
    adam = Adam([p.shape for p in ac.param_list()], lr=config.learning_rate)
    best_ttt = math.inf

    E, S, D, A = config.n_envs, steps_per_env, probe.obs_dim, net.n_links
    for update in range(1, n_updates + 1):
        obs_buf = np.zeros((E, S, D))
        u_buf = np.zeros((E, S, A))
        logp_buf = np.zeros((E, S))
        rew_buf = np.zeros((E, S))
        val_buf = np.zeros((E, S))
        done_buf = np.zeros((E, S))

        for step in range(S):
            mean, _ = mlp_forward(ac.policy.layers, obs_now)
            noise = rng.standard_normal((E, A))
            u = mean + np.exp(ac.policy.log_std) * noise
            logp = gaussian_log_prob(mean, ac.policy.log_std, u)
            values = ac.value(obs_now)

            obs_buf[:, step] = obs_now
            u_buf[:, step] = u
            logp_buf[:, step] = logp
            val_buf[:, step] = values

            rewards = np.zeros(E)
            dones = np.zeros(E)
            for e, env in enumerate(envs):
                beta = squash_to_bounds(u[e], net.beta_min_m, net.beta_max_m)
                result = env.decision_step(beta)
                rewards[e] = result.reward
                dones[e] = float(result.done)
                obs_now[e] = env.reset(next_episode_seed()) if result.done else result.obs
            if config.normalize_rewards:
                rewards = normalizer.update(rewards, dones)
            rew_buf[:, step] = rewards
            done_buf[:, step] = dones

        bootstrap = ac.value(obs_now)
        adv_buf = np.zeros((E, S))
        ret_buf = np.zeros((E, S))
        for e in range(E):
            adv_buf[e], ret_buf[e] = compute_gae(
                rew_buf[e], np.append(val_buf[e], bootstrap[e]), done_buf[e],
                config.gamma, config.gae_lambda,
            )

        buffer = RolloutBuffer(
            obs=obs_buf.reshape(E * S, D),
            actions_u=u_buf.reshape(E * S, A),
            log_probs=logp_buf.reshape(E * S),
            rewards=rew_buf.reshape(E * S),
            values=val_buf.reshape(E * S),
            dones=done_buf.reshape(E * S),
            advantages=adv_buf.reshape(E * S),
            returns=ret_buf.reshape(E * S),
        )
        stats = ppo_update(ac, buffer, config, adam, rng)

        eval_ttts = evaluate_policy(scenario, ac.policy, config.eval_seeds)
        mean_ttt = float(np.mean(eval_ttts))
        if mean_ttt < best_ttt:
            best_ttt = mean_ttt
            best_params = ac.copy_policy()
        curve.append({
            "update_index": update,
            "env_steps": update * config.n_steps,
            "mean_eval_ttt": mean_ttt,
            "policy_loss": stats["policy_loss"],
            "value_loss": stats["value_loss"],
            "clip_fraction": stats["clip_fraction"],
            "best_eval_ttt": best_ttt,
        })

    return best_params, curve


LEARNING_CURVE_HEADER = [
    "update_index", "env_steps", "mean_eval_ttt",
    "policy_loss", "value_loss", "clip_fraction", "best_eval_ttt",
]
