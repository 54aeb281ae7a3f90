"""Headway controllers: the two constant baselines and the learned policy head.

A controller maps an observation to a per-link autonomous headway vector.
The learned policy squashes a Gaussian-perturbed MLP output through a
sigmoid, so its actions always respect the headway bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .network import Network
from .nn import LOG_STD_MAX, LOG_STD_MIN, init_layers, mlp_forward

CHECKPOINT_FORMAT = "headwayctl-policy"
OBS_SPEC_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint file missing, unreadable, or structurally invalid."""


def uniform_headway_policy(network: Network) -> np.ndarray:
    """Baseline 1: autonomous headway pinned to the human headway everywhere."""
    return np.full(network.n_links, network.beta_h_m)


def min_headway_policy(network: Network) -> np.ndarray:
    """Baseline 2: tightest admissible platooning on every link."""
    return np.full(network.n_links, network.beta_min_m)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def squash_to_bounds(u, beta_min: float, beta_max: float):
    return beta_min + (beta_max - beta_min) * sigmoid(u)


@dataclass
class PolicyParams:
    """Gaussian policy over pre-squash outputs of a tanh MLP."""

    layers: list  # [(W, b), ...]
    log_std: np.ndarray
    beta_min_m: float
    beta_max_m: float
    obs_version: int = OBS_SPEC_VERSION

    @classmethod
    def new(cls, obs_dim: int, n_links: int, rng, hidden=(64, 64),
            beta_min_m: float = 1.0, beta_max_m: float = 10.0,
            log_std_init: float = 0.0) -> "PolicyParams":
        sizes = [obs_dim, *hidden, n_links]
        return cls(
            layers=init_layers(sizes, rng),
            log_std=np.full(n_links, log_std_init),
            beta_min_m=beta_min_m,
            beta_max_m=beta_max_m,
        )

    @property
    def obs_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def n_actions(self) -> int:
        return self.layers[-1][0].shape[1]

    def clipped_log_std(self) -> np.ndarray:
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)


def policy_act(params: PolicyParams, obs: np.ndarray, mode: str = "deterministic",
               rng=None) -> np.ndarray:
    """Map an observation to a bounded headway action.

    Deterministic mode uses the Gaussian mean; stochastic mode samples the
    pre-squash output first (requires ``rng``).
    """
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (params.obs_dim,):
        raise ValueError(f"observation shape {obs.shape} != ({params.obs_dim},)")
    u, _ = mlp_forward(params.layers, obs[None, :])
    u = u[0]
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        u = u + np.exp(params.clipped_log_std()) * rng.standard_normal(u.shape)
    elif mode != "deterministic":
        raise ValueError(f"unknown mode {mode!r}")
    return squash_to_bounds(u, params.beta_min_m, params.beta_max_m)


def save_checkpoint(params: PolicyParams, path: str | FsPath) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "obs_version": params.obs_version,
        "beta_min_m": params.beta_min_m,
        "beta_max_m": params.beta_max_m,
        "layer_shapes": [list(W.shape) for W, _ in params.layers],
        "layers": [{"w": W.tolist(), "b": b.tolist()} for W, b in params.layers],
        "log_std": params.log_std.tolist(),
    }
    FsPath(path).write_text(json.dumps(doc) + "\n")


def load_checkpoint(path: str | FsPath) -> PolicyParams:
    p = FsPath(path)
    if not p.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {path}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a policy checkpoint: {path}")
    try:
        layers = [(np.array(l["w"], dtype=float), np.array(l["b"], dtype=float))
                  for l in doc["layers"]]
        params = PolicyParams(
            layers=layers,
            log_std=np.array(doc["log_std"], dtype=float),
            beta_min_m=float(doc["beta_min_m"]),
            beta_max_m=float(doc["beta_max_m"]),
            obs_version=int(doc.get("obs_version", OBS_SPEC_VERSION)),
        )
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {path}: {exc}") from exc
    for (W, b), shape in zip(params.layers, doc.get("layer_shapes", [])):
        if list(W.shape) != list(shape):
            raise CheckpointError(f"checkpoint layer shape mismatch in {path}")
    return params


def make_controller(name: str, network: Network):
    """Resolve a controller spec: 'uniform', 'min', or 'policy:<checkpoint>'."""
    if name == "uniform":
        action = uniform_headway_policy(network)
        return lambda obs: action
    if name == "min":
        action = min_headway_policy(network)
        return lambda obs: action
    if name.startswith("policy:"):
        params = load_checkpoint(name.split(":", 1)[1])
        if params.n_actions != network.n_links:
            raise CheckpointError(
                f"checkpoint controls {params.n_actions} links, network has {network.n_links}"
            )
        return lambda obs: policy_act(params, obs, mode="deterministic")
    raise ValueError(f"unknown controller {name!r} (want uniform, min, or policy:<path>)")
