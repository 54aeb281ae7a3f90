"""Per-link fundamental diagram for mixed-autonomy traffic.

All functions broadcast over numpy arrays so the engine can evaluate a whole
network at once. Unit conventions: meters, seconds, vehicles. Densities are
veh/m (total across lanes), flows veh/s, latencies seconds.

The link capacity is not fixed: it depends on the autonomy fraction and on
the headways kept by each vehicle class. Critical density is

    n_c = lanes / (alpha * beta_a + (1 - alpha) * beta_h)

and capacity is v * n_c. Jam density stays constant per link.
"""

from __future__ import annotations

import numpy as np

# Congested latency diverges as flow -> 0; route choice and rewards need a
# finite number, so latencies are capped here.
LATENCY_CAP_S = 1.0e6


def critical_density(lanes, autonomy_fraction, beta_a_m, beta_h_m):
    """Density (veh/m) at which a link leaves free flow.

    The denominator is the average headway when autonomous vehicles keep
    ``beta_a_m`` meters and human-driven ones ``beta_h_m`` meters.
    """
    beta_a_m = np.asarray(beta_a_m, dtype=float)
    beta_h_m = np.asarray(beta_h_m, dtype=float)
    if np.any(beta_a_m <= 0.0) or np.any(beta_h_m <= 0.0):
        raise ValueError("headways must be positive")
    alpha = np.asarray(autonomy_fraction, dtype=float)
    if np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise ValueError("autonomy fraction must lie in [0, 1]")
    mean_headway = alpha * beta_a_m + (1.0 - alpha) * beta_h_m
    return np.asarray(lanes, dtype=float) / mean_headway


def capacity(free_flow_speed_mps, crit_density):
    """Maximum sustainable flow (veh/s): speed times critical density."""
    return np.asarray(free_flow_speed_mps, dtype=float) * np.asarray(crit_density, dtype=float)


def sending_flow(count, length_m, free_flow_speed_mps, crit_density, jam_density):
    """Flow (veh/s) a link can discharge at its current vehicle count.

    Triangular-style diagram: linear in density up to the critical density,
    then decreasing to zero at jam density. Continuous at the critical point.
    """
    count = np.asarray(count, dtype=float)
    length_m = np.asarray(length_m, dtype=float)
    v = np.asarray(free_flow_speed_mps, dtype=float)
    n_c = np.asarray(crit_density, dtype=float)
    n_jam = np.asarray(jam_density, dtype=float)
    rho = count / length_m
    free = v * rho
    congested = v * n_c * (n_jam - rho) / (n_jam - n_c)
    flow = np.where(rho <= n_c, free, np.maximum(congested, 0.0))
    return np.where(rho > n_jam, 0.0, flow)


def congestion_state(density, crit_density):
    """0 when the link is in free flow (density <= critical), 1 otherwise."""
    return (np.asarray(density, dtype=float) > np.asarray(crit_density, dtype=float)).astype(int)


def link_latency(flow, congested, length_m, free_flow_speed_mps, crit_density, jam_density):
    """Traversal time (s) of a link given its flow and congestion state.

    Free flow: length / speed. Congested: grows with the flow deficit and
    equals the free-flow value exactly when flow sits at capacity. Capped at
    LATENCY_CAP_S because the congested branch diverges as flow vanishes.
    """
    flow = np.asarray(flow, dtype=float)
    congested = np.asarray(congested)
    d = np.asarray(length_m, dtype=float)
    v = np.asarray(free_flow_speed_mps, dtype=float)
    n_c = np.asarray(crit_density, dtype=float)
    n_jam = np.asarray(jam_density, dtype=float)
    free = d / v
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        jammed = d * (n_jam / flow + (n_c - n_jam) / (v * n_c))
    jammed = np.where(flow > 0.0, jammed, np.inf)
    out = np.where(congested > 0, np.minimum(jammed, LATENCY_CAP_S), free)
    return out


def path_latency(path_links, link_latencies) -> float:
    """Total latency (s) along a path: the sum over its links."""
    lat = np.asarray(link_latencies, dtype=float)
    return float(sum(lat[l] for l in path_links))
