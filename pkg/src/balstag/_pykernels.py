"""Pure-Python reference kernels. Same signatures as the compiled ``_core``."""
import heapq

import numpy as np


def _delay(kind, tau, f, alpha, beta, gamma, slopes_row, thresholds_row):
    if f == 0:
        return 0.0
    if kind == 0:
        return tau * alpha * (((f + beta) / tau) ** gamma - (beta / tau) ** gamma)
    best = 0.0
    acc = 0.0
    for mu, p in zip(slopes_row, thresholds_row):
        acc += mu * (f - p)
        if acc > best:
            best = acc
    return best


def construct_schedule(route_arcs, offsets, starts, present, nominal,
                       kind, alpha, beta, gamma, slopes, thresholds, eps):
    """Event sweep over trip-arc departures.

    Returns flat ``(dep, arr, flow, delay)`` arrays aligned with ``route_arcs``.
    """
    route_arcs = np.asarray(route_arcs, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    total = len(route_arcs)
    dep = np.zeros(total)
    arr = np.zeros(total)
    flow = np.zeros(total, dtype=np.int64)
    delay = np.zeros(total)
    slopes = np.asarray(slopes, dtype=np.float64).tolist()
    thresholds = np.asarray(thresholds, dtype=np.float64).tolist()
    arcs = route_arcs.tolist()
    offs = offsets.tolist()
    taus = np.asarray(nominal, dtype=np.float64).tolist()
    on_arc = {}
    queue = [(float(starts[r]), r, 0) for r in range(len(offs) - 1)
             if present[r] and offs[r + 1] > offs[r]]
    heapq.heapify(queue)
    dep_l, arr_l, flow_l, delay_l = [0.0] * total, [0.0] * total, [0] * total, [0.0] * total
    while queue:
        theta, r, pos = heapq.heappop(queue)
        idx = offs[r] + pos
        a = arcs[idx]
        h = on_arc.get(a)
        if h is None:
            h = on_arc[a] = []
        limit = theta + eps
        while h and h[0] <= limit:
            heapq.heappop(h)
        f = len(h)
        tau = taus[a]
        d = _delay(kind, tau, f, alpha, beta, gamma, slopes[a], thresholds[a])
        omega = theta + tau + d
        heapq.heappush(h, omega)
        dep_l[idx], arr_l[idx], flow_l[idx], delay_l[idx] = theta, omega, f, d
        if idx + 1 < offs[r + 1]:
            heapq.heappush(queue, (omega, r, pos + 1))
    dep[:] = dep_l
    arr[:] = arr_l
    flow[:] = flow_l
    delay[:] = delay_l
    return dep, arr, flow, delay


def simulate_bottleneck(interarrivals, tau):
    """Unit-capacity FIFO bottleneck with deterministic service ``tau``.

    Returns per-arrival ``(travel_time, trips_in_system_seen_at_arrival)``.
    """
    n = len(interarrivals)
    travel = np.empty(n)
    seen = np.empty(n, dtype=np.int64)
    departures = [0.0] * n
    t = 0.0
    last = -np.inf
    j = 0
    for i, gap in enumerate(np.asarray(interarrivals, dtype=np.float64).tolist()):
        t += gap
        while j < i and departures[j] <= t:
            j += 1
        seen[i] = i - j
        begin = t if t > last else last
        last = begin + tau
        departures[i] = last
        travel[i] = last - t
    return travel, seen
