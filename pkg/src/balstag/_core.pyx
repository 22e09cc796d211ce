# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: schedule event sweep and bottleneck queue recursion."""
import numpy as np

cimport numpy as cnp
from libc.math cimport pow
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue
from libcpp.vector cimport vector

cnp.import_array()

ctypedef pair[double, pair[long, long]] Event


cdef inline double _delay(int kind, double tau, long f, double alpha, double beta, double gamma,
                          const double[:, :] slopes, const double[:, :] thresholds, long a) nogil:
    cdef double best = 0.0, acc = 0.0
    cdef Py_ssize_t k
    if f == 0:
        return 0.0
    if kind == 0:
        return tau * alpha * (pow((f + beta) / tau, gamma) - pow(beta / tau, gamma))
    for k in range(slopes.shape[1]):
        acc += slopes[a, k] * (f - thresholds[a, k])
        if acc > best:
            best = acc
    return best


def construct_schedule(route_arcs, offsets, starts, present, nominal,
                       int kind, double alpha, double beta, double gamma,
                       slopes, thresholds, double eps):
    cdef const long[:] arcs = np.ascontiguousarray(route_arcs, dtype=np.int64)
    cdef const long[:] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:] s = np.ascontiguousarray(starts, dtype=np.float64)
    cdef const unsigned char[:] pres = np.ascontiguousarray(present, dtype=np.uint8)
    cdef const double[:] taus = np.ascontiguousarray(nominal, dtype=np.float64)
    cdef const double[:, :] sl = np.ascontiguousarray(slopes, dtype=np.float64)
    cdef const double[:, :] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t total = arcs.shape[0]
    cdef Py_ssize_t n_trips = offs.shape[0] - 1
    dep_a = np.zeros(total)
    arr_a = np.zeros(total)
    flow_a = np.zeros(total, dtype=np.int64)
    delay_a = np.zeros(total)
    cdef double[:] dep = dep_a
    cdef double[:] arr = arr_a
    cdef long[:] flow = flow_a
    cdef double[:] dly = delay_a

    cdef long max_arc = 0
    cdef Py_ssize_t i
    for i in range(total):
        if arcs[i] > max_arc:
            max_arc = arcs[i]
    # max-heaps on negated keys give (time, trip, position) ascending order
    cdef priority_queue[Event] queue
    cdef vector[priority_queue[double]] on_arc
    on_arc.resize(max_arc + 1)
    cdef long r, pos, idx, a, f
    cdef double theta, omega, tau, d, limit
    cdef Event ev
    with nogil:
        for r in range(n_trips):
            if pres[r] and offs[r + 1] > offs[r]:
                queue.push(Event(-s[r], pair[long, long](-r, 0)))
        while not queue.empty():
            ev = queue.top()
            queue.pop()
            theta = -ev.first
            r = -ev.second.first
            pos = ev.second.second
            idx = offs[r] + pos
            a = arcs[idx]
            limit = theta + eps
            while not on_arc[a].empty() and -on_arc[a].top() <= limit:
                on_arc[a].pop()
            f = on_arc[a].size()
            tau = taus[a]
            d = _delay(kind, tau, f, alpha, beta, gamma, sl, th, a)
            omega = theta + tau + d
            on_arc[a].push(-omega)
            dep[idx] = theta
            arr[idx] = omega
            flow[idx] = f
            dly[idx] = d
            if idx + 1 < offs[r + 1]:
                queue.push(Event(-omega, pair[long, long](-r, pos + 1)))
    return dep_a, arr_a, flow_a, delay_a


def simulate_bottleneck(interarrivals, double tau):
    cdef const double[:] gaps = np.ascontiguousarray(interarrivals, dtype=np.float64)
    cdef Py_ssize_t n = gaps.shape[0]
    travel_a = np.empty(n)
    seen_a = np.empty(n, dtype=np.int64)
    departures_a = np.empty(n)
    cdef double[:] travel = travel_a
    cdef long[:] seen = seen_a
    cdef double[:] departures = departures_a
    cdef double t = 0.0, last = -1e300, begin
    cdef Py_ssize_t i, j = 0
    with nogil:
        for i in range(n):
            t += gaps[i]
            while j < i and departures[j] <= t:
                j += 1
            seen[i] = i - j
            begin = t if t > last else last
            last = begin + tau
            departures[i] = last
            travel[i] = last - t
    return travel_a, seen_a
