"""Event-loop kernels, jitted.

Everything stateful lives in plain arrays so the loops compile under
numba with nogil, letting replicas run on real threads:

* a splitmix64 stream for reproducible, seed-splittable randomness;
* a power-of-two segment tree over per-site event weights, giving
  O(log N) sampling and updates.  Parent nodes are always recomputed as
  ``left + right`` (never patched by a delta), so an incremental update
  and a full rebuild agree bit for bit;
* the main kinetic Monte Carlo loop and its two-copy coupled variant.

Weights are w_k = 2 N^2 g(occ_k) / divisor_k: both jump directions at
diffusive speed-up, with the defect divisor folded in per site.
"""

import numpy as np
from numba import njit, uint64

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(uint64(uint64), cache=True, nogil=True, inline="always")
def _mix(s):
    z = s
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    state = state + _GOLDEN
    return state, _mix(state)


@njit(cache=True, nogil=True, inline="always")
def _u01(z):
    # 53-bit mantissa draw in [0, 1)
    return float(z >> _U64(11)) * _INV53


def seed_state(seed: int) -> np.uint64:
    """Initial stream state for a seed; replica r uses seed ^ r upstream.

    One warm-up mix (same arithmetic as the jitted stream, done in plain
    ints) so nearby seeds decorrelate immediately.
    """
    m = 0xFFFFFFFFFFFFFFFF
    z = (int(seed) + 0x9E3779B97F4A7C15) & m
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & m
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & m
    return _U64(z ^ (z >> 31))


@njit(cache=True, nogil=True, inline="always")
def _g_eval(kind, alpha, gtable, tail_a, tail_b, n):
    if n < gtable.shape[0]:
        return gtable[n]
    x = float(n)
    if kind == 0:
        return x**alpha
    if kind == 1:
        return x / (x + 1.0)
    if kind == 2:
        return 1.0  # 1 - 2**-n is exactly 1.0 in double this far out
    return tail_a + tail_b * x


@njit(cache=True, nogil=True, inline="always")
def _site_weight(occ, k, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2):
    return two_n2 * _g_eval(kind, alpha, gtable, tail_a, tail_b, occ[k]) / divisors[k]


@njit(cache=True, nogil=True, inline="always")
def _tree_set(tree, cap, k, value):
    i = cap + k
    tree[i] = value
    i >>= 1
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i >>= 1


@njit(cache=True, nogil=True)
def tree_build(tree, cap, leaves):
    tree[:] = 0.0
    tree[cap : cap + leaves.shape[0]] = leaves
    for i in range(cap - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]


@njit(cache=True, nogil=True, inline="always")
def _tree_sample(tree, cap, target):
    i = 1
    while i < cap:
        left = tree[2 * i]
        if target < left:
            i = 2 * i
        else:
            target -= left
            i = 2 * i + 1
    k = i - cap
    if tree[i] <= 0.0:
        # float round-off pushed the walk onto an empty leaf; back up
        while k > 0 and tree[cap + k] <= 0.0:
            k -= 1
    return k


@njit(cache=True, nogil=True)
def run_until(
    occ, tree, cap, divisors, kind, alpha, gtable, tail_a, tail_b,
    two_n2, t, t_target, max_events, rng_state,
    log_t, log_site, log_dir,
):
    """Advance the chain until t_target or max_events, whichever first.

    Returns (t, events_done, rng_state, absorbed).  The clock is only set
    to t_target when the *next* waiting time would overshoot it; the
    occupancies stay those of the last executed event.  If the log arrays
    are nonempty the first len(log_t) events are recorded as
    (event time, source site, direction).
    """
    n_sites = occ.shape[0]
    events = np.int64(0)
    log_cap = log_t.shape[0]
    absorbed = False
    while events < max_events:
        total = tree[1]
        if total <= 0.0:
            absorbed = True
            t = t_target
            break
        rng_state, z = _next_u64(rng_state)
        dt = -np.log(1.0 - _u01(z)) / total
        if t + dt > t_target:
            t = t_target
            break
        t = t + dt
        rng_state, z = _next_u64(rng_state)
        k = _tree_sample(tree, cap, _u01(z) * total)
        rng_state, z = _next_u64(rng_state)
        if z & _U64(1):
            kk = k + 1 if k + 1 < n_sites else 0
            step_dir = np.int8(1)
        else:
            kk = k - 1 if k > 0 else n_sites - 1
            step_dir = np.int8(-1)
        occ[k] -= 1
        occ[kk] += 1
        _tree_set(tree, cap, k,
                  _site_weight(occ, k, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2))
        _tree_set(tree, cap, kk,
                  _site_weight(occ, kk, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2))
        if events < log_cap:
            log_t[events] = t
            log_site[events] = k
            log_dir[events] = step_dir
        events += 1
    return t, events, rng_state, absorbed


@njit(cache=True, nogil=True)
def leaves_from_occ(occ, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2):
    n = occ.shape[0]
    out = np.empty(n)
    for k in range(n):
        out[k] = _site_weight(occ, k, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2)
    return out


@njit(cache=True, nogil=True)
def coupled_run(
    occ_lo, occ_hi, tree, cap, divisors, kind, alpha, gtable, tail_a, tail_b,
    two_n2, t, t_target, max_events, rng_state,
):
    """Basic coupling of an ordered pair occ_lo <= occ_hi (sitewise).

    One clock runs at the rates of the larger copy; at each event both
    copies jump together with probability g(lo)/g(hi), otherwise only the
    larger one moves.  Returns (t, events, rng_state, first_violation):
    first_violation is -1 when the sitewise order held at every event,
    otherwise the index of the offending event.
    """
    n_sites = occ_lo.shape[0]
    events = np.int64(0)
    violation = np.int64(-1)
    while events < max_events:
        total = tree[1]
        if total <= 0.0:
            t = t_target
            break
        rng_state, z = _next_u64(rng_state)
        dt = -np.log(1.0 - _u01(z)) / total
        if t + dt > t_target:
            t = t_target
            break
        t = t + dt
        rng_state, z = _next_u64(rng_state)
        k = _tree_sample(tree, cap, _u01(z) * total)
        rng_state, z = _next_u64(rng_state)
        if z & _U64(1):
            kk = k + 1 if k + 1 < n_sites else 0
        else:
            kk = k - 1 if k > 0 else n_sites - 1
        g_hi = _g_eval(kind, alpha, gtable, tail_a, tail_b, occ_hi[k])
        g_lo = _g_eval(kind, alpha, gtable, tail_a, tail_b, occ_lo[k])
        rng_state, z = _next_u64(rng_state)
        both = _u01(z) * g_hi < g_lo
        occ_hi[k] -= 1
        occ_hi[kk] += 1
        if both:
            occ_lo[k] -= 1
            occ_lo[kk] += 1
        _tree_set(tree, cap, k,
                  _site_weight(occ_hi, k, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2))
        _tree_set(tree, cap, kk,
                  _site_weight(occ_hi, kk, divisors, kind, alpha, gtable, tail_a, tail_b, two_n2))
        events += 1
        if occ_lo[k] > occ_hi[k] or occ_lo[kk] > occ_hi[kk]:
            violation = events - 1
            break
    return t, events, rng_state, violation


_EMPTY_F8 = np.empty(0, dtype=np.float64)
_EMPTY_I8 = np.empty(0, dtype=np.int64)
_EMPTY_D = np.empty(0, dtype=np.int8)


def no_log():
    return _EMPTY_F8, _EMPTY_I8, _EMPTY_D
