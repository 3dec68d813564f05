"""Slow, independent reference computations used as test oracles.

Everything is recomputed from scratch by enumerating persons and pairs over
each inter-event segment, without the incremental bookkeeping used by the
package.
"""

import math

from netepi.core import EventKind


def _pair_classes(status, edges, n):
    """Connected and disconnected pair counts per class (0 HH, 1 HI, 2 II)."""
    on, off = [0, 0, 0], [0, 0, 0]
    for a in range(n):
        for b in range(a + 1, n):
            k = (status[a] == "I") + (status[b] == "I")
            if (a, b) in edges:
                on[k] += 1
            else:
                off[k] += 1
    return on, off


def naive_stats(g0, events, t_max, sis=False, external=None):
    """Dict of counts, exposures and log terms by brute force."""
    n = g0.n
    status = ["SIR"[int(s)] for s in g0.statuses]
    edges = set(g0.edges)
    out = dict(n_e=0, n_r=0, c=[0, 0, 0], d=[0, 0, 0], exp_si=0.0, exp_i=0.0, exp_s=0.0,
               exp_md=[0.0] * 3, exp_m=[0.0] * 3, log_nbr=0.0, log_class=0.0, nbr=[])
    last = g0.time

    def accumulate(dt):
        on, off = _pair_classes(status, edges, n)
        si = sum(1 for a, b in edges if {status[a], status[b]} == {"S", "I"})
        out["exp_si"] += si * dt
        out["exp_i"] += status.count("I") * dt
        out["exp_s"] += status.count("S") * dt
        for k in range(3):
            out["exp_m"][k] += on[k] * dt
            out["exp_md"][k] += off[k] * dt

    for e in list(events) + [None]:
        t = t_max if e is None else e.time
        accumulate(t - last)
        last = t
        if e is None:
            break
        if e.kind is EventKind.INFECTION:
            k = sum(1 for q in range(n) if status[q] == "I" and tuple(sorted((q, e.p1))) in edges)
            out["n_e"] += 1
            out["nbr"].append(k)
            if k:
                out["log_nbr"] += math.log(k)
            status[e.p1] = "I"
        elif e.kind is EventKind.RECOVERY:
            out["n_r"] += 1
            status[e.p1] = "S" if sis else "R"
        else:
            on, off = _pair_classes(status, edges, n)
            k = (status[e.p1] == "I") + (status[e.p2] == "I")
            if e.kind is EventKind.LINK_ON:
                out["c"][k] += 1
                out["log_class"] += math.log(off[k])
                edges.add(e.pair)
            else:
                out["d"][k] += 1
                out["log_class"] += math.log(on[k])
                edges.discard(e.pair)
    return out


def naive_loglik(g0, events, t_max, params, sis=False, include_class_term=True):
    """Sum of log event densities minus the integrated total hazard."""
    s = naive_stats(g0, events, t_max, sis=sis)
    ll = 0.0
    for count, rate in [(s["n_e"], params.beta), (s["n_r"], params.gamma)] + [
        (s["c"][k], params.alpha[k]) for k in range(3)
    ] + [(s["d"][k], params.omega[k]) for k in range(3)]:
        if count:
            ll += count * math.log(rate)
    ll += s["log_nbr"] + (s["log_class"] if include_class_term else 0.0)
    ll -= params.beta * s["exp_si"] + params.gamma * s["exp_i"]
    ll -= sum(params.alpha[k] * s["exp_md"][k] + params.omega[k] * s["exp_m"][k] for k in range(3))
    return ll


def mp_loglik_terms(stats, values):
    """Rate-dependent part of the closed or open log-likelihood in mpmath.

    ``values`` maps parameter names to mpf. With ``xi`` present the infection
    term is the open-population one.
    """
    import mpmath as mp

    ll = mp.mpf(0)
    ce = stats.counts_and_exposures()
    for name, (k, e) in ce.items():
        if name == "beta" and "xi" in values:
            continue
        x = values[name]
        ll += (k * mp.log(x) if k else 0) - x * mp.mpf(e)
    if "xi" in values:
        b, xi = values["beta"], values["xi"]
        for k in stats.nbr_counts:
            ll += mp.log(b * k + xi)
        ll -= b * mp.mpf(stats.exp_si) + xi * mp.mpf(stats.exp_s)
    return ll
