"""Grid search for a criterion-4 configuration (temporary; not part of the
package)."""
import itertools
import warnings

import numpy as np

from phred import *
from phred.errors import PhredError

warnings.simplefilter("ignore")

results = []


def run(C0, T_snap, T, dt, om, stride, amp=1.0, channel=0, snap_dt=0.01):
    key = dict(C0=C0, T_snap=T_snap, T=T, dt=dt, om=om, stride=stride,
               amp=amp, channel=channel, snap_dt=snap_dt)
    try:
        sys1 = ladder_network(LadderParams(C0=C0))
        u_train = gaussian_pulse()
        u_test = sinusoid_signal(amplitude=amp, omega=om, m_in=2, channel=channel)
        cfg = IntegratorConfig(dt=dt)
        cfg_snap = IntegratorConfig(dt=snap_dt)
        snaps = collect_snapshots(sys1, u_train, (0, T_snap), cfg_snap, stride=stride)
        full_train = simulate(sys1, u_train, (0, T), cfg)
        full_test = simulate(sys1, u_test, (0, T), cfg)
        met = WeightedMetric(sys1.split_q)
        lin = linearize(sys1)
        h2_r, _ = h2eps_ph_bases(lin, 12)
        h2_h, _ = h2eps_ph_bases(lin, 6)
        pod_r = pod_ph_bases(snaps, 12)
        pod_h = pod_ph_bases(snaps, 6)
        hyb = hybrid_bases(pod_h, h2_h)
        out = {}
        for name, bas in [("pod", pod_r), ("h2", h2_r), ("hyb", hyb)]:
            red = project_ph(sys1, bas)
            for iname, u, full in [("train", u_train, full_train),
                                   ("test", u_test, full_test)]:
                tr = simulate_reduced(red, u, (0, T), cfg)
                em = error_metrics(full, tr, bas, met)
                out[(name, iname)] = em.avg_rel_output_error
        g_train = min(out[("pod", "train")], out[("h2", "train")]) / out[("hyb", "train")]
        g_test = min(out[("pod", "test")], out[("h2", "test")]) / out[("hyb", "test")]
        score = min(g_train, g_test)
        results.append((score, g_train, g_test, out[("hyb", "train")], key))
        print(f"score={score:6.3f} gtr={g_train:6.3f} gte={g_test:6.3f} "
              f"c0={C0*1e6:g} Ts={T_snap} T={T} om={om} amp={amp} ch={channel} "
              f"stride={stride} "
              f"pod_tr={out[('pod','train')]:.1e} h2_tr={out[('h2','train')]:.1e} "
              f"hyb_tr={out[('hyb','train')]:.1e} pod_te={out[('pod','test')]:.1e} "
              f"h2_te={out[('h2','test')]:.1e} hyb_te={out[('hyb','test')]:.1e}",
              flush=True)
    except PhredError as e:
        print(f"skip c0={C0*1e6:g} Ts={T_snap} stride={stride}: {type(e).__name__}", flush=True)


grid = []
for c0 in (0.8e-6, 1e-6, 1.3e-6, 1.6e-6, 2e-6, 3e-6):
    for t_snap, stride in ((20.0, 160), (20.0, 120), (20.0, 80), (10.0, 80),
                           (10.0, 40), (6.0, 40)):
        for om, amp, ch in ((0.7, 1.0, 0), (1.0, 1.0, 0), (0.5, 1.0, 0),
                            (0.7, 3.0, 0), (0.5, 1.0, 1)):
            grid.append(dict(C0=c0, T_snap=t_snap, T=max(t_snap, 20.0), dt=0.01,
                             om=om, stride=stride, amp=amp, channel=ch))

print(f"{len(grid)} configs", flush=True)
for g in grid:
    run(**g)

results.sort(reverse=True, key=lambda t: t[0])
print("\nTOP 12:")
for score, gtr, gte, hybtr, key in results[:12]:
    print(f"score={score:6.3f} gtr={gtr:6.3f} gte={gte:6.3f} hyb_tr={hybtr:.2e} {key}")
