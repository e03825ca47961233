"""Short BER sweep of ODDM and OTFS over an EVA channel with MP detection.

Run with ``python demos/ber_sweep.py``. About ten seconds.
"""

from oddm.harness import ExperimentSpec, run
from oddm.params import GridParams, SimConfig

cfg = SimConfig(
    GridParams(M=32, N=8, Q=4, oversample=4, cp_len=3),
    speed_kmh=120.0,
    snr_db=(0.0, 6.0, 12.0, 18.0),
    trials=20,
    seed=5,
)
res = run(ExperimentSpec("ber", cfg))
print(f"{'SNR dB':>7} {'scheme':>8} {'BER':>10} {'95% interval':>24}")
for pt in sorted(res.detail.points, key=lambda q: (q.snr_db, q.scheme)):
    print(f"{pt.snr_db:7.1f} {pt.scheme:>8} {pt.ber:10.2e}   [{pt.ci_low:.2e}, {pt.ci_high:.2e}]")
print("sweep", "passes" if res.passed else "fails", "the monotonicity and ODDM-vs-OTFS checks")
