"""Design the prototype pulse and look at its ambiguity function.

Run with ``python demos/pulse_and_ambiguity.py``. Takes a second or two.
"""

import numpy as np

from oddm import GridParams, build_train, design_srrc, orthogonality_audit
from oddm.pulse import symbol_lag_correlation

p = GridParams(M=64, N=16, Q=8, oversample=4)

raw = design_srrc(p, 0.25, refine=False)
ref = design_srrc(p, 0.25)
print(f"grid: {p.M} x {p.N}, delay bin {p.delay_resolution * 1e9:.0f} ns, Doppler bin {p.doppler_resolution:.0f} Hz")
print(f"pulse: {len(ref.taps)} taps spanning +-{p.Q} delay bins, energy {np.sum(ref.taps**2) * p.dt:.6f} (1/N = {1 / p.N:.6f})")

# truncating the SRRC breaks Nyquist slightly; the refinement repairs it
for name, a in (("truncated", raw), ("refined", ref)):
    lag = np.max(np.abs(symbol_lag_correlation(a.taps, p.J)[1:])) / np.sum(a.taps**2)
    print(f"  {name:9s} worst symbol-lag correlation {lag:.1e}")

train = build_train(ref, p)
report = orthogonality_audit(train, p)
print(f"ambiguity at the origin: {abs(report.origin):.12f}")
print(f"largest sidelobe where pulses cannot wrap (|m| <= M - 2Q): {report.exact_max:.1e} at {report.exact_worst}")
print(f"largest sidelobe near the frame edge:                       {report.wrap_max:.1e} at {report.wrap_worst}")
