"""Spectral and energy efficiency against converter resolution.

More bits buy spectral efficiency with diminishing returns, while converter
power grows exponentially in the bit count. The energy efficiency therefore
peaks at a moderate resolution. Full duplex roughly doubles the sum rate
once the ADCs are fine enough to resolve the uplink under the residual
self-interference.

Run:  python demos/04_bits_and_energy.py [trials]
"""

import sys

from fdquant.energy import default_power_model, total_power
from fdquant.harness import SweepSpec, run_sweep, summarize
from fdquant.scenario import desk_defaults

print(__doc__.split("Run:")[0])
trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10

base = desk_defaults()
pm = default_power_model()
spec = SweepSpec(axis="bits", values=tuple(range(1, 13)), algorithms=("proposed-fd", "proposed-hd"),
                 trials=trials, base=base)
summary = {(s.axis, s.algo): s for s in summarize(run_sweep(spec, workers=2))}

print(f"{trials} channel draws per point, {base.n_tx} antennas, {base.k_dl}+{base.k_ul} users\n")
print(f"{'b':>3} {'FD SE':>8} {'HD SE':>8} {'P_AP [W]':>9} {'FD EE':>8}")
for b in range(1, 13):
    fd, hd = summary[(b, "proposed-fd")], summary[(b, "proposed-hd")]
    p_ap, _ = total_power(base.with_bits(b), pm)
    print(f"{b:3d} {fd.se_mean:8.2f} {hd.se_mean:8.2f} {p_ap:9.2f} {fd.ee_mean:8.3f}")

best = max(range(1, 13), key=lambda b: summary[(b, "proposed-fd")].ee_mean)
print(f"\nFull-duplex energy efficiency peaks at {best} bits.")
print("The same sweep from the command line, written to CSV:")
print("  fdquant sweep --axis bits --values 1:12 --trials 50 --out bits.csv")
