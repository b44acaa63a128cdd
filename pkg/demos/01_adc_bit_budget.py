"""How many ADC bits does a full-duplex receiver need?

A single-antenna access point transmits at P_D while receiving a weak
uplink signal. After analog cancellation, the residual self-interference
still dominates the ADC input, and the ADC's quantization noise scales with
the total input power, not with the wanted signal. This demo walks through
the closed-form budget.

Run:  python demos/01_adc_bit_budget.py
"""

import math

import numpy as np

from fdquant import adc_analysis as aa
from fdquant.scenario import dbm_to_watts, db_to_linear

print(__doc__.split("Run:")[0])

for p_dl, p_ul in ((24, 23), (30, 20)):
    p_ul_rx = dbm_to_watts(p_ul) * db_to_linear(-90)
    p_total = dbm_to_watts(p_dl) * db_to_linear(-60) + p_ul_rx
    b = aa.min_adc_bits(p_total, p_ul_rx)
    print(f"P_D = {p_dl} dBm, P_U = {p_ul} dBm, analog SIC 60 dB, path gain -90 dB:")
    print(f"  residual SI is {10 * math.log10(p_total / p_ul_rx - 1):.1f} dB above the UL signal")
    print(f"  the UL signal clears the quantization floor only with more than {b:.2f} bits\n")

print("The requirement grows by about half a bit for every 3 dB of extra SI.")
ratios_db = np.arange(10, 61, 10)
for r in ratios_db:
    b = aa.min_adc_bits(10 ** (r / 10) + 1.0, 1.0)
    print(f"  SI/UL = {r:2d} dB  ->  b > {b:5.2f}")

print("\nCan the ADC represent the whole input range at all? The dynamic range")
print("grows 6 dB per bit, exactly as fast as the range the input needs, so the")
print(f"margin is positive for every integer bit count above {aa.RESOLVABILITY_THRESHOLD:.4f}:")
op = aa.SisoOperatingPoint.from_db(30, 20, -90, -60)
for b in (1, 4, 8, 12):
    print(f"  b = {b:2d}: dynamic range {aa.dynamic_range_db(b):5.2f} dB, "
          f"margin {aa.resolvability_margin(op.with_bits(b)):5.2f} dB")

print("\nMonte-Carlo version with a randomly placed uplink user (10^4 drops):")
rows = aa.generate_table1(trials=10_000)
print(f"{'kappa_a':>8} {'P_D':>4} {'b':>2} {'eta [dBm]':>10} {'range [dB]':>11} {'DR [dB]':>8}")
for r in rows:
    if r.kappa_a_db == -60 and r.p_dl_dbm == 30:
        print(f"{r.kappa_a_db:8.0f} {r.p_dl_dbm:4.0f} {r.bits:2d} {r.eta_dbm:10.2f} {r.delta_db:11.2f} {r.dr_db:8.2f}")
print("\nThe same table is available from the command line: fdquant table1")
