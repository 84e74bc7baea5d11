"""The per-link transfer-time model, closed form vs event sampling.

A link is (one-way delay, rate, loss, retransmission chunk). The closed form
is delay + size*8/rate * 1/(1-loss); the sampler actually draws per-chunk
Bernoulli losses and retransmits, so with loss 0 the two agree bit for bit
and with loss > 0 the sampled mean converges to the closed form.
"""

import random
import statistics

from contbench.netem import LinkModel, sample_transfer_time, transfer_time

# The constrained uplink studied in the bundled benchmark: 150 ms RTT split
# 75 ms per direction, 15 kbit/s.
link = LinkModel(one_way_delay_s=0.075, rate_bps=15_000.0)
print("46875 B over 15 kbit/s + 75 ms:", transfer_time(46_875, link), "s (expect 25.075)")

rng = random.Random(0)
print("\nloss   closed-form   sampled-mean (10k transfers)")
for loss in (0.0, 0.1, 0.5):
    lossy = LinkModel(0.075, 15_000.0, loss=loss)
    expected = transfer_time(30_000, lossy)
    times = [sample_transfer_time(30_000, lossy, rng) for _ in range(10_000)]
    print(f"{loss:4.1f}   {expected:11.3f}   {statistics.fmean(times):11.3f}")

print("\nhigher bandwidth, shorter transfer:")
for rate in (15_000, 25_000, 100_000, 1_000_000):
    l = LinkModel(0.075, float(rate))
    print(f"  {rate:>9} bit/s -> {transfer_time(40_000, l):8.3f} s")
