"""Run the full benchmark campaign at desk scale and summarize it.

Four runs: {cloud-centric, hybrid} x {15 kbit, 25 kbit}, 100 repetitions
each, 30 s apart — 100 minutes of virtual time per run, a fraction of a
second of wall time on the simulated provider. The hybrid approach
compresses on the edge device before transmitting, so it wins exactly when
the saved transmission time outweighs the codec time; the gap shrinks as
bandwidth grows.
"""

import statistics
import tempfile
import time
from pathlib import Path

from contbench.campaign import campaign_runs, run_campaign, standard_variants
from contbench.engine import load_samples

SAVANNA = Path(__file__).resolve().parent.parent / "experiments" / "savanna"


def mean_of(run_dir: str, metric: str) -> float:
    return statistics.fmean(s.value for s in load_samples(run_dir) if s.metric == metric)


with tempfile.TemporaryDirectory() as td:
    started = time.monotonic()
    campaign = run_campaign(SAVANNA, Path(td) / "campaign", standard_variants(), seed=42)
    elapsed = time.monotonic() - started
    runs = campaign_runs(campaign)
    print(f"4 runs x 100 repetitions in {elapsed:.2f}s wall time\n")

    print("processing time (s), mean over 100 repetitions:")
    for group in ("15k", "25k"):
        cc = mean_of(runs[f"cloud_centric-{group}"]["path"], "processing_time_s")
        hy = mean_of(runs[f"hybrid-{group}"]["path"], "processing_time_s")
        bar_cc = "#" * round(cc)
        bar_hy = "#" * round(hy)
        print(f"  {group}  cloud-centric {cc:6.2f}  {bar_cc}")
        print(f"  {group}  hybrid        {hy:6.2f}  {bar_hy}")
        print(f"       gap {cc - hy:.2f} s")

    print("\nbytes sent to the cloud per image:")
    cc_b = mean_of(runs["cloud_centric-15k"]["path"], "bytes_to_cloud")
    hy_b = mean_of(runs["hybrid-15k"]["path"], "bytes_to_cloud")
    print(f"  cloud-centric {cc_b:8.0f} B")
    print(f"  hybrid        {hy_b:8.0f} B  (= {hy_b / cc_b:.2f} x, the compression ratio)")

    print("\nedge device resource model (means):")
    for metric, unit in (("cpu_pct", "%"), ("mem_gb", "GB")):
        cc_v = mean_of(runs["cloud_centric-15k"]["path"], metric)
        hy_v = mean_of(runs["hybrid-15k"]["path"], metric)
        print(f"  {metric:8} cloud-centric {cc_v:6.3f}{unit}   hybrid {hy_v:6.3f}{unit}")
