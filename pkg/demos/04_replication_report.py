"""Score an independent replication of a campaign.

One team runs the campaign on a small edge board and a first cloud machine;
a second team replays the same documents on faster hardware with a different
seed. Absolute numbers shift, but each metric's within-team treatment ratio
should survive — that is what the replication accuracy measures, with 1.0
meaning the ratio was preserved exactly. Alongside the score, each row gets
an ordering verdict: did both teams see the treatment difference point the
same way.
"""

import tempfile
from pathlib import Path

from contbench.campaign import build_default_pairing, run_campaign, standard_variants
from contbench.metrics import compare_runs

SAVANNA = Path(__file__).resolve().parent.parent / "experiments" / "savanna"

with tempfile.TemporaryDirectory() as td:
    root = Path(td)
    authors = run_campaign(SAVANNA, root / "authors", standard_variants(), seed=42)
    readers = run_campaign(
        SAVANNA,
        root / "readers",
        standard_variants(edge_profile="rpi4", cloud_profile="skylake"),
        seed=1234,
    )

    pairing = build_default_pairing(authors, readers)
    report = compare_runs(authors, readers, pairing)
    print("replication of the campaign on different hardware (rpi3/dahu -> rpi4/skylake):\n")
    print(report.render())
    print("\nquads (treatment means: cloud-centric, hybrid | replication same):")
    for row, cmp in report.per_metric.items():
        q = cmp.quad
        print(f"  {row:22} ({q.x1a:10.3f}, {q.x2a:10.3f} | {q.x1r:10.3f}, {q.x2r:10.3f}) {cmp.unit}")
