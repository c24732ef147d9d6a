"""
Execution time, %Faster and busy cores
======================================

A small version of the benchmark the CLI runs (``capx bench``). Core
counts above the host's slot count are refused, so on small machines
only the first points are measured.
"""

import json
import tempfile
from pathlib import Path

from capx import bench, corpus
from capx.cnn import gen_random_weights
from capx.engine import host_slots


def main():
    slots = host_slots()
    cores = [c for c in (1, 2, 4, 8) if c <= slots]
    frames = corpus.generate_corpus(seed=7, count=8, width=640, height=360)
    report = bench.speedup_curve(frames, cores, ["serial", "master_slave", "worker_per_core"],
                                 gen_random_weights(42))

    print(f"{'executor':>16} {'cores':>5} {'avg ET':>8} {'busy':>5}")
    for r in report.rows:
        print(f"{r.executor:>16} {r.cores:>5} {r.avg_et_s:8.4f} {r.busy_avg:5.2f}")
    for p in report.faster:
        print(f"{p['faster']} vs {p['slower']} @ {p['cores']}: {p['percent']:+.1f}%")
    print("single frame:", json.dumps(report.realtime))

    # %Faster from the reference per-frame times of 1.0, 0.25 and 0.22 s
    print("78%% check: %.0f" % bench.percent_faster(1.0, 0.22))
    print("12%% check: %.0f" % bench.percent_faster(0.25, 0.22))

    out = Path(tempfile.mkdtemp()) / "bench.csv"
    bench.write_report(report, out, fmt="csv")
    print(out.read_text())


if __name__ == "__main__":
    main()
