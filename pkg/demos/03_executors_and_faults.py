"""
Three executors, one answer; worker loss is retried
===================================================
"""

import logging

from capx import corpus
from capx.cnn import gen_random_weights
from capx.engine import FaultPolicy, host_slots, run_batch


def main():
    logging.basicConfig(level=logging.WARNING)
    frames = corpus.generate_corpus(seed=7, count=12, width=480, height=270)
    model = gen_random_weights(seed=3)
    slots = max(host_slots(), 4)
    print("host slots:", host_slots(), "using", slots)

    signatures = {}
    for kind in ("serial", "master_slave", "worker_per_core"):
        results, stats = run_batch(kind, frames, model, slots=slots)
        signatures[kind] = [r.signature() for r in results]
        print(f"{kind:>16}: workers={stats.workers} total={stats.total_s:.2f}s "
              f"mean density={sum(r.density for r in results) / len(results):.4f}")
    print("identical results:", len({tuple(s) for s in signatures.values()}) == 1)

    # kill the worker on the first attempt of roughly a third of the tasks
    results, stats = run_batch("worker_per_core", frames, model, slots=slots, fault=FaultPolicy(0.3))
    print("attempts per frame:", stats.attempts)
    print("same as fault-free:", [r.signature() for r in results] == signatures["serial"])


if __name__ == "__main__":
    main()
