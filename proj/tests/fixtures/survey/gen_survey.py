#!/usr/bin/env python3
"""Builds the synthetic survey fixtures used by the analytics tests.

Cycle 2 hits fixed pooled tri-bin counts per construct and per
research-question group, with per-question means equal to the target means
below (rounded to two decimals). Cycle 3 hits fixed construct tri-bin counts.
Deterministic: rerunning rewrites identical files (the search takes a few
minutes).
"""
import pathlib
import random

HERE = pathlib.Path(__file__).resolve().parent

# group -> (neg, neu, pos), [(qid, target_mean)]
CYCLE2 = {
    "PE": ((9, 8, 95), [("Q1.1", 3.89), ("Q2.1", 4.11)]),
    "BE": ((22, 58, 199), [("Q3.1", 3.63), ("Q4.1", 3.93), ("Q5.1", 3.66),
                           ("Q6.1", 3.66), ("Q7.1", 3.98)]),
    "PR": ((13, 24, 130), [("Q8.1", 3.84), ("Q9.1", 3.53), ("Q10.1", 4.34)]),
    "RQ2": ((4, 10, 69), [("Q11.1", 3.82), ("Q12.1", 3.93), ("Q13.1", 4.04)]),
    "RQ3": ((9, 27, 179), [("Q14.1", 4.09), ("Q15.1", 3.83), ("Q16.1", 4.21),
                           ("Q17.1", 4.27), ("Q18.1", 4.00), ("Q19.1", 4.00),
                           ("Q20.1", 4.22), ("Q21.1", 3.85)]),
}

CYCLE3 = {
    "PE": (1, 4, 40, ["Q1.1", "Q2.1"]),
    "BE": (0, 5, 57, ["Q3.1", "Q4.1", "Q5.1", "Q6.1", "Q7.1"]),
    "PR": (3, 5, 37, ["Q8.1", "Q9.1", "Q10.1"]),
}


def split(total, parts):
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def hist_for(n_neg, n_neu, n_pos, target):
    """Pick (n1..n5) with the given bins whose mean rounds to target."""
    n = n_neg + n_neu + n_pos
    for ones in range(n_neg + 1):
        for fives in range(n_pos + 1):
            h = (ones, n_neg - ones, n_neu, n_pos - fives, fives)
            s = sum((i + 1) * c for i, c in enumerate(h))
            if round(s / n + 1e-12, 2) == target:
                return h
    return None


def solve_group(bins, questions, rng):
    """DP over questions: state = (neg, neu, total) consumed so far."""
    neg, neu, pos = bins
    total = neg + neu + pos
    k = len(questions)
    avg = total // k
    sizes = range(max(1, avg - 3), avg + 4)
    states = {(0, 0, 0): []}
    for qid, target in questions:
        nxt = {}
        keys = list(states)
        rng.shuffle(keys)
        for (a0, b0, t0) in keys:
            for n in sizes:
                for a in range(0, min(neg - a0, n) + 1):
                    for b in range(0, min(neu - b0, n - a) + 1):
                        key = (a0 + a, b0 + b, t0 + n)
                        if key in nxt or key[2] > total:
                            continue
                        h = hist_for(a, b, n - a - b, target)
                        if h is not None:
                            nxt[key] = states[(a0, b0, t0)] + [(qid, h)]
        states = nxt
    try:
        return states[(neg, neu, total)]
    except KeyError:
        raise SystemExit("no solution for group")


def emit(path, cycle, hists):
    rows = []
    for qid, h in hists:
        pid = 0
        for value, count in enumerate(h, start=1):
            for _ in range(count):
                pid += 1
                rows.append(f"c{cycle}-p{pid:03d},{qid},{value},{cycle}")
    path.write_text("participant_id,qid,value,cycle\n" + "\n".join(rows) + "\n")


def main():
    rng = random.Random(20201)
    hists = []
    for group, (bins, questions) in CYCLE2.items():
        hists += solve_group(bins, questions, rng)
    emit(HERE / "cycle2.csv", 2, hists)

    hists3 = []
    for group, (neg, neu, pos, qids) in CYCLE3.items():
        k = len(qids)
        for qid, a, b, c in zip(qids, split(neg, k), split(neu, k), split(pos, k)):
            hists3.append((qid, (a, 0, b, c, 0)))
    emit(HERE / "cycle3.csv", 3, hists3)


if __name__ == "__main__":
    main()
