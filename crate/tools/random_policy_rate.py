"""Monte-Carlo reference for the uniform-random policy on the bridge grid.

Simulates the slippery grid independently of the Rust code and reports the
fraction of steps whose next state keeps Euclidean distance >= 1.5 from
every unsafe cell, over runs of 100000 steps.

    python3 tools/random_policy_rate.py [layouts/bridge.map] [runs]
"""

import math
import sys

import numpy as np

MOVES = [(-1, 0), (1, 0), (0, 1), (0, -1), (0, 0)]  # left right up down stay


def load(path):
    rows = [line.rstrip("\n") for line in open(path) if line.strip()]
    h = len(rows)
    cells = {}
    for r, line in enumerate(rows):
        for x, ch in enumerate(line):
            cells[(x, h - 1 - r)] = ch
    return cells, len(rows[0]), h


def distribution(cell, action, w, h):
    x, y = cell
    inside = lambda c: 0 <= c[0] < w and 0 <= c[1] < h
    dx, dy = MOVES[action]
    intended = (x + dx, y + dy) if inside((x + dx, y + dy)) else cell
    hood = [c for c in [cell] + [(x + mx, y + my) for mx, my in MOVES[:4]] if inside(c)]
    probs = {intended: 0.85}
    for c in hood:
        probs[c] = probs.get(c, 0.0) + 0.15 / len(hood)
    return list(probs.items())


def run(cells, w, h, steps, seed, lb=1.5, cap=400):
    rng = np.random.default_rng(seed)
    unsafe = [c for c, ch in cells.items() if ch == "U"]
    safe_next = {
        c: all(math.hypot(c[0] - u[0], c[1] - u[1]) >= lb for u in unsafe) for c in cells
    }
    start = next(c for c, ch in cells.items() if ch == "S")
    table = {(c, a): distribution(c, a, w, h) for c in cells for a in range(5)}
    pos, t, ok = start, 0, 0
    for _ in range(steps):
        support = table[(pos, rng.integers(5))]
        u = rng.random()
        acc = 0.0
        for c, p in support:
            acc += p
            if u < acc:
                break
        pos = c
        t += 1
        ok += safe_next[pos]
        if cells[pos] in "UT" or t >= cap:
            pos, t = start, 0
    return ok / steps


def main():
    path = sys.argv[1] if len(sys.argv) > 1 else "layouts/bridge.map"
    runs = int(sys.argv[2]) if len(sys.argv) > 2 else 40
    cells, w, h = load(path)
    rates = np.array([run(cells, w, h, 100_000, seed) for seed in range(runs)])
    print(f"mean {rates.mean():.5f} std {rates.std(ddof=1):.5f} over {runs} runs of 100000 steps")


if __name__ == "__main__":
    main()
