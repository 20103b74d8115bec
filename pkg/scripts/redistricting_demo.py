#!/usr/bin/env python3
"""End-to-end redistricting walkthrough on a synthetic precinct grid.

Generates a cols x rows precinct map (random features and populations,
rook adjacency) with four plans:

  base    column bands, ``districts`` equal slices
  shift   one boundary precinct moved to the neighboring district
  noisy   base with resampled district labels on a few boundary precincts
  bands2  row bands instead of column bands

then drives the installed CLI: pairwise plan comparison, the full plan
distance matrix, and complete-linkage clustering.  All inputs and outputs
land under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from fsfgw.cli import main as fsfgw_main

logger = logging.getLogger("redistricting_demo")


def grid_edges(cols: int, rows: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return edges


def write_map(out: Path, rng: np.random.Generator, cols: int, rows: int, d: int):
    P = cols * rows
    ids = [f"p{i:03d}" for i in range(P)]
    features = rng.normal(0.0, 1.0, size=(P, d))
    # Give the left half a feature shift so suppression weights have
    # something geographic to find.
    features[np.arange(P) % cols < cols // 2, 0] += 1.5
    population = rng.integers(50, 150, size=P)

    with (out / "nodes.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precinct_id", "population"] + [f"v{r}" for r in range(d)])
        for i, pid in enumerate(ids):
            writer.writerow([pid, int(population[i])] + [repr(float(v)) for v in features[i]])
    with (out / "edges.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precinct_id_a", "precinct_id_b"])
        for a, b in grid_edges(cols, rows):
            writer.writerow([ids[a], ids[b]])
    return ids


def write_plan(out: Path, name: str, ids: list[str], assignment: np.ndarray) -> Path:
    path = out / f"plan_{name}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precinct_id", "district"])
        for pid, label in zip(ids, assignment):
            writer.writerow([pid, int(label)])
    return path


def make_plans(rng: np.random.Generator, cols: int, rows: int, districts: int):
    P = cols * rows
    col_band = np.array([(i % cols) * districts // cols + 1 for i in range(P)])
    row_band = np.array([(i // cols) * districts // rows + 1 for i in range(P)])

    shift = col_band.copy()
    # Move the top precinct of the last column of district 1 into district 2.
    boundary = max(i for i in range(cols) if col_band[i] == 1)
    shift[boundary] = 2

    noisy = col_band.copy()
    interior = [
        i for i in range(P)
        if 0 < i % cols < cols - 1 and col_band[i] != col_band[i + 1]
    ]
    for i in rng.choice(interior, size=min(3, len(interior)), replace=False):
        noisy[i] = col_band[i + 1]

    return {"base": col_band, "shift": shift, "noisy": noisy, "bands2": row_band}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="redistrict_out", help="output directory")
    parser.add_argument("--cols", type=int, default=6)
    parser.add_argument("--rows", type=int, default=5)
    parser.add_argument("--districts", type=int, default=3)
    parser.add_argument("--features", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    ids = write_map(out, rng, args.cols, args.rows, args.features)
    plans = make_plans(rng, args.cols, args.rows, args.districts)
    paths = {name: write_plan(out, name, ids, labels) for name, labels in plans.items()}
    nodes, edges = str(out / "nodes.csv"), str(out / "edges.csv")

    logger.info("--- compare base vs shift ---")
    rc = fsfgw_main([
        "redistrict", "compare", nodes, edges, str(paths["base"]), str(paths["shift"]),
        "--mode", "lasso", "--lambda", "0.05", "--out", str(out / "compare"),
    ])
    if rc != 0:
        return rc

    logger.info("--- distance matrix over all plans ---")
    rc = fsfgw_main([
        "redistrict", "matrix", nodes, edges, *map(str, paths.values()),
        "--mode", "lasso", "--lambda", "0.05", "--out", str(out / "matrix"),
    ])
    if rc != 0:
        return rc

    logger.info("--- complete-linkage clustering ---")
    rc = fsfgw_main([
        "redistrict", "cluster", nodes, edges, *map(str, paths.values()),
        "--mode", "lasso", "--lambda", "0.05", "--out", str(out / "cluster"),
    ])
    if rc != 0:
        return rc

    logger.info("inputs and results under %s", out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
