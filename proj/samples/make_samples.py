#!/usr/bin/env python3
"""Regenerates the sample datasets in this directory (deterministic)."""
import csv
import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))


def clip(x):
    return min(1.0, max(0.0, x))


def gender():
    rng = random.Random(20240601)
    rows = []
    for i in range(3000):
        g = "F" if rng.random() < 0.45 else "M"
        age = rng.randint(21, 68)
        income = round(rng.lognormvariate(10.4, 0.5))
        region = rng.choice(["north", "south", "east", "west"])
        u = rng.random()
        y = 1 if rng.random() < 0.15 + 0.7 * u else 0
        # scores for F run hot: same outcome model, inflated score
        s = u if g == "M" else 0.3 + 0.7 * u
        s = round(clip(s + rng.gauss(0, 0.03)), 3)
        rows.append([f"c{i:05d}", s, y, g, age, income, region])
    with open(os.path.join(HERE, "gender.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "score", "label", "gender", "age", "income", "region"])
        w.writerows(rows)


def blobs():
    rng = random.Random(7)
    centers = [(0, 0), (6, 0), (0, 6), (6, 6)]
    rows = []
    for i in range(500):
        c = i % 4
        x = rng.gauss(centers[c][0], 0.8)
        y = rng.gauss(centers[c][1], 0.8)
        u = rng.random()
        label = 1 if rng.random() < 0.2 + 0.6 * u else 0
        s = round(clip(0.08 * c + (1 - 0.08 * c) * u), 3)
        rows.append([f"p{i:03d}", s, label, round(x, 4), round(y, 4)])
    with open(os.path.join(HERE, "blobs.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "score", "label", "x", "y"])
        w.writerows(rows)


if __name__ == "__main__":
    gender()
    blobs()
