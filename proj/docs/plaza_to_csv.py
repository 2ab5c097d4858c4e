#!/usr/bin/env python3
"""Convert a Plaza-style range-only log into the spectral_slam CSV layout.

Best effort: the public release ships MATLAB structs (GT, DR, TD, TL) and the
column meanings below are our reading of them. Pass either a .mat file
(needs scipy) or a directory holding whitespace or comma separated text files
GT.txt, DR.txt, TD.txt and TL.txt.

  GT  time, x, y, theta            ground-truth pose
  DR  time, distance, heading turn odometry increments
  TD  time, robot id, beacon id, range
  TL  beacon id, x, y              surveyed beacon positions
"""

import argparse
import csv
import math
import os
import sys


def load_text(directory, name):
    for ext in (".txt", ".csv", ""):
        path = os.path.join(directory, name + ext)
        if os.path.exists(path):
            rows = []
            with open(path) as f:
                for line in f:
                    parts = line.replace(",", " ").split()
                    if not parts:
                        continue
                    try:
                        rows.append([float(p) for p in parts])
                    except ValueError:
                        continue  # header or comment
            return rows
    return None


def load_mat(path):
    try:
        from scipy.io import loadmat
    except ImportError:
        sys.exit("reading .mat files needs scipy; export the arrays as text instead")
    m = loadmat(path)
    return {k: (m[k].tolist() if k in m else None) for k in ("GT", "DR", "TD", "TL")}


def fmt(x):
    # repr gives the shortest text that round-trips; drop a trailing ".0".
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def write(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", help=".mat file or directory of text arrays")
    ap.add_argument("out", help="output dataset directory")
    ap.add_argument("--anchors", type=int, default=4, help="beacons copied to anchors.csv (0 for none)")
    ap.add_argument("--time-offset", type=float, default=None,
                    help="subtract this from all times (default: first odometry time)")
    args = ap.parse_args()

    if os.path.isdir(args.source):
        data = {k: load_text(args.source, k) for k in ("GT", "DR", "TD", "TL")}
    else:
        data = load_mat(args.source)
    if not data["TD"]:
        sys.exit("no range data (TD) found")
    os.makedirs(args.out, exist_ok=True)

    t0 = args.time_offset
    if t0 is None:
        t0 = data["DR"][0][0] if data["DR"] else min(r[0] for r in data["TD"])

    ranges = sorted((r[0] - t0, int(r[2]), r[3]) for r in data["TD"] if r[3] >= 0 and math.isfinite(r[3]))
    write(os.path.join(args.out, "ranges.csv"), "time_s,landmark_id,range_m",
          [(fmt(t), str(i), fmt(d)) for t, i, d in ranges])

    if data["DR"]:
        odo = sorted((r[0] - t0, r[1], r[2]) for r in data["DR"])
        write(os.path.join(args.out, "odometry.csv"), "time_s,v_m,omega_rad",
              [(fmt(t), fmt(v), fmt(w)) for t, v, w in odo])
    if data["GT"]:
        gt = sorted((r[0] - t0, r[1], r[2], r[3]) for r in data["GT"])
        write(os.path.join(args.out, "groundtruth.csv"), "time_s,x_m,y_m,theta_rad",
              [tuple(fmt(v) for v in r) for r in gt])
    if data["TL"]:
        seen = {int(r[2]) for r in data["TD"]}
        beacons = sorted((int(r[0]), r[1], r[2]) for r in data["TL"])
        rows = [(str(i), fmt(x), fmt(y)) for i, x, y in beacons]
        write(os.path.join(args.out, "landmarks.csv"), "landmark_id,x_m,y_m", rows)
        observed = [r for r in rows if int(r[0]) in seen]
        if args.anchors > 0:
            write(os.path.join(args.out, "anchors.csv"), "landmark_id,x_m,y_m", observed[: args.anchors])

    print(f"{len(ranges)} readings, {len(data['DR'] or [])} odometry steps written to {args.out}")


if __name__ == "__main__":
    main()
