#!/usr/bin/env python3
"""Generate the bundled synthetic type-approval-style drive cycle.

Four phases (low / medium / high / extra-high, 1800 s total, 131 km/h top
speed) built from linear speed ramps sampled at 1 Hz. Urban phases repeat
hard launches near 1.8 m/s^2 so the high-torque/low-speed region carries
substantial energy; the mid phases hold 80 km/h long enough to form the
second energy hotspot; the extra-high phase undulates so its energy spreads
across speed bins. Deterministic by construction.
"""

import argparse

# (duration_s, target_kmh): linear ramp from the previous target.
SEGMENTS = [
    # phase 1: low
    (12, 0), (8, 52), (25, 52), (8, 10), (4, 0), (14, 0),
    (8, 52), (20, 52), (6, 25), (25, 25), (5, 57), (30, 57), (10, 0), (18, 0),
    (8, 52), (45, 52), (8, 20), (20, 20), (5, 52), (35, 52), (9, 0), (20, 0),
    (8, 50), (50, 50), (9, 0), (15, 0),
    (8, 52), (55, 52), (10, 0), (24, 0),
    (8, 48), (45, 48), (10, 0), (4, 0),
    # phase 2: medium
    (8, 52), (20, 52), (11, 80), (120, 80), (8, 60), (60, 60),
    (8, 80), (100, 80), (12, 30), (30, 30), (10, 0), (46, 0),
    # phase 3: high
    (8, 52), (10, 52), (11, 80), (130, 80), (8, 97), (60, 97),
    (8, 80), (120, 80), (14, 50), (20, 50), (10, 0), (56, 0),
    # phase 4: extra high
    (10, 60), (15, 90), (20, 110), (25, 125), (15, 131),
    (20, 118), (20, 130), (25, 112), (20, 128), (40, 100),
    (15, 115), (30, 90), (35, 70), (18, 0), (15, 0),
]


def build_profile():
    speeds = [0.0]
    v = 0.0
    for duration, target in SEGMENTS:
        for k in range(1, duration + 1):
            speeds.append(v + (target - v) * k / duration)
        v = float(target)
    return speeds


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="data/cycles/wltp_like.csv")
    args = parser.parse_args()

    speeds = build_profile()
    with open(args.out, "w", encoding="ascii", newline="\n") as f:
        f.write("time_s,speed_kmh\n")
        for t, v in enumerate(speeds):
            f.write(f"{t},{v:.3f}\n")
    total = len(speeds) - 1
    dist = sum((speeds[i] + speeds[i + 1]) / 7.2 for i in range(total)) / 1000.0
    print(f"{args.out}: {total} s, {max(speeds):.1f} km/h top, {dist:.1f} km")


if __name__ == "__main__":
    main()
