#!/usr/bin/env python3
"""Generate the demo 6-axis arm (URDF + OBJ box meshes) under data/demo_arm."""

import argparse
import math
from pathlib import Path

# name, boxes [(size xyz, center xyz)], joint to next link (axis, offset z, lower, upper)
LINKS = [
    ("base", [((0.20, 0.20, 0.10), (0.0, 0.0, 0.05))], ("z", 0.10, -0.9 * math.pi, 0.9 * math.pi)),
    ("link1", [((0.12, 0.12, 0.15), (0.0, 0.0, 0.075))], ("y", 0.15, -1.0, 1.0)),
    ("link2", [((0.08, 0.10, 0.40), (0.0, 0.0, 0.20))], ("y", 0.40, -1.8, 1.8)),
    ("link3", [((0.07, 0.06, 0.35), (0.0, 0.0, 0.175)), ((0.03, 0.03, 0.05), (0.05, 0.0, 0.20))],
     ("z", 0.35, -math.pi, math.pi)),
    ("link4", [((0.06, 0.06, 0.10), (0.0, 0.0, 0.05))], ("y", 0.10, -1.8, 1.8)),
    ("link5", [((0.05, 0.07, 0.08), (0.0, 0.0, 0.04))], ("z", 0.08, -math.pi, math.pi)),
    ("link6", [((0.08, 0.04, 0.02), (0.0, 0.0, 0.01))], None),
]

AXES = {"x": "1 0 0", "y": "0 1 0", "z": "0 0 1"}

# Outward-facing (counter-clockwise seen from outside) quads of a unit cube.
CUBE_FACES = [
    (0, 3, 2, 1), (4, 5, 6, 7),  # -z, +z
    (0, 1, 5, 4), (2, 3, 7, 6),  # -y, +y
    (1, 2, 6, 5), (0, 4, 7, 3),  # +x, -x
]


def box_obj(boxes):
    lines, offset = [], 0
    for size, center in boxes:
        hx, hy, hz = (s / 2 for s in size)
        cx, cy, cz = center
        for z in (-hz, hz):
            for x, y in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
                lines.append(f"v {cx + x:.6f} {cy + y:.6f} {cz + z:.6f}")
        for a, b, c, d in CUBE_FACES:
            a, b, c, d = (i + offset + 1 for i in (a, b, c, d))
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
        offset += 8
    return "\n".join(lines) + "\n"


def urdf():
    out = ['<?xml version="1.0"?>', '<robot name="demo_arm">']
    for name, _, _ in LINKS:
        out += [
            f'  <link name="{name}">',
            "    <visual>",
            '      <origin xyz="0 0 0" rpy="0 0 0"/>',
            f'      <geometry><mesh filename="package://demo_arm/meshes/{name}.obj"/></geometry>',
            "    </visual>",
            "  </link>",
        ]
    for i, (name, _, joint) in enumerate(LINKS):
        if joint is None:
            continue
        axis, z, lo, hi = joint
        child = LINKS[i + 1][0]
        out += [
            f'  <joint name="j{i + 1}" type="revolute">',
            f'    <parent link="{name}"/>',
            f'    <child link="{child}"/>',
            f'    <origin xyz="0 0 {z:.3f}" rpy="0 0 0"/>',
            f'    <axis xyz="{AXES[axis]}"/>',
            f'    <limit lower="{lo:.6f}" upper="{hi:.6f}" effort="10" velocity="1"/>',
            "  </joint>",
        ]
    out.append("</robot>")
    return "\n".join(out) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "demo_arm")
    args = parser.parse_args()
    (args.out / "meshes").mkdir(parents=True, exist_ok=True)
    for name, boxes, _ in LINKS:
        (args.out / "meshes" / f"{name}.obj").write_text(box_obj(boxes))
    (args.out / "demo_arm.urdf").write_text(urdf())


if __name__ == "__main__":
    main()
