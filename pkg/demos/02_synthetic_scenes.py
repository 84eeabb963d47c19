"""
Synthetic multi-agent scenes
============================

Generate windows of each motion kind, look at their contents, and save a
scatter plot of one scene as an SVG.
"""

import numpy as np

from trajgan.data import CLASS_NAMES, synth_scene
from trajgan.plots import scatter_svg

classes = ("pedestrian", "car", "bicyclist")

# one window per kind; jitter adds observation noise on every point
for kind in ("linear", "turn", "roundabout"):
    window = synth_scene(kind, 3, classes, seed=7, jitter=0.5)[0]
    speeds = np.linalg.norm(np.diff(window.points(), axis=1), axis=2).mean(axis=1)
    print(f"{kind:>10}: observed {window.observed.shape} "
          f"future {window.future.shape}")
    for i, ci in enumerate(window.class_indices):
        print(f"            agent {i} ({CLASS_NAMES[ci]}): "
              f"mean speed {speeds[i]:.2f} px/frame")

# classes move at different speeds, which is what the class-conditioned
# model is supposed to pick up on
window = synth_scene("turn", 3, classes, seed=7, jitter=0.0)[0]
points = [(x, y) for track in window.points() for x, y in track]
labels = []
for i, ci in enumerate(window.class_indices):
    labels.extend([CLASS_NAMES[ci] if t == 0 else "" for t in range(20)])

svg = scatter_svg(points, labels, title="turn scene, 3 agents")
with open("scene.svg", "w") as fh:
    fh.write(svg)
print("\nwrote scene.svg")
