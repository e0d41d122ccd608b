"""
Paths in a street canyon
========================

Samples one traffic snapshot, picks the communicating car and traces the
line-of-sight and single-bounce paths from the roadside unit to its roof.
"""

from beamsim.channel import trace_paths
from beamsim.scene import (
    TrafficConfig,
    antenna_position,
    default_scene_template,
    sample_snapshot,
    select_communicating_vehicle,
)

template = default_scene_template()
scene = sample_snapshot(template, TrafficConfig(), seed=7)
kinds = [v.kind for v in scene.vehicles]
print(f"{len(kinds)} vehicles, {kinds.count('truck')} trucks")

cv = select_communicating_vehicle(scene, seed=7)
rx = antenna_position(cv)
print(f"communicating car at x = {rx[0]:.1f} m")

# Angles are world-frame (azimuth from +x toward +y, elevation up).
paths = trace_paths(scene, scene.infrastructure_position, rx)
print(paths.dump())

# The same car in an empty street sees the unobstructed geometry.
print()
print("empty street:")
print(trace_paths(template.empty(), template.infrastructure_position, rx).dump())
