"""Virtual RGB-D cameras: visibility-culled, noise-perturbed scene clouds.

Rendering combines two culling passes. Box-shaped geometry (trough,
occluders) blocks rays exactly via a vectorized slab test, so anything
behind a box is guaranteed absent regardless of sampling density. All
remaining samples inside the frustum and range band then go through an
angular z-buffer: the nearest sample per (azimuth, elevation) bin wins,
which handles curved-surface self-occlusion at cloud granularity without
ray tracing. Depth noise is applied along each surviving ray; dropout then
removes points independently. Both randomness streams derive from the
capture seed, so a capture is a pure function of (scene, camera, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ColoredPointCloud, RigidTransform, Vec3
from .scene import KIND_FRUIT, Scene, sample_surface_arrays


@dataclass(frozen=True)
class CameraModel:
    pose: RigidTransform          # camera frame -> base frame
    frame: str = "cam1"
    h_fov: float = math.radians(87.0)
    v_fov: float = math.radians(58.0)
    min_range: float = 0.15
    max_range: float = 2.0
    depth_noise_sigma: float = 0.002
    dropout_rate: float = 0.02
    bin_res: float = math.radians(0.3)   # angular z-buffer bin size

    def __post_init__(self):
        if not 0 < self.h_fov < math.pi or not 0 < self.v_fov < math.pi:
            raise ValueError("fields of view must lie in (0, pi)")
        if not 0 < self.min_range < self.max_range:
            raise ValueError("require 0 < min_range < max_range")
        if self.depth_noise_sigma < 0:
            raise ValueError("depth noise sigma must be >= 0")
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ValueError("dropout rate must be in [0, 1]")
        if self.bin_res <= 0:
            raise ValueError("bin resolution must be > 0")


@dataclass(frozen=True)
class CameraRig:
    cam1: CameraModel
    cam2: CameraModel

    def __post_init__(self):
        if self.cam1.frame != "cam1" or self.cam2.frame != "cam2":
            raise ValueError("rig cameras must be labeled cam1 and cam2")


def look_at_pose(eye: Vec3, target: Vec3, frame: str) -> RigidTransform:
    """Camera pose with +z pointing from eye toward target (z-forward convention)."""
    fwd = target.to_array() - eye.to_array()
    n = np.linalg.norm(fwd)
    if n == 0:
        raise ValueError("look_at target coincides with eye")
    z = fwd / n
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(z @ up)) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(z, up)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.stack([x, y, z], axis=1)
    return RigidTransform(rot, eye, source_frame=frame, target_frame="base")


def default_rig(depth_noise_sigma: float = 0.002, dropout_rate: float = 0.02) -> CameraRig:
    """Two-view arrangement: one camera facing the trough, one below looking up."""
    cam1 = CameraModel(
        pose=look_at_pose(Vec3(-0.05, 0.0, 0.45), Vec3(0.45, 0.0, 0.40), "cam1"),
        frame="cam1",
        depth_noise_sigma=depth_noise_sigma,
        dropout_rate=dropout_rate,
    )
    cam2 = CameraModel(
        pose=look_at_pose(Vec3(0.15, 0.0, 0.05), Vec3(0.42, 0.0, 0.40), "cam2"),
        frame="cam2",
        depth_noise_sigma=depth_noise_sigma,
        dropout_rate=dropout_rate,
    )
    return CameraRig(cam1=cam1, cam2=cam2)


def in_frustum(cam: CameraModel, p: Vec3) -> bool:
    """Frustum and range test for a single base-frame point (no occlusion)."""
    q = cam.pose.inverse().apply_to(p.to_array().reshape(1, 3))[0]
    if not cam.min_range <= q[2] <= cam.max_range:
        return False
    az = math.atan2(q[0], q[2])
    el = math.atan2(q[1], q[2])
    return abs(az) <= cam.h_fov / 2 and abs(el) <= cam.v_fov / 2


def _occluded_by_box(eye: np.ndarray, pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Mask of points whose eye->point segment crosses the box strictly
    before reaching the point (slab method; a point on the box's own
    surface is not occluded by it)."""
    d = pts - eye
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - eye) / d
        t1 = (hi - eye) / d
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    parallel = np.abs(d) < 1e-15
    outside = (eye < lo) | (eye > hi)
    tmin[parallel] = -np.inf
    tmax[parallel] = np.inf
    entry = tmin.max(axis=1)
    exit_ = tmax.min(axis=1)
    miss = (parallel & outside).any(axis=1)
    return (entry <= exit_) & (exit_ > 1e-9) & (entry < 1.0 - 1e-9) & ~miss


def capture(scene: Scene, cam: CameraModel, seed: int) -> ColoredPointCloud:
    """Render one camera view of the scene as a cloud in the camera frame.

    Output order follows the angular bin index, which is deterministic for
    a fixed (scene, cam, seed) triple.
    """
    batch = sample_surface_arrays(scene, scene.surface_density)
    detached = np.array([s.id for s in scene.strawberries if s.detached], dtype=np.int32)
    keep = np.ones(len(batch.xyz), dtype=bool)
    if len(detached):
        keep &= ~((batch.kind == KIND_FRUIT) & np.isin(batch.owner, detached))
    xyz = batch.xyz[keep]
    rgb = batch.rgb[keep]

    eye = cam.pose.translation.to_array()
    boxes = ([scene.trough] if scene.trough is not None else []) + list(scene.occluders)
    for box in boxes:
        if len(xyz) == 0:
            break
        blocked = _occluded_by_box(eye, xyz, box.min.to_array(), box.max.to_array())
        xyz = xyz[~blocked]
        rgb = rgb[~blocked]

    inv = cam.pose.inverse()
    q = inv.apply_to(xyz)
    z = q[:, 2]
    az = np.arctan2(q[:, 0], z)
    el = np.arctan2(q[:, 1], z)
    vis = (
        (z >= cam.min_range) & (z <= cam.max_range)
        & (np.abs(az) <= cam.h_fov / 2) & (np.abs(el) <= cam.v_fov / 2)
    )
    q = q[vis]
    rgb = rgb[vis]
    az = az[vis]
    el = el[vis]
    z = z[vis]

    if len(q) == 0:
        return ColoredPointCloud.empty(cam.frame)

    n_az = int(math.ceil(cam.h_fov / cam.bin_res)) + 1
    bi = np.floor((az + cam.h_fov / 2) / cam.bin_res).astype(np.int64)
    bj = np.floor((el + cam.v_fov / 2) / cam.bin_res).astype(np.int64)
    bins = bj * n_az + bi
    # nearest point per angular bin wins; ties resolve to the earliest sample
    order = np.lexsort((np.arange(len(bins)), z, bins))
    sorted_bins = bins[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_bins[1:] != sorted_bins[:-1]
    sel = order[first]
    q = q[sel]
    rgb = rgb[sel]

    ss = np.random.SeedSequence(seed)
    noise_rng, dropout_rng = (np.random.Generator(np.random.Philox(c)) for c in ss.spawn(2))

    ranges = np.linalg.norm(q, axis=1)
    dr = noise_rng.normal(0.0, 1.0, size=len(q)) * cam.depth_noise_sigma
    q = q * ((ranges + dr) / ranges)[:, None]

    u = dropout_rng.random(len(q))
    kept = u >= cam.dropout_rate
    return ColoredPointCloud(cam.frame, q[kept], rgb[kept])


def capture_rig(scene: Scene, rig: CameraRig, seed: int) -> tuple[ColoredPointCloud, ColoredPointCloud]:
    """Capture both cameras with independent noise streams derived from `seed`."""
    s1, s2 = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return capture(scene, rig.cam1, int(s1)), capture(scene, rig.cam2, int(s2))
