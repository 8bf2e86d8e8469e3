"""Exact ray casting of procedural scenes.

Images are shaded from the analytic texture at each ray's hit point, so a
rendered frame carries no resampling error. Depth is the camera-frame z of
the nearest hit.
"""

import logging
from dataclasses import dataclass

import numpy as np

from cmden.errors import InvalidInputError
from cmden.geometry.camera import pixel_grid
from cmden.geometry.pose import PoseSE3
from cmden.geometry.pose import relative_pose as pose_between
from cmden.imaging.grid import ImageGrid
from cmden.synthscene.spec import SceneSpec

logger = logging.getLogger(__name__)

NO_SURFACE = -1
# Relative depth agreement required for a point to count as the visible hit.
DEPTH_MATCH_TOLERANCE = 1e-6


@dataclass
class RayHits:
    """Nearest intersection per ray; misses carry ``inf`` depth and ``NO_SURFACE``."""

    depth: np.ndarray
    surface: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def missed(self) -> np.ndarray:
        return self.surface == NO_SURFACE


@dataclass
class RenderedFrame:
    index: int
    image: ImageGrid
    depth: np.ndarray
    surface: np.ndarray


def _check_index(spec: SceneSpec, index: int) -> None:
    if not 0 <= index < spec.frame_count:
        raise InvalidInputError(f"frame index {index} outside [0, {spec.frame_count})")


def cast_rays(spec: SceneSpec, index: int, xs: np.ndarray, ys: np.ndarray) -> RayHits:
    """Intersect the rays through continuous pixel coordinates with every plane."""
    _check_index(spec, index)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    pose = spec.camera_pose(index)
    rays = np.stack(
        [(xs - spec.cx) / spec.fx, (ys - spec.cy) / spec.fy, np.ones_like(xs)], axis=-1
    )

    depth = np.full(xs.shape, np.inf)
    surface = np.full(xs.shape, NO_SURFACE, dtype=np.int64)
    u = np.zeros(xs.shape)
    v = np.zeros(xs.shape)
    for k, plane in enumerate(spec.planes):
        normal = np.asarray(plane.normal)
        shift = plane.displacement(index)
        # In the camera frame the plane is n_c . Y = offset + n . shift + n_c . t.
        normal_cam = pose.rotation @ normal
        rhs = plane.offset + normal @ shift + normal_cam @ pose.translation
        denom = rays @ normal_cam
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(np.abs(denom) > 1e-12, rhs / denom, np.inf)
        hit = np.isfinite(z) & (z > 0)

        points_cam = np.where(hit, z, 0.0)[..., None] * rays
        points_world = np.einsum("ji,...j->...i", pose.rotation, points_cam - pose.translation)
        origin, e_u, e_v = plane.basis()
        local = np.where(hit[..., None], points_world - shift - origin, 0.0)
        pu = local @ e_u
        pv = local @ e_v
        if plane.extent is not None:
            u_min, u_max, v_min, v_max = plane.extent
            if u_min is not None:
                hit &= pu >= u_min
            if u_max is not None:
                hit &= pu < u_max
            if v_min is not None:
                hit &= pv >= v_min
            if v_max is not None:
                hit &= pv < v_max

        closer = hit & (z < depth)
        depth = np.where(closer, z, depth)
        surface = np.where(closer, k, surface)
        u = np.where(closer, pu, u)
        v = np.where(closer, pv, v)
    return RayHits(depth=depth, surface=surface, u=u, v=v)


def _shade(spec: SceneSpec, hits: RayHits) -> np.ndarray:
    image = np.zeros(hits.depth.shape + (spec.channels,))
    for k, plane in enumerate(spec.planes):
        on_plane = hits.surface == k
        if np.any(on_plane):
            image[on_plane] = plane.texture.evaluate(hits.u[on_plane], hits.v[on_plane])
    return image


def render_at(
    spec: SceneSpec, index: int, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free color and depth at arbitrary continuous pixel coordinates.

    Raises:
        InvalidInputError: If any ray misses every plane.
    """
    hits = cast_rays(spec, index, xs, ys)
    if np.any(hits.missed):
        raise InvalidInputError(
            f"{int(hits.missed.sum())} rays of frame {index} escape the scene"
        )
    return _shade(spec, hits), hits.depth


def render_frame(spec: SceneSpec, index: int) -> RenderedFrame:
    """Render one frame with its depth and per-pixel surface index.

    Raises:
        InvalidInputError: If a ray escapes or a depth leaves the scene bounds.
    """
    xs, ys = pixel_grid(spec.height, spec.width)
    hits = cast_rays(spec, index, xs, ys)
    if np.any(hits.missed):
        raise InvalidInputError(
            f"{int(hits.missed.sum())} rays of frame {index} escape the scene"
        )
    if hits.depth.min() < spec.min_depth or hits.depth.max() > spec.max_depth:
        raise InvalidInputError(
            f"frame {index} depth range [{hits.depth.min():.4g}, {hits.depth.max():.4g}] "
            f"leaves scene bounds [{spec.min_depth}, {spec.max_depth}]"
        )
    image = _shade(spec, hits)
    if spec.noise_std > 0:
        rng = np.random.default_rng([spec.seed, index])
        image = np.clip(image + rng.normal(0.0, spec.noise_std, size=image.shape), 0.0, 1.0)
    return RenderedFrame(index=index, image=ImageGrid(image), depth=hits.depth, surface=hits.surface)


def render(spec: SceneSpec, pose_index: int) -> tuple[ImageGrid, np.ndarray]:
    """Image and ground-truth depth of frame ``pose_index``."""
    frame = render_frame(spec, pose_index)
    return frame.image, frame.depth


def relative_pose(spec: SceneSpec, i: int, j: int) -> PoseSE3:
    """Transform from frame ``i``'s camera into frame ``j``'s camera."""
    _check_index(spec, i)
    _check_index(spec, j)
    return pose_between(spec.camera_pose(i), spec.camera_pose(j))


def visibility_mask(spec: SceneSpec, i: int, j: int) -> np.ndarray:
    """Pixels of frame ``i`` that frame ``j`` sees unoccluded.

    A pixel qualifies when its surface point projects inside frame ``j`` in
    front of the camera, is the nearest hit there, its surface is static
    between the two frames, and all four lattice neighbours of the
    projection show the same surface.
    """
    xs, ys = pixel_grid(spec.height, spec.width)
    hits_i = cast_rays(spec, i, xs, ys)
    pose = relative_pose(spec, i, j)
    rays = np.stack(
        [(xs - spec.cx) / spec.fx, (ys - spec.cy) / spec.fy, np.ones_like(xs)], axis=-1
    )
    depth_i = np.where(hits_i.missed, 1.0, hits_i.depth)
    points_j = pose.apply(depth_i[..., None] * rays)
    z_j = points_j[..., 2]
    front = ~hits_i.missed & (z_j > 0)
    safe_z = np.where(front, z_j, 1.0)
    px = spec.fx * points_j[..., 0] / safe_z + spec.cx
    py = spec.fy * points_j[..., 1] / safe_z + spec.cy
    inside = front & (px >= 0) & (px <= spec.width - 1) & (py >= 0) & (py <= spec.height - 1)

    px = np.where(inside, px, 0.0)
    py = np.where(inside, py, 0.0)
    hits_j = cast_rays(spec, j, px, py)
    same_hit = (hits_j.surface == hits_i.surface) & (
        np.abs(hits_j.depth - z_j) <= DEPTH_MATCH_TOLERANCE * np.abs(z_j)
    )

    static = np.zeros(xs.shape, dtype=bool)
    for k, plane in enumerate(spec.planes):
        if plane.is_static_between(i, j):
            static |= hits_i.surface == k

    surface_j = render_surfaces(spec, j)
    x0 = np.clip(np.floor(px), 0, spec.width - 2).astype(np.intp)
    y0 = np.clip(np.floor(py), 0, spec.height - 2).astype(np.intp)
    support = np.ones(xs.shape, dtype=bool)
    for dy in (0, 1):
        for dx in (0, 1):
            support &= surface_j[y0 + dy, x0 + dx] == hits_i.surface

    visible = inside & same_hit & static & support
    logger.debug(f"Frame {i} -> {j}: {visible.mean():.1%} of pixels visible")
    return visible


def render_surfaces(spec: SceneSpec, index: int) -> np.ndarray:
    """Surface index per pixel; ``NO_SURFACE`` where the ray escapes."""
    xs, ys = pixel_grid(spec.height, spec.width)
    return cast_rays(spec, index, xs, ys).surface
