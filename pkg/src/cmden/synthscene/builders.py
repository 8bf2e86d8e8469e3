"""Ready-made scenes used by tests, the demo and the acceptance checks."""

import logging
from typing import Optional, Sequence

import numpy as np

from cmden.errors import InvalidInputError
from cmden.synthscene.spec import PlaneSpec, SceneSpec, TextureSpec

logger = logging.getLogger(__name__)

# Highest texture frequency in cycles per pixel at the plane's own depth.
MAX_PIXEL_FREQUENCY = 0.04


def _world_frequency(pixel_frequency: float, focal: float, depth: float) -> float:
    return pixel_frequency * focal / depth


def _lateral_path(frames: int, baseline: float, first: int = 0) -> list[list[float]]:
    """Camera moving along +x by ``baseline`` per frame (camera_from_world params)."""
    return [[0.0, 0.0, 0.0, -(k - first) * baseline, 0.0, 0.0] for k in range(frames)]


def _camera(size: tuple[int, int]) -> dict:
    height, width = size
    focal = float(width)
    return {"fx": focal, "fy": focal, "cx": (width - 1) / 2, "cy": (height - 1) / 2}


def make_textured_plane_scene(
    depth: float = 2.0,
    baseline: float = 0.05,
    size: tuple[int, int] = (64, 64),
    frames: int = 2,
    channels: int = 3,
    seed: int = 0,
    min_depth: float = 0.1,
    max_depth: float = 100.0,
) -> SceneSpec:
    """One fronto-parallel textured plane seen by a laterally translating camera."""
    rng = np.random.default_rng(seed)
    camera = _camera(size)
    texture = TextureSpec.random(
        rng, _world_frequency(MAX_PIXEL_FREQUENCY, camera["fx"], depth), channels=channels
    )
    plane = PlaneSpec(normal=(0.0, 0.0, 1.0), offset=depth, texture=texture)
    return SceneSpec(
        planes=[plane],
        camera_path=_lateral_path(frames, baseline),
        height=size[0],
        width=size[1],
        channels=channels,
        min_depth=min_depth,
        max_depth=max_depth,
        seed=seed,
        **camera,
    )


def make_three_band_scene(
    intervals: Sequence[tuple[float, float]] = ((0.0, 30.0), (30.0, 60.0), (60.0, 80.0)),
    size: tuple[int, int] = (48, 64),
    frames: int = 9,
    baseline: float = 0.5,
    channels: int = 3,
    seed: int = 0,
    noise_std: float = 0.0,
    min_depth: float = 10.0,
    max_depth: float = 100.0,
    target_index: Optional[int] = None,
) -> SceneSpec:
    """Horizontal fronto-parallel bands, one per depth interval, far band on top.

    Each band sits at its interval's midpoint and covers an equal share of
    the target frame's rows. The camera translates sideways only, so band
    rows never move and no band occludes another.

    Args:
        intervals: ``(alpha, beta)`` depth intervals, nearest first.
        size: ``(height, width)`` in pixels.
        frames: Sequence length; the camera path is centred on ``target_index``.
        baseline: Camera translation per frame along x.
        channels: Color channels.
        seed: Texture and noise seed.
        noise_std: Per-frame sensor noise.
        min_depth: Scene lower depth bound.
        max_depth: Scene upper depth bound.
        target_index: Frame at the path origin, ``frames // 2`` by default.

    Raises:
        InvalidInputError: If there are fewer bands than rows allow or an
            interval is inverted.
    """
    intervals = [(float(a), float(b)) for a, b in intervals]
    height, width = size
    if not intervals:
        raise InvalidInputError("at least one depth interval is required")
    if len(intervals) > height:
        raise InvalidInputError(f"{len(intervals)} bands do not fit in {height} rows")
    for a, b in intervals:
        if not 0 <= a < b:
            raise InvalidInputError(f"interval [{a}, {b}) is empty or negative")
    if target_index is None:
        target_index = frames // 2

    rng = np.random.default_rng(seed)
    camera = _camera(size)
    depths = [(a + b) / 2 for a, b in intervals]
    # Far band first (top rows).
    order = list(range(len(intervals)))[::-1]
    edges = np.linspace(0, height, len(order) + 1).round().astype(int)

    planes = []
    for position, band in enumerate(order):
        depth = depths[band]
        top, bottom = edges[position], edges[position + 1]
        # Boundaries sit at half-pixel rows so no pixel centre lies on one.
        v_min = None if position == 0 else (top - 0.5 - camera["cy"]) * depth / camera["fy"]
        v_max = None
        if position < len(order) - 1:
            v_max = (bottom - 0.5 - camera["cy"]) * depth / camera["fy"]
        texture = TextureSpec.random(
            rng, _world_frequency(MAX_PIXEL_FREQUENCY, camera["fx"], depth), channels=channels
        )
        planes.append(
            PlaneSpec(
                normal=(0.0, 0.0, 1.0),
                offset=depth,
                texture=texture,
                extent=(None, None, v_min, v_max),
            )
        )
    logger.debug(f"Three-band scene: depths {depths}, row edges {edges.tolist()}")
    return SceneSpec(
        planes=planes,
        camera_path=_lateral_path(frames, baseline, first=target_index),
        height=height,
        width=width,
        channels=channels,
        noise_std=noise_std,
        min_depth=min_depth,
        max_depth=max_depth,
        seed=seed,
        **camera,
    )


def make_moving_patch_scene(
    size: tuple[int, int] = (48, 48),
    frames: int = 3,
    background_depth: float = 10.0,
    patch_depth: float = 5.0,
    patch_size: float = 0.4,
    baseline: float = 0.4,
    channels: int = 3,
    seed: int = 0,
) -> SceneSpec:
    """Static textured background plus a square patch travelling with the camera.

    The patch keeps its image position in every frame, which is exactly the
    situation the auto-mask is meant to reject. ``patch_size`` is the patch
    side as a fraction of the image width.
    """
    rng = np.random.default_rng(seed)
    camera = _camera(size)
    target_index = frames // 2
    path = _lateral_path(frames, baseline, first=target_index)
    half = 0.5 * patch_size * size[1] * patch_depth / camera["fx"]
    background = PlaneSpec(
        normal=(0.0, 0.0, 1.0),
        offset=background_depth,
        texture=TextureSpec.random(
            rng, _world_frequency(MAX_PIXEL_FREQUENCY, camera["fx"], background_depth), channels
        ),
    )
    patch = PlaneSpec(
        normal=(0.0, 0.0, 1.0),
        offset=patch_depth,
        texture=TextureSpec.random(
            rng, _world_frequency(MAX_PIXEL_FREQUENCY, camera["fx"], patch_depth), channels
        ),
        extent=(-half, half, -half, half),
        # camera_from_world translation is minus the camera centre
        motion=[(-params[3], -params[4], -params[5]) for params in path],
    )
    return SceneSpec(
        planes=[background, patch],
        camera_path=path,
        height=size[0],
        width=size[1],
        channels=channels,
        seed=seed,
        min_depth=0.1,
        max_depth=100.0,
        **camera,
    )


def box_planes(
    center: Sequence[float],
    dimensions: Sequence[float],
    texture: TextureSpec,
) -> list[PlaneSpec]:
    """Six bounded planes forming an axis-aligned box.

    Each face's extent is computed in that face's own texture coordinates.
    """
    c = np.asarray(center, dtype=np.float64)
    half = 0.5 * np.asarray(dimensions, dtype=np.float64)
    if c.shape != (3,) or half.shape != (3,) or np.any(half <= 0):
        raise InvalidInputError(f"box needs a 3-vector centre and positive sizes, got {dimensions}")

    faces = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            offset = float(normal @ c + half[axis])
            others = [k for k in range(3) if k != axis]
            corners = []
            for s0 in (-1.0, 1.0):
                for s1 in (-1.0, 1.0):
                    corner = c.copy()
                    corner[axis] += sign * half[axis]
                    corner[others[0]] += s0 * half[others[0]]
                    corner[others[1]] += s1 * half[others[1]]
                    corners.append(corner)
            plane = PlaneSpec(normal=tuple(normal), offset=offset, texture=texture)
            origin, e_u, e_v = plane.basis()
            local = np.asarray(corners) - origin
            us, vs = local @ e_u, local @ e_v
            faces.append(
                plane.model_copy(
                    update={
                        "extent": (
                            float(us.min()),
                            float(us.max()),
                            float(vs.min()),
                            float(vs.max()),
                        )
                    }
                )
            )
    return faces
