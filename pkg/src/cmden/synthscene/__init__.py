"""Procedural scenes with exact ground-truth depth, poses and images."""

from cmden.synthscene.builders import (
    box_planes,
    make_moving_patch_scene,
    make_textured_plane_scene,
    make_three_band_scene,
)
from cmden.synthscene.render import (
    RenderedFrame,
    relative_pose,
    render,
    render_at,
    render_frame,
    visibility_mask,
)
from cmden.synthscene.spec import PlaneSpec, SceneSpec, TextureComponent, TextureSpec

__all__ = [
    "PlaneSpec",
    "RenderedFrame",
    "SceneSpec",
    "TextureComponent",
    "TextureSpec",
    "box_planes",
    "make_moving_patch_scene",
    "make_textured_plane_scene",
    "make_three_band_scene",
    "relative_pose",
    "render",
    "render_at",
    "render_frame",
    "visibility_mask",
]
