"""Dataset layout: split files, frame triplets, intrinsics and frame export."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from cmden.dataio.images import read_depth_png, read_image, write_depth_preview
from cmden.dataio.pfm import read_pfm, write_pfm
from cmden.errors import FormatError, InvalidInputError
from cmden.geometry.camera import CameraIntrinsics
from cmden.imaging.grid import ImageGrid
from cmden.synthscene.render import render_frame
from cmden.synthscene.spec import SceneSpec

logger = logging.getLogger(__name__)

FRAME_DIGITS = 10
SIDE_DIRECTORIES = {"l": "image_02", "r": "image_03"}


def kitti_intrinsics(
    width: int,
    height: int,
    focal_list: Sequence[float],
    source_width: Optional[int] = None,
) -> CameraIntrinsics:
    """Shared intrinsics for a KITTI-style sequence.

    The focal length is the mean over all calibrated cameras, rescaled from
    ``source_width`` to ``width`` when given; the principal point is the
    image centre.
    """
    focals = [float(f) for f in focal_list]
    if not focals:
        raise InvalidInputError("focal_list must not be empty")
    focal = float(np.mean(focals))
    if source_width is not None:
        if source_width < 1:
            raise InvalidInputError(f"source_width must be positive, got {source_width}")
        focal *= width / source_width
    return CameraIntrinsics(
        fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height
    )


@dataclass(frozen=True)
class SplitEntry:
    """One line of a split file: sequence folder, frame index and optional camera side."""

    folder: str
    frame_index: int
    side: Optional[str] = None

    def image_path(self, root: Path, offset: int = 0, suffix: str = ".png") -> Path:
        directory = SIDE_DIRECTORIES.get(self.side or "l", "image_02")
        name = f"{self.frame_index + offset:0{FRAME_DIGITS}d}{suffix}"
        return Path(root) / self.folder / directory / "data" / name


def read_split_file(path: Union[str, Path]) -> list[SplitEntry]:
    """Parse a split file; blank lines and ``#`` comments are ignored.

    Raises:
        FormatError: On a line without a folder and an integer frame index.
    """
    path = Path(path)
    entries = []
    for number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise FormatError(f"{path}:{number}: expected 'folder index [side]', got {raw!r}")
        try:
            index = int(parts[1])
        except ValueError as e:
            raise FormatError(f"{path}:{number}: frame index {parts[1]!r} is not an integer") from e
        side = parts[2] if len(parts) == 3 else None
        if side is not None and side not in SIDE_DIRECTORIES:
            raise FormatError(f"{path}:{number}: unknown camera side {side!r}")
        entries.append(SplitEntry(folder=parts[0], frame_index=index, side=side))
    logger.debug(f"Read {len(entries)} entries from {path}")
    return entries


def read_frame(path: Union[str, Path]) -> ImageGrid:
    """Read a frame from PFM or any 8-bit image format pillow opens."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return ImageGrid(read_pfm(path).astype(np.float64))
    return read_image(path)


@dataclass
class FrameTriplet:
    """A target frame plus temporally offset sources sharing one camera."""

    target: Path
    sources: dict[int, Path]
    intrinsics: CameraIntrinsics
    name: str = ""

    def __post_init__(self) -> None:
        self.target = Path(self.target)
        self.sources = {int(k): Path(v) for k, v in self.sources.items()}
        if not self.sources:
            raise InvalidInputError("a frame triplet needs at least one source frame")
        if 0 in self.sources:
            raise InvalidInputError("source offsets must be nonzero")

    @property
    def offsets(self) -> list[int]:
        return sorted(self.sources)

    @classmethod
    def from_split_entry(
        cls,
        root: Union[str, Path],
        entry: SplitEntry,
        intrinsics: CameraIntrinsics,
        offsets: Sequence[int] = (-1, 1),
        suffix: str = ".png",
    ) -> "FrameTriplet":
        return cls(
            target=entry.image_path(Path(root), 0, suffix),
            sources={k: entry.image_path(Path(root), k, suffix) for k in offsets},
            intrinsics=intrinsics,
            name=f"{entry.folder}/{entry.frame_index:0{FRAME_DIGITS}d}",
        )

    def load(self) -> tuple[ImageGrid, dict[int, ImageGrid]]:
        """Read every frame and check that all match the intrinsics' size.

        Raises:
            FormatError: If a frame has different dimensions.
        """
        target = read_frame(self.target)
        expected = self.intrinsics.shape
        frames = {}
        for offset, path in sorted(self.sources.items()):
            frames[offset] = read_frame(path)
        for path, image in [(self.target, target)] + [
            (self.sources[k], frames[k]) for k in frames
        ]:
            if image.shape != expected:
                raise FormatError(f"{path}: frame size {image.shape} does not match {expected}")
        return target, frames


@dataclass
class ExportedFrame:
    index: int
    image: Path
    depth: Path
    preview: Path

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "image": str(self.image),
            "depth": str(self.depth),
            "preview": str(self.preview),
        }


@dataclass
class ExportManifest:
    frames: list[ExportedFrame] = field(default_factory=list)

    @property
    def paths(self) -> list[Path]:
        return [p for f in self.frames for p in (f.image, f.depth, f.preview)]


def write_mask_pfm(path: Union[str, Path], mask: np.ndarray) -> Path:
    """Store a boolean mask as a 0/1 single-channel PFM."""
    return write_pfm(path, np.asarray(mask, dtype=bool).astype(np.float32))


def read_mask_pfm(path: Union[str, Path]) -> np.ndarray:
    """Inverse of :func:`write_mask_pfm`; any value other than 0 or 1 is a format error."""
    data = read_pfm(path)
    if data.ndim != 2 or not np.all((data == 0) | (data == 1)):
        raise FormatError(f"{path}: not a 0/1 single-channel mask")
    return data.astype(bool)


def export_frames(spec: SceneSpec, out_dir: Union[str, Path]) -> ExportManifest:
    """Render every frame of a synthetic scene to ``out_dir``.

    Writes ``frame_XXX.pfm`` (image), ``depth_XXX.pfm`` and
    ``depth_XXX.png`` (preview) per frame.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = ExportManifest()
    for index in range(spec.frame_count):
        frame = render_frame(spec, index)
        image = frame.image.data.astype(np.float32)
        image_path = write_pfm(out_dir / f"frame_{index:03d}.pfm", image)
        depth_path = write_pfm(out_dir / f"depth_{index:03d}.pfm", frame.depth.astype(np.float32))
        preview_path = write_depth_preview(out_dir / f"depth_{index:03d}.png", frame.depth)
        manifest.frames.append(ExportedFrame(index, image_path, depth_path, preview_path))
    logger.info(f"Exported {spec.frame_count} frames to {out_dir}")
    return manifest


def read_depth_map(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Read ``(depth, valid)`` from a single-channel PFM or a 16-bit depth PNG.

    PFM pixels are valid where the depth is positive.
    """
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        depth = read_pfm(path).astype(np.float64)
        if depth.ndim != 2:
            raise FormatError(f"{path}: depth maps must have one channel")
        return depth, depth > 0
    return read_depth_png(path)
