"""Rigid SE(3) transforms with an axis-angle parameterization."""

from dataclasses import dataclass, field

import numpy as np

from cmden.errors import InvalidInputError

# Below this rotation angle the exponential switches to its Taylor expansion.
SMALL_ANGLE = 1e-8
ORTHONORMAL_TOLERANCE = 1e-6


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix ``[v]x`` with ``hat(v) @ w == cross(v, w)``."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` for a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues formula for the rotation with axis-angle vector ``omega``."""
    omega = np.asarray(omega, dtype=np.float64)
    theta = float(np.linalg.norm(omega))
    w = hat(omega)
    if theta < SMALL_ANGLE:
        return np.eye(3) + w + 0.5 * (w @ w)
    return (
        np.eye(3)
        + (np.sin(theta) / theta) * w
        + ((1.0 - np.cos(theta)) / theta**2) * (w @ w)
    )


def so3_log(rotation: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with angle in ``[0, pi]``."""
    cos_theta = np.clip((np.trace(rotation) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < SMALL_ANGLE:
        return vee(rotation - rotation.T) / 2.0
    if np.pi - theta < 1e-6:
        # sin(theta) vanishes; recover the axis from R + I = 2 n n^T instead.
        sym = (rotation + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(sym)))
        axis = sym[:, k] / np.sqrt(sym[k, k])
        axis /= np.linalg.norm(axis)
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * vee(rotation - rotation.T)


def rotation_jacobian(omega: np.ndarray) -> np.ndarray:
    """Derivatives of ``so3_exp(omega)`` with respect to each component.

    Returns:
        Array of shape ``(3, 3, 3)`` where entry ``[i]`` is ``dR/d omega_i``.
    """
    omega = np.asarray(omega, dtype=np.float64)
    theta_sq = float(omega @ omega)
    basis = np.eye(3)
    if np.sqrt(theta_sq) < SMALL_ANGLE:
        return np.stack([hat(basis[i]) for i in range(3)])
    rotation = so3_exp(omega)
    residual = np.eye(3) - rotation
    derivs = []
    for i in range(3):
        term = omega[i] * hat(omega) + hat(np.cross(omega, residual @ basis[i]))
        derivs.append(term @ rotation / theta_sq)
    return np.stack(derivs)


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``x -> rotation @ x + translation``.

    Camera path poses are camera-from-world extrinsics; relative poses map
    target-camera points into a source camera.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidInputError("pose contains non-finite values")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOLERANCE:
            raise InvalidInputError("rotation matrix is not orthonormal")
        if np.linalg.det(rotation) <= 0:
            raise InvalidInputError("rotation matrix must have determinant +1")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_params(cls, params: np.ndarray) -> "PoseSE3":
        return exp6(params)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "PoseSE3":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(rotation=matrix[:3, :3], translation=matrix[:3, 3])

    @property
    def params(self) -> np.ndarray:
        """6-vector ``(omega, translation)`` such that ``exp6(params) == self``."""
        return np.concatenate([so3_log(self.rotation), self.translation])

    @property
    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape ``(..., 3)``."""
        return np.einsum("ij,...j->...i", self.rotation, points) + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }


def exp6(params: np.ndarray) -> PoseSE3:
    """Build a pose from ``(omega, translation)``.

    The rotation is the axis-angle exponential of ``params[:3]`` and the
    translation is ``params[3:]`` taken as is.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape != (6,):
        raise InvalidInputError(f"pose params must have 6 entries, got {params.shape[0]}")
    if not np.all(np.isfinite(params)):
        raise InvalidInputError(f"pose params must be finite, got {params.tolist()}")
    return PoseSE3(rotation=so3_exp(params[:3]), translation=params[3:].copy())


def log6(pose: PoseSE3) -> np.ndarray:
    """Inverse of :func:`exp6`."""
    return pose.params


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """The transform applying ``b`` first and then ``a``."""
    return PoseSE3(
        rotation=a.rotation @ b.rotation,
        translation=a.rotation @ b.translation + a.translation,
    )


def invert(a: PoseSE3) -> PoseSE3:
    rotation_t = a.rotation.T
    return PoseSE3(rotation=rotation_t, translation=-(rotation_t @ a.translation))


def relative_pose(camera_from_world_target: PoseSE3, camera_from_world_source: PoseSE3) -> PoseSE3:
    """Transform taking target-camera points into the source camera."""
    return compose(camera_from_world_source, invert(camera_from_world_target))


def power(pose: PoseSE3, times: int) -> PoseSE3:
    """Compose a pose with itself ``times`` times (``times >= 1``)."""
    if times < 1:
        raise InvalidInputError(f"pose power must be >= 1, got {times}")
    result = pose
    for _ in range(times - 1):
        result = compose(pose, result)
    return result
