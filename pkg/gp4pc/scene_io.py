"""
Scene and result files: versioned JSON documents validated with pydantic.
"""
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .core_types import Correspondence, GeneralizedCamera, PinholeCamera, SimilarityTransform
from .errors import SceneFormatError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

Vector3 = List[float]
Matrix3 = List[List[float]]


def strict_json(value: Any) -> Any:
    """Copy of a JSON-like value with NaN and infinities replaced by None."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return value if np.isfinite(value) else None
    if isinstance(value, dict):
        return {key: strict_json(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [strict_json(item) for item in value]
    return value


def dumps_strict(payload: Any, **kwargs) -> str:
    """RFC 8259 JSON text; non-finite floats are written as null."""
    return json.dumps(strict_json(payload), indent=2, allow_nan=False, **kwargs)


def _reject_constant(name: str):
    raise SceneFormatError(f"non-standard JSON constant {name}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CameraModel(_Strict):
    """One pinhole camera of the rig, in rig coordinates."""
    center: Vector3 = Field(..., min_length=3, max_length=3, description="Pinhole position")
    orientation: Matrix3 = Field(..., min_length=3, max_length=3,
                                 description="Row-major 3x3 rotation, camera frame to rig frame")
    focal_length: float = Field(..., gt=0, description="Focal length in pixels")
    image_width: int = Field(..., gt=0, description="Image width in pixels")
    image_height: int = Field(..., gt=0, description="Image height in pixels")
    principal_point: Optional[List[float]] = Field(None, min_length=2, max_length=2,
                                                   description="Defaults to the image center")


class CorrespondenceModel(_Strict):
    world_point: Vector3 = Field(..., min_length=3, max_length=3, description="Point in world coordinates")
    camera_index: int = Field(..., ge=0, description="Index into cameras")
    pixel: List[float] = Field(..., min_length=2, max_length=2, description="Observed pixel (u, v)")


class SimilarityModel(_Strict):
    """World-to-rig map y = scale * rotation @ x + translation."""
    scale: float = Field(..., gt=0, description="Scale factor")
    rotation: Matrix3 = Field(..., min_length=3, max_length=3, description="Row-major 3x3 rotation")
    translation: Vector3 = Field(..., min_length=3, max_length=3, description="Translation")


class SceneFile(_Strict):
    version: Literal[1] = Field(FORMAT_VERSION, description="Format version")
    cameras: List[CameraModel] = Field(..., min_length=1, description="Cameras of the rig")
    correspondences: List[CorrespondenceModel] = Field(..., description="2D-3D correspondences")
    ground_truth: Optional[SimilarityModel] = Field(None, description="Known world-to-rig transform")
    inlier_mask: Optional[List[bool]] = Field(None, description="True for correspondences generated as inliers")


class Diagnostics(_Strict):
    variant: str = Field(..., description="Solver variant label")
    iterations: int = Field(..., description="RANSAC iterations run")
    best_path: str = Field(..., description="Solver path of the winning hypothesis")
    best_kind: str = Field(..., description="Hypothesis kind of the winning hypothesis")
    minimal_problems: int = Field(..., description="Minimal problems attempted")
    failed_problems: int = Field(..., description="Minimal problems without a hypothesis")
    hypotheses_scored: int = Field(..., description="Hypotheses scored")
    solutions_per_problem: float = Field(..., description="Mean hypotheses per solved minimal problem")
    solver_seconds: float = Field(..., description="Time spent in the minimal solver")
    total_seconds: float = Field(..., description="Total estimation time")


class ResultFile(_Strict):
    version: Literal[1] = Field(FORMAT_VERSION, description="Format version")
    transform: SimilarityModel = Field(..., description="Estimated world-to-rig similarity")
    inlier_indices: List[int] = Field(..., description="Indices of inlier correspondences")
    residuals: List[Optional[float]] = Field(
        ..., description="Reprojection error per correspondence (px); null for points behind their camera")
    diagnostics: Diagnostics


@dataclass(frozen=True)
class SceneDocument:
    rig: GeneralizedCamera
    correspondences: List[Correspondence]
    ground_truth: Optional[SimilarityTransform] = None
    inlier_mask: Optional[np.ndarray] = None


def similarity_to_model(transform: SimilarityTransform) -> SimilarityModel:
    return SimilarityModel(scale=transform.scale, rotation=transform.rotation.tolist(),
                           translation=transform.translation.tolist())


def similarity_from_model(model: SimilarityModel) -> SimilarityTransform:
    return SimilarityTransform(model.scale, np.array(model.rotation), np.array(model.translation))


def scene_to_model(document: SceneDocument) -> SceneFile:
    cameras = [
        CameraModel(
            center=cam.center.tolist(), orientation=cam.orientation.tolist(),
            focal_length=cam.focal_length, image_width=cam.image_width, image_height=cam.image_height,
            principal_point=cam.principal_point.tolist(),
        )
        for cam in document.rig.cameras
    ]
    correspondences = [
        CorrespondenceModel(world_point=c.world_point.tolist(), camera_index=c.camera_index,
                            pixel=c.pixel.tolist())
        for c in document.correspondences
    ]
    return SceneFile(
        cameras=cameras,
        correspondences=correspondences,
        ground_truth=similarity_to_model(document.ground_truth) if document.ground_truth else None,
        inlier_mask=None if document.inlier_mask is None else [bool(v) for v in document.inlier_mask],
    )


def scene_from_model(model: SceneFile) -> SceneDocument:
    """Domain objects from a validated scene; geometric violations raise SceneFormatError."""
    try:
        rig = GeneralizedCamera(tuple(
            PinholeCamera(np.array(cam.center), np.array(cam.orientation), cam.focal_length,
                          cam.image_width, cam.image_height,
                          None if cam.principal_point is None else np.array(cam.principal_point))
            for cam in model.cameras
        ))
        correspondences = []
        for i, corr in enumerate(model.correspondences):
            if corr.camera_index >= len(rig):
                raise SceneFormatError(f"Correspondence {i} references camera {corr.camera_index}, "
                                       f"rig has {len(rig)}")
            correspondences.append(rig.observe(corr.world_point, corr.camera_index, corr.pixel))
        truth = similarity_from_model(model.ground_truth) if model.ground_truth else None
    except ValueError as e:
        raise SceneFormatError(f"Invalid scene geometry: {e}") from e
    mask = None
    if model.inlier_mask is not None:
        if len(model.inlier_mask) != len(correspondences):
            raise SceneFormatError("inlier_mask length does not match correspondences")
        mask = np.array(model.inlier_mask, dtype=bool)
    return SceneDocument(rig, correspondences, truth, mask)


def _write_atomic(path: str, payload: Dict[str, Any]) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(dumps_strict(payload))
            f.write("\n")
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _read(path: str, model_type):
    try:
        with open(path) as f:
            raw = json.load(f, parse_constant=_reject_constant)
        return model_type.model_validate(raw)
    except OSError as e:
        raise SceneFormatError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path} is not valid JSON: {e}") from e
    except SceneFormatError as e:
        raise SceneFormatError(f"{path} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise SceneFormatError(f"{path} does not match the {model_type.__name__} schema:\n{e}") from e


def save_scene(path: str, document: SceneDocument) -> None:
    _write_atomic(path, scene_to_model(document).model_dump())
    logger.debug(f"Wrote scene with {len(document.correspondences)} correspondences to {path}")


def load_scene(path: str) -> SceneDocument:
    """
    Load and validate a scene file.

    Raises:
        SceneFormatError: on IO, JSON, schema or geometry problems
    """
    return scene_from_model(_read(path, SceneFile))


def save_result(path: str, result: ResultFile) -> None:
    _write_atomic(path, result.model_dump())
    logger.debug(f"Wrote result to {path}")


def load_result(path: str) -> ResultFile:
    return _read(path, ResultFile)


def scene_json_schema() -> Dict[str, Any]:
    return SceneFile.model_json_schema()


def result_json_schema() -> Dict[str, Any]:
    return ResultFile.model_json_schema()
