"""On-disk formats: PFM depth maps, PNG/TIFF images, JSON manifests.

Depth maps use the portable float map layout: an ASCII header of magic
("Pf" for one channel), width/height, and a scale whose sign encodes byte
order (negative = little-endian), followed by rows of float32 stored bottom
to top.  A raw float32 file (row-major, top to bottom, little-endian) with a
JSON sidecar holding the dimensions is accepted as a fallback.

Manifests are versioned JSON; optics fields use the customary capture units
(mm focal length, um pixel pitch) and are converted to meters on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import DepthMapFormatError, ManifestError
from .optics import CameraMeta
from .views import DpView

MANIFEST_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# PFM depth maps


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into a top-to-bottom float array."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic == b"PF":
            raise DepthMapFormatError(f"{path}: color PFM is not supported")
        if magic != b"Pf":
            raise DepthMapFormatError(f"{path}: bad magic {magic!r}, expected 'Pf'")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise DepthMapFormatError(f"{path}: malformed dimension line {dims!r}")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise DepthMapFormatError(f"{path}: non-integer dimensions {dims!r}") from exc
        if width <= 0 or height <= 0:
            raise DepthMapFormatError(f"{path}: non-positive dimensions {width}x{height}")
        try:
            scale = float(fh.readline().strip())
        except ValueError as exc:
            raise DepthMapFormatError(f"{path}: malformed scale line") from exc
        if scale == 0:
            raise DepthMapFormatError(f"{path}: zero scale")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read(4 * width * height)
        if len(payload) != 4 * width * height:
            raise DepthMapFormatError(
                f"{path}: truncated payload ({len(payload)} of {4 * width * height} bytes)"
            )
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return np.ascontiguousarray(data[::-1]).astype(np.float64)


def write_pfm(path, array: np.ndarray) -> None:
    """Write a 2-D float array as little-endian grayscale PFM."""
    if array.ndim != 2:
        raise ValueError(f"PFM writer needs a 2-D array, got shape {array.shape}")
    data = array.astype("<f4")[::-1]
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{array.shape[1]} {array.shape[0]}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(data.tobytes())


def load_depth_map(path) -> np.ndarray:
    """Depth map with non-positive and non-finite entries replaced by NaN."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        data = read_pfm(path)
    else:
        sidecar = path.with_suffix(path.suffix + ".json")
        if not sidecar.exists():
            raise DepthMapFormatError(
                f"{path}: raw depth maps need a '{sidecar.name}' sidecar with width/height"
            )
        dims = json.loads(sidecar.read_text())
        width, height = int(dims["width"]), int(dims["height"])
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != width * height:
            raise DepthMapFormatError(
                f"{path}: {raw.size} floats, expected {width * height}"
            )
        data = raw.reshape(height, width).astype(np.float64)
    invalid = ~np.isfinite(data) | (data <= 0)
    data[invalid] = np.nan
    return data


# ---------------------------------------------------------------------------
# Images


def load_image(path, gamma: float = 1.0) -> np.ndarray:
    """Image as float in [0, 1]; color arrives as (H, W, 3) RGB.

    gamma != 1 linearizes encoded inputs by raising pixel values to gamma.
    """
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ManifestError(f"cannot read image {path}")
    if img.dtype == np.uint8:
        data = img.astype(np.float64) / 255.0
    elif img.dtype == np.uint16:
        data = img.astype(np.float64) / 65535.0
    else:
        data = img.astype(np.float64)
    if data.ndim == 3:
        if data.shape[2] == 4:
            data = data[:, :, :3]
        data = data[:, :, ::-1].copy()  # BGR -> RGB
    if gamma != 1.0:
        data = np.power(np.clip(data, 0.0, None), gamma)
    return data


def save_image(path, array: np.ndarray) -> None:
    """Store a float image in [0, 1] as 16-bit PNG (RGB saved as color)."""
    data = np.clip(array, 0.0, 1.0)
    quant = np.round(data * 65535.0).astype(np.uint16)
    if quant.ndim == 3:
        quant = quant[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(str(path), quant):
        raise IOError(f"failed to write image {path}")


# ---------------------------------------------------------------------------
# Manifests


@dataclass
class ViewEntry:
    view_id: int
    left_image: str
    right_image: str
    depth_map: str
    focal_length_mm: float
    f_number: float
    sensor_pitch_um: float
    scene: str = ""
    aperture_group: str = ""

    def camera_meta(self, width=0, height=0) -> CameraMeta:
        return CameraMeta(
            focal_length=self.focal_length_mm * 1e-3,
            f_number=self.f_number,
            sensor_pitch=self.sensor_pitch_um * 1e-6,
            image_width=width,
            image_height=height,
        )


@dataclass
class Manifest:
    views: list[ViewEntry] = field(default_factory=list)
    ground_truth_scale: float | None = None
    config_overrides: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)

    def as_dict(self) -> dict:
        out = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "views": [
                {
                    "view_id": v.view_id,
                    "left_image": v.left_image,
                    "right_image": v.right_image,
                    "depth_map": v.depth_map,
                    "focal_length_mm": v.focal_length_mm,
                    "f_number": v.f_number,
                    "sensor_pitch_um": v.sensor_pitch_um,
                    "scene": v.scene,
                    "aperture_group": v.aperture_group,
                }
                for v in self.views
            ],
        }
        if self.ground_truth_scale is not None:
            out["ground_truth_scale"] = self.ground_truth_scale
        if self.config_overrides:
            out["config"] = self.config_overrides
        return out


def save_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(
        json.dumps(manifest.as_dict(), indent=2, sort_keys=True) + "\n"
    )


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    version = raw.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"{path}: schema_version {version!r}, expected {MANIFEST_SCHEMA_VERSION}"
        )
    views_raw = raw.get("views")
    if not isinstance(views_raw, list) or not views_raw:
        raise ManifestError(f"{path}: manifest lists no views")
    base = path.parent
    views = []
    seen_ids = set()
    for i, entry in enumerate(views_raw):
        label = f"{path} view[{i}]"
        try:
            view = ViewEntry(
                view_id=int(entry["view_id"]),
                left_image=str(entry["left_image"]),
                right_image=str(entry["right_image"]),
                depth_map=str(entry["depth_map"]),
                focal_length_mm=float(entry["focal_length_mm"]),
                f_number=float(entry["f_number"]),
                sensor_pitch_um=float(entry["sensor_pitch_um"]),
                scene=str(entry.get("scene", "")),
                aperture_group=str(entry.get("aperture_group", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{label}: malformed entry ({exc})") from exc
        if view.view_id in seen_ids:
            raise ManifestError(f"{label}: duplicate view_id {view.view_id}")
        seen_ids.add(view.view_id)
        for name in ("focal_length_mm", "f_number", "sensor_pitch_um"):
            if getattr(view, name) <= 0:
                raise ManifestError(
                    f"{label} (view_id {view.view_id}): {name} must be positive"
                )
        for attr in ("left_image", "right_image", "depth_map"):
            rel = getattr(view, attr)
            if not (base / rel).exists():
                raise ManifestError(
                    f"{label} (view_id {view.view_id}): {attr} '{rel}' not found"
                )
        views.append(view)
    gt = raw.get("ground_truth_scale")
    if gt is not None:
        gt = float(gt)
        if gt <= 0:
            raise ManifestError(f"{path}: ground_truth_scale must be positive")
    return Manifest(
        views=views,
        ground_truth_scale=gt,
        config_overrides=dict(raw.get("config", {})),
        base_dir=base,
    )


def load_views(manifest: Manifest, gamma: float = 1.0) -> list[DpView]:
    """Materialize every manifest entry into an in-memory DP view."""
    views = []
    for entry in manifest.views:
        left = load_image(manifest.base_dir / entry.left_image, gamma)
        right = load_image(manifest.base_dir / entry.right_image, gamma)
        depth = load_depth_map(manifest.base_dir / entry.depth_map)
        if depth.shape != left.shape[:2]:
            raise ManifestError(
                f"view {entry.view_id}: depth {depth.shape} does not match "
                f"images {left.shape[:2]}"
            )
        views.append(
            DpView(
                view_id=entry.view_id,
                left=left,
                right=right,
                depth=depth,
                meta=entry.camera_meta(left.shape[1], left.shape[0]),
                scene=entry.scene,
                aperture_group=entry.aperture_group,
            )
        )
    return views


def write_dataset(dataset, out_dir) -> Path:
    """Write a rendered dataset in the layout the estimator ingests.

    Returns the manifest path.  The ground-truth scale is recorded in the
    manifest so evaluation can run without side information.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for view in dataset.views:
        stem = f"view_{view.view_id:03d}"
        save_image(out_dir / f"{stem}_left.png", view.left)
        save_image(out_dir / f"{stem}_right.png", view.right)
        depth = view.depth.copy()
        depth[~np.isfinite(depth)] = 0.0  # non-positive marks invalid on reload
        write_pfm(out_dir / f"{stem}_depth.pfm", depth)
        entries.append(
            ViewEntry(
                view_id=view.view_id,
                left_image=f"{stem}_left.png",
                right_image=f"{stem}_right.png",
                depth_map=f"{stem}_depth.pfm",
                focal_length_mm=view.meta.focal_length * 1e3,
                f_number=view.meta.f_number,
                sensor_pitch_um=view.meta.sensor_pitch * 1e6,
                scene=view.scene,
                aperture_group=view.aperture_group,
            )
        )
    manifest = Manifest(
        views=entries,
        ground_truth_scale=dataset.truth.scale,
        base_dir=out_dir,
    )
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path
