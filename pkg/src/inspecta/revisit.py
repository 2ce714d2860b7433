"""Pose-image capture, crack classification and revisit-goal planning.

The synchronizer pairs an image stream with the fused odometry stream at a
bounded capture rate (2 Hz by default), so every stored frame carries the
pose the vehicle had when the picture was taken. Selecting a frame later
turns that pose into a navigation goal: the revisit reuses the capture pose
exactly, with no standoff offset.

The reference detector is a deterministic classical pipeline (dark-pixel
threshold, connected components, elongation + skeleton-length gates) so the
capture/revisit machinery is testable without any trained model. The wire
protocol for remote classifiers is a single POST /classify taking raw PNG
bytes and returning {"label": "Crack"|"NonCrack", "confidence": 0..1}.
"""

from __future__ import annotations

import io
import json
import os
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np
from PIL import Image
from scipy import ndimage as ndi
from skimage.filters import threshold_otsu
from skimage.morphology import skeletonize

from .geometry import Pose
from .planning import NoFeasiblePlan, PlannerConfig, PlanningProblem, plan, to_velocities
from .sensors import frame_filename

LABEL_CRACK = "Crack"
LABEL_NONCRACK = "NonCrack"

# reference-detector constants, calibrated once against the synthetic
# renderer at 160x120 (see README); E/L gates per the detector contract
DARK_CAP = 80
ELONGATION_MIN = 4.0
SKELETON_MIN = 40
MIN_COMPONENT_PX = 12


class InputError(ValueError):
    """Undecodable image input."""


class TransportError(RuntimeError):
    """Remote classifier unreachable or returned a non-200 answer."""


class FrameNotFound(LookupError):
    pass


@dataclass(frozen=True)
class SyncConfig:
    period: float = 0.5
    slop: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.slop < self.period:
            raise ValueError("need 0 < slop < period")


@dataclass(frozen=True)
class ClassificationResult:
    label: str
    confidence: float
    source: str  # "reference" | "remote"

    def __post_init__(self):
        if self.label not in (LABEL_CRACK, LABEL_NONCRACK):
            raise ValueError(f"bad label {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass
class CapturedFrame:
    frame_id: int
    pose: Pose
    timestamp: float
    pose_timestamp: float
    image: object = None          # in-memory payload until persisted
    image_path: str | None = None
    classification: ClassificationResult | None = None
    crack_truth_fraction: float = 0.0  # renderer metadata, hidden from classifiers


def synchronize(image_events, pose_events, cfg: SyncConfig):
    """Pair images with nearest-in-time poses at a bounded capture rate.

    Both event streams are (timestamp, payload) pairs sorted by timestamp.
    At most one frame is captured per period; an image with no pose within
    slop is dropped and counted. Returns (frames, stats).
    """
    pose_ts = [t for t, _ in pose_events]
    frames = []
    dropped = 0
    last_capture = None
    for t_img, payload in image_events:
        if last_capture is not None and t_img - last_capture < cfg.period - 1e-9:
            continue
        i = bisect_left(pose_ts, t_img)
        best, best_dt = None, cfg.slop + 1e-12
        for j in (i - 1, i):
            if 0 <= j < len(pose_ts):
                d = abs(pose_ts[j] - t_img)
                if d < best_dt:
                    best, best_dt = j, d
        if best is None:
            dropped += 1
            continue
        frames.append(CapturedFrame(
            frame_id=len(frames), pose=pose_events[best][1], timestamp=t_img,
            pose_timestamp=pose_ts[best], image=payload))
        last_capture = t_img
    return frames, {"captured": len(frames), "dropped": dropped}


def _decode_image(image) -> np.ndarray:
    if isinstance(image, np.ndarray):
        return image
    try:
        if isinstance(image, (bytes, bytearray)):
            return np.asarray(Image.open(io.BytesIO(image)).convert("RGB"))
        return np.asarray(Image.open(FsPath(image)).convert("RGB"))
    except Exception as exc:
        raise InputError(f"cannot decode image: {exc}") from exc


def _component_features(mask: np.ndarray):
    """(elongation, skeleton_length) for one connected component mask."""
    ys, xs = np.nonzero(mask)
    pts = np.stack([xs, ys], axis=1).astype(float)
    centered = pts - pts.mean(axis=0)
    # 1/12 regularization: the second moment of a single pixel
    cov = centered.T @ centered / len(pts) + np.eye(2) / 12.0
    eig = np.linalg.eigvalsh(cov)
    elongation = float(np.sqrt(eig[1] / eig[0]))
    skeleton = int(skeletonize(mask).sum())
    return elongation, skeleton


def detect_reference(image) -> ClassificationResult:
    """Deterministic crack detector for renderer imagery.

    Pipeline: grayscale -> dark-pixel threshold (Otsu capped at an absolute
    darkness bound, which keeps mid-gray textures like mortar lines out) ->
    4-connected components -> Crack iff some component is elongated
    (>= ELONGATION_MIN) with skeleton length >= SKELETON_MIN. The absolute
    cap makes the label invariant under image-wide brightness offsets of
    roughly +-20 around the reference rendering levels.
    """
    rgb = _decode_image(image)
    if rgb.ndim == 3:
        gray = (rgb.astype(np.float64) @ np.array([0.299, 0.587, 0.114]))
    else:
        gray = rgb.astype(np.float64)
    gray = np.clip(np.round(gray), 0, 255).astype(np.uint8)

    if int(gray.max()) == int(gray.min()):
        dark = np.zeros(gray.shape, dtype=bool)
    else:
        otsu = int(threshold_otsu(gray))
        dark = gray <= min(otsu, DARK_CAP)

    best = 0.0
    if dark.any():
        labels, n = ndi.label(dark, structure=np.array([[0, 1, 0],
                                                        [1, 1, 1],
                                                        [0, 1, 0]]))
        sizes = ndi.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
        order = np.argsort(sizes)[::-1]
        slices = ndi.find_objects(labels)
        for rank in order[:20]:
            if sizes[rank] < MIN_COMPONENT_PX:
                break
            comp_id = int(rank) + 1
            sl = slices[comp_id - 1]
            mask = labels[sl] == comp_id
            elongation, skeleton = _component_features(mask)
            score = min(elongation / ELONGATION_MIN, skeleton / SKELETON_MIN)
            best = max(best, score)

    crack_score = float(np.clip(best / 2.0, 0.0, 1.0))
    if best >= 1.0:
        return ClassificationResult(LABEL_CRACK, max(crack_score, 0.5), "reference")
    return ClassificationResult(LABEL_NONCRACK, 1.0 - crack_score, "reference")


class RemoteClassifier:
    """Client side of the classifier wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 10.0, client=None):
        import httpx
        self.endpoint = endpoint.rstrip("/")
        self.client = client or httpx.Client(timeout=timeout)

    def classify(self, png_bytes: bytes) -> ClassificationResult:
        try:
            resp = self.client.post(f"{self.endpoint}/classify", content=png_bytes)
        except Exception as exc:
            raise TransportError(f"classifier unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"classifier returned {resp.status_code}")
        doc = resp.json()
        return ClassificationResult(doc["label"], float(doc["confidence"]), "remote")


class FrameStore:
    """Disk-backed frame store: PNG files plus a JSONL index.

    Frames persist as soon as they are added; the index is rewritten
    atomically whenever classifications change, keeping one line per frame.
    Single writer; reads can snapshot the frame list at any time.
    """

    def __init__(self, directory):
        self.directory = FsPath(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.frames: list[CapturedFrame] = []
        self.classify_errors: dict[int, str] = {}

    @property
    def index_path(self) -> FsPath:
        return self.directory / "index.jsonl"

    def add(self, pixels: np.ndarray, pose: Pose, timestamp: float,
            pose_timestamp: float, crack_truth_fraction: float = 0.0) -> CapturedFrame:
        frame_id = len(self.frames)
        name = frame_filename(frame_id, "rgb")
        Image.fromarray(pixels, mode="RGB").save(self.directory / name, format="PNG")
        frame = CapturedFrame(frame_id=frame_id, pose=pose, timestamp=timestamp,
                              pose_timestamp=pose_timestamp, image=None,
                              image_path=name,
                              crack_truth_fraction=crack_truth_fraction)
        self.frames.append(frame)
        with open(self.index_path, "a", encoding="utf-8") as fh:
            fh.write(self._index_line(frame) + "\n")
        return frame

    def _index_line(self, frame: CapturedFrame) -> str:
        doc = {"id": frame.frame_id, "t": frame.timestamp,
               "x": float(frame.pose.position[0]), "y": float(frame.pose.position[1]),
               "z": float(frame.pose.position[2]), "yaw": frame.pose.yaw,
               "image": frame.image_path}
        if frame.classification is not None:
            doc["label"] = frame.classification.label
            doc["confidence"] = frame.classification.confidence
        return json.dumps(doc)

    def rewrite_index(self) -> None:
        tmp = self.index_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for frame in self.frames:
                fh.write(self._index_line(frame) + "\n")
        os.replace(tmp, self.index_path)

    def get(self, frame_id: int) -> CapturedFrame:
        if not 0 <= frame_id < len(self.frames):
            raise FrameNotFound(f"no frame {frame_id}")
        return self.frames[frame_id]

    def image_bytes(self, frame_id: int) -> bytes:
        frame = self.get(frame_id)
        return (self.directory / frame.image_path).read_bytes()

    def image_pixels(self, frame_id: int) -> np.ndarray:
        frame = self.get(frame_id)
        return np.asarray(Image.open(self.directory / frame.image_path).convert("RGB"))

    def set_classification(self, frame_id: int, result: ClassificationResult) -> None:
        frame = self.get(frame_id)
        self.frames[frame_id] = replace(frame, classification=result)

    def replace_image(self, frame_id: int, pixels: np.ndarray,
                      crack_truth_fraction: float = 0.0) -> None:
        """Swap a frame's image while keeping its pose (test fixture that
        mirrors substituting crack pictures into a mapped session)."""
        frame = self.get(frame_id)
        Image.fromarray(pixels, mode="RGB").save(self.directory / frame.image_path,
                                                 format="PNG")
        self.frames[frame_id] = replace(frame, classification=None,
                                        crack_truth_fraction=crack_truth_fraction)
        self.rewrite_index()

    @classmethod
    def load(cls, directory) -> "FrameStore":
        store = cls(directory)
        if not store.index_path.exists():
            return store
        with open(store.index_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                cls_result = None
                if "label" in doc:
                    cls_result = ClassificationResult(doc["label"],
                                                      doc["confidence"], "reference")
                store.frames.append(CapturedFrame(
                    frame_id=doc["id"],
                    pose=Pose(np.array([doc["x"], doc["y"], doc["z"]]), doc["yaw"]),
                    timestamp=doc["t"], pose_timestamp=doc["t"],
                    image_path=doc["image"], classification=cls_result))
        return store


def classify_frames(store: FrameStore, classifier="reference",
                    reclassify: bool = False) -> dict:
    """Classify every stored frame; returns per-frame results summary.

    classifier is "reference" or a RemoteClassifier. Remote transport
    failures leave frames unclassified with an error note; already
    classified frames are skipped unless reclassify is set.
    """
    results = {}
    for frame in list(store.frames):
        if frame.classification is not None and not reclassify:
            results[frame.frame_id] = frame.classification
            continue
        try:
            if classifier == "reference":
                result = detect_reference(store.image_pixels(frame.frame_id))
            else:
                result = classifier.classify(store.image_bytes(frame.frame_id))
        except TransportError as exc:
            store.classify_errors[frame.frame_id] = str(exc)
            continue
        store.set_classification(frame.frame_id, result)
        results[frame.frame_id] = result
    store.rewrite_index()
    return results


@dataclass(frozen=True)
class RevisitOutcome:
    frame_id: int
    status: str  # planned | executed | no_feasible_plan | execution_aborted
    path: object = None
    commands: list = field(default_factory=list)
    final_error: float | None = None

    def __post_init__(self):
        if self.status == "planned" and self.path is None:
            raise ValueError("planned outcome must carry a path")


def plan_revisit(store: FrameStore, frame_id: int, current_pose: Pose,
                 snap, bounds, body, planner_cfg: PlannerConfig,
                 v_max: float = 0.5, yaw_rate_max: float = 0.8,
                 goal_tolerance: float = 0.1) -> RevisitOutcome:
    """Plan a path back to a stored frame's capture pose.

    The goal is the stored pose verbatim. Returns a planned outcome with
    path and velocity commands, or no_feasible_plan.
    """
    frame = store.get(frame_id)
    problem = PlanningProblem(start=current_pose, goal=frame.pose, bounds=bounds,
                              body=body, map=snap, goal_tolerance=goal_tolerance)
    try:
        path = plan(problem, planner_cfg)
    except NoFeasiblePlan:
        return RevisitOutcome(frame_id=frame_id, status="no_feasible_plan")
    commands = to_velocities(path, v_max, yaw_rate_max)
    return RevisitOutcome(frame_id=frame_id, status="planned", path=path,
                          commands=commands)


def build_classifier_app(classify_fn=None):
    """Loopback HTTP server implementing the classifier wire protocol.

    classify_fn maps PNG bytes -> ClassificationResult; defaults to the
    reference detector. The exact same contract is served by the trainer's
    serve mode.
    """
    from .classifier_service import build_classifier_app as _build
    return _build(classify_fn)
