from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy

Policy = numpy.ndarray[Any, Any]
Label = str

DETECTION = 'detection'
CLASSIFICATION = 'classification'
JUDGE = 'judge'
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * index, 2) for index in range(10))


class BBox(NamedTuple):
    x1: int
    y1: int
    x2: int
    y2: int


class Prediction(NamedTuple):
    box: BBox
    confidence: float


# an empty tuple is the 'No Objects' answer, boxes answers are never empty
DetectionAnswer = Tuple[Prediction, ...]
NO_OBJECTS: DetectionAnswer = ()


class ParsedResponse(NamedTuple):
    think: str
    answer_raw: str
    format_ok: bool


class GroundTruthInstance(NamedTuple):
    category: Label
    box: BBox
    image_id: int = 0


class RewardConfig(NamedTuple):
    tau: float = 0.5
    iou_weight: float = 1.0
    confidence_weight: float = 1.0
    format_weight: float = 1.0
    accuracy_weight: float = 1.0


MatchResult = List[Tuple[float, float]]


class RewardBreakdown(NamedTuple):
    r_iou: Optional[float]
    r_conf: Optional[float]
    r_format: int
    r_acc: Optional[int]
    total: float


class Group(NamedTuple):
    query_id: str
    actions: Tuple[int, ...]
    responses: Tuple[str, ...]
    rewards: Tuple[float, ...] = ()
    advantages: Tuple[float, ...] = ()


class TrainerConfig(NamedTuple):
    group_size: int = 8
    learning_rate: float = 0.1
    beta: float = 0.04
    steps: int = 500
    seed: int = 0
    std_floor: float = 1e-8


class StepStats(NamedTuple):
    mean_reward: float
    kl: float
    objective: float
    grad_norm: float


class Scene(NamedTuple):
    scene_id: str
    task: str
    category: Label = ''
    boxes: Tuple[BBox, ...] = ()
    label: Label = ''
    labels: Tuple[Label, ...] = ()


class LatticeSpec(NamedTuple):
    step: int = 125
    confidences: Tuple[float, ...] = (0.3, 0.6, 0.9)
    max_boxes: int = 2


ActionTable = List[str]


class CurveRecord(NamedTuple):
    step: int
    scene_id: str
    mean_reward: float
    expected_reward: float
    kl: float
    objective: float
    grad_norm: float
    best_action_probability: float


TrainingCurve = List[CurveRecord]


class EvalConfig(NamedTuple):
    iou_thresholds: Tuple[float, ...] = COCO_IOU_THRESHOLDS
    small_area: float = 32 ** 2
    medium_area: float = 96 ** 2
    size_buckets: bool = True
    judge_mode: bool = False
    max_detections: int = 100


class ImageResult(NamedTuple):
    image_id: int
    predictions: Dict[Label, List[Prediction]]
    ground_truths: List[GroundTruthInstance]
    width: Optional[int] = None
    height: Optional[int] = None


class APResult(NamedTuple):
    map: Optional[float]
    ap50: Optional[float]
    ap75: Optional[float]
    ap_small: Optional[float]
    ap_medium: Optional[float]
    ap_large: Optional[float]


class ExistenceJudgment(NamedTuple):
    image_id: int
    category: Label
    present: bool


class ImageInfo(NamedTuple):
    image_id: int
    width: int
    height: int
    file_name: Optional[str] = None


class Category(NamedTuple):
    category_id: int
    name: Label


class AnnotationSet(NamedTuple):
    images: List[ImageInfo]
    categories: List[Category]
    instances: List[GroundTruthInstance]


class PromptTemplate(NamedTuple):
    task: str
    text: str


class ResponseRecord(NamedTuple):
    image_id: int
    category: Label
    response: str
    judge_response: Optional[str] = None


ResponseLog = List[ResponseRecord]
