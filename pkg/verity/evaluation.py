from typing import Dict, List, Optional, Sequence, Tuple

import numpy

from verity.exceptions import ConfigError, InconsistentDimensions, MissingJudgment, VerityError
from verity.grammar import COORDINATE_MAX, normalize_label, parse_detection_answer, parse_response
from verity.reward import iou
from verity.typing import APResult, AnnotationSet, BBox, DetectionAnswer, EvalConfig, ExistenceJudgment, GroundTruthInstance, ImageResult, Label, NO_OBJECTS, Prediction, ResponseLog

SMALL = 'small'
MEDIUM = 'medium'
LARGE = 'large'
AREA_BUCKETS = (SMALL, MEDIUM, LARGE)
RECALL_STEPS = 100
DEFAULT_EVAL_CONFIG = EvalConfig()


def validate_eval_config(eval_config: EvalConfig) -> None:
    thresholds = eval_config.iou_thresholds
    if not thresholds or not all(0 < threshold <= 1 for threshold in thresholds) or any(low >= high for low, high in zip(thresholds, thresholds[1:])):
        raise ConfigError(f'IoU thresholds must be strictly increasing within (0, 1], got {list(thresholds)}.')
    if not 0 < eval_config.small_area < eval_config.medium_area:
        raise ConfigError('Area boundaries must be positive and increasing.')
    if eval_config.max_detections < 1:
        raise ConfigError(f'Max detections must be positive, got {eval_config.max_detections}.')


def pixel_area(box: BBox, width: int, height: int) -> float:
    return (box.x2 - box.x1) * width / COORDINATE_MAX * (box.y2 - box.y1) * height / COORDINATE_MAX


def bucket_of_area(area: float, eval_config: EvalConfig) -> str:
    if area < eval_config.small_area:
        return SMALL
    if area < eval_config.medium_area:
        return MEDIUM
    return LARGE


def bucket_of(ground_truth: GroundTruthInstance, width: int, height: int, eval_config: EvalConfig = DEFAULT_EVAL_CONFIG) -> str:
    return bucket_of_area(pixel_area(ground_truth.box, width, height), eval_config)


def is_outside(box: BBox, result: ImageResult, area: Optional[str], eval_config: EvalConfig) -> bool:
    return area is not None and bucket_of_area(pixel_area(box, result.width, result.height), eval_config) != area


def match_image(result: ImageResult, category: Label, threshold: float, eval_config: EvalConfig, area: Optional[str]) -> Tuple[List[Tuple[float, int, int, bool]], int]:
    ground_truths = [ground_truth for ground_truth in result.ground_truths if ground_truth.category == category]
    ignored = [is_outside(ground_truth.box, result, area, eval_config) for ground_truth in ground_truths]
    # non-ignored ground truths are tried first
    order = sorted(range(len(ground_truths)), key=lambda index: ignored[index])
    matched = [False] * len(ground_truths)
    ranked = sorted(enumerate(result.predictions.get(category, [])), key=lambda item: -item[1].confidence)
    detections: List[Tuple[float, int, int, bool]] = []
    for emission, prediction in ranked[:eval_config.max_detections]:
        best_index = -1
        best_iou = 0.0
        for index in order:
            if matched[index]:
                continue
            if best_index > -1 and not ignored[best_index] and ignored[index]:
                break
            overlap = iou(prediction.box, ground_truths[index].box)
            if overlap < threshold or (best_index > -1 and overlap <= best_iou):
                continue
            best_index = index
            best_iou = overlap
        if best_index > -1:
            matched[best_index] = True
            if not ignored[best_index]:
                detections.append((-prediction.confidence, result.image_id, emission, True))
        elif not is_outside(prediction.box, result, area, eval_config):
            detections.append((-prediction.confidence, result.image_id, emission, False))
    return detections, ignored.count(False)


def compute_ap(results: Sequence[ImageResult], category: Label, threshold: float, eval_config: EvalConfig = DEFAULT_EVAL_CONFIG, area: Optional[str] = None) -> Optional[float]:
    detections: List[Tuple[float, int, int, bool]] = []
    positives = 0
    for result in results:
        image_detections, image_positives = match_image(result, category, threshold, eval_config, area)
        detections.extend(image_detections)
        positives += image_positives
    if not positives:
        return None
    detections.sort()
    true_positives = numpy.array([detection[3] for detection in detections], dtype=bool)
    true_positive_total = numpy.cumsum(true_positives)
    false_positive_total = numpy.cumsum(~true_positives)
    precision = true_positive_total / numpy.maximum(true_positive_total + false_positive_total, 1)
    if precision.size:
        precision = numpy.maximum.accumulate(precision[::-1])[::-1]
    # recall >= step / RECALL_STEPS, compared on integers
    indices = numpy.searchsorted(true_positive_total * RECALL_STEPS, numpy.arange(RECALL_STEPS + 1) * positives, side='left')
    sampled = [precision[index] if index < precision.size else 0.0 for index in indices]
    return float(numpy.mean(sampled))


def gate_results(results: Sequence[ImageResult], eval_config: EvalConfig, judgments: Optional[Sequence[ExistenceJudgment]]) -> List[ImageResult]:
    presence = {(judgment.image_id, judgment.category): judgment.present for judgment in judgments or []}
    gated_results = []
    for result in results:
        present_categories = {ground_truth.category for ground_truth in result.ground_truths}
        if eval_config.judge_mode:
            for category in sorted(present_categories):
                if (result.image_id, category) not in presence:
                    raise MissingJudgment(f'No existence judgment for image {result.image_id} and category {category!r}.')
            predictions = {category: list(predictions) for category, predictions in result.predictions.items() if presence.get((result.image_id, category))}
        else:
            predictions = {category: list(predictions) for category, predictions in result.predictions.items() if category in present_categories}
        gated_results.append(result._replace(predictions=predictions))
    return gated_results


def mean_defined(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [value for value in values if value is not None]
    if defined:
        return float(numpy.mean(defined))
    return None


def prepare_results(results: Sequence[ImageResult], eval_config: EvalConfig, judgments: Optional[Sequence[ExistenceJudgment]]) -> Tuple[List[ImageResult], List[Label]]:
    validate_eval_config(eval_config)
    if eval_config.size_buckets:
        for result in results:
            if not result.width or not result.height or result.width <= 0 or result.height <= 0:
                raise InconsistentDimensions(f'Image {result.image_id} has no positive dimensions but size buckets are requested.')
    categories = sorted({ground_truth.category for result in results for ground_truth in result.ground_truths})
    return gate_results(results, eval_config, judgments), categories


def evaluate(results: Sequence[ImageResult], eval_config: EvalConfig = DEFAULT_EVAL_CONFIG, judgments: Optional[Sequence[ExistenceJudgment]] = None) -> APResult:
    gated_results, categories = prepare_results(results, eval_config, judgments)
    areas: Tuple[Optional[str], ...] = (None,) + AREA_BUCKETS if eval_config.size_buckets else (None,)
    table = {
        (category, threshold, area): compute_ap(gated_results, category, threshold, eval_config, area)
        for category in categories for threshold in eval_config.iou_thresholds for area in areas
    }

    def average(thresholds: Sequence[float], area: Optional[str]) -> Optional[float]:
        if area not in areas:
            return None
        return mean_defined([table[(category, threshold, area)] for category in categories for threshold in thresholds])

    def single(value: float) -> List[float]:
        return [threshold for threshold in eval_config.iou_thresholds if abs(threshold - value) < 1e-9]

    return APResult(
        map=average(eval_config.iou_thresholds, None),
        ap50=average(single(0.5), None),
        ap75=average(single(0.75), None),
        ap_small=average(eval_config.iou_thresholds, SMALL),
        ap_medium=average(eval_config.iou_thresholds, MEDIUM),
        ap_large=average(eval_config.iou_thresholds, LARGE)
    )


def per_category_ap(results: Sequence[ImageResult], eval_config: EvalConfig = DEFAULT_EVAL_CONFIG, judgments: Optional[Sequence[ExistenceJudgment]] = None) -> Dict[Label, Optional[float]]:
    gated_results, categories = prepare_results(results, eval_config, judgments)
    return {category: mean_defined([compute_ap(gated_results, category, threshold, eval_config) for threshold in eval_config.iou_thresholds]) for category in categories}


def parse_judgment(raw: str) -> bool:
    parsed_response = parse_response(raw)
    if not parsed_response.format_ok:
        return False
    return normalize_label(parsed_response.answer_raw).rstrip('.!') == 'yes'


def read_answer(raw: str) -> DetectionAnswer:
    parsed_response = parse_response(raw)
    if not parsed_response.format_ok:
        return NO_OBJECTS
    try:
        return parse_detection_answer(parsed_response.answer_raw)
    except VerityError:
        return NO_OBJECTS


def results_from_log(annotation_set: AnnotationSet, response_log: ResponseLog) -> Tuple[List[ImageResult], List[ExistenceJudgment]]:
    predictions: Dict[int, Dict[Label, List[Prediction]]] = {image.image_id: {} for image in annotation_set.images}
    ground_truths: Dict[int, List[GroundTruthInstance]] = {image.image_id: [] for image in annotation_set.images}
    judgments = []
    for instance in annotation_set.instances:
        ground_truths[instance.image_id].append(instance)
    for record in response_log:
        predictions[record.image_id].setdefault(record.category, []).extend(read_answer(record.response))
        if record.judge_response is not None:
            judgments.append(ExistenceJudgment(record.image_id, record.category, parse_judgment(record.judge_response)))
    results = [ImageResult(image.image_id, predictions[image.image_id], ground_truths[image.image_id], image.width, image.height) for image in annotation_set.images]
    return results, judgments
