from typing import List, Sequence

from verity.exceptions import VerityError
from verity.grammar import normalize_label, parse_classification_answer, parse_detection_answer, parse_response
from verity.typing import BBox, GroundTruthInstance, Label, MatchResult, Prediction, RewardBreakdown, RewardConfig

DEFAULT_REWARD_CONFIG = RewardConfig()


def box_area(box: BBox) -> int:
    return (box.x2 - box.x1) * (box.y2 - box.y1)


def iou(box_a: BBox, box_b: BBox) -> float:
    width = min(box_a.x2, box_b.x2) - max(box_a.x1, box_b.x1)
    height = min(box_a.y2, box_b.y2) - max(box_a.y1, box_b.y1)
    if width <= 0 or height <= 0:
        return 0.0
    intersection = width * height
    return intersection / (box_area(box_a) + box_area(box_b) - intersection)


def sort_predictions(predictions: Sequence[Prediction]) -> List[Prediction]:
    # stable sort keeps emission order among equal confidences
    return sorted(predictions, key=lambda prediction: -prediction.confidence)


def match_predictions(predictions: Sequence[Prediction], ground_truths: Sequence[GroundTruthInstance], reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> MatchResult:
    matched = [False] * len(ground_truths)
    pairs: MatchResult = []
    for prediction in sort_predictions(predictions):
        best_iou = 0.0
        best_index = -1
        for index, ground_truth in enumerate(ground_truths):
            if matched[index]:
                continue
            overlap = iou(prediction.box, ground_truth.box)
            if overlap > best_iou:
                best_iou = overlap
                best_index = index
        if best_index > -1 and best_iou >= reward_config.tau:
            matched[best_index] = True
            pairs.append((best_iou, prediction.confidence))
        else:
            pairs.append((0.0, prediction.confidence))
    return pairs


def confidence_reward(pair_iou: float, confidence: float) -> float:
    if pair_iou != 0:
        return confidence
    return 1 - confidence


def create_breakdown(r_iou: float, r_conf: float, r_format: int, reward_config: RewardConfig) -> RewardBreakdown:
    total = reward_config.iou_weight * r_iou + reward_config.confidence_weight * r_conf + reward_config.format_weight * r_format
    return RewardBreakdown(r_iou, r_conf, r_format, None, total)


def detection_reward(response: str, ground_truths: Sequence[GroundTruthInstance], reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> RewardBreakdown:
    parsed_response = parse_response(response)
    if not parsed_response.format_ok:
        return create_breakdown(0.0, 0.0, 0, reward_config)
    try:
        answer = parse_detection_answer(parsed_response.answer_raw)
    except VerityError:
        return create_breakdown(0.0, 0.0, 0, reward_config)
    if not answer:
        if ground_truths:
            return create_breakdown(0.0, 0.0, 1, reward_config)
        return create_breakdown(1.0, 1.0, 1, reward_config)
    pairs = match_predictions(answer, ground_truths, reward_config)
    r_iou = sum(pair_iou for pair_iou, _ in pairs) / len(pairs)
    r_conf = sum(confidence_reward(pair_iou, confidence) for pair_iou, confidence in pairs) / len(pairs)
    return create_breakdown(r_iou, r_conf, 1, reward_config)


def classification_reward(response: str, ground_truth_label: Label, reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> RewardBreakdown:
    parsed_response = parse_response(response)
    r_format = int(parsed_response.format_ok)
    r_acc = 0
    if parsed_response.format_ok:
        try:
            r_acc = int(parse_classification_answer(parsed_response.answer_raw) == normalize_label(ground_truth_label))
        except VerityError:
            r_acc = 0
    total = reward_config.accuracy_weight * r_acc + reward_config.format_weight * r_format
    return RewardBreakdown(None, None, r_format, r_acc, total)


def verify_exact(prediction: str, ground_truth: str) -> int:
    return int(normalize_label(prediction) == normalize_label(ground_truth))
