import itertools
from typing import List, Optional, Sequence, Tuple

import numpy
import pytest

from verity.grammar import render_response, serialize_detection_answer
from verity.reward import classification_reward, detection_reward, iou, match_predictions, verify_exact
from verity.typing import BBox, DetectionAnswer, GroundTruthInstance, NO_OBJECTS, Prediction, RewardConfig

Box = Tuple[int, int, int, int]


def scalar_iou(box_a: Box, box_b: Box) -> float:
    overlap_x = max(0, min(box_a[2], box_b[2]) - max(box_a[0], box_b[0]))
    overlap_y = max(0, min(box_a[3], box_b[3]) - max(box_a[1], box_b[1]))
    intersection = overlap_x * overlap_y
    union = (box_a[2] - box_a[0]) * (box_a[3] - box_a[1]) + (box_b[2] - box_b[0]) * (box_b[3] - box_b[1]) - intersection
    return intersection / union


def scalar_reward(predictions: Optional[Sequence[Tuple[Box, float]]], ground_truths: Sequence[Box], tau: float) -> Tuple[float, float, int, float]:
    if predictions is None:
        return 0.0, 0.0, 0, 0.0
    if not predictions:
        if ground_truths:
            return 0.0, 0.0, 1, 1.0
        return 1.0, 1.0, 1, 3.0
    taken = set()
    iou_total = 0.0
    confidence_total = 0.0
    for index in sorted(range(len(predictions)), key=lambda position: (-predictions[position][1], position)):
        box, confidence = predictions[index]
        scores = [(scalar_iou(box, ground_truth), -position) for position, ground_truth in enumerate(ground_truths) if position not in taken]
        value = 0.0
        if scores:
            best_value, best_position = max(scores)
            if best_value > 0 and best_value >= tau:
                taken.add(-best_position)
                value = best_value
        iou_total += value
        confidence_total += confidence if value != 0 else 1 - confidence
    r_iou = iou_total / len(predictions)
    r_conf = confidence_total / len(predictions)
    return r_iou, r_conf, 1, r_iou + r_conf + 1


def create_response(predictions: Sequence[Tuple[Box, float]]) -> str:
    answer: DetectionAnswer = tuple(Prediction(BBox(*box), confidence) for box, confidence in predictions)
    return render_response('compare boxes', serialize_detection_answer(answer))


def create_ground_truths(boxes: Sequence[Box]) -> List[GroundTruthInstance]:
    return [GroundTruthInstance('dog', BBox(*box)) for box in boxes]


GOLDEN_VECTORS = [
    ([((0, 0, 100, 100), 1.0)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 100), 0.9)], [(0, 0, 100, 100)], 0.5),
    ([((200, 200, 300, 300), 0.9)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 80), 0.9), ((200, 200, 300, 300), 0.6)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 80), 0.9), ((0, 0, 100, 90), 0.5)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 90), 0.5), ((0, 0, 100, 80), 0.9)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 50), 0.7)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 49), 0.7)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 49), 0.7)], [(0, 0, 100, 100)], 0.0),
    ([((0, 0, 10, 10), 0.3)], [(5, 5, 15, 15)], 0.1),
    ([((0, 0, 10, 10), 0.3)], [(5, 5, 15, 15)], 0.5),
    ([((0, 0, 10, 10), 0.0)], [(5, 5, 15, 15)], 0.1),
    ([((0, 0, 100, 100), 0.8), ((0, 0, 100, 100), 0.8)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 100), 0.8), ((0, 0, 100, 100), 0.8)], [(0, 0, 100, 100), (0, 0, 100, 100)], 0.5),
    ([((0, 0, 100, 100), 0.6), ((500, 500, 600, 600), 0.4)], [(0, 0, 100, 100), (500, 500, 600, 600)], 0.5),
    ([((0, 0, 100, 100), 0.6)], [(0, 0, 100, 100), (500, 500, 600, 600)], 0.5),
    ([((0, 0, 60, 100), 0.95), ((40, 0, 100, 100), 0.85)], [(0, 0, 100, 100)], 0.5),
    ([((0, 0, 60, 100), 0.95), ((40, 0, 100, 100), 0.85)], [(0, 0, 50, 100), (50, 0, 100, 100)], 0.5),
    ([((0, 0, 60, 100), 0.5), ((40, 0, 100, 100), 0.5)], [(0, 0, 50, 100), (50, 0, 100, 100)], 0.5),
    ([((100, 100, 900, 900), 0.33)], [(0, 0, 1000, 1000)], 0.5),
    ([((100, 100, 900, 900), 0.33)], [(0, 0, 1000, 1000)], 0.75),
    ([((0, 0, 1000, 1000), 0.01)], [], 0.5),
    ([((0, 0, 1000, 1000), 0.99), ((0, 0, 10, 10), 0.2)], [], 0.5),
    ([], [], 0.5),
    ([], [(0, 0, 100, 100)], 0.5),
    ([((10, 10, 20, 20), 0.25), ((30, 30, 40, 40), 0.5), ((50, 50, 60, 60), 0.75)], [(10, 10, 20, 20), (30, 30, 41, 41), (50, 50, 70, 70)], 0.5),
    ([((10, 10, 20, 20), 0.25), ((30, 30, 40, 40), 0.5), ((50, 50, 60, 60), 0.75)], [(10, 10, 20, 20), (30, 30, 41, 41), (50, 50, 70, 70)], 0.2),
    ([((0, 0, 500, 500), 0.64), ((250, 250, 750, 750), 0.64)], [(0, 0, 500, 500), (250, 250, 750, 750)], 0.5),
    ([((250, 250, 750, 750), 0.7), ((0, 0, 500, 500), 0.6)], [(0, 0, 500, 500), (250, 250, 750, 750)], 0.1),
    ([((0, 0, 300, 300), 0.9), ((0, 0, 290, 290), 0.8), ((0, 0, 280, 280), 0.7)], [(0, 0, 300, 300), (0, 0, 280, 280)], 0.5),
    ([((0, 0, 1, 1), 1.0)], [(0, 0, 1, 1)], 1.0),
    ([((0, 0, 1, 2), 1.0)], [(0, 0, 1, 1)], 1.0),
    ([((100, 0, 200, 100), 0.45), ((0, 0, 100, 100), 0.45)], [(0, 0, 100, 100)], 0.5),
    ([((123, 456, 789, 999), 0.12), ((124, 457, 788, 998), 0.87)], [(123, 456, 789, 999)], 0.9)
]


@pytest.mark.parametrize('predictions, ground_truths, tau', GOLDEN_VECTORS)
def test_detection_reward_golden_vectors(predictions: List[Tuple[Box, float]], ground_truths: List[Box], tau: float) -> None:
    breakdown = detection_reward(create_response(predictions), create_ground_truths(ground_truths), RewardConfig(tau=tau))
    r_iou, r_conf, r_format, total = scalar_reward(predictions, ground_truths, tau)

    assert breakdown.r_format == r_format
    assert breakdown.r_iou == pytest.approx(r_iou, abs=1e-12)
    assert breakdown.r_conf == pytest.approx(r_conf, abs=1e-12)
    assert breakdown.total == pytest.approx(total, abs=1e-12)
    assert breakdown.r_acc is None


def test_iou() -> None:
    assert iou(BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)) == 1.0
    assert iou(BBox(0, 0, 100, 100), BBox(200, 200, 300, 300)) == 0.0
    assert iou(BBox(0, 0, 10, 10), BBox(5, 5, 15, 15)) == pytest.approx(25 / 175, abs=1e-12)
    assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 20, 10)) == 0.0


def test_match_predictions() -> None:
    ground_truths = create_ground_truths([(0, 0, 100, 100)])

    assert match_predictions([Prediction(BBox(0, 0, 100, 100), 0.9)], ground_truths) == [(1.0, 0.9)]
    assert match_predictions([Prediction(BBox(200, 200, 300, 300), 0.4)], ground_truths) == [(0.0, 0.4)]
    pairs = match_predictions([Prediction(BBox(0, 0, 100, 90), 0.5), Prediction(BBox(0, 0, 100, 80), 0.9)], ground_truths)
    assert pairs == [(pytest.approx(0.8), 0.9), (0.0, 0.5)]


def test_detection_reward_examples() -> None:
    ground_truths = create_ground_truths([(0, 0, 100, 100)])

    perfect = detection_reward(create_response([((0, 0, 100, 100), 1.0)]), ground_truths)
    assert (perfect.r_iou, perfect.r_conf, perfect.r_format, perfect.total) == (1.0, 1.0, 1, 3.0)
    unmatched = detection_reward(create_response([((200, 200, 300, 300), 0.9)]), ground_truths)
    assert unmatched.r_conf == pytest.approx(0.1)
    mixed = detection_reward(create_response([((0, 0, 100, 80), 0.9), ((200, 200, 300, 300), 0.6)]), ground_truths)
    assert mixed.r_iou == pytest.approx(0.4)
    assert mixed.r_conf == pytest.approx(0.65)
    assert mixed.total == pytest.approx(2.05)


@pytest.mark.parametrize('response', [
    '[{\'Position\': [0, 0, 100, 100], \'Confidence\': 1.0}]',
    '<think>r</think><answer>[{\'Position\': [0, 0, 100, 100], \'Confidence\': 1.0}]</answer><answer></answer>',
    '<think>r</think><answer>[{\'Position\': [0, 0, 100, 100], \'Confidence\': 1.5}]</answer>',
    '<think>r</think><answer>[{\'Position\': [0, 0, 100, 100], \'Confidence\': ' + '9' * 400 + '}]</answer>',
    '<think>r</think><answer>[{\'Position\': [0, 0, 100]}]</answer>',
    '<think>r</think><answer>dog</answer>'
])
def test_detection_reward_failures_zero_everything(response: str) -> None:
    breakdown = detection_reward(response, create_ground_truths([(0, 0, 100, 100)]))

    assert (breakdown.r_iou, breakdown.r_conf, breakdown.r_format, breakdown.total) == (0.0, 0.0, 0, 0.0)


def test_detection_reward_no_objects() -> None:
    response = render_response('nothing there', serialize_detection_answer(NO_OBJECTS))

    assert detection_reward(response, []).total == 3.0
    assert detection_reward(response, create_ground_truths([(0, 0, 10, 10)])).total == 1.0


def test_detection_reward_weights() -> None:
    response = create_response([((0, 0, 100, 80), 0.9), ((200, 200, 300, 300), 0.6)])
    reward_config = RewardConfig(iou_weight=2.0, confidence_weight=0.5, format_weight=0.0)

    assert detection_reward(response, create_ground_truths([(0, 0, 100, 100)]), reward_config).total == pytest.approx(2 * 0.4 + 0.5 * 0.65)


def test_detection_reward_grows_with_iou() -> None:
    ground_truths = create_ground_truths([(0, 0, 100, 100)])
    totals = [detection_reward(create_response([((0, 0, 100, height), 0.8)]), ground_truths).total for height in range(50, 101, 5)]

    assert all(low < high for low, high in zip(totals, totals[1:]))


def test_detection_reward_confidence_direction() -> None:
    ground_truths = create_ground_truths([(0, 0, 100, 100)])
    confidences = [index / 10 for index in range(11)]
    matched = [detection_reward(create_response([((0, 0, 100, 100), confidence)]), ground_truths).r_conf for confidence in confidences]
    unmatched = [detection_reward(create_response([((500, 500, 600, 600), confidence)]), ground_truths).r_conf for confidence in confidences]

    assert matched == sorted(matched)
    assert unmatched == sorted(unmatched, reverse=True)


def test_detection_reward_ignores_emission_order() -> None:
    generator = numpy.random.default_rng(3)
    ground_truths = [(0, 0, 200, 200), (300, 300, 500, 500), (600, 100, 900, 400)]
    predictions = [((10, 10, 210, 190), 0.91), ((300, 320, 490, 500), 0.42), ((610, 90, 880, 400), 0.67), ((0, 700, 100, 800), 0.15)]
    reference = detection_reward(create_response(predictions), create_ground_truths(ground_truths)).total

    for permutation in itertools.permutations(predictions):
        assert detection_reward(create_response(list(permutation)), create_ground_truths(ground_truths)).total == pytest.approx(reference, abs=1e-12)
    for _ in range(20):
        shuffled = [ground_truths[index] for index in generator.permutation(len(ground_truths))]
        assert detection_reward(create_response(predictions), create_ground_truths(shuffled)).total == pytest.approx(reference, abs=1e-12)


def test_detection_reward_threshold() -> None:
    ground_truths = create_ground_truths([(0, 0, 100, 100)])
    response = create_response([((0, 0, 100, 60), 0.7)])

    assert detection_reward(response, ground_truths, RewardConfig(tau=0.6)).r_iou == pytest.approx(0.6)
    assert detection_reward(response, ground_truths, RewardConfig(tau=0.61)).r_iou == 0.0


def test_classification_reward() -> None:
    assert classification_reward('<think>looks like one</think><answer>pug</answer>', 'Pug').total == 2
    wrong = classification_reward('<think>hmm</think><answer>beagle</answer>', 'pug')
    assert (wrong.r_format, wrong.r_acc, wrong.total) == (1, 0, 1)
    missing_think = classification_reward('<answer>pug</answer>', 'pug')
    assert (missing_think.r_format, missing_think.r_acc, missing_think.total) == (0, 0, 0)
    empty = classification_reward('<think>hmm</think><answer> </answer>', 'pug')
    assert (empty.r_format, empty.r_acc) == (1, 0)
    assert empty.r_iou is None and empty.r_conf is None


def test_verify_exact() -> None:
    assert verify_exact('42', '42') == 1
    assert verify_exact('42', '43') == 0
    assert verify_exact(' cat', 'CAT') == 1
