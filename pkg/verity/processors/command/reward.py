from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy

import verity.globals
from verity.core import get_reward_config, update_status
from verity.dataset import load_annotations, read_response_log
from verity.exceptions import ValidationError
from verity.processors.core import process_records
from verity.reward import classification_reward, detection_reward
from verity.typing import AnnotationSet, CLASSIFICATION, DETECTION, GroundTruthInstance, Label, ResponseRecord, RewardBreakdown, RewardConfig
from verity.utilities import missing_paths, write_json

NAME = 'VERITY.REWARD'
COMPONENTS = ['r_iou', 'r_conf', 'r_format', 'r_acc', 'total']


def pre_check() -> bool:
    if missing_paths([verity.globals.annotations_path, verity.globals.responses_path]):
        update_status('Select an existing annotation file and response log.', NAME)
        return False
    if not verity.globals.output_path:
        update_status('Select an output path for the reward report.', NAME)
        return False
    if verity.globals.task not in (None, DETECTION, CLASSIFICATION):
        update_status('Rewards are defined for detection and classification responses.', NAME)
        return False
    return True


def get_image_labels(annotation_set: AnnotationSet) -> Dict[int, Label]:
    image_labels = {}
    for image in annotation_set.images:
        labels = {instance.category for instance in annotation_set.instances if instance.image_id == image.image_id}
        if len(labels) == 1:
            image_labels[image.image_id] = labels.pop()
    return image_labels


def create_scorer(annotation_set: AnnotationSet, response_log: Sequence[ResponseRecord], task: str, reward_config: RewardConfig) -> Callable[[List[Tuple[int, ResponseRecord]], Callable[[], None]], List[Tuple[int, RewardBreakdown]]]:
    ground_truths: Dict[Tuple[int, Label], List[GroundTruthInstance]] = {}
    for instance in annotation_set.instances:
        ground_truths.setdefault((instance.image_id, instance.category), []).append(instance)
    image_labels = get_image_labels(annotation_set)
    if task == CLASSIFICATION:
        for record in response_log:
            if record.image_id not in image_labels:
                raise ValidationError(f'Image {record.image_id} needs exactly one annotated category for classification.')

    def score_record(record: ResponseRecord) -> RewardBreakdown:
        if task == CLASSIFICATION:
            return classification_reward(record.response, image_labels[record.image_id], reward_config)
        return detection_reward(record.response, ground_truths.get((record.image_id, record.category), []), reward_config)

    def score_records(indexed_records: List[Tuple[int, ResponseRecord]], update: Callable[[], None]) -> List[Tuple[int, RewardBreakdown]]:
        scores = []
        for index, record in indexed_records:
            scores.append((index, score_record(record)))
            if update:
                update()
        return scores

    return score_records


def mean_component(breakdowns: Sequence[RewardBreakdown], component: str) -> Optional[float]:
    values = [getattr(breakdown, component) for breakdown in breakdowns if getattr(breakdown, component) is not None]
    if values:
        return float(numpy.mean(values))
    return None


def create_report(task: str, response_log: Sequence[ResponseRecord], breakdowns: Sequence[RewardBreakdown]) -> Dict[str, Any]:
    return {
        'task': task,
        'count': len(breakdowns),
        'mean': {component: mean_component(breakdowns, component) for component in COMPONENTS},
        'records': [
            {'image_id': record.image_id, 'category': record.category, **breakdown._asdict()}
            for record, breakdown in zip(response_log, breakdowns)
        ]
    }


def process() -> None:
    task = verity.globals.task or DETECTION
    annotation_set = load_annotations(verity.globals.annotations_path)
    response_log = read_response_log(verity.globals.responses_path, annotation_set)
    update_status(f'Scoring {len(response_log)} {task} responses...', NAME)
    breakdowns = process_records(response_log, create_scorer(annotation_set, response_log, task, get_reward_config()))
    report = create_report(task, response_log, breakdowns)
    write_json(verity.globals.output_path, report)
    mean_total = report['mean']['total']
    if mean_total is None:
        update_status('No responses to score.', NAME)
    else:
        update_status(f'Mean reward {mean_total:.4f} over {len(breakdowns)} responses.', NAME)
