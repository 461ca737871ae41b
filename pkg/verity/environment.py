import itertools
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy

from verity.exceptions import ConfigError, LatticeTooCoarse, NonFiniteGradient, ValidationError
from verity.grammar import COORDINATE_MAX, create_box, normalize_label, render_response, serialize_detection_answer
from verity.grpo import Seed, freeze_policy, group_advantages, grpo_step, sample_group, softmax, uniform_policy, validate_trainer_config
from verity.reward import DEFAULT_REWARD_CONFIG, classification_reward, detection_reward, iou
from verity.typing import ActionTable, AnnotationSet, BBox, CLASSIFICATION, CurveRecord, DETECTION, GroundTruthInstance, Group, LatticeSpec, NO_OBJECTS, Policy, Prediction, RewardConfig, Scene, TrainerConfig, TrainingCurve

THINK_PLACEHOLDER = 'Compare every candidate region with the query before answering.'
COVERAGE_IOU = 0.9
MAX_GROUND_TRUTHS = 8
MIN_LABELS = 2
MAX_LABELS = 64
DEFAULT_LATTICE = LatticeSpec()


def validate_scene(scene: Scene) -> None:
    if scene.task == DETECTION:
        if len(scene.boxes) > MAX_GROUND_TRUTHS:
            raise ValidationError(f'Scene {scene.scene_id} has {len(scene.boxes)} boxes, at most {MAX_GROUND_TRUTHS} are supported.')
        for box in scene.boxes:
            create_box(*box)
        return
    if scene.task == CLASSIFICATION:
        labels = [normalize_label(label) for label in scene.labels]
        if not MIN_LABELS <= len(labels) <= MAX_LABELS:
            raise ValidationError(f'Scene {scene.scene_id} needs {MIN_LABELS}-{MAX_LABELS} labels, got {len(labels)}.')
        if len(set(labels)) != len(labels) or normalize_label(scene.label) not in labels:
            raise ValidationError(f'Scene {scene.scene_id} needs distinct labels including {scene.label!r}.')
        return
    raise ValidationError(f'Scene {scene.scene_id} has unknown task {scene.task!r}.')


def validate_lattice(lattice: LatticeSpec) -> None:
    if not 0 < lattice.step <= COORDINATE_MAX // 2:
        raise ConfigError(f'Lattice step must be in 1-{COORDINATE_MAX // 2}, got {lattice.step}.')
    if not lattice.confidences or not all(0 <= confidence <= 1 for confidence in lattice.confidences):
        raise ConfigError('Lattice confidences must be a non-empty list of values in [0, 1].')
    if lattice.max_boxes < 1:
        raise ConfigError(f'Lattice actions need at least one box, got {lattice.max_boxes}.')


def scene_ground_truths(scene: Scene) -> List[GroundTruthInstance]:
    return [GroundTruthInstance(scene.category, box) for box in scene.boxes]


def snap_interval(start: int, end: int, step: int) -> Tuple[int, int]:
    low = min(COORDINATE_MAX, int(round(start / step)) * step)
    high = min(COORDINATE_MAX, int(round(end / step)) * step)
    if high <= low:
        high = min(low + step, COORDINATE_MAX)
        low = high - step
    return low, high


def snap_box(box: BBox, step: int) -> BBox:
    x1, x2 = snap_interval(box.x1, box.x2, step)
    y1, y2 = snap_interval(box.y1, box.y2, step)
    return BBox(x1, y1, x2, y2)


def corner_boxes(step: int) -> List[BBox]:
    size = min(2 * step, COORDINATE_MAX)
    far = COORDINATE_MAX - size
    return [BBox(0, 0, size, size), BBox(far, 0, COORDINATE_MAX, size), BBox(0, far, size, COORDINATE_MAX), BBox(far, far, COORDINATE_MAX, COORDINATE_MAX)]


def distractor_box(scene: Scene, step: int) -> Optional[BBox]:
    for box in corner_boxes(step):
        if all(iou(box, ground_truth_box) == 0 for ground_truth_box in scene.boxes):
            return box
    return None


# one snapped anchor per ground truth plus one distractor that overlaps none of them
def candidate_boxes(scene: Scene, lattice: LatticeSpec) -> List[BBox]:
    boxes = [snap_box(box, lattice.step) for box in scene.boxes]
    distractor = distractor_box(scene, lattice.step)
    if distractor:
        boxes.append(distractor)
    return list(dict.fromkeys(boxes))


def build_action_table(scene: Scene, lattice: LatticeSpec = DEFAULT_LATTICE) -> ActionTable:
    validate_scene(scene)
    if scene.task == CLASSIFICATION:
        return list(scene.labels)
    validate_lattice(lattice)
    if len(scene.boxes) > lattice.max_boxes:
        raise LatticeTooCoarse(f'Scene {scene.scene_id} has {len(scene.boxes)} boxes but actions hold at most {lattice.max_boxes}.')
    boxes = candidate_boxes(scene, lattice)
    for box in scene.boxes:
        if max(iou(box, candidate_box) for candidate_box in boxes) < COVERAGE_IOU:
            raise LatticeTooCoarse(f'No lattice box reaches IoU {COVERAGE_IOU} with {list(box)} at step {lattice.step}.')
    table = [serialize_detection_answer(NO_OBJECTS)]
    for size in range(1, lattice.max_boxes + 1):
        for combination in itertools.combinations(boxes, size):
            for confidence in lattice.confidences:
                table.append(serialize_detection_answer(tuple(Prediction(box, confidence) for box in combination)))
    return table


def score_response(scene: Scene, response: str, reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> float:
    if scene.task == DETECTION:
        return detection_reward(response, scene_ground_truths(scene), reward_config).total
    return classification_reward(response, scene.label, reward_config).total


def score_actions(scene: Scene, table: ActionTable, reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> Policy:
    return numpy.array([score_response(scene, render_response(THINK_PLACEHOLDER, answer_raw), reward_config) for answer_raw in table])


def rollout(policy: Policy, scene: Scene, table: ActionTable, group_size: int, seed: Seed, reward_config: RewardConfig = DEFAULT_REWARD_CONFIG) -> Group:
    if policy.size != len(table):
        raise ConfigError(f'Policy covers {policy.size} actions, the table has {len(table)}.')
    group = sample_group(policy, group_size, seed, scene.scene_id)
    responses = tuple(render_response(THINK_PLACEHOLDER, table[action]) for action in group.actions)
    rewards = tuple(score_response(scene, response, reward_config) for response in responses)
    return group._replace(responses=responses, rewards=rewards)


def train(scenes: Sequence[Scene], trainer_config: TrainerConfig, reward_config: RewardConfig = DEFAULT_REWARD_CONFIG, lattice: LatticeSpec = DEFAULT_LATTICE, update: Optional[Callable[[], None]] = None) -> Tuple[TrainingCurve, List[Policy]]:
    if not scenes:
        raise ConfigError('Training needs at least one scene.')
    validate_trainer_config(trainer_config)
    tables = [build_action_table(scene, lattice) for scene in scenes]
    action_rewards = [score_actions(scene, table, reward_config) for scene, table in zip(scenes, tables)]
    best_actions = [int(numpy.argmax(rewards)) for rewards in action_rewards]
    policies = [uniform_policy(len(table)) for table in tables]
    references = [freeze_policy(policy) for policy in policies]
    curve: TrainingCurve = []
    for step in range(trainer_config.steps):
        index = step % len(scenes)
        group = rollout(policies[index], scenes[index], tables[index], trainer_config.group_size, [trainer_config.seed, step], reward_config)
        group = group._replace(advantages=tuple(group_advantages(group.rewards, trainer_config.std_floor)))
        try:
            policies[index], stats = grpo_step(policies[index], references[index], group, trainer_config)
        except NonFiniteGradient as exception:
            raise NonFiniteGradient(f'Non-finite gradient at step {step}.') from exception
        probabilities = softmax(policies[index])
        curve.append(CurveRecord(
            step=step,
            scene_id=scenes[index].scene_id,
            mean_reward=stats.mean_reward,
            expected_reward=float(probabilities @ action_rewards[index]),
            kl=stats.kl,
            objective=stats.objective,
            grad_norm=stats.grad_norm,
            best_action_probability=float(probabilities[best_actions[index]])
        ))
        if update:
            update()
    return curve, policies


def generate_scene(task: str, seed: int, label_total: int = 4, box_total: int = 1, lattice: LatticeSpec = DEFAULT_LATTICE) -> Scene:
    generator = numpy.random.default_rng(seed)
    if task == CLASSIFICATION:
        labels = tuple(f'species {index}' for index in range(label_total))
        return Scene(f'{task}-{seed}', task, label=labels[int(generator.integers(label_total))], labels=labels)
    if task != DETECTION:
        raise ConfigError(f'Unknown task {task!r}.')
    cells = COORDINATE_MAX // lattice.step
    boxes = []
    for _ in range(box_total):
        width, height = (int(size) for size in generator.integers(2, min(4, cells) + 1, size=2))
        column = int(generator.integers(0, cells - width + 1))
        row = int(generator.integers(0, cells - height + 1))
        boxes.append(create_box(column * lattice.step, row * lattice.step, (column + width) * lattice.step, (row + height) * lattice.step))
    return Scene(f'{task}-{seed}', task, category='object', boxes=tuple(boxes))


def scenes_from_annotations(annotation_set: AnnotationSet, task: str) -> List[Scene]:
    labels = tuple(category.name for category in annotation_set.categories)
    image_boxes: Dict[int, Dict[str, List[BBox]]] = {image.image_id: {} for image in annotation_set.images}
    for instance in annotation_set.instances:
        image_boxes[instance.image_id].setdefault(instance.category, []).append(instance.box)
    scenes = []
    for image_id, category_boxes in image_boxes.items():
        if task == DETECTION:
            for category, boxes in category_boxes.items():
                scenes.append(Scene(f'{image_id}:{category}', DETECTION, category=category, boxes=tuple(boxes)))
        elif len(category_boxes) == 1:
            scenes.append(Scene(str(image_id), CLASSIFICATION, label=next(iter(category_boxes)), labels=labels))
    if not scenes:
        raise ValidationError(f'Annotations provide no {task} scenes.')
    return scenes
