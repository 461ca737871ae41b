import numpy
import pytest

from verity.environment import build_action_table, generate_scene, rollout, scenes_from_annotations, score_actions, train
from verity.exceptions import GroupTooSmall, LatticeTooCoarse, ValidationError
from verity.grammar import serialize_detection_answer
from verity.grpo import group_advantages, uniform_policy
from verity.typing import AnnotationSet, BBox, Category, CLASSIFICATION, DETECTION, GroundTruthInstance, ImageInfo, LatticeSpec, NO_OBJECTS, Prediction, Scene, TrainerConfig


def create_detection_scene(*boxes: BBox) -> Scene:
    return Scene('scene', DETECTION, category='dog', boxes=boxes)


def create_classification_scene(labels: tuple, label: str) -> Scene:
    return Scene('scene', CLASSIFICATION, label=label, labels=labels)


def test_build_action_table_classification() -> None:
    assert build_action_table(create_classification_scene(('a', 'b', 'c'), 'b')) == ['a', 'b', 'c']


def test_build_action_table_detection() -> None:
    box = BBox(250, 250, 500, 500)
    table = build_action_table(create_detection_scene(box))

    assert table[0] == serialize_detection_answer(NO_OBJECTS)
    assert serialize_detection_answer((Prediction(box, 0.9),)) in table
    assert serialize_detection_answer((Prediction(BBox(0, 0, 250, 250), 0.3),)) in table
    assert len(table) == len(set(table)) == 10


def test_build_action_table_covers_every_box_in_one_action() -> None:
    boxes = (BBox(250, 250, 500, 500), BBox(500, 500, 750, 750), BBox(250, 500, 500, 750))
    table = build_action_table(create_detection_scene(*boxes), LatticeSpec(max_boxes=3))

    assert serialize_detection_answer(tuple(Prediction(box, 0.9) for box in boxes)) in table
    with pytest.raises(LatticeTooCoarse):
        build_action_table(create_detection_scene(*boxes))


def test_build_action_table_coarse_lattice() -> None:
    with pytest.raises(LatticeTooCoarse):
        build_action_table(create_detection_scene(BBox(0, 0, 30, 30)))


def test_build_action_table_rejects_invalid_scenes() -> None:
    with pytest.raises(ValidationError):
        build_action_table(create_classification_scene(('a', 'A'), 'a'))
    with pytest.raises(ValidationError):
        build_action_table(create_classification_scene(('a', 'b'), 'c'))
    with pytest.raises(ValidationError):
        build_action_table(Scene('scene', 'segmentation'))


def test_no_objects_is_best_without_ground_truth() -> None:
    scene = create_detection_scene()
    table = build_action_table(scene)
    rewards = score_actions(scene, table)

    assert table[int(numpy.argmax(rewards))] == 'No Objects'
    assert rewards.max() == 3.0


def test_rollout_deterministic_policy_on_exact_match() -> None:
    box = BBox(250, 250, 500, 500)
    scene = create_detection_scene(box)
    table = build_action_table(scene, LatticeSpec(confidences=(1.0,)))
    policy = uniform_policy(len(table))
    policy[table.index(serialize_detection_answer((Prediction(box, 1.0),)))] = 100.0

    group = rollout(policy, scene, table, 8, 0)

    assert group.rewards == (3.0,) * 8
    assert all(response.startswith('<think>') for response in group.responses)


def test_uniform_classification_expectation() -> None:
    scene = create_classification_scene(('rose', 'tulip', 'daisy', 'lily'), 'daisy')
    table = build_action_table(scene)
    group = rollout(uniform_policy(len(table)), scene, table, 64, 3)

    assert score_actions(scene, table).mean() == pytest.approx(1.25)
    assert set(group.rewards) <= {1.0, 2.0}


def test_single_response_group_is_too_small() -> None:
    scene = create_classification_scene(('rose', 'tulip'), 'rose')
    table = build_action_table(scene)
    group = rollout(uniform_policy(len(table)), scene, table, 1, 0)

    with pytest.raises(GroupTooSmall):
        group_advantages(group.rewards)


def test_train_classification_converges() -> None:
    converged = 0
    coupled = 0

    for seed in range(20):
        scene = generate_scene(CLASSIFICATION, seed)
        curve, policies = train([scene], TrainerConfig(seed=seed))
        if curve[-1].best_action_probability >= 0.9:
            converged += 1
        if scene.labels[int(numpy.argmax(policies[0]))] == scene.label:
            coupled += 1

    assert converged >= 19
    assert coupled >= 19


def test_train_detection_converges() -> None:
    converged = 0

    for seed in range(20):
        curve, _ = train([generate_scene(DETECTION, seed)], TrainerConfig(seed=seed))
        if curve[-1].expected_reward >= 2.7:
            converged += 1

    assert converged >= 19


def test_train_is_deterministic() -> None:
    scenes = [generate_scene(CLASSIFICATION, 4), generate_scene(DETECTION, 4)]
    trainer_config = TrainerConfig(steps=40, seed=9)

    first_curve, first_policies = train(scenes, trainer_config)
    second_curve, second_policies = train(scenes, trainer_config)

    assert first_curve == second_curve
    assert [record.scene_id for record in first_curve[:4]] == ['classification-4', 'detection-4'] * 2
    for first_policy, second_policy in zip(first_policies, second_policies):
        numpy.testing.assert_array_equal(first_policy, second_policy)


def test_train_zero_steps() -> None:
    scene = generate_scene(CLASSIFICATION, 0)
    updates = []

    curve, policies = train([scene], TrainerConfig(steps=0), update=lambda: updates.append(1))

    assert curve == []
    assert updates == []
    numpy.testing.assert_array_equal(policies[0], uniform_policy(4))


def test_train_reports_progress() -> None:
    updates = []

    curve, _ = train([generate_scene(CLASSIFICATION, 1)], TrainerConfig(steps=5), update=lambda: updates.append(1))

    assert len(curve) == len(updates) == 5
    assert [record.step for record in curve] == [0, 1, 2, 3, 4]


def test_generate_scene() -> None:
    scene = generate_scene(DETECTION, 12)

    assert scene == generate_scene(DETECTION, 12)
    assert len(scene.boxes) == 1
    assert all(value % 125 == 0 for value in scene.boxes[0])
    assert generate_scene(CLASSIFICATION, 12, label_total=6).label in generate_scene(CLASSIFICATION, 12, label_total=6).labels


def test_scenes_from_annotations() -> None:
    annotation_set = AnnotationSet(
        [ImageInfo(1, 640, 480), ImageInfo(2, 640, 480)],
        [Category(1, 'cat'), Category(2, 'dog')],
        [
            GroundTruthInstance('cat', BBox(0, 0, 500, 500), 1),
            GroundTruthInstance('dog', BBox(500, 500, 1000, 1000), 1),
            GroundTruthInstance('dog', BBox(0, 0, 250, 250), 2)
        ]
    )

    detection_scenes = scenes_from_annotations(annotation_set, DETECTION)
    classification_scenes = scenes_from_annotations(annotation_set, CLASSIFICATION)

    assert [scene.scene_id for scene in detection_scenes] == ['1:cat', '1:dog', '2:dog']
    assert classification_scenes == [Scene('2', CLASSIFICATION, label='dog', labels=('cat', 'dog'))]
