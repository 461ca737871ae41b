from typing import List

import verity.globals
from verity.core import get_lattice_spec, get_reward_config, get_trainer_config, update_status
from verity.dataset import load_annotations
from verity.environment import generate_scene, scenes_from_annotations, train
from verity.processors.core import progress_bar
from verity.typing import CLASSIFICATION, DETECTION, Scene, TrainingCurve
from verity.utilities import is_file, write_json_lines

NAME = 'VERITY.TRAIN-SIM'


def pre_check() -> bool:
    if verity.globals.annotations_path and not is_file(verity.globals.annotations_path):
        update_status('Select an existing annotation file or none for a generated scene.', NAME)
        return False
    if not verity.globals.output_path:
        update_status('Select an output path for the training curve.', NAME)
        return False
    if verity.globals.task not in (None, DETECTION, CLASSIFICATION):
        update_status('Training scenes are detection or classification scenes.', NAME)
        return False
    return True


def get_scenes() -> List[Scene]:
    task = verity.globals.task or CLASSIFICATION
    if verity.globals.annotations_path:
        return scenes_from_annotations(load_annotations(verity.globals.annotations_path), task)
    return [generate_scene(task, verity.globals.seed, label_total=verity.globals.labels, lattice=get_lattice_spec())]


def render_summary(curve: TrainingCurve) -> str:
    lines = ['step  mean_reward  expected_reward  best_action_probability  kl']
    for record in (curve[0], curve[-1]):
        lines.append(f'{record.step:>4}  {record.mean_reward:>11.4f}  {record.expected_reward:>15.4f}  {record.best_action_probability:>23.4f}  {record.kl:.4f}')
    return '\n'.join(lines)


def process() -> None:
    scenes = get_scenes()
    trainer_config = get_trainer_config()
    update_status(f'Training on {len(scenes)} scenes for {trainer_config.steps} steps...', NAME)
    with progress_bar(trainer_config.steps, 'Training', 'step') as update:
        curve, _ = train(scenes, trainer_config, get_reward_config(), get_lattice_spec(), update)
    write_json_lines(verity.globals.output_path, curve)
    if not curve:
        update_status('No steps requested, the curve is empty.', NAME)
        return
    print(render_summary(curve))
    update_status(f'Mean reward went from {curve[0].mean_reward:.4f} to {curve[-1].mean_reward:.4f}.', NAME)
