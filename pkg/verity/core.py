#!/usr/bin/env python3

import sys
import signal
import argparse
from typing import List, Optional

import verity.globals
import verity.metadata
from verity.exceptions import VerityError
from verity.processors.core import load_command_processor_module
from verity.typing import CLASSIFICATION, COCO_IOU_THRESHOLDS, DETECTION, EvalConfig, JUDGE, LatticeSpec, RewardConfig, TrainerConfig
from verity.utilities import get_default_output_name, normalize_output_path


def create_program() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument('--annotations', help='select an annotation file', dest='annotations_path')
    options.add_argument('--responses', help='select a response log', dest='responses_path')
    options.add_argument('--out', help='select output file or directory', dest='output_path')
    options.add_argument('--seed', help='seed for sampling and scene generation', dest='seed', type=int, default=0)
    options.add_argument('--task', help='task of the responses (choices: detection, classification, judge)', dest='task', choices=[DETECTION, CLASSIFICATION, JUDGE])
    options.add_argument('--category', help='category inserted into the prompt', dest='category')
    options.add_argument('--categories', help='categories to sample', dest='categories', default=[], nargs='+')
    options.add_argument('--shots', help='images per category', dest='shots', type=int, default=1)
    options.add_argument('--tau', help='IoU threshold of the detection reward', dest='tau', type=float, default=0.5)
    options.add_argument('--iou-weight', help='weight of the IoU reward', dest='iou_weight', type=float, default=1.0)
    options.add_argument('--confidence-weight', help='weight of the confidence reward', dest='confidence_weight', type=float, default=1.0)
    options.add_argument('--format-weight', help='weight of the format reward', dest='format_weight', type=float, default=1.0)
    options.add_argument('--accuracy-weight', help='weight of the accuracy reward', dest='accuracy_weight', type=float, default=1.0)
    options.add_argument('--beta', help='KL penalty coefficient', dest='beta', type=float, default=0.04)
    options.add_argument('--group-size', help='responses sampled per query', dest='group_size', type=int, default=8)
    options.add_argument('--learning-rate', help='policy learning rate', dest='learning_rate', type=float, default=0.1)
    options.add_argument('--steps', help='number of policy updates', dest='steps', type=int, default=500)
    options.add_argument('--std-floor', help='lower bound of the group reward deviation', dest='std_floor', type=float, default=1e-8)
    options.add_argument('--labels', help='labels of the generated classification scene', dest='labels', type=int, default=4)
    options.add_argument('--lattice-step', help='coordinate step of detection actions', dest='lattice_step', type=int, default=125)
    options.add_argument('--lattice-confidences', help='confidence levels of detection actions', dest='lattice_confidences', type=float, default=[0.3, 0.6, 0.9], nargs='+')
    options.add_argument('--lattice-max-boxes', help='boxes per detection action', dest='lattice_max_boxes', type=int, default=2)
    options.add_argument('--judge', help='gate detections by existence judgments', dest='judge', action='store_true')
    options.add_argument('--iou-thresholds', help='IoU thresholds averaged into mAP', dest='iou_thresholds', type=float, default=[], nargs='+')
    options.add_argument('--small-area', help='upper pixel area of small boxes', dest='small_area', type=float, default=32 ** 2)
    options.add_argument('--medium-area', help='upper pixel area of medium boxes', dest='medium_area', type=float, default=96 ** 2)
    options.add_argument('--max-detections', help='detections kept per image and category', dest='max_detections', type=int, default=100)
    options.add_argument('--per-category', help='add per-category AP to the result', dest='per_category', action='store_true')
    options.add_argument('--execution-threads', help='number of execution threads', dest='execution_threads', type=int, default=1)
    program = argparse.ArgumentParser(prog=verity.metadata.name, formatter_class=lambda prog: argparse.HelpFormatter(prog, max_help_position=100))
    program.add_argument('-v', '--version', action='version', version=f'{verity.metadata.name} {verity.metadata.version}')
    commands = program.add_subparsers(dest='command', required=True)
    commands.add_parser('reward', parents=[options], help='score a response log with the verifiable rewards')
    commands.add_parser('eval', parents=[options], help='compute COCO-style AP of a response log')
    commands.add_parser('train-sim', parents=[options], help='run GRPO on toy scenes')
    commands.add_parser('sample', parents=[options], help='draw a few-shot annotation subset')
    commands.add_parser('prompts', parents=[options], help='print a prompt template')
    return program


def parse_args(argv: Optional[List[str]] = None) -> None:
    signal.signal(signal.SIGINT, lambda signal_number, frame: destroy())
    args = create_program().parse_args(argv)

    verity.globals.command = args.command
    verity.globals.annotations_path = args.annotations_path
    verity.globals.responses_path = args.responses_path
    verity.globals.output_path = normalize_output_path(args.output_path, get_default_output_name())
    verity.globals.seed = args.seed
    verity.globals.task = args.task
    verity.globals.category = args.category
    verity.globals.categories = args.categories
    verity.globals.shots = args.shots
    verity.globals.tau = args.tau
    verity.globals.iou_weight = args.iou_weight
    verity.globals.confidence_weight = args.confidence_weight
    verity.globals.format_weight = args.format_weight
    verity.globals.accuracy_weight = args.accuracy_weight
    verity.globals.beta = args.beta
    verity.globals.group_size = args.group_size
    verity.globals.learning_rate = args.learning_rate
    verity.globals.steps = args.steps
    verity.globals.std_floor = args.std_floor
    verity.globals.labels = args.labels
    verity.globals.lattice_step = args.lattice_step
    verity.globals.lattice_confidences = args.lattice_confidences
    verity.globals.lattice_max_boxes = args.lattice_max_boxes
    verity.globals.judge = args.judge
    verity.globals.iou_thresholds = args.iou_thresholds
    verity.globals.small_area = args.small_area
    verity.globals.medium_area = args.medium_area
    verity.globals.max_detections = args.max_detections
    verity.globals.per_category = args.per_category
    verity.globals.execution_threads = args.execution_threads


def get_reward_config() -> RewardConfig:
    return RewardConfig(
        tau=verity.globals.tau,
        iou_weight=verity.globals.iou_weight,
        confidence_weight=verity.globals.confidence_weight,
        format_weight=verity.globals.format_weight,
        accuracy_weight=verity.globals.accuracy_weight
    )


def get_trainer_config() -> TrainerConfig:
    return TrainerConfig(
        group_size=verity.globals.group_size,
        learning_rate=verity.globals.learning_rate,
        beta=verity.globals.beta,
        steps=verity.globals.steps,
        seed=verity.globals.seed,
        std_floor=verity.globals.std_floor
    )


def get_eval_config() -> EvalConfig:
    return EvalConfig(
        iou_thresholds=tuple(verity.globals.iou_thresholds) or COCO_IOU_THRESHOLDS,
        small_area=verity.globals.small_area,
        medium_area=verity.globals.medium_area,
        judge_mode=verity.globals.judge,
        max_detections=verity.globals.max_detections
    )


def get_lattice_spec() -> LatticeSpec:
    return LatticeSpec(
        step=verity.globals.lattice_step,
        confidences=tuple(verity.globals.lattice_confidences),
        max_boxes=verity.globals.lattice_max_boxes
    )


def pre_check() -> bool:
    if sys.version_info < (3, 9):
        update_status('Python version is not supported - please upgrade to 3.9 or higher.')
        return False
    if verity.globals.execution_threads < 1:
        update_status('Execution threads must be at least 1.')
        return False
    return True


def update_status(message: str, scope: str = 'VERITY.CORE') -> None:
    print(f'[{scope}] {message}')


def destroy() -> None:
    sys.exit(1)


def run(argv: Optional[List[str]] = None) -> int:
    try:
        parse_args(argv)
    except SystemExit as exception:
        return 0 if not exception.code else 1
    if not pre_check():
        return 1
    command_processor = load_command_processor_module(verity.globals.command)
    try:
        if not command_processor.pre_check():
            return 1
        command_processor.process()
    except VerityError as exception:
        update_status(f'{type(exception).__name__}: {exception}', command_processor.NAME)
        return 1
    except OSError as exception:
        update_status(f'{exception.strerror or exception}: {exception.filename}', command_processor.NAME)
        return 1
    except Exception as exception:
        update_status(f'Internal error {type(exception).__name__}: {exception}', command_processor.NAME)
        return 2
    return 0
