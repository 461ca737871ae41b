import verity.globals
from verity.core import update_status
from verity.dataset import few_shot_sample, load_annotations, save_annotations
from verity.utilities import is_file

NAME = 'VERITY.SAMPLE'


def pre_check() -> bool:
    if not is_file(verity.globals.annotations_path):
        update_status('Select an existing annotation file.', NAME)
        return False
    if not verity.globals.output_path:
        update_status('Select an output path for the sampled annotations.', NAME)
        return False
    if not verity.globals.categories:
        update_status('Select at least one category to sample.', NAME)
        return False
    return True


def process() -> None:
    annotation_set = load_annotations(verity.globals.annotations_path)
    subset = few_shot_sample(annotation_set, verity.globals.shots, verity.globals.categories, verity.globals.seed)
    save_annotations(subset, verity.globals.output_path)
    update_status(f'Sampled {len(subset.images)} images with {len(subset.instances)} instances.', NAME)
