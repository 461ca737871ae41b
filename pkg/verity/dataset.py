import json
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy

from verity.exceptions import InvalidBox, MissingCategory, ParseError, UnknownCategory, UnknownId, ValidationError
from verity.grammar import COORDINATE_MAX, create_box, is_integer, is_number
from verity.typing import AnnotationSet, BBox, Category, DETECTION, GroundTruthInstance, ImageInfo, JUDGE, Label, PromptTemplate, ResponseLog, ResponseRecord
from verity.utilities import read_text, resolve_relative_path, write_text

CATEGORY_SLOT = '{category}'
PROMPT_FILES = {
    DETECTION: 'prompts/detection.txt',
    'classification': 'prompts/classification.txt',
    JUDGE: 'prompts/judge.txt'
}


def round_half_away(value: float) -> int:
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def normalize_box(x: float, y: float, width: float, height: float, image_width: int, image_height: int) -> Tuple[int, int, int, int]:
    return (
        round_half_away(x * COORDINATE_MAX / image_width),
        round_half_away(y * COORDINATE_MAX / image_height),
        round_half_away((x + width) * COORDINATE_MAX / image_width),
        round_half_away((y + height) * COORDINATE_MAX / image_height)
    )


def denormalize_box(box: BBox, image_width: int, image_height: int) -> List[float]:
    x = box.x1 * image_width / COORDINATE_MAX
    y = box.y1 * image_height / COORDINATE_MAX
    return [x, y, box.x2 * image_width / COORDINATE_MAX - x, box.y2 * image_height / COORDINATE_MAX - y]


def read_json(path: str) -> Any:
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exception:
        raise ParseError(f'{path}:{exception.lineno}:{exception.colno}: {exception.msg}') from exception


def require(record: Any, field: str, context: str) -> Any:
    if not isinstance(record, dict) or field not in record:
        raise ParseError(f'{context} is missing field {field!r}.')
    return record[field]


def parse_images(records: Any) -> List[ImageInfo]:
    images = []
    for index, record in enumerate(records):
        context = f'images[{index}]'
        image_id, width, height = (require(record, field, context) for field in ('id', 'width', 'height'))
        if not is_integer(image_id) or not is_number(width) or not is_number(height) or width <= 0 or height <= 0:
            raise ValidationError(f'{context} needs an integer id and positive width and height.')
        images.append(ImageInfo(image_id, int(width), int(height), record.get('file_name')))
    return images


def parse_categories(records: Any) -> List[Category]:
    categories = []
    for index, record in enumerate(records):
        context = f'categories[{index}]'
        category_id, name = (require(record, field, context) for field in ('id', 'name'))
        if not is_integer(category_id) or not isinstance(name, str) or not name.strip():
            raise ValidationError(f'{context} needs an integer id and a non-empty name.')
        categories.append(Category(category_id, name))
    return categories


def parse_instances(records: Any, images: Dict[int, ImageInfo], categories: Dict[int, Category]) -> List[GroundTruthInstance]:
    instances = []
    for index, record in enumerate(records):
        context = f'annotations[{index}]'
        image_id, category_id, bbox = (require(record, field, context) for field in ('image_id', 'category_id', 'bbox'))
        if image_id not in images:
            raise ValidationError(f'{context} references unknown image {image_id!r}.')
        if category_id not in categories:
            raise ValidationError(f'{context} references unknown category {category_id!r}.')
        if not isinstance(bbox, list) or len(bbox) != 4 or not all(is_number(value) for value in bbox):
            raise ValidationError(f'{context} needs bbox [x, y, w, h] in pixels.')
        image = images[image_id]
        try:
            box = create_box(*normalize_box(*bbox, image.width, image.height))
        except InvalidBox as exception:
            raise ValidationError(f'{context}: {exception}') from exception
        instances.append(GroundTruthInstance(categories[category_id].name, box, image_id))
    return instances


def load_annotations(path: str) -> AnnotationSet:
    document = read_json(path)
    images = parse_images(require(document, 'images', path))
    categories = parse_categories(require(document, 'categories', path))
    if len({image.image_id for image in images}) != len(images):
        raise ValidationError(f'{path} contains duplicate image ids.')
    if len({category.category_id for category in categories}) != len(categories) or len({category.name for category in categories}) != len(categories):
        raise ValidationError(f'{path} contains duplicate category ids or names.')
    instances = parse_instances(
        require(document, 'annotations', path),
        {image.image_id: image for image in images},
        {category.category_id: category for category in categories}
    )
    return AnnotationSet(images, categories, instances)


def save_annotations(annotation_set: AnnotationSet, path: str) -> None:
    images = {image.image_id: image for image in annotation_set.images}
    category_ids = {category.name: category.category_id for category in annotation_set.categories}
    document = {
        'images': [{'id': image.image_id, 'width': image.width, 'height': image.height, **({'file_name': image.file_name} if image.file_name else {})} for image in annotation_set.images],
        'categories': [{'id': category.category_id, 'name': category.name} for category in annotation_set.categories],
        'annotations': [
            {'id': index + 1, 'image_id': instance.image_id, 'category_id': category_ids[instance.category], 'bbox': denormalize_box(instance.box, images[instance.image_id].width, images[instance.image_id].height)}
            for index, instance in enumerate(annotation_set.instances)
        ]
    }
    write_text(path, json.dumps(document, indent=2) + '\n')


def few_shot_sample(annotation_set: AnnotationSet, shots: int, categories: Sequence[Label], seed: int) -> AnnotationSet:
    known_categories = {category.name: category for category in annotation_set.categories}
    for category in categories:
        if category not in known_categories:
            raise UnknownCategory(f'Category {category!r} is not annotated.')
    if shots < 1:
        raise ValidationError(f'Shots must be positive, got {shots}.')
    generator = numpy.random.default_rng(seed)
    selected_ids = set()
    for category in categories:
        candidates = sorted({instance.image_id for instance in annotation_set.instances if instance.category == category})
        if not candidates:
            raise ValidationError(f'Category {category!r} has no annotated image.')
        picks = generator.choice(len(candidates), size=min(shots, len(candidates)), replace=False)
        selected_ids.update(candidates[int(pick)] for pick in picks)
    requested = set(categories)
    return AnnotationSet(
        [image for image in annotation_set.images if image.image_id in selected_ids],
        [category for category in annotation_set.categories if category.name in requested],
        [instance for instance in annotation_set.instances if instance.image_id in selected_ids and instance.category in requested]
    )


def load_prompt_template(task: str) -> PromptTemplate:
    if task not in PROMPT_FILES:
        raise ValidationError(f'Unknown prompt task {task!r}, choose from {sorted(PROMPT_FILES)}.')
    return PromptTemplate(task, read_text(resolve_relative_path(PROMPT_FILES[task])))


def build_prompt(template: PromptTemplate, category: Optional[Label] = None) -> str:
    if CATEGORY_SLOT not in template.text:
        return template.text
    if not category:
        raise MissingCategory(f'The {template.task} prompt needs a category.')
    return template.text.replace(CATEGORY_SLOT, category)


def parse_response_record(line: str, line_number: int, path: str) -> ResponseRecord:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exception:
        raise ParseError(f'{path}:{line_number}:{exception.colno}: {exception.msg}') from exception
    context = f'{path}:{line_number}'
    image_id, category, response = (require(record, field, context) for field in ('image_id', 'category', 'response'))
    judge_response = record.get('judge_response')
    if not is_integer(image_id) or not isinstance(category, str) or not isinstance(response, str) or not isinstance(judge_response, (str, type(None))):
        raise ParseError(f'{context} has fields of the wrong type.')
    return ResponseRecord(image_id, category, response, judge_response)


def read_response_log(path: str, annotation_set: AnnotationSet) -> ResponseLog:
    image_ids = {image.image_id for image in annotation_set.images}
    category_names = {category.name for category in annotation_set.categories}
    response_log = []
    for line_number, line in enumerate(read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        record = parse_response_record(line, line_number, path)
        if record.image_id not in image_ids:
            raise UnknownId(f'{path}:{line_number} references unknown image {record.image_id}.')
        if record.category not in category_names:
            raise UnknownId(f'{path}:{line_number} references unknown category {record.category!r}.')
        response_log.append(record)
    return response_log


def write_response_log(response_log: ResponseLog, path: str) -> None:
    lines = []
    for record in response_log:
        document: Dict[str, Any] = {'image_id': record.image_id, 'category': record.category, 'response': record.response}
        if record.judge_response is not None:
            document['judge_response'] = record.judge_response
        lines.append(json.dumps(document) + '\n')
    write_text(path, ''.join(lines))
