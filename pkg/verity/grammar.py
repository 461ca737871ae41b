import ast
import math
import re
from typing import Any

from verity.exceptions import EmptyAnswer, InvalidBox, InvalidConfidence, MalformedAnswer
from verity.typing import BBox, DetectionAnswer, Label, NO_OBJECTS, ParsedResponse, Prediction

THINK_OPEN = '<think>'
THINK_CLOSE = '</think>'
ANSWER_OPEN = '<answer>'
ANSWER_CLOSE = '</answer>'
RESPONSE_TAGS = (THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE)
RESPONSE_PATTERN = re.compile(r'\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*', re.DOTALL)
NO_OBJECTS_SENTINEL = 'No Objects'
COORDINATE_MAX = 1000


def parse_response(raw: str) -> ParsedResponse:
    if any(raw.count(tag) != 1 for tag in RESPONSE_TAGS):
        return ParsedResponse('', '', False)
    match = RESPONSE_PATTERN.fullmatch(raw)
    if match:
        return ParsedResponse(match.group(1), match.group(2), True)
    return ParsedResponse('', '', False)


def render_response(think: str, answer_raw: str) -> str:
    return THINK_OPEN + think + THINK_CLOSE + ANSWER_OPEN + answer_raw + ANSWER_CLOSE


def create_box(x1: int, y1: int, x2: int, y2: int) -> BBox:
    if not 0 <= x1 < x2 <= COORDINATE_MAX or not 0 <= y1 < y2 <= COORDINATE_MAX:
        raise InvalidBox(f'Box [{x1}, {y1}, {x2}, {y2}] is outside 0-{COORDINATE_MAX} or has no area.')
    return BBox(x1, y1, x2, y2)


def is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_prediction(record: Any) -> Prediction:
    if not isinstance(record, dict) or 'Position' not in record or 'Confidence' not in record:
        raise MalformedAnswer(f'Record {record!r} needs Position and Confidence.')
    position = record['Position']
    if not isinstance(position, (list, tuple)) or len(position) != 4 or not all(is_integer(value) for value in position):
        raise MalformedAnswer(f'Position {position!r} is not four integers.')
    box = create_box(*position)
    confidence = record['Confidence']
    if not is_number(confidence):
        raise MalformedAnswer(f'Confidence {confidence!r} is not a number.')
    if not 0 <= confidence <= 1 or not math.isfinite(confidence):
        raise InvalidConfidence(f'Confidence {confidence!r} is outside [0, 1].')
    return Prediction(box, float(confidence))


def parse_detection_answer(answer_raw: str) -> DetectionAnswer:
    payload = answer_raw.strip()
    if payload.casefold() == NO_OBJECTS_SENTINEL.casefold():
        return NO_OBJECTS
    try:
        records = ast.literal_eval(payload)
    except (ValueError, TypeError, SyntaxError, MemoryError, RecursionError) as exception:
        raise MalformedAnswer(f'Answer payload {payload[:80]!r} is not a record list.') from exception
    if not isinstance(records, (list, tuple)) or not records:
        raise MalformedAnswer(f'Answer payload {payload[:80]!r} is not a non-empty record list.')
    return tuple(parse_prediction(record) for record in records)


def serialize_prediction(prediction: Prediction) -> str:
    box = prediction.box
    return f"{{'Position': [{box.x1}, {box.y1}, {box.x2}, {box.y2}], 'Confidence': {prediction.confidence:.2f}}}"


def serialize_detection_answer(answer: DetectionAnswer) -> str:
    if not answer:
        return NO_OBJECTS_SENTINEL
    return '[' + ', '.join(serialize_prediction(prediction) for prediction in answer) + ']'


def normalize_label(text: str) -> Label:
    return ' '.join(text.strip().casefold().split())


def parse_classification_answer(answer_raw: str) -> Label:
    label = normalize_label(answer_raw)
    if not label:
        raise EmptyAnswer('Classification answer is empty.')
    return label
