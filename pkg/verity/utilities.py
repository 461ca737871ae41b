import json
import os
from pathlib import Path
from typing import Any, Iterable, List, NamedTuple, Optional

import verity.globals


def read_text(path: str) -> str:
    with open(path, encoding='utf-8') as file:
        return file.read()


def write_text(path: str, text: str) -> None:
    create_parent_directory(path)
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(text)


def create_parent_directory(path: str) -> None:
    parent_directory_path = os.path.dirname(os.path.abspath(path))
    Path(parent_directory_path).mkdir(parents=True, exist_ok=True)


def to_record(value: Any) -> Any:
    if isinstance(value, tuple) and hasattr(value, '_asdict'):
        return {key: to_record(item) for key, item in value._asdict().items()}
    if isinstance(value, (list, tuple)):
        return [to_record(item) for item in value]
    if isinstance(value, dict):
        return {key: to_record(item) for key, item in value.items()}
    return value


def write_json(path: str, value: Any) -> None:
    write_text(path, json.dumps(to_record(value), indent=2) + '\n')


def write_json_lines(path: str, values: Iterable[NamedTuple]) -> None:
    write_text(path, ''.join(json.dumps(to_record(value)) + '\n' for value in values))


def is_file(path: Optional[str]) -> bool:
    return bool(path and os.path.isfile(path))


def missing_paths(paths: List[Optional[str]]) -> List[str]:
    return [str(path) for path in paths if not is_file(path)]


def normalize_output_path(output_path: Optional[str], default_name: str) -> Optional[str]:
    if output_path and os.path.isdir(output_path):
        return os.path.join(output_path, default_name)
    return output_path


def get_default_output_name() -> str:
    return f'{verity.globals.command}.json' if verity.globals.command != 'train-sim' else 'train-sim.jsonl'


def resolve_relative_path(path: str) -> str:
    return os.path.abspath(os.path.join(os.path.dirname(__file__), path))
