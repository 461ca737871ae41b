import os
import sys
import importlib
import psutil
from concurrent.futures import ThreadPoolExecutor, as_completed
from queue import Queue
from typing import Any, Callable, Iterator, List, Sequence, Tuple, TypeVar
from contextlib import contextmanager
from tqdm import tqdm

import verity.globals

Item = TypeVar('Item')
Outcome = TypeVar('Outcome')

COMMAND_PROCESSORS_INTERFACE = [
    'NAME',
    'pre_check',
    'process'
]


def load_command_processor_module(command: str) -> Any:
    try:
        command_processor_module = importlib.import_module(f'verity.processors.command.{command.replace("-", "_")}')
        for method_name in COMMAND_PROCESSORS_INTERFACE:
            if not hasattr(command_processor_module, method_name):
                raise NotImplementedError
    except ModuleNotFoundError:
        sys.exit(f'Command processor {command} not found.')
    except NotImplementedError:
        sys.exit(f'Command processor {command} not implemented correctly.')
    return command_processor_module


def multi_process(items: Sequence[Item], process_items: Callable[[List[Tuple[int, Item]], Callable[[], None]], List[Tuple[int, Outcome]]], update: Callable[[], None]) -> List[Outcome]:
    execution_threads = max(verity.globals.execution_threads, 1)
    outcomes: List[Any] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=execution_threads) as executor:
        futures = []
        queue = create_queue(list(enumerate(items)))
        queue_per_future = max(len(items) // execution_threads, 1)
        while not queue.empty():
            future = executor.submit(process_items, pick_queue(queue, queue_per_future), update)
            futures.append(future)
        for future in as_completed(futures):
            for index, outcome in future.result():
                outcomes[index] = outcome
    return outcomes


def create_queue(indexed_items: List[Tuple[int, Item]]) -> 'Queue[Tuple[int, Item]]':
    queue: Queue[Tuple[int, Item]] = Queue()
    for indexed_item in indexed_items:
        queue.put(indexed_item)
    return queue


def pick_queue(queue: 'Queue[Tuple[int, Item]]', queue_per_future: int) -> List[Tuple[int, Item]]:
    queues = []
    for _ in range(queue_per_future):
        if not queue.empty():
            queues.append(queue.get())
    return queues


@contextmanager
def progress_bar(total: int, description: str, unit: str) -> Iterator[Callable[[], None]]:
    progress_bar_format = '{l_bar}{bar}| {n_fmt}/{total_fmt} [{elapsed}<{remaining}, {rate_fmt}{postfix}]'
    with tqdm(total=total, desc=description, unit=unit, dynamic_ncols=True, bar_format=progress_bar_format, file=sys.stderr) as progress:
        yield lambda: update_progress(progress)


def process_records(items: Sequence[Item], process_items: Callable[[List[Tuple[int, Item]], Callable[[], None]], List[Tuple[int, Outcome]]]) -> List[Outcome]:
    with progress_bar(len(items), 'Processing', 'record') as update:
        return multi_process(items, process_items, update)


def update_progress(progress: Any = None) -> None:
    process = psutil.Process(os.getpid())
    memory_usage = process.memory_info().rss / 1024 / 1024 / 1024
    progress.set_postfix({
        'memory_usage': '{:.2f}'.format(memory_usage).zfill(5) + 'GB',
        'execution_threads': verity.globals.execution_threads
    })
    progress.refresh()
    progress.update(1)
