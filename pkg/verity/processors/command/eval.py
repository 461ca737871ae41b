from typing import Any, Dict, Optional

import verity.globals
from verity.core import get_eval_config, update_status
from verity.dataset import load_annotations, read_response_log
from verity.evaluation import evaluate, per_category_ap, results_from_log
from verity.typing import APResult
from verity.utilities import missing_paths, write_json

NAME = 'VERITY.EVAL'
COLUMNS = ['mAP', 'AP50', 'AP75', 'AP_s', 'AP_m', 'AP_l']


def pre_check() -> bool:
    if missing_paths([verity.globals.annotations_path, verity.globals.responses_path]):
        update_status('Select an existing annotation file and response log.', NAME)
        return False
    if not verity.globals.output_path:
        update_status('Select an output path for the evaluation result.', NAME)
        return False
    return True


def format_value(value: Optional[float]) -> str:
    if value is None:
        return '-'
    return f'{value * 100:.1f}'


def render_table(ap_result: APResult) -> str:
    cells = [format_value(value) for value in ap_result]
    widths = [max(len(column), len(cell)) for column, cell in zip(COLUMNS, cells)]
    header = '  '.join(column.rjust(width) for column, width in zip(COLUMNS, widths))
    row = '  '.join(cell.rjust(width) for cell, width in zip(cells, widths))
    return header + '\n' + row


def process() -> None:
    annotation_set = load_annotations(verity.globals.annotations_path)
    response_log = read_response_log(verity.globals.responses_path, annotation_set)
    eval_config = get_eval_config()
    results, judgments = results_from_log(annotation_set, response_log)
    mode = 'judge' if eval_config.judge_mode else 'direct'
    update_status(f'Evaluating {len(results)} images in {mode} mode...', NAME)
    ap_result = evaluate(results, eval_config, judgments)
    record: Dict[str, Any] = {'mode': mode, 'iou_thresholds': list(eval_config.iou_thresholds), **ap_result._asdict()}
    if verity.globals.per_category:
        record['per_category'] = per_category_ap(results, eval_config, judgments)
    write_json(verity.globals.output_path, record)
    print(render_table(ap_result))
