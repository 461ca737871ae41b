import verity.globals
from verity.dataset import build_prompt, load_prompt_template
from verity.typing import DETECTION

NAME = 'VERITY.PROMPTS'


def pre_check() -> bool:
    return True


def process() -> None:
    template = load_prompt_template(verity.globals.task or DETECTION)
    print(build_prompt(template, verity.globals.category))
