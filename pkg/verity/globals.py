from typing import List, Optional

command: Optional[str] = None
annotations_path: Optional[str] = None
responses_path: Optional[str] = None
output_path: Optional[str] = None
task: Optional[str] = None
category: Optional[str] = None
categories: List[str] = []
shots: int = 1
seed: int = 0
tau: float = 0.5
iou_weight: float = 1.0
confidence_weight: float = 1.0
format_weight: float = 1.0
accuracy_weight: float = 1.0
beta: float = 0.04
group_size: int = 8
learning_rate: float = 0.1
steps: int = 500
std_floor: float = 1e-8
labels: int = 4
lattice_step: int = 125
lattice_confidences: List[float] = [0.3, 0.6, 0.9]
lattice_max_boxes: int = 2
judge: bool = False
iou_thresholds: List[float] = []
small_area: float = 32 ** 2
medium_area: float = 96 ** 2
max_detections: int = 100
per_category: bool = False
execution_threads: int = 1
