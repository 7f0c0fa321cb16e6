import tempfile
from pathlib import Path
from typing import Optional

REPORT_FILENAME = "report.html"
RESULTS_FILENAME = "results.json"


def get_output_dir(output_dir: Optional[Path]) -> Path:
    out = (
        output_dir
        if output_dir is not None
        else Path(tempfile.mkdtemp(prefix="stratified_eval_"))
    )
    out.mkdir(exist_ok=True, parents=True)
    return out
