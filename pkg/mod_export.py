import json
import logging
from pathlib import Path
import pandas as pd

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"


def write_outputs(out_dir, outputs):
    """
    Write {file name: DataFrame or dict} into out_dir, DataFrames as CSV and
    dicts as JSON. Returns the written paths in the order given.
    """
    out = Path(out_dir)
    out.mkdir(parents = True, exist_ok = True)
    written = []
    for name, content in outputs.items():
        path = out/name
        if isinstance(content, pd.DataFrame):
            content.to_csv(path, index = False, float_format = FLOAT_FORMAT)
        else:
            with open(path, "w", encoding = "utf-8") as f:
                json.dump(content, f, indent = 2, allow_nan = True)
                f.write("\n")
        logger.info("Wrote %s", path)
        written.append(path)
    return written
