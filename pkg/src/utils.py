import json
import math
import os
import sys

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from src.exception import CustomException


def save_object(file_path, obj):
    try:
        dir_path = os.path.dirname(file_path)
        if dir_path:
            os.makedirs(dir_path, exist_ok=True)

        with open(file_path, "w", encoding="utf-8") as file_obj:
            json.dump(obj, file_obj, indent=2, sort_keys=True)

    except Exception as e:
        raise CustomException(e, sys)


def load_object(file_path):
    try:
        with open(file_path, "r", encoding="utf-8") as file_obj:
            return json.load(file_obj)

    except Exception as e:
        raise CustomException(e, sys)


def save_table(file_path, rows, columns):
    """Write rows (list of dicts) as CSV with a fixed column order."""
    try:
        dir_path = os.path.dirname(file_path)
        if dir_path:
            os.makedirs(dir_path, exist_ok=True)
        frame = pd.DataFrame(list(rows), columns=list(columns))
        frame.to_csv(file_path, index=False)
        return frame

    except Exception as e:
        raise CustomException(e, sys)


def save_jsonl(file_path, records):
    try:
        dir_path = os.path.dirname(file_path)
        if dir_path:
            os.makedirs(dir_path, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as file_obj:
            for record in records:
                file_obj.write(json.dumps(record, sort_keys=True) + "\n")

    except Exception as e:
        raise CustomException(e, sys)


def log_sum_exp(values) -> float:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return -math.inf
    return float(logsumexp(arr))
