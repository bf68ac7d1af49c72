import csv
import json
import os
import sys

import numpy as np
import singer

from ps_teleport.encoders import NumpyEncoder
from ps_teleport.exceptions import ConfigError, ParameterError

logger = singer.get_logger()


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return value


def write_csv(path, header, rows):
    """
    Writes rows to a CSV file (comma separated, LF line endings, floats with 17 significant digits).

    :param path, str: output file, "-" for stdout
    :param header, list: column names
    :param rows, iterable: sequences matching header
    :return: number of data rows written
    """
    count = 0
    if path in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
        sys.stdout.flush()
        return count

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1

    logger.info(f"wrote {count} rows to {path}")
    return count


def emit_json(record, path=None):
    """
    Given a record, writes it as JSON to stdout or to path.
    """
    emit_json_lines([record], path)


def emit_json_lines(records, path=None):
    """
    Writes one JSON document per line to stdout or to path.
    """
    lines = "".join("{}\n".format(json.dumps(record, cls=NumpyEncoder, sort_keys=True)) for record in records)
    if path in (None, "-"):
        sys.stdout.write(lines)
        sys.stdout.flush()
    else:
        with open(path, "w") as f:
            f.write(lines)
        logger.info(f"wrote {len(records)} JSON records to {path}")


PLOT_TEMPLATE = '''"""
Plots {csv_name}. Requires pandas and matplotlib; never read back by ps-teleport.
"""
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv_name}")
fig, ax = plt.subplots()
for label, group in df.groupby({group_by!r}):
    ax.plot(group[{x!r}], group[{y!r}], label=str(label))
ax.set_xlabel({x!r})
ax.set_ylabel({y!r})
ax.legend()
fig.savefig("{png_name}", dpi=150)
'''


def emit_plot_script(csv_path, x, y, group_by):
    """
    Writes <csv stem>_plot.py next to csv_path.

    :return: path of the script
    """
    stem, _ = os.path.splitext(csv_path)
    script = f"{stem}_plot.py"
    with open(script, "w") as f:
        f.write(PLOT_TEMPLATE.format(csv_name=os.path.basename(csv_path),
                                     png_name=os.path.basename(stem) + ".png",
                                     x=x, y=y, group_by=group_by))
    logger.info(f"wrote plot script {script}")
    return script


def parse_range(value, name):
    """
    "0.5" -> (0.5, 0.5); "0.1:0.9" -> (0.1, 0.9); numbers pass through.
    """
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), float(value)
    parts = str(value).split(":")
    try:
        bounds = [float(p) for p in parts]
    except ValueError:
        raise ParameterError(f"--{name} expects a number or lo:hi, got '{value}'")
    if len(bounds) == 1:
        return bounds[0], bounds[0]
    if len(bounds) != 2 or bounds[0] > bounds[1]:
        raise ParameterError(f"--{name} expects a number or lo:hi with lo <= hi, got '{value}'")
    return bounds[0], bounds[1]


def parse_grid(value):
    """
    "64x32" -> (64, 32)
    """
    try:
        a, b = (int(p) for p in str(value).lower().split("x"))
    except ValueError:
        raise ConfigError(f"--grid expects AxB (for example 64x64), got '{value}'")
    if a < 2 or b < 2:
        raise ConfigError(f"--grid needs at least 2 steps per axis, got '{value}'")
    return a, b


def parse_levels(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        return [float(p) for p in str(value).split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"--levels expects comma separated numbers, got '{value}'")
