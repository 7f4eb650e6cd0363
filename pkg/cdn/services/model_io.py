"""
Model JSON, data CSV and sample CSV files.

Data CSVs have a header of variable names (any column order). An empty cell
or "nan" is a missing entry; a cell written "<=x" is censored at x.
"""

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .errors import CdnError, InvalidSpec
from .model import model_from_dict, model_to_dict

logger = logging.getLogger(__name__)

CENSOR_PREFIX = '<='


def load_model(path, validate=True):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise InvalidSpec(f'cannot read model {path}: {exc}') from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f'{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}') from exc
    try:
        return model_from_dict(data, validate=validate)
    except CdnError as exc:
        raise type(exc)(f'{path}: {exc}') from exc


def write_json(data, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2) + '\n', encoding='utf-8')
    except OSError as exc:
        raise InvalidSpec(f'cannot write {path}: {exc}') from exc


def save_model(model, path):
    write_json(model_to_dict(model), path)


def parse_assignments(items, model=None):
    """NAME=VALUE strings to a dict; names are checked against the model when given."""
    values = {}
    for item in items or []:
        name, sep, raw = item.partition('=')
        name = name.strip()
        if not sep or not name:
            raise InvalidSpec(f'expected NAME=VALUE, got {item!r}')
        try:
            values[name] = float(raw)
        except ValueError as exc:
            raise InvalidSpec(f'value for {name!r} is not a number: {raw!r}') from exc
        if model is not None:
            model.index(name)
    return values


def _parse_cell(cell, path, line):
    cell = cell.strip()
    if cell == '' or cell.lower() == 'nan':
        return np.nan, False
    censored = cell.startswith(CENSOR_PREFIX)
    if censored:
        cell = cell[len(CENSOR_PREFIX):]
    try:
        return float(cell), censored
    except ValueError as exc:
        raise InvalidSpec(f'{path}: line {line}: not a number: {cell!r}') from exc


def read_data_csv(path, model):
    """(data, censored) arrays in model variable order."""
    path = Path(path)
    try:
        with path.open(encoding='utf-8', newline='') as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InvalidSpec(f'{path}: empty file')
            header = [h.strip() for h in header]
            missing = [name for name in model.names if name not in header]
            if missing:
                raise InvalidSpec(f'{path}: header lacks variables {missing}')
            columns = [header.index(name) for name in model.names]
            data, censored = [], []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise InvalidSpec(
                        f'{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}'
                    )
                parsed = [_parse_cell(row[c], path, reader.line_num) for c in columns]
                data.append([value for value, _ in parsed])
                censored.append([flag for _, flag in parsed])
    except OSError as exc:
        raise InvalidSpec(f'cannot read data {path}: {exc}') from exc
    if not data:
        raise InvalidSpec(f'{path}: no data rows')
    logger.debug('Read %d rows from %s', len(data), path)
    return np.array(data, dtype=float), np.array(censored, dtype=bool)


def format_float(value):
    """Round-trip decimal; NaN is written as an empty cell."""
    value = float(value)
    return '' if np.isnan(value) else repr(value)


def write_samples_csv(samples, names, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(names)
            for row in np.atleast_2d(samples):
                writer.writerow([format_float(x) for x in row])
    except OSError as exc:
        raise InvalidSpec(f'cannot write {path}: {exc}') from exc
