"""
Datasets: the in-memory representation, ARFF and CSV ingestion and export, and the preprocessing steps
that run before a classifier sees the data (normalization, nominal to binary, fold splitting).

A dataset is a float matrix with one row per instance and one column per attribute. Nominal cells hold the
index of their category, missing cells are NaN. Datasets are never changed in place: every operation
returns a new one, which makes them safe to share between tasks.

ARFF files are read with scipy.io.arff. Numeric and nominal attributes are supported, sparse rows, string,
date and relational attributes are not. Relation names are written without whitespace.

CSV files may start with one directive line, for example:

    # nominal=0,sex,3:no|yes header=yes

`nominal` lists column indices or names of nominal columns, optionally followed by the declared categories
(percent-encoded, separated by '|'). Without a declaration the categories are the sorted observed values.
`header` says if the first row holds names. The class column of a CSV file is always nominal.
"""
import csv
import io
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple
from urllib.parse import quote, unquote

import numpy as np
import pyexcel as p
from scipy.io import arff

from classbench.benchmark.logic import DatasetError, DatasetParseError

log = logging.getLogger(__package__)

NUMERIC = 'numeric'
NOMINAL = 'nominal'
MISSING = '?'

SUPPORTED_FORMATS = ['arff', 'csv']


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: str
    index: int
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, NOMINAL):
            raise DatasetError(f"Attribute {self.name} has unknown kind {self.kind}.")
        if self.kind == NOMINAL:
            if not self.categories:
                raise DatasetError(f"Nominal attribute {self.name} has no categories.")
            if len(set(self.categories)) != len(self.categories):
                raise DatasetError(f"Nominal attribute {self.name} has duplicate categories.")
        elif self.categories:
            raise DatasetError(f"Numeric attribute {self.name} can not have categories.")

    @property
    def is_nominal(self) -> bool:
        return self.kind == NOMINAL

    def at(self, index: int) -> 'AttributeSchema':
        return AttributeSchema(name=self.name, kind=self.kind, index=index, categories=self.categories)


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: Tuple[AttributeSchema, ...]
    class_index: int
    values: np.ndarray
    relation: str = 'dataset'

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            values = values.reshape(-1, len(self.schema))
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'schema', tuple(self.schema))

        if [attribute.index for attribute in self.schema] != list(range(len(self.schema))):
            raise DatasetError("Attribute indices must run from 0 to A-1.")
        if values.shape[1] != len(self.schema):
            raise DatasetError(f"Every row needs {len(self.schema)} cells, got {values.shape[1]}.")
        if not 0 <= self.class_index < len(self.schema):
            raise DatasetError(f"Class index {self.class_index} is out of range.")

        class_attribute = self.schema[self.class_index]
        if not class_attribute.is_nominal or len(class_attribute.categories) < 2:
            raise DatasetError(f"The class attribute {class_attribute.name} must be nominal with 2 or more "
                               f"categories.")

        for attribute in self.schema:
            if not attribute.is_nominal:
                continue
            column = values[:, attribute.index]
            observed = column[~np.isnan(column)]
            valid = (observed >= 0) & (observed < len(attribute.categories)) & (observed == np.floor(observed))
            if not valid.all():
                raise DatasetError(f"Attribute {attribute.name} references a category that does not exist.")

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def class_attribute(self) -> AttributeSchema:
        return self.schema[self.class_index]

    @property
    def n_classes(self) -> int:
        return len(self.class_attribute.categories)

    @property
    def predictive_indices(self) -> List[int]:
        return [attribute.index for attribute in self.schema if attribute.index != self.class_index]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def labels(self) -> np.ndarray:
        """Class indices per instance. Instances without a class are not allowed here."""
        column = self.values[:, self.class_index]
        if np.isnan(column).any():
            raise DatasetError("Some instances have no class value, use drop_missing_class first.")
        return column.astype(int)

    def predictors(self) -> np.ndarray:
        return self.values[:, self.predictive_indices]

    def predictive_schema(self) -> List[AttributeSchema]:
        return [self.schema[i] for i in self.predictive_indices]

    def replace(self, values: Optional[np.ndarray] = None, schema: Optional[Sequence[AttributeSchema]] = None,
                class_index: Optional[int] = None, relation: Optional[str] = None) -> 'Dataset':
        return Dataset(
            schema=tuple(schema) if schema is not None else self.schema,
            class_index=self.class_index if class_index is None else class_index,
            values=self.values if values is None else values,
            relation=self.relation if relation is None else relation,
        )

    def equals(self, other: 'Dataset') -> bool:
        return (self.schema == other.schema
                and self.class_index == other.class_index
                and self.relation == other.relation
                and np.array_equal(self.values, other.values, equal_nan=True))


@dataclass(frozen=True)
class FoldSplit:
    folds: Tuple[np.ndarray, ...]
    seed: int

    def __len__(self):
        return len(self.folds)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.sort(np.concatenate([f for i, f in enumerate(self.folds) if i != fold]))

    def test_indices(self, fold: int) -> np.ndarray:
        return self.folds[fold]


@dataclass(frozen=True)
class NormalizationBounds:
    minimum: Dict[int, float] = field(default_factory=dict)
    maximum: Dict[int, float] = field(default_factory=dict)


# --- ingestion ---


def load_dataset(source: TextIO, format: str = 'arff', class_index: int = -1) -> Dataset:
    """
    Read a dataset from a text stream. A negative class index counts from the last attribute, the default
    of -1 makes the last attribute the class.

    :raises DatasetParseError: on any malformed line, naming the line number.
    """
    text = source.read()

    if format == 'arff':
        return _parse_arff(text, class_index)
    if format == 'csv':
        return _parse_csv(text, class_index)
    raise DatasetError(f"Unsupported format {format}, use one of {', '.join(SUPPORTED_FORMATS)}.")


def load_dataset_file(path: str, class_index: int = -1, format: Optional[str] = None) -> Dataset:
    format = format or guess_format(path)
    with open(path, 'r', encoding='utf-8') as f:
        return load_dataset(f, format=format, class_index=class_index)


def guess_format(path: str) -> str:
    extension = path.split('.')[-1].lower()
    if extension in SUPPORTED_FORMATS:
        return extension
    # raw UCI files (.data) are comma separated
    return 'csv'


def _resolve_class_index(class_index: int, n_attributes: int, line: int) -> int:
    resolved = class_index if class_index >= 0 else n_attributes + class_index
    if not 0 <= resolved < n_attributes:
        raise DatasetParseError(line, f"class index {class_index} does not exist, there are {n_attributes} "
                                      f"attributes.")
    return resolved


class _NumberedLines(io.StringIO):
    """Hands lines to scipy's ARFF reader and keeps track of the line it is at."""

    def __init__(self, text: str):
        super().__init__(text)
        self.line = 0
        self.data_line = 0
        self.declarations: List[int] = []

    def __next__(self) -> str:
        text = super().__next__()
        self.line += 1
        keyword = text.lstrip()[:10].lower()
        if keyword == '@attribute':
            self.declarations.append(self.line)
        elif keyword.startswith('@data'):
            self.data_line = self.line
        return text


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    return value


def _read_arff(lines: _NumberedLines) -> Tuple[np.ndarray, arff.MetaData]:
    try:
        return arff.loadarff(lines)
    except StopIteration:
        raise DatasetParseError(max(1, lines.line), "no @data section found.")
    except arff.ParseArffError as e:
        # an unknown attribute type is noticed after the line below its declaration has been read
        line = lines.line - 1 if str(e).startswith('unknown attribute') else lines.line
        raise DatasetParseError(max(1, line), str(e))
    except NotImplementedError as e:
        raise DatasetParseError(lines.line, str(e))
    except IndexError:
        raise DatasetParseError(lines.line, f"expected {len(lines.declarations)} values, found fewer.")
    except (ValueError, csv.Error) as e:
        raise DatasetParseError(lines.line, str(e))


def _parse_arff(text: str, class_index: int) -> Dataset:
    lines = _NumberedLines(text)
    data, meta = _read_arff(lines)

    schema: List[AttributeSchema] = []
    for index, name in enumerate(meta.names()):
        kind, declared = meta[name]
        line = lines.declarations[index]
        if kind == NUMERIC:
            schema.append(AttributeSchema(name=name, kind=NUMERIC, index=index))
        elif kind == NOMINAL:
            try:
                schema.append(AttributeSchema(name=name, kind=NOMINAL, index=index, categories=tuple(declared)))
            except DatasetError as e:
                raise DatasetParseError(line, str(e))
        else:
            raise DatasetParseError(line, f"attribute type '{kind}' of {name} is not supported.")

    columns = []
    for attribute in schema:
        column = data[attribute.name]
        if attribute.is_nominal:
            # scipy keeps nominal cells as bytes, b'?' included
            codes = {category.encode(): float(i) for i, category in enumerate(attribute.categories)}
            columns.append(np.array([codes.get(value, np.nan) for value in column], dtype=float))
        else:
            columns.append(column.astype(float))

    values = np.column_stack(columns) if columns else np.empty((len(data), 0))
    resolved = _resolve_class_index(class_index, len(schema), lines.data_line)
    return _build(schema, resolved, values, _unquote(meta.name or '') or 'dataset', lines.data_line)


def _parse_row(cells: List[str], schema: Sequence[AttributeSchema], number: int) -> List[float]:
    if len(cells) != len(schema):
        raise DatasetParseError(number, f"expected {len(schema)} values, found {len(cells)}.")

    row = []
    for cell, attribute in zip(cells, schema):
        cell = cell.strip()
        if cell == MISSING:
            row.append(np.nan)
        elif attribute.is_nominal:
            if cell not in attribute.categories:
                raise DatasetParseError(number, f"value '{cell}' is not a category of {attribute.name}.")
            row.append(float(attribute.categories.index(cell)))
        else:
            try:
                row.append(float(cell))
            except ValueError:
                raise DatasetParseError(number, f"value '{cell}' of {attribute.name} is not a number.")
    return row


def _build(schema, class_index, rows, relation, line) -> Dataset:
    try:
        return Dataset(schema=tuple(schema), class_index=class_index,
                       values=np.array(rows, dtype=float).reshape(len(rows), len(schema)), relation=relation)
    except DatasetError as e:
        raise DatasetParseError(line, str(e))


def _parse_directive(line: str, number: int) -> Dict[str, str]:
    directive = {}
    for token in line.lstrip('#%').split():
        if '=' not in token:
            raise DatasetParseError(number, f"directive entries are key=value, got '{token}'.")
        key, value = token.split('=', 1)
        directive[key.strip().lower()] = value.strip()
    unknown = set(directive) - {'nominal', 'header'}
    if unknown:
        raise DatasetParseError(number, f"unknown directive keys: {', '.join(sorted(unknown))}.")
    return directive


def _sort_categories(values: Iterable[str]) -> Tuple[str, ...]:
    distinct = set(values)
    try:
        return tuple(sorted(distinct, key=float))
    except ValueError:
        return tuple(sorted(distinct))


def _parse_csv(text: str, class_index: int) -> Dataset:
    lines = text.splitlines()
    offset = 0
    directive: Dict[str, str] = {}
    if lines and lines[0].lstrip().startswith(('#', '%')):
        directive = _parse_directive(lines[0], 1)
        offset = 1

    content = '\n'.join(lines[offset:])
    if not content.strip():
        raise DatasetParseError(offset + 1, "no rows found.")

    # All values are read as text, conversion is done here so '?' and nominal columns survive.
    array = p.get_array(file_type='csv', file_content=content, auto_detect_float=False, auto_detect_int=False,
                        auto_detect_datetime=False)

    numbered = [(offset + position + 1, [str(cell).strip() for cell in row])
                for position, row in enumerate(array)]
    numbered = [(number, row) for number, row in numbered if any(cell != '' for cell in row)]
    if not numbered:
        raise DatasetParseError(offset + 1, "no rows found.")

    has_header = directive.get('header', 'yes').lower() in ('yes', 'true', '1')
    if has_header:
        header_line, names = numbered[0]
        numbered = numbered[1:]
    else:
        header_line, names = offset + 1, [f"attribute_{i}" for i in range(len(numbered[0][1]))]

    width = len(names)
    for number, row in numbered:
        if len(row) != width:
            raise DatasetParseError(number, f"expected {width} values, found {len(row)}.")

    resolved = _resolve_class_index(class_index, width, header_line)

    nominal_columns = {resolved}
    declared: Dict[int, Tuple[str, ...]] = {}
    for entry in filter(None, directive.get('nominal', '').split(',')):
        key, _, listed = entry.partition(':')
        if key.isdigit():
            column = int(key)
        elif key in names:
            column = names.index(key)
        else:
            raise DatasetParseError(1, f"nominal column '{key}' does not exist.")
        if column >= width:
            raise DatasetParseError(1, f"nominal column {column} does not exist.")
        nominal_columns.add(column)
        if listed:
            declared[column] = tuple(unquote(category) for category in listed.split('|'))

    schema = []
    for index, name in enumerate(names):
        if index in nominal_columns:
            categories = declared.get(index) or _sort_categories(
                row[index] for _, row in numbered if row[index] != MISSING)
            if not categories:
                raise DatasetParseError(header_line, f"nominal column {name} has no observed values.")
            try:
                schema.append(AttributeSchema(name=name, kind=NOMINAL, index=index, categories=categories))
            except DatasetError as e:
                raise DatasetParseError(1, str(e))
        else:
            schema.append(AttributeSchema(name=name, kind=NUMERIC, index=index))

    rows = [_parse_row(row, schema, number) for number, row in numbered]
    return _build(schema, resolved, rows, 'dataset', header_line)


# --- export ---


def _format_number(value: float) -> str:
    return repr(float(value))


def _quote(value: str, mark: str = '"') -> str:
    """Quotes when needed. Attribute names take single quotes, values double ones, as scipy reads them."""
    if value == '' or re.search(r"[\s,'\"{}%]", value):
        return mark + value + mark
    return value


def _cell_text(value: float, attribute: AttributeSchema) -> str:
    if np.isnan(value):
        return MISSING
    if attribute.is_nominal:
        return attribute.categories[int(value)]
    return _format_number(value)


def save_dataset(d: Dataset, stream: TextIO, format: str = 'arff') -> None:
    """
    Writes the dataset so that loading it again gives the same dataset, bit for bit. The output only
    depends on the dataset, so identical datasets give identical files.
    """
    if format == 'arff':
        relation = re.sub(r'\s+', '_', d.relation)
        stream.write(f"@relation {relation}\n\n")
        for attribute in d.schema:
            if attribute.is_nominal:
                declared = '{' + ','.join(_quote(category) for category in attribute.categories) + '}'
            else:
                declared = 'numeric'
            name = _quote(attribute.name, mark="'")
            stream.write(f"@attribute {name} {declared}\n")
        stream.write("\n@data\n")
        for row in d.values:
            cells = [_cell_text(value, attribute) for value, attribute in zip(row, d.schema)]
            stream.write(','.join(_quote(cell) if attribute.is_nominal and cell != MISSING else cell
                                  for cell, attribute in zip(cells, d.schema)) + '\n')
        return

    if format == 'csv':
        nominal = [f"{attribute.index}:" + '|'.join(quote(category, safe='') for category in attribute.categories)
                   for attribute in d.schema if attribute.is_nominal]
        stream.write(f"# nominal={','.join(nominal)} header=yes\n")
        rows = [[attribute.name for attribute in d.schema]]
        rows += [[_cell_text(value, attribute) for value, attribute in zip(row, d.schema)] for row in d.values]
        stream.write(p.get_sheet(array=rows).csv)
        return

    raise DatasetError(f"Unsupported format {format}, use one of {', '.join(SUPPORTED_FORMATS)}.")


def save_dataset_file(d: Dataset, path: str, format: Optional[str] = None) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        save_dataset(d, f, format=format or guess_format(path))


# --- preprocessing ---


def normalization_bounds(d: Dataset) -> NormalizationBounds:
    """Observed minimum and maximum of every numeric, non-class attribute."""
    minimum, maximum = {}, {}
    for attribute in d.predictive_schema():
        if attribute.is_nominal:
            continue
        column = d.values[:, attribute.index]
        observed = column[~np.isnan(column)]
        if observed.size:
            minimum[attribute.index] = float(observed.min())
            maximum[attribute.index] = float(observed.max())
    return NormalizationBounds(minimum=minimum, maximum=maximum)


def normalize(d: Dataset, bounds: Optional[NormalizationBounds] = None) -> Dataset:
    """
    Min-max rescale numeric attributes to [0, 1]. Pass the bounds of a training partition to rescale a test
    partition with the same statistics; test values outside the training range are not clipped.
    A constant column becomes all zeros.
    """
    bounds = bounds or normalization_bounds(d)
    values = d.values.copy()

    for index, low in bounds.minimum.items():
        high = bounds.maximum[index]
        column = values[:, index]
        present = ~np.isnan(column)
        if high > low:
            column[present] = (column[present] - low) / (high - low)
        else:
            column[present] = 0.0
        values[:, index] = column

    return d.replace(values=values)


def nominal_to_binary(d: Dataset) -> Dataset:
    """
    Replace every nominal, non-class attribute by indicator attributes: one indicator for two categories,
    one per category otherwise. A missing nominal cell is missing in each of its indicators.
    """
    if all(not attribute.is_nominal or attribute.index == d.class_index for attribute in d.schema):
        return d

    schema: List[AttributeSchema] = []
    columns: List[np.ndarray] = []
    class_index = 0

    for attribute in d.schema:
        column = d.values[:, attribute.index]

        if not attribute.is_nominal or attribute.index == d.class_index:
            if attribute.index == d.class_index:
                class_index = len(schema)
            schema.append(attribute.at(len(schema)))
            columns.append(column)
            continue

        missing = np.isnan(column)
        if len(attribute.categories) <= 2:
            label = attribute.categories[-1]
            schema.append(AttributeSchema(name=f"{attribute.name}={label}", kind=NUMERIC, index=len(schema)))
            columns.append(column.copy())
            continue

        for category_index, category in enumerate(attribute.categories):
            indicator = (column == category_index).astype(float)
            indicator[missing] = np.nan
            schema.append(AttributeSchema(name=f"{attribute.name}={category}", kind=NUMERIC, index=len(schema)))
            columns.append(indicator)

    values = np.column_stack(columns) if columns else np.empty((d.n_instances, 0))
    return Dataset(schema=tuple(schema), class_index=class_index, values=values, relation=d.relation)


def stratified_folds(d: Dataset, k: int, seed: int) -> FoldSplit:
    """
    Split the instances in k folds that keep the class proportions. Within a class the instances are
    shuffled with the seed and dealt round-robin over the folds; the next class continues where the previous
    one stopped, so fold sizes differ by at most one as well.
    """
    if k < 2:
        raise DatasetError(f"Need at least 2 folds, got {k}.")
    if k > d.n_instances:
        raise DatasetError(f"Can not make {k} folds out of {d.n_instances} instances.")

    labels = d.labels()
    rng = np.random.default_rng(seed)
    assignment = np.empty(d.n_instances, dtype=int)

    position = 0
    for label in range(d.n_classes):
        members = rng.permutation(np.flatnonzero(labels == label))
        assignment[members] = (position + np.arange(members.size)) % k
        position = (position + members.size) % k

    folds = tuple(np.flatnonzero(assignment == fold) for fold in range(k))
    return FoldSplit(folds=folds, seed=seed)


def select_rows(d: Dataset, indices: Sequence[int]) -> Dataset:
    return d.replace(values=d.values[np.asarray(indices, dtype=int)])


def drop_missing_class(d: Dataset) -> Dataset:
    keep = ~np.isnan(d.values[:, d.class_index])
    if not keep.any():
        raise DatasetError("Every instance is missing its class value, nothing is left to evaluate.")
    if not keep.all():
        log.debug(f"Dropped {int((~keep).sum())} instances without a class value.")
    return d.replace(values=d.values[keep])


def class_distribution(d: Dataset) -> Dict[str, int]:
    column = d.values[:, d.class_index]
    observed = column[~np.isnan(column)].astype(int)
    counts = np.bincount(observed, minlength=d.n_classes)
    return {category: int(count) for category, count in zip(d.class_attribute.categories, counts)}


def missing_mask(d: Dataset) -> np.ndarray:
    return d.missing_mask
