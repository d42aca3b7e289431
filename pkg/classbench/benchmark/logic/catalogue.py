"""
The six UCI datasets the benchmark is run on, where to get them and how to turn the raw files into
datasets, plus the classifier settings that worked best per dataset.

Raw files are not part of this repository. `classbench fetch_datasets` downloads them, converts them to
ARFF in settings.DATA_DIR and checks them against the sha256 of their catalogue entry. Entries without one
are checked against checksums.json in DATA_DIR, which --record-checksums fills the first time a file is
fetched. A download that does not match is refused.
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import requests
from django.conf import settings
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from classbench.benchmark.logic import DatasetError
from classbench.benchmark.logic.data import (NOMINAL, NUMERIC, AttributeSchema, Dataset, load_dataset_file,
                                             save_dataset_file)
from classbench.benchmark.logic.knn import COMPLEMENT_DISTANCE, INVERSE_DISTANCE, UNIFORM, KnnConfig
from classbench.benchmark.logic.mlp import MlpConfig

log = logging.getLogger(__package__)

UCI = 'https://archive.ics.uci.edu/ml/machine-learning-databases'
CHECKSUM_FILE = 'checksums.json'
DOWNLOAD_TIMEOUT = 60


@dataclass(frozen=True)
class CatalogueEntry:
    name: str
    url: str
    # every column of the raw file, in order
    columns: Tuple[str, ...]
    class_column: str
    # nominal columns and their categories, the class included
    nominal: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    drop: Tuple[str, ...] = ()
    # raw class values and the category names they get
    class_names: Dict[str, str] = field(default_factory=dict)
    instances: int = 0
    attributes: int = 0
    classes: int = 0
    has_missing: bool = False
    # sha256 of the raw download, when known
    sha256: Optional[str] = None

    @property
    def filename(self) -> str:
        return f"{self.name}.arff"


def _numbered(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{i}" for i in range(count)]


OZONE_COLUMNS = (['date'] + _numbered('WSR', 24) + ['WSR_PK', 'WSR_AV'] + _numbered('T', 24) + ['T_PK', 'T_AV']
                 + [f"{measure}{level}" for level in (85, 70, 50) for measure in ('T', 'RH', 'U', 'V', 'HT')]
                 + ['KI', 'TT', 'SLP', 'SLP_', 'Precp', 'class'])

CATALOGUE: Dict[str, CatalogueEntry] = {
    'abalone': CatalogueEntry(
        name='abalone',
        url=f'{UCI}/abalone/abalone.data',
        columns=('sex', 'length', 'diameter', 'height', 'whole_weight', 'shucked_weight', 'viscera_weight',
                 'shell_weight', 'rings'),
        class_column='rings',
        nominal={'sex': ('M', 'F', 'I'), 'rings': tuple(str(r) for r in range(1, 30))},
        instances=4177, attributes=8, classes=29,
    ),
    'echocardiogram': CatalogueEntry(
        name='echocardiogram',
        url=f'{UCI}/echocardiogram/echocardiogram.data',
        columns=('survival', 'still_alive', 'age_at_heart_attack', 'pericardial_effusion', 'fractional_shortening',
                 'epss', 'lvdd', 'wall_motion_score', 'wall_motion_index', 'mult', 'name', 'group', 'alive_at_1'),
        class_column='alive_at_1',
        nominal={'still_alive': ('0', '1'), 'pericardial_effusion': ('0', '1'), 'alive_at_1': ('0', '1')},
        drop=('name', 'group'),
        instances=132, attributes=13, classes=2, has_missing=True,
    ),
    'glass': CatalogueEntry(
        name='glass',
        url=f'{UCI}/glass/glass.data',
        columns=('id', 'RI', 'Na', 'Mg', 'Al', 'Si', 'K', 'Ca', 'Ba', 'Fe', 'type'),
        class_column='type',
        nominal={'type': tuple(str(t) for t in range(1, 8))},
        drop=('id',),
        instances=214, attributes=9, classes=7,
    ),
    'iris': CatalogueEntry(
        name='iris',
        url=f'{UCI}/iris/iris.data',
        columns=('sepallength', 'sepalwidth', 'petallength', 'petalwidth', 'class'),
        class_column='class',
        nominal={'class': ('Iris-setosa', 'Iris-versicolor', 'Iris-virginica')},
        instances=150, attributes=4, classes=3,
    ),
    'ozone': CatalogueEntry(
        name='ozone',
        url=f'{UCI}/ozone/eighthr.data',
        columns=tuple(OZONE_COLUMNS),
        class_column='class',
        nominal={'class': ('0', '1')},
        drop=('date',),
        instances=2536, attributes=73, classes=2, has_missing=True,
    ),
    'breast-cancer': CatalogueEntry(
        name='breast-cancer',
        url=f'{UCI}/breast-cancer-wisconsin/breast-cancer-wisconsin.data',
        columns=('id', 'clump_thickness', 'cell_size_uniformity', 'cell_shape_uniformity', 'marginal_adhesion',
                 'single_epithelial_cell_size', 'bare_nuclei', 'bland_chromatin', 'normal_nucleoli', 'mitoses',
                 'class'),
        class_column='class',
        nominal={'class': ('2', '4')},
        class_names={'2': 'benign', '4': 'malignant'},
        drop=('id',),
        instances=699, attributes=10, classes=2, has_missing=True,
    ),
}


@dataclass(frozen=True)
class Preset:
    mlp: MlpConfig
    ibk: KnnConfig
    ibk_inverse: KnnConfig
    ibk_complement: KnnConfig

    def specs(self) -> List:
        return [self.mlp, self.ibk, self.ibk_inverse, self.ibk_complement]


def _preset(learning_rate: float, momentum: float, hidden_units: int, k: int, k_inverse: Optional[int] = None,
            k_complement: Optional[int] = None) -> Preset:
    return Preset(
        mlp=MlpConfig(learning_rate=learning_rate, momentum=momentum, hidden_units=hidden_units),
        ibk=KnnConfig(k=k, weighting=UNIFORM),
        ibk_inverse=KnnConfig(k=k_inverse or k, weighting=INVERSE_DISTANCE),
        ibk_complement=KnnConfig(k=k_complement or k, weighting=COMPLEMENT_DISTANCE),
    )


# Best settings found per dataset: MLP learning rate, momentum and hidden units, and k per IBK weighting.
PRESETS: Dict[str, Preset] = {
    'abalone': _preset(0.3, 0.2, 3, k=11),
    'echocardiogram': _preset(0.2, 0.2, 1, k=11),
    'glass': _preset(0.5, 0.5, 4, k=1),
    'iris': _preset(0.3, 0.3, 4, k=9),
    'ozone': _preset(0.3, 0.5, 3, k=11),
    'breast-cancer': _preset(1.0, 0.7, 2, k=5, k_inverse=5, k_complement=3),
}


def entry(name: str) -> CatalogueEntry:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise DatasetError(f"Unknown dataset {name}, the catalogue has {', '.join(sorted(CATALOGUE))}.")


def preset(name: str, epochs: Optional[int] = None) -> Preset:
    if name not in PRESETS:
        raise DatasetError(f"No preset for {name}, presets exist for {', '.join(sorted(PRESETS))}.")
    chosen = PRESETS[name]
    epochs = epochs or settings.CLASSBENCH_MLP_EPOCHS
    if epochs == chosen.mlp.epochs:
        return chosen
    mlp = MlpConfig(learning_rate=chosen.mlp.learning_rate, momentum=chosen.mlp.momentum,
                    hidden_units=chosen.mlp.hidden_units, epochs=epochs)
    return Preset(mlp=mlp, ibk=chosen.ibk, ibk_inverse=chosen.ibk_inverse, ibk_complement=chosen.ibk_complement)


def _category(cell: str, categories: Tuple[str, ...]) -> Optional[str]:
    if cell in categories:
        return cell
    # raw files sometimes write 1 as 1.0
    try:
        number = float(cell)
    except ValueError:
        return None
    if number.is_integer() and str(int(number)) in categories:
        return str(int(number))
    return None


def convert_raw(name: str, text: str) -> Dataset:
    """
    Turns a raw UCI file into a dataset: drops identifier columns, reads '?' as missing, and skips rows that
    do not fit the catalogue (wrong number of values, text in a numeric column, unknown category). Every
    skipped row is logged.
    """
    catalogued = entry(name)
    kept = [column for column in catalogued.columns if column not in catalogued.drop]

    schema = []
    for index, column in enumerate(kept):
        if column in catalogued.nominal:
            categories = tuple(catalogued.class_names.get(c, c) for c in catalogued.nominal[column]) \
                if column == catalogued.class_column else catalogued.nominal[column]
            schema.append(AttributeSchema(name=column, kind=NOMINAL, index=index, categories=categories))
        else:
            schema.append(AttributeSchema(name=column, kind=NUMERIC, index=index))

    rows, skipped = [], 0
    # raw UCI files are plain comma separated values without quoting
    for number, line in enumerate(text.splitlines(), start=1):
        cells = [cell.strip() for cell in line.split(',')]
        if not any(cells):
            continue
        row = _convert_row(catalogued, cells)
        if row is None:
            skipped += 1
            log.warning(f"{name}: skipped line {number}, it does not match the catalogue: {','.join(cells)}")
            continue
        rows.append(row)

    if not rows:
        raise DatasetError(f"No usable rows in the raw {name} file.")

    d = Dataset(schema=tuple(schema), class_index=kept.index(catalogued.class_column),
                values=np.array(rows, dtype=float), relation=name)
    if d.n_instances != catalogued.instances:
        log.info(f"{name}: {d.n_instances} instances after conversion ({catalogued.instances} listed, "
                 f"{skipped} rows skipped).")
    return d


def _convert_row(catalogued: CatalogueEntry, cells: List[str]) -> Optional[List[float]]:
    if len(cells) != len(catalogued.columns):
        return None

    row = []
    for column, cell in zip(catalogued.columns, cells):
        if column in catalogued.drop:
            continue
        if cell == '?' or cell == '':
            row.append(np.nan)
        elif column in catalogued.nominal:
            category = _category(cell, catalogued.nominal[column])
            if category is None:
                return None
            row.append(float(catalogued.nominal[column].index(category)))
        else:
            try:
                row.append(float(cell))
            except ValueError:
                return None
    return row


def dataset_path(name: str, data_dir: Optional[str] = None) -> str:
    return os.path.join(data_dir or settings.DATA_DIR, entry(name).filename)


def load_catalogued(name: str, data_dir: Optional[str] = None) -> Dataset:
    path = dataset_path(name, data_dir)
    if not os.path.exists(path):
        raise DatasetError(f"{name} has not been fetched yet, run: classbench fetch_datasets --dataset {name}")
    return load_dataset_file(path)


@retry(retry=retry_if_exception_type(requests.exceptions.RequestException), stop=stop_after_attempt(4),
       wait=wait_exponential(multiplier=1, max=30), reraise=True)
def download(url: str) -> bytes:
    log.debug(f"Downloading {url}")
    response = requests.get(url, timeout=DOWNLOAD_TIMEOUT)
    response.raise_for_status()
    return response.content


def _checksums(data_dir: str) -> Dict[str, str]:
    path = os.path.join(data_dir, CHECKSUM_FILE)
    if not os.path.exists(path):
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def _store_checksums(data_dir: str, checksums: Dict[str, str]) -> None:
    with open(os.path.join(data_dir, CHECKSUM_FILE), 'w', encoding='utf-8') as f:
        f.write(json.dumps(checksums, indent=2, sort_keys=True) + '\n')


def fetch(name: str, data_dir: Optional[str] = None, verify: bool = True, record: bool = False) -> str:
    """
    Downloads and converts one dataset, returns the path of the ARFF file.

    The download is checked against the sha256 of the catalogue entry, or else against the one recorded in
    checksums.json. A mismatch is refused.

    :param verify: check the sha256 of the download.
    :param record: store the sha256 of this download as the expected one. Does not override the catalogue.
    """
    catalogued = entry(name)
    data_dir = data_dir or settings.DATA_DIR
    os.makedirs(data_dir, exist_ok=True)

    try:
        content = download(catalogued.url)
    except requests.exceptions.RequestException as e:
        raise DatasetError(f"Could not download {name} from {catalogued.url}: {e}")

    digest = hashlib.sha256(content).hexdigest()
    checksums = _checksums(data_dir)
    expected = catalogued.sha256 or (None if record else checksums.get(name))
    if verify and expected and expected != digest:
        raise DatasetError(f"Checksum mismatch for {name}: expected {expected}, got {digest}.")
    if record:
        checksums[name] = digest
        _store_checksums(data_dir, checksums)
    elif not expected:
        log.warning(f"No checksum known for {name} ({digest}), use --record-checksums to keep it.")

    d = convert_raw(name, content.decode('utf-8', errors='replace'))
    path = dataset_path(name, data_dir)
    save_dataset_file(d, path, format='arff')
    log.info(f"Stored {name}: {d.n_instances} instances, {d.n_attributes} attributes in {path}.")
    return path
