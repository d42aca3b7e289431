import io
import json

import numpy as np

from classbench.benchmark.logic.data import (NOMINAL, NUMERIC, AttributeSchema, Dataset, load_dataset,
                                             save_dataset)


def get_text_file(filepath: str):
    with open(filepath, "r") as f:
        data = f.read()
    return data


def get_json_file(filepath: str):
    with open(filepath, "r") as f:
        data = json.load(f)
    return data


def parse(text: str, format: str = 'arff', class_index: int = -1) -> Dataset:
    return load_dataset(io.StringIO(text), format=format, class_index=class_index)


def serialize(d: Dataset, format: str = 'arff') -> str:
    stream = io.StringIO()
    save_dataset(d, stream, format=format)
    return stream.getvalue()


def make_dataset(rows, kinds, categories=None, class_index=-1, names=None) -> Dataset:
    """Small datasets for tests. kinds has an 'n' (numeric) or 'c' (nominal) per column."""
    categories = categories or {}
    schema = []
    for index, kind in enumerate(kinds):
        name = names[index] if names else f"a{index}"
        if kind == 'c':
            schema.append(AttributeSchema(name=name, kind=NOMINAL, index=index,
                                          categories=tuple(categories.get(index, ('x', 'y')))))
        else:
            schema.append(AttributeSchema(name=name, kind=NUMERIC, index=index))
    resolved = class_index if class_index >= 0 else len(kinds) + class_index
    return Dataset(schema=tuple(schema), class_index=resolved, values=np.array(rows, dtype=float))


def gaussian_blobs(n_per_class=30, classes=3, attributes=2, spread=0.3, seed=0) -> Dataset:
    """Well separated classes: numeric attributes around (c, c, ...) and the class as last column."""
    rng = np.random.default_rng(seed)
    rows = []
    for label in range(classes):
        centre = np.full(attributes, float(label))
        for point in rng.normal(centre, spread, size=(n_per_class, attributes)):
            rows.append(list(point) + [label])
    return make_dataset(rows, 'n' * attributes + 'c',
                        categories={attributes: tuple(f"class{c}" for c in range(classes))})
