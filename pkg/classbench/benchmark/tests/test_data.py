import numpy as np
import pytest

from classbench.benchmark.logic import DatasetError, DatasetParseError
from classbench.benchmark.logic.data import (class_distribution, drop_missing_class, load_dataset_file,
                                             missing_mask, nominal_to_binary, normalization_bounds, normalize,
                                             save_dataset_file, select_rows, stratified_folds)
from classbench.benchmark.tests.common import gaussian_blobs, make_dataset, parse, serialize

WEATHER = """% a few days of weather
@relation weather

@attribute outlook {sunny,overcast,rainy}
@attribute temperature numeric
@attribute 'wind speed' real
@attribute play {yes,no}

@data
sunny,85,3.5,no
overcast,?,1,yes
rainy,70,?,yes
"""


def test_parse_arff():
    d = parse(WEATHER)

    assert d.relation == 'weather'
    assert d.n_instances == 3
    assert d.n_attributes == 4
    assert d.class_index == 3
    assert d.n_classes == 2
    assert d.class_attribute.categories == ('yes', 'no')
    assert d.schema[2].name == 'wind speed'
    assert not d.schema[1].is_nominal

    assert list(d.values[0]) == [0.0, 85.0, 3.5, 1.0]
    assert np.isnan(d.values[1, 1])
    assert np.isnan(d.values[2, 2])
    assert list(d.labels()) == [1, 0, 0]
    assert d.has_missing
    assert missing_mask(d).sum() == 2


def test_parse_arff_keeps_declared_categories():
    text = ("@relation sizes\n@attribute size {small,medium,large,huge}\n@attribute count integer\n"
            "@attribute class {yes,no}\n@data\nlarge,3,no\n?,4,yes\nsmall,?,?\n")
    d = parse(text)

    assert d.schema[0].categories == ('small', 'medium', 'large', 'huge')
    assert not d.schema[1].is_nominal
    assert d.class_attribute.categories == ('yes', 'no')
    np.testing.assert_array_equal(d.values, [[2, 3, 1], [np.nan, 4, 0], [0, np.nan, np.nan]])


def test_parse_arff_class_index():
    d = parse(WEATHER, class_index=0)
    assert d.class_index == 0
    assert d.class_attribute.name == 'outlook'
    assert d.predictive_indices == [1, 2, 3]


def test_parse_errors_name_the_line():
    # line 11 is the second data row
    broken = WEATHER.replace('overcast,?,1,yes', 'cloudy,?,1,yes')
    with pytest.raises(DatasetParseError) as e:
        parse(broken)
    assert e.value.line == 11
    assert "line 11" in str(e.value)

    with pytest.raises(DatasetParseError) as e:
        parse(WEATHER.replace('rainy,70,?,yes', 'rainy,70,yes'))
    assert e.value.line == 12

    with pytest.raises(DatasetParseError):
        parse(WEATHER.replace('sunny,85,3.5,no', '{0 sunny, 3 no}'))

    with pytest.raises(DatasetParseError):
        parse(WEATHER.replace('@attribute temperature numeric', '@attribute temperature date'))

    # the class has to be nominal
    with pytest.raises(DatasetParseError):
        parse(WEATHER, class_index=1)

    with pytest.raises(DatasetParseError):
        parse("@relation empty\n@attribute a numeric\n")


def test_arff_round_trip_is_exact():
    d = parse(WEATHER)
    values = np.array(d.values)
    values[0, 1] = 0.1 + 0.2
    d = d.replace(values=values)

    text = serialize(d)
    again = parse(text)
    assert again.equals(d)
    assert serialize(again) == text


def test_arff_quoting():
    d = make_dataset([[0, 0], [1, 1]], 'cc', categories={0: ("it's", 'plain'), 1: ('a b', 'c,d')},
                     names=['first one', 'class'])
    again = parse(serialize(d))
    assert again.equals(d)
    assert again.schema[0].categories == ("it's", 'plain')


def test_parse_csv():
    text = "# nominal=0\noutlook,temperature,play\nsunny,85,no\nrainy,?,yes\novercast,70,yes\n"
    d = parse(text, format='csv')

    assert d.schema[0].categories == ('overcast', 'rainy', 'sunny')
    assert d.class_attribute.categories == ('no', 'yes')
    assert not d.schema[1].is_nominal
    assert d.values[0, 0] == 2.0
    assert np.isnan(d.values[1, 1])
    assert list(d.labels()) == [0, 1, 1]


def test_parse_csv_without_header_sorts_numeric_categories():
    text = "# header=no\n1.5,10\n2.5,9\n3.5,2\n"
    d = parse(text, format='csv')
    assert d.class_attribute.categories == ('2', '9', '10')
    assert [a.name for a in d.schema] == ['attribute_0', 'attribute_1']
    assert list(d.labels()) == [2, 1, 0]


def test_csv_errors():
    with pytest.raises(DatasetParseError) as e:
        parse("a,b,class\n1,2,x\n1,x\n", format='csv')
    assert e.value.line == 3

    with pytest.raises(DatasetParseError):
        parse("# nominal=7\na,class\n1,x\n", format='csv')

    with pytest.raises(DatasetParseError):
        parse("# colour=blue\na,class\n1,x\n", format='csv')

    with pytest.raises(DatasetParseError):
        parse("a,class\n1,x\nfoo,y\n", format='csv')


def test_csv_round_trip(tmp_path):
    d = make_dataset([[0.25, 0, 1], [np.nan, 1, 0], [1 / 3, np.nan, 1]], 'ncc',
                     categories={1: ('a', 'b'), 2: ('no', 'yes')})
    path = str(tmp_path / 'small.csv')
    save_dataset_file(d, path)

    with open(path) as f:
        assert f.readline() == '# nominal=1:a|b,2:no|yes header=yes\n'

    again = load_dataset_file(path)
    assert again.equals(d)


def test_csv_keeps_declared_categories(tmp_path):
    # class declared unsorted, 'medium' and 'huge' never occur
    d = make_dataset([[0, 1, 0.5], [2, 0, 1.5], [0, 1, 2.5]], 'ccn',
                     categories={0: ('small', 'medium', 'large', 'huge'), 1: ('yes', 'no')}, class_index=1)
    path = str(tmp_path / 'sizes.csv')
    save_dataset_file(d, path)

    with open(path) as f:
        assert f.readline() == '# nominal=0:small|medium|large|huge,1:yes|no header=yes\n'

    again = load_dataset_file(path, class_index=1)
    assert again.equals(d)
    assert again.schema[0].categories == ('small', 'medium', 'large', 'huge')
    assert again.class_attribute.categories == ('yes', 'no')
    assert list(again.labels()) == [1, 0, 1]


def test_csv_directive_categories_are_encoded(tmp_path):
    d = make_dataset([[0, 1], [1, 0]], 'cc', categories={0: ('a|b', 'c d'), 1: ('x,y', '50%')})
    path = str(tmp_path / 'odd.csv')
    save_dataset_file(d, path)
    assert load_dataset_file(path).equals(d)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        make_dataset([[0.5, 2]], 'nc')

    with pytest.raises(DatasetError):
        make_dataset([[0.5, 1]], 'nn')

    with pytest.raises(DatasetError):
        make_dataset([[0.5, 1]], 'nc', categories={1: ('only',)})

    d = make_dataset([[0.5, 1]], 'nc')
    assert not d.values.flags.writeable


def test_missing_class_handling():
    d = make_dataset([[1, 0], [2, np.nan], [3, 1]], 'nc')

    with pytest.raises(DatasetError):
        d.labels()

    dropped = drop_missing_class(d)
    assert dropped.n_instances == 2
    assert list(dropped.labels()) == [0, 1]
    assert class_distribution(d) == {'x': 1, 'y': 1}

    with pytest.raises(DatasetError):
        drop_missing_class(make_dataset([[1, np.nan]], 'nc'))


def test_normalize_with_training_bounds():
    train = make_dataset([[0, 3, 0], [5, 3, 1], [10, 3, 0]], 'nnc')
    test = make_dataset([[15, 4, 1], [np.nan, 3, 0]], 'nnc')

    bounds = normalization_bounds(train)
    assert bounds.minimum == {0: 0.0, 1: 3.0}
    assert bounds.maximum == {0: 10.0, 1: 3.0}

    assert list(normalize(train).values[:, 0]) == [0.0, 0.5, 1.0]
    # constant column
    assert list(normalize(train).values[:, 1]) == [0.0, 0.0, 0.0]

    scaled = normalize(test, bounds)
    # not clipped
    assert scaled.values[0, 0] == 1.5
    assert np.isnan(scaled.values[1, 0])
    # the class is left alone
    assert list(scaled.values[:, 2]) == [1.0, 0.0]


def test_normalize_is_idempotent():
    rng = np.random.default_rng(3)
    rows = np.column_stack([rng.normal(5, 3, 40), rng.uniform(-2, 8, 40), np.full(40, 7.0),
                            rng.integers(0, 2, 40)])
    rows[[3, 17], 0] = np.nan
    d = make_dataset(rows, 'nnnc')

    once = normalize(d)
    twice = normalize(once)
    np.testing.assert_allclose(twice.values, once.values, rtol=0, atol=1e-15)
    assert np.isnan(twice.values[[3, 17], 0]).all()


def test_nominal_to_binary():
    d = make_dataset([[0, 1, 0.5, 0], [2, 0, 0.1, 1], [np.nan, np.nan, 0.3, 1]], 'ccnc',
                     categories={0: ('r', 'g', 'b'), 1: ('off', 'on'), 3: ('no', 'yes')})
    encoded = nominal_to_binary(d)

    assert [a.name for a in encoded.schema] == ['a0=r', 'a0=g', 'a0=b', 'a1=on', 'a2', 'a3']
    assert encoded.class_index == 5
    assert encoded.class_attribute.categories == ('no', 'yes')
    assert not any(a.is_nominal for a in encoded.predictive_schema())

    np.testing.assert_array_equal(encoded.values[0, :4], [1, 0, 0, 1])
    np.testing.assert_array_equal(encoded.values[1, :4], [0, 0, 1, 0])
    assert np.isnan(encoded.values[2, :4]).all()
    np.testing.assert_array_equal(encoded.labels(), d.labels())

    numeric_only = make_dataset([[0.5, 0]], 'nc')
    assert nominal_to_binary(numeric_only) is numeric_only


def test_stratified_folds():
    d = gaussian_blobs(n_per_class=13, classes=3)
    split = stratified_folds(d, 10, seed=1)

    assert len(split) == 10
    every = np.sort(np.concatenate(split.folds))
    assert list(every) == list(range(d.n_instances))

    sizes = [len(fold) for fold in split.folds]
    assert max(sizes) - min(sizes) <= 1

    labels = d.labels()
    for label in range(3):
        per_fold = [int((labels[fold] == label).sum()) for fold in split.folds]
        assert max(per_fold) - min(per_fold) <= 1

    for fold in range(10):
        train, test = split.train_indices(fold), split.test_indices(fold)
        assert not set(train) & set(test)
        assert len(train) + len(test) == d.n_instances

    again = stratified_folds(d, 10, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(split.folds, again.folds))
    other = stratified_folds(d, 10, seed=2)
    assert not all(np.array_equal(a, b) for a, b in zip(split.folds, other.folds))


@pytest.mark.parametrize('seed', range(8))
def test_stratified_folds_sizes_on_random_datasets(seed):
    rng = np.random.default_rng(seed)
    classes = int(rng.integers(2, 6))
    labels = rng.integers(0, classes, int(rng.integers(12, 90)))
    k = int(rng.integers(2, 11))
    d = make_dataset(np.column_stack([rng.normal(size=labels.size), labels]), 'nc',
                     categories={1: tuple(f"c{c}" for c in range(classes))})

    split = stratified_folds(d, k, seed=seed)
    sizes = [len(fold) for fold in split.folds]
    assert sum(sizes) == d.n_instances
    assert max(sizes) - min(sizes) <= 1

    for label in range(classes):
        members = int((labels == label).sum())
        per_fold = [int((labels[fold] == label).sum()) for fold in split.folds]
        # every fold holds the floor or the ceiling of its share
        assert set(per_fold) <= {members // k, -(-members // k)}


def test_stratified_folds_limits():
    d = make_dataset([[1, 0], [2, 1], [3, 0]], 'nc')
    with pytest.raises(DatasetError):
        stratified_folds(d, 1, seed=1)
    with pytest.raises(DatasetError):
        stratified_folds(d, 4, seed=1)

    # leave one out
    split = stratified_folds(d, 3, seed=1)
    assert sorted(len(fold) for fold in split.folds) == [1, 1, 1]


def test_select_rows():
    d = make_dataset([[1, 0], [2, 1], [3, 0]], 'nc')
    selected = select_rows(d, [2, 0])
    assert list(selected.values[:, 0]) == [3.0, 1.0]
    assert selected.schema == d.schema
