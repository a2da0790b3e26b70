import numpy as np
import pytest

from pgdnn import datagen, physics
from pgdnn.datagen import (
    CSV_COLUMNS,
    DataFormatError,
    Dataset,
    PlateSample,
    build_full_grid,
    build_test2,
    fit_standardizer,
    nested_subset,
    split_train_independent,
    split_validation,
)


@pytest.fixture(scope="module")
def grid():
    return build_full_grid(0)


@pytest.fixture(scope="module")
def pool(grid):
    return split_train_independent(grid, 0)[0]


def test_grid_shape(grid):
    assert len(grid) == 500
    counts = {}
    for s in grid:
        counts[(s.material_name, s.width, s.length)] = counts.get((s.material_name, s.width, s.length), 0) + 1
    assert len(counts) == 25
    assert set(counts.values()) == {20}
    assert min(s.thickness for s in grid) == 0.030
    assert max(s.thickness for s in grid) == 0.125


def test_grid_targets_within_one_percent_of_oracle(grid):
    for s in grid:
        exact = physics.natural_frequency(s.geometry, s.material)
        assert 0.99 * exact * (1 - 1e-12) <= s.natural_frequency <= 1.01 * exact * (1 + 1e-12)


def test_grid_noise_is_not_trivial(grid):
    ratios = np.array([s.natural_frequency / physics.natural_frequency(s.geometry, s.material) for s in grid])
    assert 0.999 < ratios.mean() < 1.001
    assert ratios.std() > 1e-3


def test_grid_deterministic():
    assert datagen.dataset_to_csv(build_full_grid(7)) == datagen.dataset_to_csv(build_full_grid(7))
    assert datagen.dataset_to_csv(build_full_grid(7)) != datagen.dataset_to_csv(build_full_grid(8))


def test_split_sizes_and_partition(grid):
    train, test1 = split_train_independent(grid, 0)
    assert (len(train), len(test1)) == (261, 239)
    assert train.keys() | test1.keys() == grid.keys()
    assert not train.keys() & test1.keys()
    again = split_train_independent(grid, 0)
    assert again[0].samples == train.samples


def test_split_rejects_wrong_size(grid):
    with pytest.raises(ValueError):
        split_train_independent(grid.subset(range(499)), 0)


def test_nested_subsets(pool):
    subsets = {n: nested_subset(pool, n, 3) for n in (261, 117, 60, 30)}
    assert subsets[261] is pool
    assert len(subsets[117]) == 117 and len(subsets[117].keys()) == 117
    assert subsets[30].keys() < subsets[60].keys() < subsets[117].keys() < pool.keys()
    with pytest.raises(ValueError):
        nested_subset(pool, 50, 3)


def test_validation_split_sizes(pool):
    for n, expected in [(261, 209), (117, 94), (60, 48), (30, 24)]:
        fit, val = split_validation(nested_subset(pool, n, 0), 0)
        assert len(fit) == expected
        assert len(fit) + len(val) == n
        assert not fit.keys() & val.keys()


def test_test2(grid):
    t2 = build_test2(0)
    assert len(t2) == 101
    for s in t2:
        assert 2.040 <= s.length <= 9.824
        assert 2.016 <= s.width <= 9.843
        assert 0.024 <= s.thickness <= 0.216
        assert (s.weight_density, s.youngs_modulus, s.poissons_ratio) == (0.150, 3000.0, 0.18)
        assert s.natural_frequency == physics.natural_frequency(s.geometry, physics.PWB)
    assert not t2.keys() & grid.keys()


def test_standardized_training_columns(pool):
    fit, _ = split_validation(pool, 0)
    st = fit_standardizer(fit, ("W", "D", "G"))
    base, phys, target = st.transform(fit)
    for block in (base, phys, target[:, None]):
        np.testing.assert_allclose(block.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(block.std(axis=0), 1.0, atol=1e-9)


@pytest.mark.parametrize("scale", datagen.TARGET_SCALES)
def test_standardizer_round_trip(pool, scale):
    st = fit_standardizer(pool, ("D", "G"), scale)
    raw_base = pool.base_features()
    raw_phys = pool.physics_features(("D", "G"))
    np.testing.assert_allclose(st.inverse_base(st.base(raw_base)), raw_base, rtol=1e-9)
    np.testing.assert_allclose(st.inverse_physics(st.physics(raw_phys)), raw_phys, rtol=1e-9)
    np.testing.assert_allclose(st.inverse_target(st.target(pool.targets())), pool.targets(), rtol=1e-9)


def test_standardizer_depends_on_subset(pool):
    small = nested_subset(pool, 30, 0)
    a = fit_standardizer(pool, ("D",))
    b = fit_standardizer(small, ("D",))
    assert not np.allclose(a.base_mean, b.base_mean)
    assert a.target_mean != b.target_mean


def test_standardizer_rejects_constant_feature(grid):
    one_material = Dataset(tuple(s for s in grid if s.material_name == "Copper"), "train")
    with pytest.raises(ValueError, match="constant"):
        fit_standardizer(one_material, ())


def test_standardizer_rejects_held_out_roles(grid):
    _, test1 = split_train_independent(grid, 0)
    with pytest.raises(ValueError):
        fit_standardizer(test1, ())


def test_physics_columns_order(pool):
    both = pool.physics_features(("D", "W"))
    np.testing.assert_array_equal(both[:, 0], pool.physics_features(("W",))[:, 0])
    s = pool[0]
    feats = physics.physics_features(s.geometry, s.material)
    np.testing.assert_allclose(
        pool.physics_features(("W", "D", "G"))[0],
        [feats.weight, feats.flexural_rigidity, feats.shear_modulus],
        rtol=1e-15,
    )


def test_duplicate_rows_rejected(grid):
    with pytest.raises(ValueError):
        Dataset((grid[0], grid[0]))


def test_csv_round_trip(tmp_path, grid):
    path = tmp_path / "grid.csv"
    datagen.write_csv(grid, path)
    assert datagen.read_csv(path).samples == grid.samples
    lines = path.read_bytes().split(b"\n")
    assert lines[0].decode() == ",".join(CSV_COLUMNS)
    assert len(path.read_text().splitlines()) == 501
    assert b"\r" not in path.read_bytes()


def test_csv_test2_round_trip(tmp_path):
    t2 = build_test2(4)
    datagen.write_csv(t2, tmp_path / "t2.csv")
    assert datagen.read_csv(tmp_path / "t2.csv", "test2").samples == t2.samples


@pytest.mark.parametrize(
    "body, message",
    [
        ("material,t_in,w_in\nAl,1,2\n", "missing columns"),
        (",".join(CSV_COLUMNS) + "\nAl,0.03,2,2,0.097,9900,0.33\n", ":2: expected 8 fields"),
        (",".join(CSV_COLUMNS) + "\nAl,0.03,2,2,0.097,9900,0.33,100\nAl,0.04,2,2,abc,9900,0.33,100\n", ":3: column rho_lb_in3"),
        (",".join(CSV_COLUMNS) + "\nAl,0.03,2,2,0.097,9900,0.33,-5\n", ":2:"),
        ("", "empty"),
    ],
)
def test_csv_errors_report_rows(tmp_path, body, message):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataFormatError, match=message):
        datagen.read_csv(path)


def test_sample_rejects_nonpositive_frequency():
    with pytest.raises(ValueError):
        PlateSample("Al", 0.03, 2.0, 2.0, 0.097, 9900.0, 0.33, 0.0)
