import numpy as np

from gmpool.fileio import SyntheticSpec
from gmpool.synthetic import _split_indices, format_report, generate_images, run_benchmark


def small_spec(**overrides):
    base = dict(
        classes=3,
        images_per_class=4,
        descriptors_per_image=20,
        background_fraction=0.9,
        descriptor_dim=4,
        noise_scale=0.25,
        seed=0,
        encoder={"type": "emk", "dim": 64, "sigma": 1.0},
    )
    base.update(overrides)
    return SyntheticSpec(**base)


class TestGeneration:
    def test_shapes_and_labels(self):
        spec = small_spec()
        images, labels = generate_images(spec)
        assert len(images) == 12
        assert labels.tolist() == [0] * 4 + [1] * 4 + [2] * 4
        for img in images:
            assert img.descriptors.shape == (20, 4)

    def test_deterministic(self):
        a, _ = generate_images(small_spec())
        b, _ = generate_images(small_spec())
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.descriptors, y.descriptors)

    def test_seed_changes_data(self):
        a, _ = generate_images(small_spec(seed=0))
        b, _ = generate_images(small_spec(seed=1))
        assert not np.array_equal(a[0].descriptors, b[0].descriptors)

    def test_background_fraction_caps_below_all(self):
        # even at 0.99 every image keeps at least one class descriptor
        spec = small_spec(background_fraction=0.99)
        images, labels = generate_images(spec)
        assert len(images) == 12


class TestSplit:
    def test_disjoint_and_complete(self):
        labels = np.repeat(np.arange(3), 8)
        train, val, test = _split_indices(labels, 8)
        combined = np.sort(np.concatenate([train, val, test]))
        np.testing.assert_array_equal(combined, np.arange(24))

    def test_minimum_viable_split(self):
        labels = np.repeat(np.arange(2), 3)
        train, val, test = _split_indices(labels, 3)
        assert len(train) == 2 and len(val) == 2 and len(test) == 2


class TestBenchmark:
    def test_report_rows(self):
        rows = run_benchmark(small_spec())
        assert [r.method for r in rows] == ["sum", "sum+power", "gmp", "gmp+power"]
        for r in rows:
            assert 0.0 <= r.accuracy <= 1.0
        report = format_report(small_spec(), rows)
        assert report.splitlines()[1] == "method,accuracy,selection"

    def test_gmp_selection_comes_from_decade_grid(self):
        rows = {r.method: r for r in run_benchmark(small_spec())}
        lam = float(rows["gmp"].selection.split("=")[1])
        assert lam in (1e1, 1e2, 1e3, 1e4, 1e5)
