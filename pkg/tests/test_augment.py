import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepclass import augment as A
from deepclass import dataset as D


class TestTransformVocabulary:
    def test_96_distinct_transforms(self):
        transforms = A.enumerate_transforms()
        assert len(transforms) == 96
        assert len(set(transforms)) == 96

    def test_identity_first(self):
        assert A.TRANSFORMS[0] == A.Transform(0, "none")
        assert A.TRANSFORMS[0].is_identity

    def test_angle_major_flip_minor_order(self):
        assert A.TRANSFORMS[1] == A.Transform(0, "horizontal")
        assert A.TRANSFORMS[4] == A.Transform(1, "none")

    def test_out_of_range_angle_rejected(self):
        with pytest.raises(ValueError):
            A.Transform(24, "none")


class TestApplyTransform:
    def test_identity_bit_exact(self):
        img = np.random.rand(3, 8, 8).astype(np.float32)
        out = A.apply_transform(img, A.Transform(0, "none"))
        assert out.tobytes() == img.tobytes()

    def test_quarter_turn_counter_clockwise(self):
        img = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out = A.apply_transform(img, A.Transform(6, "none"))
        np.testing.assert_array_equal(out[0], [[2, 4], [1, 3]])

    def test_horizontal_flip_involution(self):
        img = np.random.rand(3, 6, 6).astype(np.float32)
        t = A.Transform(0, "horizontal")
        out = A.apply_transform(A.apply_transform(img, t), t)
        assert out.tobytes() == img.tobytes()

    def test_right_angles_preserve_pixel_multiset(self):
        img = np.random.rand(3, 5, 5).astype(np.float32)
        for angle in (0, 6, 12, 18):
            for flip in A.FLIP_MODES:
                out = A.apply_transform(img, A.Transform(angle, flip))
                assert sorted(out.ravel()) == sorted(img.ravel())

    def test_right_angle_inverse_is_identity(self):
        img = np.random.rand(3, 4, 4).astype(np.float32)
        out = A.apply_transform(img, A.Transform(6, "none"))
        back = A.apply_transform(out, A.Transform(18, "none"))
        assert back.tobytes() == img.tobytes()

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            A.apply_transform(np.zeros((3, 4, 5)), A.Transform(0, "none"))

    def test_bilinear_angle_finite_and_shaped(self):
        img = np.random.rand(3, 16, 16).astype(np.float32)
        out = A.apply_transform(img, A.Transform(1, "both"))
        assert out.shape == img.shape
        assert np.all(np.isfinite(out))
        assert out.min() >= img.min() - 1e-6 and out.max() <= img.max() + 1e-6

    def test_deterministic(self):
        img = np.random.rand(3, 16, 16).astype(np.float32)
        t = A.Transform(5, "vertical")
        assert A.apply_transform(img, t).tobytes() == A.apply_transform(img, t).tobytes()


class TestPlan:
    def test_exact_multiple(self):
        plan = A.plan_augmentation({c: 100 for c in A.DEFAULT_TARGETS},
                                   {c: 1000 for c in A.DEFAULT_TARGETS})
        assert all(len(per) == 10 for per in plan["M"])

    def test_balanced_remainder(self):
        plan = A.plan_augmentation({c: 3 for c in A.DEFAULT_TARGETS},
                                   {c: 10 for c in A.DEFAULT_TARGETS})
        assert [len(per) for per in plan["N"]] == [4, 3, 3]

    def test_default_targets_hit_exactly(self):
        counts = {"M": 1113, "N": 6705, "BCC": 514, "AK": 327,
                  "PBK": 1099, "D": 115, "VL": 142}
        plan = A.plan_augmentation(counts)
        for cls, target in A.DEFAULT_TARGETS.items():
            assert sum(len(per) for per in plan[cls]) == target

    def test_capacity_error_names_class(self):
        with pytest.raises(A.CapacityError, match="class M"):
            A.plan_augmentation({c: 1 for c in A.DEFAULT_TARGETS})

    def test_no_duplicate_transforms_per_image(self):
        plan = A.plan_augmentation({c: 5 for c in A.DEFAULT_TARGETS},
                                   {c: 90 for c in A.DEFAULT_TARGETS})
        for per in plan["AK"]:
            assert len(per) == len(set(per))

    @settings(max_examples=100, deadline=None)
    @given(n=st.integers(1, 500), t=st.integers(1, 20000))
    def test_totals_property(self, n, t):
        if -(-t // n) > 96:
            with pytest.raises(A.CapacityError):
                A.plan_augmentation({c: n for c in A.DEFAULT_TARGETS},
                                    {c: t for c in A.DEFAULT_TARGETS})
            return
        plan = A.plan_augmentation({c: n for c in A.DEFAULT_TARGETS},
                                   {c: t for c in A.DEFAULT_TARGETS})
        for cls in A.DEFAULT_TARGETS:
            lengths = [len(per) for per in plan[cls]]
            assert sum(lengths) == t
            assert max(lengths) - min(lengths) <= 1


@pytest.fixture
def tiny_dataset(tmp_path):
    """Two small PPM images per class."""
    rng = np.random.default_rng(9)
    samples = []
    for cls in D.CLASS_NAMES:
        for k in range(2):
            img = rng.random((3, 8, 8)).astype(np.float32)
            path = tmp_path / f"{cls}_{k}.ppm"
            path.write_bytes(D.encode_ppm(img))
            samples.append(D.Sample(f"{cls}_{k}", str(path), D.CLASS_INDEX[cls]))
    return D.DatasetManifest(samples)


class TestRunAugmentation:
    def test_totals_and_manifest(self, tiny_dataset, tmp_path):
        targets = {c: 5 for c in A.DEFAULT_TARGETS}
        plan = A.plan_augmentation(tiny_dataset.class_census(), targets)
        out_dir = tmp_path / "aug"
        rows = A.run_augmentation(tiny_dataset, plan, out_dir, out_size=8)
        per_class = {c: 0 for c in A.DEFAULT_TARGETS}
        for row in rows:
            per_class[row[4]] += 1
        assert per_class == targets
        manifest = (out_dir / "augmented.tsv").read_text()
        assert len(manifest.splitlines()) == 35
        first = manifest.splitlines()[0].split("\t")
        assert len(first) == 5

    def test_identity_rows_byte_identical_to_source(self, tiny_dataset, tmp_path):
        targets = {c: 3 for c in A.DEFAULT_TARGETS}
        plan = A.plan_augmentation(tiny_dataset.class_census(), targets)
        rows = A.run_augmentation(tiny_dataset, plan, tmp_path / "aug", out_size=8)
        sample = tiny_dataset.samples[0]
        identity_row = next(r for r in rows if r[1] == sample.image_id
                            and r[2] == 0 and r[3] == "none")
        with open(identity_row[0], "rb") as f:
            written = D.decode_packed(f.read())
        source = D.load_image_tensor(sample.path, out_size=8)
        assert written.tobytes() == source.tobytes()

    def test_rerun_byte_identical(self, tiny_dataset, tmp_path):
        targets = {c: 3 for c in A.DEFAULT_TARGETS}
        plan = A.plan_augmentation(tiny_dataset.class_census(), targets)
        rows1 = A.run_augmentation(tiny_dataset, plan, tmp_path / "a", out_size=8)
        rows2 = A.run_augmentation(tiny_dataset, plan, tmp_path / "b", out_size=8)
        text1 = (tmp_path / "a" / "augmented.tsv").read_text()
        text2 = (tmp_path / "b" / "augmented.tsv").read_text()
        assert text1.replace(str(tmp_path / "a"), "") == text2.replace(str(tmp_path / "b"), "")
        for r1, r2 in zip(rows1, rows2):
            with open(r1[0], "rb") as f1, open(r2[0], "rb") as f2:
                assert f1.read() == f2.read()
