import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcn.errors import SchemaError, SkeletonReferenceError, ValidationError
from mgcn.skeleton import (ScaleId, SkeletonConfig, builtin_skeleton,
                           load_skeleton, save_skeleton)


def test_h36m20_scale_sizes():
    cfg = builtin_skeleton("h36m20")
    assert (cfg.n_joints, cfg.n_s2, cfg.n_s3) == (20, 10, 5)
    assert cfg.k == 60


def test_h36m20_s2_to_s3_is_five_pairs():
    cfg = builtin_skeleton("h36m20")
    assert len(cfg.partitions_s2_to_s3) == 5
    assert all(len(g) == 2 for g in cfg.partitions_s2_to_s3)


def test_stick6_loads_with_k_18():
    cfg = builtin_skeleton("stick6")
    assert (cfg.n_joints, cfg.n_s2, cfg.n_s3) == (6, 3, 2)
    assert cfg.dims_per_joint == 3 and cfg.k == 18


def test_unknown_builtin():
    with pytest.raises(ValidationError):
        builtin_skeleton("nope")


def test_overlapping_group_rejected():
    with pytest.raises(ValidationError, match="appears in groups"):
        SkeletonConfig("bad", ("a", "b", "c", "d"), 1,
                       ((0, 1), (1, 2), (3,)), ((0,), (1, 2)))


def test_gap_in_partition_rejected():
    with pytest.raises(ValidationError, match=r"does not cover indices \[3\]"):
        SkeletonConfig("bad", ("a", "b", "c", "d"), 1,
                       ((0, 1), (2,)), ((0,), (1,)))


def test_out_of_range_index_rejected():
    with pytest.raises(ValidationError, match="references index 9"):
        SkeletonConfig("bad", ("a", "b", "c"), 1, ((0, 9), (1, 2)), ((0,), (1,)))


def test_counts_must_strictly_decrease():
    # 4 joints -> 4 groups is not a coarsening
    with pytest.raises(ValidationError, match="strictly decrease"):
        SkeletonConfig("bad", ("a", "b", "c", "d"), 1,
                       ((0,), (1,), (2,), (3,)), ((0,), (1, 2, 3)))


def test_unknown_joint_name_is_reference_error(tmp_path):
    path = tmp_path / "skel.yaml"
    path.write_text(
        "schema_version: 1\n"
        "name: broken\n"
        "dims_per_joint: 3\n"
        "joint_names: [a, b, c]\n"
        "partitions_s1_to_s2: [[a, ghost], [c]]\n"
        "partitions_s2_to_s3: [[0], [1]]\n")
    with pytest.raises(SkeletonReferenceError, match="ghost"):
        load_skeleton(path)


def test_schema_version_checked(tmp_path):
    path = tmp_path / "skel.yaml"
    path.write_text("schema_version: 99\nname: x\n")
    with pytest.raises(SchemaError):
        load_skeleton(path)


def test_group_slices_stick6_first_group():
    cfg = builtin_skeleton("stick6")
    slices = cfg.group_slices(ScaleId.S1)
    assert slices[0] == [0, 1, 2, 3, 4, 5]  # joints {0,1} at 3 dims each


def test_group_slices_cover_k_exactly():
    for name in ("stick6", "h36m20"):
        cfg = builtin_skeleton(name)
        for scale in (ScaleId.S1, ScaleId.S2):
            covered = sorted(c for group in cfg.group_slices(scale) for c in group)
            assert covered == list(range(cfg.k))


def test_group_slices_from_s3_rejected():
    with pytest.raises(ValueError):
        builtin_skeleton("stick6").group_slices(ScaleId.S3)


def test_group_sizes_sum_to_source_count():
    for name in ("stick6", "h36m20"):
        cfg = builtin_skeleton(name)
        assert sum(len(g) for g in cfg.partitions_s1_to_s2) == cfg.n_joints
        assert sum(len(g) for g in cfg.partitions_s2_to_s3) == cfg.n_s2


def test_composed_s3_joint_groups_partition_joints():
    cfg = builtin_skeleton("h36m20")
    joints = sorted(j for g in cfg.joint_groups_s3() for j in g)
    assert joints == list(range(cfg.n_joints))


def test_roundtrip_is_idempotent(tmp_path):
    cfg = builtin_skeleton("h36m20")
    p1, p2 = tmp_path / "a.yaml", tmp_path / "b.yaml"
    save_skeleton(cfg, p1)
    loaded = load_skeleton(p1)
    assert loaded == cfg
    save_skeleton(loaded, p2)
    assert load_skeleton(p2) == loaded
    assert p1.read_text() == p2.read_text()


def test_groups_by_name_resolve(tmp_path):
    path = tmp_path / "skel.yaml"
    path.write_text(
        "schema_version: 1\n"
        "name: named\n"
        "dims_per_joint: 2\n"
        "joint_names: [hip, knee, ankle, toe]\n"
        "partitions_s1_to_s2: [[hip, knee], [ankle, toe]]\n"
        "partitions_s2_to_s3: ~\n")
    # s2->s3 must still be a valid partition; a null fails validation cleanly
    with pytest.raises((ValidationError, TypeError)):
        load_skeleton(path)
    path.write_text(
        "schema_version: 1\n"
        "name: named\n"
        "dims_per_joint: 2\n"
        "joint_names: [hip, knee, ankle, toe, heel, ball]\n"
        "partitions_s1_to_s2: [[hip, knee], [ankle, toe], [heel, ball]]\n"
        "partitions_s2_to_s3: [[0, 1], [2]]\n")
    cfg = load_skeleton(path)
    assert cfg.partitions_s1_to_s2 == ((0, 1), (2, 3), (4, 5))


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 12), st.integers(0, 10 ** 6))
def test_random_partitions_validate_and_roundtrip(n_joints, seed):
    import numpy as np
    r = np.random.default_rng(seed)
    order = r.permutation(n_joints)
    n_groups = max(2, n_joints // 2)
    groups = [sorted(int(j) for j in chunk) for chunk in np.array_split(order, n_groups)]
    n_s3 = max(1, n_groups - 1)
    order2 = r.permutation(n_groups)
    groups23 = [sorted(int(j) for j in chunk) for chunk in np.array_split(order2, n_s3)]
    names = tuple(f"j{i}" for i in range(n_joints))
    cfg = SkeletonConfig("rand", names, 3, tuple(map(tuple, groups)),
                         tuple(map(tuple, groups23)))
    assert SkeletonConfig.from_dict(cfg.to_dict()) == cfg
