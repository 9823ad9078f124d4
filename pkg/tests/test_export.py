import csv
import io
import json

import numpy as np
import pytest

from fibomask import export
from fibomask.maskgen import HeadMaskConfig, SupportSet, fibottention_masks


def test_pbm_round_trip():
    m = fibottention_masks(HeadMaskConfig()).base[0]
    data = export.pbm_bytes(m.dense(), comment="head 0")
    assert data.startswith(b"P1\n# head 0\n197 197\n")
    assert max(len(line) for line in data.splitlines()) <= 70
    assert np.array_equal(export.read_pbm(data), m.dense())


def test_pbm_small_exact_bytes():
    m = SupportSet(2, (1,))
    assert export.pbm_bytes(m.dense()) == b"P1\n3 3\n111\n101\n110\n"


def test_read_pbm_rejects_garbage():
    with pytest.raises(ValueError):
        export.read_pbm(b"P4\n1 1\n0\n")
    with pytest.raises(ValueError):
        export.read_pbm(b"P1\n2 2\n101\n")


def test_coordinate_csv():
    m = SupportSet(2, (1,))
    data = export.coords_csv_bytes([[m], [m]]).decode()
    rows = list(csv.reader(io.StringIO(data)))
    assert rows[0] == ["layer", "head", "row", "col"]
    body = [tuple(map(int, r)) for r in rows[1:]]
    assert len(body) == 2 * 7
    assert (0, 0, 0, 0) in body and (1, 0, 2, 1) in body
    assert (0, 0, 1, 1) not in body


def test_json_bytes_stable_and_terminated():
    a = export.json_bytes({"b": 1, "a": [1, 2]})
    assert a == export.json_bytes({"a": [1, 2], "b": 1})
    assert a.endswith(b"\n") and json.loads(a) == {"a": [1, 2], "b": 1}


def test_atomic_write(tmp_path):
    target = tmp_path / "x.txt"
    export.atomic_write_bytes(target, b"one")
    export.atomic_write_bytes(target, b"two")
    assert target.read_bytes() == b"two"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
