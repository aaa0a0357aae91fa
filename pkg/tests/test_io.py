import json

import numpy as np

from kricci import io as kio
from kricci.conformal import EquationSpec
from kricci.mesh import Annulus, build_mesh
from kricci.profiles import interior_ball
from kricci.regularity import verdict_table
from kricci.solver import RadialField


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        assert float(kio.fmt(x)) == float(x)
    assert kio.fmt(True) == "true" and kio.fmt(np.int64(7)) == "7"


def test_field_csv_round_trip(tmp_path):
    mesh = build_mesh(Annulus(1.5, 3.0), 32)
    field = RadialField.from_profile(mesh, interior_ball(4, 2, 6.0))
    path = kio.write_field_csv(tmp_path / "f.csv", field, EquationSpec(4, 2))
    header = path.read_text().splitlines()[0]
    assert header == ",".join(kio.FIELD_COLUMNS)
    cols = kio.read_field_csv(path)
    assert np.array_equal(cols["v"], field.v)
    assert np.array_equal(cols["r"], mesh.r)
    assert np.isnan(cols["margin"][0]) and np.isnan(cols["residual"][-1])
    assert np.all(cols["margin"][1:-1] > 0)


def test_json_is_versioned_and_sorted(tmp_path):
    path = kio.write_json(tmp_path / "r.json", {"b": np.float64(1.5), "a": [np.int32(2)], "c": float("inf")})
    data = json.loads(path.read_text())
    assert data == {"a": [2], "b": 1.5, "c": "inf", "schema": kio.SCHEMA_VERSION}
    assert list(data) == sorted(data)


def test_verdict_rows():
    rows = list(kio.verdict_rows(verdict_table([4], [3], [1, 2])))
    assert rows[0][:5] == (4, 3, 1, "Borderline", True)
    assert rows[1][3] == "NotRegular" and rows[1][6] == "0;-2"


def test_config_hash_stable():
    a = {"x": 1, "y": [1.0, 2.0]}
    b = {"y": [1.0, 2.0], "x": 1}
    assert kio.config_hash(a) == kio.config_hash(b)
    assert len(kio.config_hash(a)) == 16
    assert kio.config_hash(a) != kio.config_hash({"x": 2, "y": [1.0, 2.0]})
