import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rodhom.io import (
    bundled_models,
    fmt,
    load_model,
    model_from_config,
    read_config,
    read_csv,
    set_parameter,
    to_json,
    write_csv,
)
from rodhom.microstructure import ModelError, SampledMaterial, SampledPrestrain
from rodhom.section import build_section

BASE = """
name = "t"
length = 1.0
gamma = "{gamma}"
[section]
kind = "square"
[[slice]]
phases = [[1.0, 1.0, 1.0]]
[slice.prestrain]
kind = "bilayer"
theta = 0.5
"""


def write(tmp_path, text, name="m.model"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bundled_models_present():
    assert {"bilayer", "bilayer_inf", "halfdisk", "homogeneous", "splay_bend"} <= set(bundled_models())
    model, cfg = load_model("bilayer")
    assert model.gamma == 0.0 and cfg["name"] == "bilayer"


def test_bad_gamma_names_field(tmp_path):
    with pytest.raises(ModelError, match="gamma"):
        load_model(write(tmp_path, BASE.format(gamma="sometimes")))


def test_missing_file():
    with pytest.raises(ModelError, match="not found"):
        load_model("no/such/file.model")


def test_toml_syntax_error(tmp_path):
    with pytest.raises(ModelError):
        load_model(write(tmp_path, "gamma = \n"))


def test_missing_phases(tmp_path):
    text = BASE.format(gamma="0").replace("phases = [[1.0, 1.0, 1.0]]", "")
    with pytest.raises(ModelError, match="phases"):
        load_model(write(tmp_path, text))


def test_negative_mu_rejected(tmp_path):
    text = BASE.format(gamma="0").replace("[[1.0, 1.0, 1.0]]", "[[1.0, 1.0, -1.0]]")
    with pytest.raises(ModelError, match="positive"):
        load_model(write(tmp_path, text))


def test_halfdisk_requires_disk(tmp_path):
    text = BASE.format(gamma="0").replace('kind = "bilayer"', 'kind = "halfdisk"')
    with pytest.raises(ModelError, match="unit-disk"):
        load_model(write(tmp_path, text))


def test_unknown_prestrain(tmp_path):
    text = BASE.format(gamma="0").replace('kind = "bilayer"', 'kind = "spiral"')
    with pytest.raises(ModelError, match="spiral"):
        load_model(write(tmp_path, text))


def test_sampled_fields(tmp_path, rng):
    mesh = build_section({"kind": "square"}, refine=4)
    B = rng.standard_normal((2, mesh.n_quad, 6))
    np.savez(tmp_path / "b.npz", y_edges=[0.0, 0.5, 1.0], B=B)
    C = np.broadcast_to(np.diag([3.0, 3.0, 3.0, 2.0, 2.0, 2.0]), (1, mesh.n_quad, 6, 6))
    np.savez(tmp_path / "c.npz", y_edges=[0.0, 1.0], C=C)
    text = f"""
length = 1.0
gamma = "0"
[section]
kind = "square"
refine = 4
[[slice]]
material_file = "c.npz"
[slice.prestrain]
kind = "file"
path = "b.npz"
"""
    model, _ = load_model(write(tmp_path, text))
    assert isinstance(model.slices[0].material, SampledMaterial)
    assert isinstance(model.slices[0].prestrain, SampledPrestrain)
    assert np.array_equal(model.slices[0].prestrain.sample(mesh, [0.7])[0], B[1])


def test_sampled_file_missing_array(tmp_path):
    np.savez(tmp_path / "b.npz", y_edges=[0.0, 1.0])
    text = BASE.format(gamma="0").replace('kind = "bilayer"\ntheta = 0.5', 'kind = "file"\npath = "b.npz"')
    with pytest.raises(ModelError, match="lacks array"):
        load_model(write(tmp_path, text))


def test_set_parameter():
    cfg, base = read_config("bilayer")
    c = set_parameter(cfg, "theta", 0.2)
    assert c["slice"][0]["prestrain"]["theta"] == 0.2
    assert c["slice"][0]["phases"][0][0] == 0.2 and c["slice"][0]["phases"][1][0] == pytest.approx(0.8)
    assert cfg["slice"][0]["prestrain"]["theta"] == 0.5
    assert set_parameter(cfg, "gamma", math.inf)["gamma"] == "inf"
    assert set_parameter(cfg, "mu2", 4.0)["slice"][0]["phases"][1][2] == 4.0
    assert model_from_config(set_parameter(cfg, "lambda", 2.0), base).slices[0].material.lam(0.1) == 2.0
    with pytest.raises(ModelError):
        set_parameter(cfg, "rbar", 1.0)


def test_fmt_and_json():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf" and fmt(math.nan) == "nan"
    text = to_json({"a": [1.0, 2], "b": None, "c": math.inf, "d": {"e": True}})
    import json

    assert json.loads(text) == {"a": [1.0, 2], "b": None, "c": "inf", "d": {"e": True}}


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=8))
def test_csv_round_trip(values):
    text = write_csv([values], [f"c{i}" for i in range(len(values))])
    header, rows = read_csv(text)
    assert rows[0] == values


def test_csv_file(tmp_path):
    p = tmp_path / "x.csv"
    write_csv([(1, 0.5, "fem")], ["i", "v", "path"], p)
    header, rows = read_csv(p)
    assert header == ["i", "v", "path"] and rows == [[1.0, 0.5, "fem"]]
