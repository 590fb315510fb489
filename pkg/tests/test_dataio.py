import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from pideeponet.dataio import (
    EvalReport, GridField, ObservationMask, colormap, error_metrics, evaluate, extract_profile,
    heatmap_pixels, load_grid_csv, load_pairs_csv, make_mask, mask_count, read_ppm,
    render_heatmap, save_grid_csv,
)
from pideeponet.errors import DomainError, GridParseError, ShapeError

SCHEMA = json.loads(
    (Path(__file__).resolve().parents[1] / "src/pideeponet/schemas/eval_report.schema.json")
    .read_text()
)


def test_grid_round_trip_is_bit_exact(tmp_path, rng):
    f = GridField(rng.normal(20, 5, (4, 7)) * np.pi, dx=30.0, dt=1.5, x0=15.0, t0=0.25)
    g = load_grid_csv(save_grid_csv(f, tmp_path / "g.csv"))
    assert g.values.tobytes() == f.values.tobytes()
    assert (g.dx, g.dt, g.x0, g.t0) == (f.dx, f.dt, f.x0, f.t0)


def test_grid_header(tmp_path):
    p = save_grid_csv(GridField(np.ones((2, 3))), tmp_path / "g.csv")
    assert p.read_text().splitlines()[0] == "# tse-grid v1, M=2, T=3, dx=30, dt=1.5"


@pytest.mark.parametrize("text,line,column", [
    ("", 1, None),
    ("1,2\n", 1, None),
    ("# tse-grid v1, M=2, T=2, dx=30, dt=1.5\n1,2\n3\n", 3, None),
    ("# tse-grid v1, M=2, T=2, dx=30, dt=1.5\n1,2\n3,x\n", 3, 2),
    ("# tse-grid v1, M=2, T=2, dx=30, dt=1.5\n1,2\n", 2, None),
    ("# tse-grid v1, M=2, T=2, dx=30\n1,2\n3,4\n", 1, None),
    ("# tse-grid v1, M=2, T=2, dx=abc, dt=1\n1,2\n3,4\n", 1, 4),
])
def test_grid_parse_errors(tmp_path, text, line, column):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(GridParseError) as exc:
        load_grid_csv(p)
    assert exc.value.line == line
    if column is not None:
        assert exc.value.column == column


def test_pairs_csv(tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text("density,speed\n0.01,18\n0.05,12\n")
    np.testing.assert_array_equal(load_pairs_csv(p), [[0.01, 18], [0.05, 12]])
    p.write_text("0.01,18\n0.05\n")
    with pytest.raises(GridParseError):
        load_pairs_csv(p)


def test_mask_cardinality_and_determinism():
    m = make_mask(21, 1770, 0.10, 0)
    assert m.count == 3717 == mask_count(21, 1770, 0.1)
    np.testing.assert_array_equal(m.observed, make_mask(21, 1770, 0.10, 0).observed)
    assert make_mask(5, 5, 1.0, 3).observed.all()
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            make_mask(5, 5, bad, 0)


def test_mask_overlap_matches_hypergeometric_expectation():
    a, b = make_mask(21, 600, 0.3, 1), make_mask(21, 600, 0.3, 2)
    assert not np.array_equal(a.observed, b.observed)
    overlap = (a.observed & b.observed).mean()
    assert abs(overlap - 0.09) < 0.01


def _holdout(shape, observed_cells):
    obs = np.ones(shape, bool)
    for c in observed_cells:
        obs[c] = False
    return ObservationMask(obs, 0.5, 0)


def test_evaluate_examples(rng):
    truth = GridField(rng.uniform(5, 20, (3, 4)))
    mask = make_mask(3, 4, 0.5, 0)
    r = evaluate(truth, truth, mask)
    assert r.rmse == 0.0 and r.mae == 0.0 and r.n_cells == 6
    r = evaluate(truth.like(truth.values + 1), truth, mask)
    assert r.rmse == pytest.approx(1.0) and r.mae == pytest.approx(1.0)
    t2 = GridField(np.array([[10.0, 10.0]]))
    r = evaluate(GridField(np.array([[10.0, 12.0]])), t2, ObservationMask(np.zeros((1, 2), bool), 0.5, 0))
    assert r.mae == pytest.approx(1.0) and r.rmse == pytest.approx(math.sqrt(2))


def test_evaluate_uses_only_held_out_cells():
    truth = GridField(np.full((2, 2), 10.0))
    pred = truth.like(np.array([[10.0, 99.0], [10.0, 10.0]]))
    obs = np.array([[False, True], [False, False]])
    assert evaluate(pred, truth, ObservationMask(obs, 0.25, 0)).rmse == 0.0


def test_evaluate_errors():
    f = GridField(np.ones((2, 2)))
    with pytest.raises(DomainError):
        evaluate(f, f, ObservationMask(np.ones((2, 2), bool), 1.0, 0))
    with pytest.raises(ShapeError):
        evaluate(GridField(np.ones((2, 3))), f, make_mask(2, 2, 0.5, 0))


def test_mape_guard():
    m = error_metrics(np.array([11.0, 5.0]), np.array([10.0, 0.05]))
    assert m["mape"] == pytest.approx(10.0)
    assert math.isnan(error_metrics(np.array([1.0]), np.array([0.0]))["mape"])


def test_report_json_validates(rng):
    truth = GridField(rng.uniform(5, 20, (3, 5)))
    r = evaluate(truth.like(truth.values * 1.1), truth, make_mask(3, 5, 0.2, 0), {"mode": "x"})
    d = json.loads(r.to_json())
    jsonschema.validate(d, SCHEMA)
    assert d["config"] == {"mode": "x"} and "RMSE" in r.to_text()
    nan_report = EvalReport(1.0, 0.5, float("nan"), 3)
    jsonschema.validate(json.loads(nan_report.to_json()), SCHEMA)
    with pytest.raises(AssertionError):
        EvalReport(0.5, 1.0, 0.0, 3)


def test_heatmap_constant_and_two_level(tmp_path):
    img, _, _ = heatmap_pixels(GridField(np.full((3, 8), 4.0)))
    assert img.shape == (3, 8, 3) and len({tuple(p) for p in img.reshape(-1, 3)}) == 1
    two = np.zeros((4, 6))
    two[:, 3:] = 1.0
    img, _, _ = heatmap_pixels(GridField(two), scale=3)
    assert img.shape == (12, 18, 3) and len({tuple(p) for p in img.reshape(-1, 3)}) == 2


def test_heatmap_luminance_monotone():
    f = GridField(np.tile(np.linspace(0, 1, 50), (5, 1)))
    img, _, _ = heatmap_pixels(f)
    lum = img[..., 0] * 0.2126 + img[..., 1] * 0.7152 + img[..., 2] * 0.0722
    assert np.all(np.diff(lum, axis=1) >= 0)
    assert np.all(np.diff(colormap(np.linspace(0, 1, 200)).astype(float) @ [0.2126, 0.7152, 0.0722]) >= 0)


def test_heatmap_orientation_and_files(tmp_path):
    v = np.zeros((3, 4))
    v[2, :] = 1.0  # largest x
    path, side = render_heatmap(GridField(v), tmp_path / "h.ppm")
    img = read_ppm(path)
    assert img.shape == (3, 4, 3)
    assert tuple(img[0, 0]) == tuple(colormap(1.0))  # top row is x max
    assert "vmin 0" in side.read_text() and "vmax 1" in side.read_text()
    png, _ = render_heatmap(GridField(v), tmp_path / "h.png", 0.0, 2.0, scale=2)
    from PIL import Image

    assert Image.open(png).size == (8, 6)


def test_profiles(tmp_path, rng):
    f = GridField(rng.normal(size=(3, 5)), dx=30.0, dt=1.5)
    loc = extract_profile(f, "location", 0)
    np.testing.assert_array_equal(loc.values, f.values[0])
    assert loc.values.size == 5
    snap = extract_profile(f, "time", 4)
    np.testing.assert_array_equal(snap.values, f.values[:, 4])
    np.testing.assert_allclose(snap.coords, [0, 30, 60])
    g = load_grid_csv(save_grid_csv(f, tmp_path / "g.csv"))
    np.testing.assert_array_equal(extract_profile(g, "time", 2).values,
                                  extract_profile(f, "time", 2).values)
    for axis, idx in (("location", 3), ("time", -1), ("space", 0)):
        with pytest.raises(DomainError):
            extract_profile(f, axis, idx)
    out = loc.save_csv(tmp_path / "p.csv").read_text().splitlines()
    assert out[0] == "t_s,speed" and len(out) == 6
