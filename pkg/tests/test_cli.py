import csv

import numpy as np
import pytest

from dgopt.cli import main
from dgopt.core import ConvergenceTrace
from dgopt.experiments import (ConfigError, ExperimentConfig, PRESETS,
                               fit_rate, load_config, parse_config)
from dgopt.imaging import load_image, phantom, save_image


def test_parse_config_types():
    vals = parse_config("""
        # comment
        tau = 1e-3
        max_sweeps = 20
        area_weighted = yes
        input = none
        regularizer = tv_eps   # trailing comment
    """)
    assert vals == {"tau": 1e-3, "max_sweeps": 20, "area_weighted": True,
                    "input": None, "regularizer": "tv_eps"}
    with pytest.raises(ConfigError):
        parse_config("colour = red")
    with pytest.raises(ConfigError):
        parse_config("tau 3")
    with pytest.raises(ConfigError):
        parse_config("max_sweeps = many")


def test_presets_validate():
    for name in PRESETS:
        cfg = load_config(preset=name)
        assert isinstance(cfg, ExperimentConfig)
    with pytest.raises(ConfigError):
        load_config(preset="nope")
    with pytest.raises(ConfigError):
        load_config(overrides={"tau": -1.0})
    with pytest.raises(ConfigError):
        load_config(overrides={"input": "/no/such/file.pgm"})


def test_denoise_end_to_end(tmp_path):
    img = tmp_path / "in.pgm"
    save_image(phantom(16), img)
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("regularizer = elastica\na = 0.05\nb = 0.05\n"
                       "sigma = 0\nmax_sweeps = 20\ntau = 0.01\n")
    out, trace, res = tmp_path / "out.pgm", tmp_path / "t.csv", tmp_path / "r.txt"
    code = main(["denoise", "--config", str(cfgfile), "--input", str(img),
                 "--output", str(out), "--trace", str(trace),
                 "--results", str(res), "--seed", "3"])
    assert code == 0
    assert load_image(out).shape == (16, 16)
    tr = ConvergenceTrace.from_csv(trace)
    assert np.all(np.diff(tr.energies) <= 0)
    line = res.read_text().strip()
    assert line.startswith("run=denoise,psnr=")
    psnr = float(line.split("psnr=")[1].split(",")[0])
    assert psnr > 30


def test_denoise_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"o{k}.pgm"
        assert main(["denoise", "--preset", "denoise-impulse", "--seed", "4",
                     "--set", "size=16", "--set", "max_sweeps=5",
                     "--output", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_inpaint_and_workers(tmp_path):
    p = tmp_path / "o.pgm"
    assert main(["inpaint", "--preset", "inpaint-random", "--workers", "2",
                 "--set", "size=16", "--set", "max_sweeps=3",
                 "--set", "solver=dg-parallel", "--set", "blocks_x=2",
                 "--set", "loss=0.5", "--output", str(p),
                 "--trace", str(tmp_path / "t.csv")]) == 0
    meta = (tmp_path / "t.csv.json").read_text()
    assert '"workers": 2' in meta


def test_scaling_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["scaling", "--preset", "scaling", "--set", "resolutions=3,4",
                 "--set", "sweeps_base=150", "--output", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["m", "n", "rate", "predicted_rate"]
    assert [r[0] for r in rows[1:]] == ["3", "4"]
    assert float(rows[1][3]) == pytest.approx(4 * float(rows[2][3]))


def test_orderings_and_compare(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["orderings", "--preset", "orderings", "--set", "size=16",
                 "--set", "max_sweeps=30", "--set", "reference_sweeps=60",
                 "--output", str(out)]) == 0
    header = next(csv.reader(out.open()))
    assert header == ["sweep", "natural", "red_black", "random", "block"]
    out = tmp_path / "c.csv"
    assert main(["compare", "--preset", "compare", "--set", "size=16",
                 "--set", "max_sweeps=20", "--output", str(out)]) == 0
    solvers = [r["solver"] for r in csv.DictReader(out.open())]
    assert solvers == ["dg", "dg-adapt", "gd", "heavy-ball"]


def test_bad_input_exit_code(tmp_path, capsys):
    assert main(["denoise", "--input", str(tmp_path / "missing.pgm")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("solver = newton\n")
    assert main(["denoise", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_init_options(tmp_path):
    init = tmp_path / "init.pgm"
    save_image(phantom(16), init)
    for extra in (["--init", "random"], ["--init", "unicolor"],
                  ["--init", "file", "--init-file", str(init)]):
        assert main(["denoise", "--set", "size=16", "--set", "max_sweeps=2",
                     "--set", "tau=0.001"] + extra) == 0


def test_fit_rate():
    k = np.arange(200)
    rate, ok = fit_rate(3.0 * np.exp(-0.05 * k))
    assert rate == pytest.approx(0.05) and ok
    rate, ok = fit_rate(np.ones(2))
    assert not ok
