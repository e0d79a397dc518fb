import math
import textwrap

import pytest

from deltasurf.cli import main, memory_estimate, parse_config, run, validate
from deltasurf.errors import ConfigError, PipelineError
from deltasurf.io import read_csv

PLANE = """
[surface]
family = plane
[grid]
L = 10
ds = 0.25
[patch]
L = 4
ds = 0.2
[sweep]
alphas = 10
[pipelines]
squeeze = no
variational = no
"""


def cfg_from(text, tmp_path):
    cfg = parse_config(textwrap.dedent(text))
    cfg.output_dir = tmp_path
    return cfg


def test_plane_run_reports_no_discrete_spectrum(tmp_path, capsys):
    path = tmp_path / "plane.ini"
    path.write_text(PLANE + f"[output]\ndir = {tmp_path / 'out'}\n")
    assert main([str(path)]) == 0
    report = (tmp_path / "out" / "report.txt").read_text()
    assert "no discrete spectrum certified" in report
    assert "sandwich inclusion: PASS" in report
    assert "overall: PASS" in capsys.readouterr().out
    for name in ("geometry.csv", "spectrum_S.csv", "bracket.csv", "bs.csv"):
        table, _ = read_csv(tmp_path / "out" / name)
        assert table == name[:-4].replace("spectrum_S", "spectrum")


def test_bump_bracket_contains_direct(tmp_path):
    cfg = cfg_from(
        """
        [surface]
        family = gaussian
        [grid]
        ds = 0.05
        [patch]
        L = 6
        ds = 0.1
        [sweep]
        alphas = 60
        [pipelines]
        geometry = no
        comparison = no
        squeeze = no
        variational = no
        """,
        tmp_path,
    )
    assert run(cfg) == 0
    _, cols = read_csv(tmp_path / "bracket.csv")
    lo, up, direct, tol = (float(cols[k][0]) for k in ("lower", "upper", "direct", "tol"))
    assert lo - tol <= direct <= up + tol


def test_under_resolved_grid_warns_and_runs(tmp_path):
    text = """
        [surface]
        family = gaussian
        [grid]
        ds = 1.0
        [pipelines]
        comparison = no
        bracketing = no
        bs = no
        squeeze = no
        variational = no
        """
    with pytest.warns(UserWarning, match="under-resolved"):
        cfg = cfg_from(text, tmp_path)
    assert run(cfg) == 0
    assert (tmp_path / "geometry.csv").exists()


def test_validate_flags_dropped_point():
    # d(5) = 6 log 5 / 5 = 1.93 exceeds rho = 1 of the unit bump
    cfg = parse_config("[surface]\nfamily = gaussian\n[grid]\nds = 0.05\n[sweep]\nalphas = 5, 50\n")
    msgs = [str(d) for d in validate(cfg)]
    dropped = [m for m in msgs if "will be dropped" in m]
    assert len(dropped) == 1 and "alpha = 5:" in dropped[0]
    assert f"{6 * math.log(5) / 5:.6g}" in dropped[0]


def test_validate_empty_sweep():
    cfg = parse_config(
        "[surface]\nfamily = plane\n[pipelines]\ngeometry = no\ncomparison = no\nsqueeze = no\nvariational = no\n"
    )
    assert any("nothing to run" in str(d) for d in validate(cfg))


def test_validate_large_grid_memory():
    cfg = parse_config("[surface]\nfamily = plane\n[grid]\nL = 1000\nds = 1.0\n[sweep]\nalphas = 50\n")
    assert any(d.level == "warning" and "over the" in d.message for d in validate(cfg))
    assert memory_estimate(2001**2) > 4 * 2**30


@pytest.mark.parametrize(
    "text,key",
    [
        ("[surface]\nfamily = torus\n", "surface.family"),
        ("[surface]\nfamily = plane\n[grid]\nds = -1\n", "grid.ds"),
        ("[surface]\nfamily = plane\n[grid]\nfoo = 1\n", "grid.foo"),
        ("[surface]\nfamily = plane\n[solver]\neig_tol = 0\n", "solver.eig_tol"),
        ("[surface]\nfamily = graph\nf = __import__('os')\n", "surface.f"),
        ("[surface]\nfamily = plane\n[pipelines]\nbs = maybe\n", "pipelines.bs"),
        ("[bogus]\n", "bogus"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        cfg = parse_config(text)
        from deltasurf.cli import build_model

        build_model(cfg.surface)
    assert key in str(err.value)


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[surface]\nfamily = torus\n")
    assert main([str(bad)]) == 2
    assert "surface.family" in capsys.readouterr().err
    small = tmp_path / "small.ini"
    small.write_text("[surface]\nfamily = gaussian\n[grid]\nL = 5\nds = 0.05\n[pipelines]\nsqueeze = no\n")
    assert main([str(small), "--output-dir", str(tmp_path / "o")]) == 3


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"c{k}.ini"
        path.write_text(PLANE + f"[output]\ndir = {tmp_path / str(k)}\n")
        assert main([str(path), "--seed", "7"]) == 0
        outs.append(tmp_path / str(k))
    for name in ("geometry.csv", "spectrum_S.csv", "bracket.csv", "bs.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
