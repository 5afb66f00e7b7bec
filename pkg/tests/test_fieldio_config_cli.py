import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab import fieldio
from nlslab.cli import OUTPUTS, main
from nlslab.config import ConfigError, RunConfig, load_config, parse_config_text
from nlslab.grid import ComplexPair, RealPair, make_grid

SMALL = ["--N", "256"]


# ---- fieldio

@settings(max_examples=20, deadline=None)
@given(st.integers(4, 9), st.floats(1.0, 50.0), st.booleans(), st.integers(0, 2**31 - 1))
def test_field_roundtrip_is_bit_exact(logN, L, cplx, seed):
    g = make_grid(L, 2**logN)
    r = np.random.default_rng(seed)
    if cplx:
        F = ComplexPair(g, r.standard_normal(g.N) + 1j * r.standard_normal(g.N), r.standard_normal(g.N) * 1j)
    else:
        F = RealPair(g, r.standard_normal(g.N), r.standard_normal(g.N))
    G = fieldio.loads(fieldio.dumps(F))
    assert type(G) is type(F) and G.grid == F.grid
    for a, b in zip(F.components, G.components):
        assert np.array_equal(a, b)


def test_field_format_errors():
    g = make_grid(20, 16)
    buf = fieldio.dumps(RealPair(g, np.ones(16), np.zeros(16)))
    with pytest.raises(fieldio.FieldFormatError):
        fieldio.loads(buf[:10])
    with pytest.raises(fieldio.FieldFormatError):
        fieldio.loads(b"XXXX" + buf[4:])
    with pytest.raises(fieldio.FieldFormatError):
        fieldio.loads(buf[:-8])


def test_field_files(tmp_path, Z2):
    fieldio.write_field(tmp_path / "z.nls1", Z2)
    assert np.array_equal(fieldio.read_field(tmp_path / "z.nls1").u1, Z2.u1)
    fieldio.write_csv(tmp_path / "z.csv", Z2, header_lines=["hello"])
    lines = (tmp_path / "z.csv").read_text().splitlines()
    assert lines[0] == "# hello" and lines[1] == "x,u1,u2" and len(lines) == 2 + Z2.grid.N
    fieldio.write_csv(tmp_path / "c.csv", Z2.to_complex())
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "x,re1,im1,re2,im2"


# ---- config

def test_config_defaults(tmp_path):
    f = tmp_path / "empty.cfg"
    f.write_text("")
    cfg = load_config(f)
    assert (cfg.p, cfg.beta, cfg.L, cfg.N, cfg.dt, cfg.T) == (1.0, 2.0, 20.0, 1024, 1e-3, 10.0)
    assert cfg == RunConfig()


def test_config_precedence(tmp_path):
    f = tmp_path / "a.cfg"
    f.write_text("# comment\np = 1.5   # trailing\nN = 512\n")
    cfg = load_config(f, {"p": 1.0, "beta": None})
    assert cfg.p == 1.0 and cfg.N == 512 and cfg.beta == 2.0


@pytest.mark.parametrize("text,msg", [("beta = -1", "beta"), ("bogus = 3", ":1: unknown key"),
                                       ("\np 1", ":2: expected"), ("N = 1.5", "N"),
                                       ("N = 1000", "power of two"), ("dt =", "missing"),
                                       ("samples = 0", "samples")])
def test_config_errors(tmp_path, text, msg):
    f = tmp_path / "bad.cfg"
    f.write_text(text)
    with pytest.raises(ConfigError, match=msg):
        load_config(f)


def test_parse_config_text_casts():
    d = parse_config_text("N = 2048\nseed = 3\nout = here\nK = 4")
    assert d == {"N": 2048, "seed": 3, "out": "here", "K": 4.0}
    assert isinstance(d["N"], int)


# ---- cli

def _json(path):
    return json.loads(path.read_text())


def test_gs_command(tmp_path, capsys):
    assert main(["gs", "--p", "1", "--beta", "3", "--out", str(tmp_path), "--N", "512"]) == 0
    doc = _json(tmp_path / "gs.json")
    assert doc["config"]["beta"] == 3.0 and doc["command"] == "gs"
    assert doc["result"]["residual_norm"] < 1e-9
    assert "residual" in capsys.readouterr().out
    assert fieldio.read_field(tmp_path / "gs.nls1").grid.N == 512
    assert (tmp_path / "gs.csv").read_text().startswith("# config ")


def test_spectrum_command(tmp_path):
    assert main(["spectrum", "--p", "1", "--beta", "2", "--k", "6", "--out", str(tmp_path)] + SMALL) == 0
    res = _json(tmp_path / "spectrum.json")["result"]
    assert res["kernel_dim"] == 1 and len(res["eigenvalues"]) == 6


def test_describe_output(capsys):
    for cmd in OUTPUTS:
        assert main([cmd, "--describe-output"]) == 0
        assert capsys.readouterr().out.strip() == OUTPUTS[cmd]


def test_exit_codes(tmp_path, capsys):
    assert main(["nonsense"]) == 2
    assert main([]) == 2
    assert main(["gs", "--beta", "-1", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("wat = 1\n")
    assert main(["gs", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["gs", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["gs", "--jobs", "0", "--out", str(tmp_path)]) == 2
    # Newton capped at one iteration from the perturbed start fails as an experiment
    assert main(["gs", "--method", "newton", "--max-iter", "1", "--tol", "1e-14",
                 "--out", str(tmp_path)] + SMALL) == 1
    capsys.readouterr()


def test_output_directory_precedence(tmp_path, monkeypatch):
    cfgf = tmp_path / "c.cfg"
    cfgf.write_text(f"out = {tmp_path / 'from_file'}\nN = 256\n")
    assert main(["gs", "--config", str(cfgf)]) == 0
    assert (tmp_path / "from_file" / "gs.json").exists()
    monkeypatch.setenv("NLSLAB_OUT", str(tmp_path / "from_env"))
    assert main(["gs", "--config", str(cfgf)]) == 0
    assert (tmp_path / "from_env" / "gs.json").exists()
    assert main(["gs", "--config", str(cfgf), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "gs.json").exists()


def test_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        args = ["convexity-scan", "--samples", "6", "--seed", "2", "--out", str(d)] + SMALL
        assert main(args) == 0
        outs.append(d)
    for f in ("convexity.csv", "convexity.json"):
        a = (outs[0] / f).read_bytes()
        b = (outs[1] / f).read_bytes()
        assert a.replace(b"/a", b"/b") == b


def test_jobs_do_not_change_results(tmp_path):
    base = ["convexity-scan", "--samples", "6", "--seed", "2"] + SMALL
    assert main(base + ["--out", str(tmp_path / "s")]) == 0
    assert main(base + ["--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    rows = [(tmp_path / d / "convexity.csv").read_text().splitlines()[1:] for d in ("s", "p")]
    assert rows[0] == rows[1]


@pytest.mark.parametrize("cmd", [["distance"], ["nehari", "--samples", "10", "--resolution", "200", "--N", "512"],
                                 ["evolve", "--T", "0.1", "--dt", "1e-2", "--initial", "gaussian"],
                                 ["stability", "--T", "0.1", "--dt", "1e-3"],
                                 ["coercivity", "--no-fit"]])
def test_other_commands_run(tmp_path, cmd, capsys):
    args = cmd if "--N" in cmd else cmd + ["--N", "128"]
    assert main(args + ["--out", str(tmp_path)]) == 0
    files = list(tmp_path.iterdir())
    assert files
    for f in files:
        if f.suffix == ".json":
            assert "config" in _json(f)
        elif f.suffix == ".csv":
            assert f.read_text().startswith("# config")
    assert capsys.readouterr().out.count("\n") >= 1


def test_evolve_from_field_file(tmp_path, small_grid):
    from nlslab.ground_state import synthesized_ground_state
    from nlslab.grid import Params
    Z = synthesized_ground_state(Params(1.0, 2.0), small_grid).profile
    fieldio.write_field(tmp_path / "init.nls1", Z)
    assert main(["evolve", "--initial", str(tmp_path / "init.nls1"), "--T", "0.01", "--dt", "1e-3",
                 "--N", "256", "--out", str(tmp_path)]) == 0
    final = fieldio.read_field(tmp_path / "final.nls1")
    assert isinstance(final, ComplexPair)
