import dataclasses
import math

import pytest

from fracocp.config import ConfigError, RunConfig, dump_config, load_config, parse_config

MINIMAL = """\
[problem]
domain = unit-interval
s = 0.3

[afem]
max_cycles = 3
C_Tr = inf
"""


def test_defaults_and_values():
    cfg = parse_config(MINIMAL)
    assert cfg.domain == "unit-interval" and cfg.s == 0.3 and cfg.max_cycles == 3
    assert math.isinf(cfg.C_Tr)
    assert cfg.theta == 0.5 and cfg.a == 0.1 and cfg.b == 0.3


def test_afem_config_subset():
    cfg = parse_config(MINIMAL)
    afem = cfg.afem_config()
    assert afem.s == 0.3 and not hasattr(afem, "output_dir")


@pytest.mark.parametrize("cfg", [RunConfig(), RunConfig(s=0.1 + 0.2, theta=1 / 3, mu=1e-7,
                                                        C_Tr=math.inf, export_vtk=False,
                                                        optimizer="projected-bfgs", seed=9)])
def test_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg


def test_section_free_keys():
    assert parse_config("[output]\ns = 0.25\n").s == 0.25


@pytest.mark.parametrize("text,line,word", [
    ("[problem]\n\ns = 1.2\n", 3, "s must lie"),
    ("[problem]\ns = 0.5\nbogus = 1\n", 3, "unknown key"),
    ("[afem]\ntheta = 0.5\nmax_cycles = 2.5\n", 3, "integer"),
    ("[problem]\na = 0.5\nb = 0.1\n", 2, "out of order"),
    ("[solver]\nopt_tol = abc\n", 2, "opt_tol"),
    ("[output]\nexport_vtk = maybe\n", 2, "boolean"),
    ("[problem]\ns = 0.5\n[afem]\ns = 0.4\n", 4, "twice"),
])
def test_errors_are_line_anchored(text, line, word):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "cfg.ini")
    msg = str(err.value)
    assert msg.startswith(f"cfg.ini:{line}:") and word in msg


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("s = 0.5\n")


def test_load_resolves_output_dir(tmp_path):
    (tmp_path / "c.ini").write_text("[output]\noutput_dir = out\n")
    assert load_config(tmp_path / "c.ini").output_dir == str(tmp_path / "out")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_every_field_dumped():
    text = dump_config(RunConfig())
    for f in dataclasses.fields(RunConfig):
        assert f"\n{f.name} = " in "\n" + text
