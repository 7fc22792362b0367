import pytest

from phlo.config import KNOWN_KEYS, ConfigError, default_config, default_config_text, load_config, parse_config


def test_default_config():
    cfg = default_config()
    s = cfg.solution
    assert (s.eps, s.kappa, s.l0, s.r0, s.a, s.b, s.gamma) == (-1, 1, 0.25, 0.5, 1.0, 1.0, 1.0)
    assert (cfg.nx, cfg.ny, cfg.nz, cfg.provider, cfg.seed, cfg.probes) == (64, 64, 64, "dual", 0, 1000)
    assert cfg.box is None
    echo = dict(cfg.echo())
    assert echo["lambda"] == 1.0 and echo["grid"] == "64,64,64"


def test_every_shipped_key_is_known():
    for line in default_config_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            assert line.split("=")[0].strip() in KNOWN_KEYS


def test_overrides_and_box():
    text = "epsilon = 1\nkappa=-1\nl0 = 0.5\nphase_family = psi2\nu_expr = sin(x)\n" + "\n".join(
        f"box.{ax}{end} = {v}" for ax in "xyz" for end, v in (("min", -1), ("max", 1))
    )
    cfg = parse_config(text)
    assert cfg.solution.eps == 1 and cfg.solution.kappa == -1 and cfg.solution.lam == 2.0
    assert cfg.solution.phase_family == "psi2" and cfg.u_expr == "sin(x)"
    assert cfg.box == ((-1.0, 1.0),) * 3


@pytest.mark.parametrize(
    "text, message",
    [
        ("colour = red", "unknown key"),
        ("kappa = 1\nkappa = -1", "duplicate key"),
        ("lambda = 2", "derived"),
        ("l0 = big", "expects float"),
        ("kappa = 0.5", "expects int"),
        ("epsilon = 2", "epsilon"),
        ("box.xmin = 0", "incomplete box"),
        ("grid.nx = 1", "at least 2"),
        ("provider = symbolic", "provider"),
        ("fd_step = 0", "fd_step"),
        ("phase_family = psi9", "phase_family"),
        ("just words", "key = value"),
        ("l0 = inf", "expects float"),
    ],
)
def test_rejected_configs(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.conf")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# comment\n\ngamma = 2\n")
    assert load_config(path).solution.gamma == 2.0
