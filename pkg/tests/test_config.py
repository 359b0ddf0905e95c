import pytest
from hypothesis import given, settings, strategies as st

from skewfatou.config import PARAMS, SEED_ENV, ConfigError, ExperimentConfig, parse_complex


def test_roundtrip_every_kind():
    for kind in PARAMS:
        cfg = ExperimentConfig(kind, {}, seed=5, output="out", threads=2)
        back = ExperimentConfig.from_text(cfg.to_text())
        assert back == cfg
        cfg.validate()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 10 ** 6), st.floats(1e-300, 1e300))
def test_roundtrip_values(seed, steps, radius):
    cfg = ExperimentConfig("orbit", {"steps": str(steps), "classify_radius": repr(radius)}, seed=seed)
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg and back.get("steps") == steps and back.get("classify_radius") == radius


def test_unknown_keys_rejected_with_line():
    text = "[experiment]\nkind = orbit\n\n[params]\nsteps = 3\nbogus = 1\n"
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_text(text)
    assert info.value.line == 6
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[experiment]\nkind = orbit\ncolour = red\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[experiment]\nkind = nope\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[other]\nx = 1\n[experiment]\nkind = orbit\n")
    with pytest.raises(ConfigError):
        ExperimentConfig("orbit", {"bogus": "1"})


def test_malformed_line_reports_line():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_text("[experiment]\nkind = orbit\nthis line is broken\n")
    assert info.value.line == 3


def test_bad_expression_reports_column():
    cfg = ExperimentConfig("orbit", {"f": "z^+"})
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    assert info.value.column == 3


def test_overrides_beat_file():
    text = "[experiment]\nkind = orbit\nseed = 1\n[params]\nsteps = 3\n"
    cfg = ExperimentConfig.from_text(text, {"steps": "7", "seed": 9})
    assert cfg.get("steps") == 7 and cfg.seed == 9


def test_seed_environment(monkeypatch):
    cfg = ExperimentConfig("runge-build", {}, seed=3)
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert cfg.effective_seed() == 3
    monkeypatch.setenv(SEED_ENV, "42")
    assert cfg.effective_seed() == 42
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(ConfigError):
        cfg.effective_seed()


def test_parse_complex():
    assert parse_complex("2*pi*i") == pytest.approx(6.283185307179586j)
    assert parse_complex("-0.5+2i") == complex(-0.5, 2)
    with pytest.raises(ValueError):
        parse_complex("z")
