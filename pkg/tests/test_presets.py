import pytest

from strongld.config import config_from_preset
from strongld.presets import PRESETS, format_table, get_preset, list_presets

EXPECTED_TAGS = (
    ["Fig.2", "Fig.3", "Fig.4", "Fig.5a", "Fig.5b", "Fig.6a", "Fig.6b"]
    + [f"Fig.{n}" for n in range(9, 31)]
    + ["Fig.31a", "Fig.31b", "Fig.32", "Fig.33a", "Fig.33b", "Fig.34", "Fig.36"]
    + [f"Fig.{n}" for n in range(37, 43)]
    + [f"Fig.{n}" for n in range(52, 61)]
)


def test_every_tag_present():
    assert sorted(EXPECTED_TAGS) == sorted(PRESETS)


def test_tags_unique_and_ordered():
    tags = [p.tag for p in list_presets()]
    assert len(tags) == len(set(tags))
    assert tags[0] == "Fig.2"


@pytest.mark.parametrize("tag,model,params", [
    ("Fig.3", "cubic", dict(a=1, b=1, A=0.3, omega=5)),
    ("Fig.14", "cubic", dict(b=2, A=7, omega=10)),
    ("Fig.17", "double_well", dict(A=0.3, x0=-0.1)),
    ("Fig.31b", "double_well", dict(b=2, c=5, A=4)),
    ("Fig.33b", "double_well", dict(A=0.5, B=0.3, omega=2, theta=20)),
    ("Fig.41", "double_well", dict(c=2, A=3, B=1, omega=2, theta=10)),
])
def test_parameters(tag, model, params):
    p = get_preset(tag)
    assert p.model == model
    for k, v in params.items():
        assert p.params[k] == v


def test_noise_presets():
    for tag, D, seed in [("Fig.53", 1e-3, 52), ("Fig.56", 1e-2, 55), ("Fig.59", 1e-2, 58)]:
        p = get_preset(tag)
        assert p.D == D and p.wiener_seed == seed
    assert all(p.D == 0 for p in list_presets() if p.wiener_seed is None)


def test_every_preset_gives_valid_config():
    for p in list_presets():
        cfg = config_from_preset(p.tag)
        assert cfg.tag == p.tag and cfg.x0 == (p.params["x0"],)


def test_table_lists_all():
    lines = format_table().splitlines()
    assert lines[0].split()[:3] == ["tag", "model", "role"]
    assert len(lines) == 1 + len(PRESETS)


def test_unknown_tag():
    with pytest.raises(KeyError, match="unknown preset"):
        get_preset("Fig.1")
