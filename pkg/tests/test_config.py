import numpy as np
import pytest

from qhofilter.config import load, loads
from qhofilter.errors import ConfigError, InvalidSpec

CANONICAL = "configs/canonical.toml"


@pytest.fixture
def text(request):
    with open(request.config.rootpath / CANONICAL) as fh:
        return fh.read()


def _field(text):
    with pytest.raises(InvalidSpec) as info:
        loads(text)
    return info.value.field


def test_canonical_loads(text):
    cfg = loads(text)
    assert cfg.name == "canonical"
    assert not cfg.has_observer
    assert np.array_equal(cfg.observer.coupling, np.zeros((2, 2)))
    assert cfg.seeds == (0,)
    assert cfg.cost.tau == 1.0 and cfg.cost.lam == 1.0
    assert cfg.options.max_iter == 5000


def test_hash_is_stable(text):
    assert loads(text).input_hash == loads(text + "\n# comment\n").input_hash
    changed = text.replace("lam = 1.0", "lam = 2.0")
    assert loads(text).input_hash != loads(changed).input_hash


def test_nonsymmetric_energy(text):
    bad = text.replace("k_energy = [[1.0, 0.0], [0.0, 1.0]]", "k_energy = [[1.0, 0.5], [0.0, 1.0]]")
    assert _field(bad) == "plant.k_energy"


@pytest.mark.parametrize("old,new,field", [
    ("lam = 1.0", "lam = -1.0", "cost.lam"),
    ("tau = 1.0", 'tau = "one"', "cost.tau"),
    ("seeds = [0]", "seeds = []", "optimizer.seeds"),
    ("seeds = [0]", "seeds = [0]\nstep = 3", "optimizer.step"),
    ("s1 = [[1.0, 0.0], [0.0, 1.0]]", "s1 = [[1.0, 0.0], [0.0]]", "plant.s1"),
    ("sigma2 = [[1.0, 0.0], [0.0, 1.0]]", "sigma2 = [[0.1, 0.0], [0.0, 0.1]]", "observer.sigma2"),
    ("pi_weight = [[1.0, 0.0], [0.0, 1.0]]", "pi_weight = [[1.0]]", "cost.pi_weight"),
    ("[cost]", "[cost]\nextra = 1", "cost.extra"),
])
def test_field_paths(text, old, new, field):
    assert old in text
    assert _field(text.replace(old, new)) == field


def test_observer_parameters_must_come_together(text):
    half = text.replace("[cost]", "m_energy = [[1.0, 0.0], [0.0, 1.0]]\n\n[cost]")
    assert _field(half) == "observer.coupling"


def test_observer_parameters(text):
    full = text.replace("[cost]", "coupling = [[0.1, 0.0], [0.0, 0.1]]\n"
                        "m_energy = [[1.0, 0.0], [0.0, 1.0]]\n\n[cost]")
    cfg = loads(full)
    assert cfg.has_observer
    assert np.allclose(cfg.observer.coupling, 0.1 * np.eye(2))
    assert cfg.echo["observer"]["coupling"] == [[0.1, 0.0], [0.0, 0.1]]
    wrong = full.replace("coupling = [[0.1, 0.0], [0.0, 0.1]]", "coupling = [[0.1, 0.0, 0.0]]")
    assert _field(wrong).startswith("observer")


def test_numeric_overrides(text):
    cfg = loads(text + "\n[numeric]\nquad_tol = 1e-8\nmax_moment_terms = 1000\n")
    assert cfg.policy.quad_tol == 1e-8 and cfg.quad.tol == 1e-8
    assert cfg.policy.max_moment_terms == 1000
    assert _field(text + "\n[numeric]\nfoo = 1.0\n") == "numeric.foo"


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        loads("[plant\n")
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.toml")
    with pytest.raises(InvalidSpec) as info:
        loads("")
    assert info.value.field == "plant"
