import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pivotal_relabel.chain_store import (
    ChainFormatError,
    Dataset,
    MixtureChain,
    load_chain,
    load_dataset,
    save_chain,
    save_dataset,
    validate_chain,
)

from _chains import random_chain, random_perms


def _write(path, header, records):
    lines = [json.dumps(header)] + [json.dumps(r) for r in records]
    path.write_text("\n".join(lines) + "\n")


def test_load_minimal_file(tmp_path):
    p = tmp_path / "c.ndjson"
    _write(p, {"n": 3, "G": 2, "d": 1, "H": 2}, [
        {"iter": 1, "z": [1, 1, 2], "mu": [[0.0], [1.0]], "pi": [0.5, 0.5]},
        {"iter": 2, "z": [2, 1, 2], "mu": [[0.1], [1.1]], "pi": [0.3, 0.7]},
    ])
    chain = load_chain(p)
    assert chain.H == 2 and chain.n == 3 and chain.G == 2 and chain.d == 1
    assert chain.phi is None


def test_label_out_of_range(tmp_path):
    p = tmp_path / "c.ndjson"
    _write(p, {"n": 3, "G": 2, "d": 1, "H": 1}, [
        {"iter": 1, "z": [1, 3, 2], "mu": [[0.0], [1.0]], "pi": [0.5, 0.5]},
    ])
    with pytest.raises(ChainFormatError, match="label out of range"):
        load_chain(p)


@pytest.mark.parametrize("record, field", [
    ({"iter": 1, "z": [1, 2], "mu": [[0.0], [1.0]], "pi": [0.5, 0.5]}, "z"),
    ({"iter": 1, "z": [1, 1, 2], "mu": [[0.0]], "pi": [0.5, 0.5]}, "mu"),
    ({"iter": 1, "z": [1, 1, 2], "mu": [[0.0], [1.0]], "pi": [0.5, 0.5, 0.0]}, "pi"),
    ({"iter": 2, "z": [1, 1, 2], "mu": [[0.0], [1.0]], "pi": [0.5, 0.5]}, "iter"),
])
def test_schema_errors_name_field(tmp_path, record, field):
    p = tmp_path / "c.ndjson"
    _write(p, {"n": 3, "G": 2, "d": 1, "H": 1}, [record])
    with pytest.raises(ChainFormatError, match=field):
        load_chain(p)


def test_non_finite_rejected(tmp_path):
    p = tmp_path / "c.ndjson"
    p.write_text('{"n": 1, "G": 1, "d": 1, "H": 1}\n'
                 '{"iter": 1, "z": [1], "mu": [[NaN]], "pi": [1.0]}\n')
    with pytest.raises(ChainFormatError, match="non-finite"):
        load_chain(p)


def test_single_iteration_file_layout(tmp_path):
    rng = np.random.default_rng(0)
    chain = random_chain(rng, H=1, n=4, G=2)
    p = tmp_path / "c.ndjson"
    save_chain(chain, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2
    assert "phi" not in json.loads(lines[1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), H=st.integers(1, 30), n=st.integers(1, 12),
       G=st.integers(1, 5), d=st.integers(1, 3),
       phi=st.sampled_from([None, "shared", "component"]))
def test_round_trip(tmp_path_factory, seed, H, n, G, d, phi):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, H=H, n=n, G=G, d=d, phi=phi)
    p = tmp_path_factory.mktemp("rt") / "c.ndjson"
    save_chain(chain, p)
    assert load_chain(p).equals(chain)


def test_round_trip_long_chain(tmp_path):
    rng = np.random.default_rng(1)
    chain = random_chain(rng, H=1000, n=20, G=4, d=2, phi="component")
    p = tmp_path / "c.ndjson"
    save_chain(chain, p)
    again = load_chain(p)
    assert again.equals(chain)
    p2 = tmp_path / "c2.ndjson"
    save_chain(again, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_validate_valid_chain():
    chain = random_chain(np.random.default_rng(2), H=5, n=6, G=3)
    assert validate_chain(chain) == []


def test_validate_bad_pi_row():
    z = np.array([[1, 2], [1, 2]])
    pi = np.array([[0.5, 0.5], [0.5, 0.4]])
    chain = MixtureChain(z=z, mu=np.zeros((2, 2, 1)), pi=pi)
    problems = validate_chain(chain)
    assert len(problems) == 1
    assert "h=1" in problems[0] and "pi" in problems[0]


def test_validate_zero_label():
    z = np.array([[1, 2, 0]])
    chain = MixtureChain(z=z, mu=np.zeros((1, 2, 1)), pi=np.array([[0.5, 0.5]]))
    problems = validate_chain(chain)
    assert len(problems) == 1
    assert "h=0" in problems[0] and "i=2" in problems[0]


def test_validate_unit_count_mismatch():
    chain = random_chain(np.random.default_rng(3), H=2, n=4, G=2)
    assert validate_chain(chain, n=5)


def test_chain_is_immutable():
    chain = random_chain(np.random.default_rng(4), H=2, n=3, G=2)
    with pytest.raises(ValueError):
        chain.z[0, 0] = 2


def test_permute_labels_moves_everything_together():
    rng = np.random.default_rng(5)
    chain = random_chain(rng, H=10, n=7, G=3, d=2, phi="component")
    perms = random_perms(rng, 10, 3)
    out = chain.permute_labels(perms)
    for h in range(10):
        for k in range(3):
            new = perms[h, k]
            assert np.array_equal(out.mu[h, new], chain.mu[h, k])
            assert out.pi[h, new] == chain.pi[h, k]
            assert out.phi[h, new] == chain.phi[h, k]
        assert np.array_equal(out.z[h], perms[h][chain.z[h] - 1] + 1)
    inv = np.argsort(perms, axis=1)
    assert out.permute_labels(inv).equals(chain)


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    data = Dataset(rng.normal(size=(15, 2)))
    labels = rng.integers(1, 4, size=15)
    p = tmp_path / "d.csv"
    save_dataset(data, p, labels)
    back, lab = load_dataset(p)
    assert np.array_equal(back.observations, data.observations)
    assert np.array_equal(lab, labels)
    save_dataset(data, p)
    back, lab = load_dataset(p)
    assert lab is None and np.array_equal(back.observations, data.observations)


def test_dataset_rejects_nan():
    with pytest.raises(ValueError):
        Dataset(np.array([1.0, np.nan]))
