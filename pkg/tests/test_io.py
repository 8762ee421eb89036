import numpy as np
import pytest

from rwmlab.io import read_chain, write_adaptation, write_chain, write_snapshots
from rwmlab.samplers import ChainOutput


def _adaptive_chain():
    n = 250
    rng = np.random.default_rng(0)
    acc = rng.random((n, 1)) < 0.3
    return ChainOutput(
        "BlkAdpMul", rng.normal(size=(n, 2)) * 1e-7 + 1 / 3, rng.normal(size=n), acc, n, 50, ["a", "b"],
        adapt_m=np.linspace(1, 2, n), adapt_branch=np.ones(n, bool),
        sigma_snapshots=[(100, np.eye(2)), (200, 2 * np.eye(2))],
    )


def test_chain_round_trip_is_exact(tmp_path):
    out = _adaptive_chain()
    write_chain(tmp_path / "c.csv", out)
    names, samples, logpost, acc = read_chain(tmp_path / "c.csv")
    assert names == ["a", "b"]
    assert np.array_equal(samples, out.samples) and np.array_equal(logpost, out.logpost)
    assert np.array_equal(acc, out.accepted[:, 0].astype(int))
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "iter,a,b,logpost,accepted_blocks"


def test_adaptation_sidecar(tmp_path):
    out = _adaptive_chain()
    write_adaptation(tmp_path / "a.csv", out)
    rows = (tmp_path / "a.csv").read_text().splitlines()
    assert rows[0] == "iter,m,sigma_snapshot_id"
    assert rows[99].endswith(",-1") and rows[100].endswith(",0") and rows[200].endswith(",1")
    write_snapshots(tmp_path / "s.csv", out)
    snap = (tmp_path / "s.csv").read_text().splitlines()
    assert snap[0] == "id,iter,s11,s12,s21,s22" and snap[2] == "1,200,2.0,0.0,0.0,2.0"


def test_read_chain_rejects_other_files(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_chain(tmp_path / "x.csv")
