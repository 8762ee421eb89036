"""Named MMPP configurations used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mmpp import EventData, MmppParams, simulate


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    d: int
    psi: tuple
    q: tuple  # off-diagonal rates, row-major
    t_obs: float
    seed: int

    def __post_init__(self):
        self.params()  # validates

    def params(self) -> MmppParams:
        d = self.d
        if len(self.psi) != d or len(self.q) != d * (d - 1):
            raise ValueError(f"dataset {self.name}: wrong number of rates for d={d}")
        q = np.zeros((d, d))
        q[~np.eye(d, dtype=bool)] = self.q
        np.fill_diagonal(q, -q.sum(axis=1))
        return MmppParams(np.array(self.psi, dtype=float), q)

    def truth(self) -> np.ndarray:
        """Parameter vector (psi..., off-diagonal q...)."""
        return self.params().to_vector()

    def expected_events(self) -> float:
        p = self.params()
        return float(p.stationary() @ p.psi) * self.t_obs

    def simulate(self, seed=None) -> EventData:
        return simulate(self.params(), self.t_obs, self.seed if seed is None else seed)


DATASETS = {
    "D1": DatasetSpec("D1", 2, (10.0, 30.0), (1.0, 1.0), 100.0, 1),
    "D2": DatasetSpec("D2", 2, (10.0, 17.0), (1.0, 1.0), 100.0, 2),
    "D3": DatasetSpec("D3", 3, (10.0, 17.0, 30.0), (0.5,) * 6, 100.0, 3),
}


def get_dataset(name: str) -> DatasetSpec:
    try:
        return DATASETS[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(DATASETS)}") from None


def parse_inline_spec(text: str, name: str = "inline") -> DatasetSpec:
    """Parse ``psi=10,30;q=1,1;t_obs=100[;seed=5]`` into a DatasetSpec.

    ``q`` lists the off-diagonal generator entries row by row.
    """
    fields = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"bad inline spec component {part!r}")
        fields[key.strip()] = val.strip()
    missing = {"psi", "q"} - fields.keys()
    if missing:
        raise ValueError(f"inline spec is missing {sorted(missing)}")
    psi = tuple(float(v) for v in fields["psi"].split(","))
    q = tuple(float(v) for v in fields["q"].split(","))
    return DatasetSpec(
        name=name,
        d=len(psi),
        psi=psi,
        q=q,
        t_obs=float(fields.get("t_obs", 100.0)),
        seed=int(fields.get("seed", 0)),
    )
