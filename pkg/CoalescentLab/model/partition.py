"""Mass partitions, coalescent trajectories and tagged fragmentation samples."""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

TOTAL_SLACK = 1e-12
NORMALIZED_TOL = 1e-9


class MassPartition:
    """Nonincreasing sequence of positive masses with total at most one."""

    def __init__(self, masses: Sequence[float], sort: bool = True):
        values = np.asarray(masses, dtype=float).ravel()
        if values.size and not np.all(values > 0.0):
            raise ValueError("every mass must be strictly positive")
        if sort:
            # stable sort on the negated values keeps equal masses in input order
            values = values[np.argsort(-values, kind='stable')]
        elif values.size > 1 and np.any(np.diff(values) > 0.0):
            raise ValueError("masses must be nonincreasing")
        total = math.fsum(values.tolist())
        if total > 1.0 + TOTAL_SLACK:
            raise ValueError(f"total mass {total!r} exceeds 1")
        self.masses = values
        self.masses.setflags(write=False)
        self.total = total

    @classmethod
    def monodisperse(cls, n: int) -> 'MassPartition':
        """The state (1/n, ..., 1/n)."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return cls(np.full(n, 1.0 / n), sort=False)

    @property
    def k(self) -> int:
        """Number of clusters."""
        return int(self.masses.size)

    def __len__(self) -> int:
        return self.k

    def __iter__(self):
        return iter(self.masses.tolist())

    def __getitem__(self, index):
        return self.masses[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MassPartition):
            return NotImplemented
        return self.k == other.k and bool(np.array_equal(self.masses, other.masses))

    def __repr__(self) -> str:
        head = ', '.join(f"{m:.6g}" for m in self.masses[:5])
        more = ', ...' if self.k > 5 else ''
        return f"MassPartition(k={self.k}, total={self.total:.12g}, [{head}{more}])"

    def is_normalized(self, tol: float = NORMALIZED_TOL) -> bool:
        """True when the masses sum to one within ``tol``."""
        return abs(self.total - 1.0) <= tol

    def require_normalized(self, tol: float = NORMALIZED_TOL):
        if not self.is_normalized(tol):
            raise ValueError(f"partition must sum to 1 within {tol}, total is {self.total!r}")

    def largest(self, rank: int = 1) -> float:
        """The rank-th largest mass, 0 when fewer clusters exist."""
        return float(self.masses[rank - 1]) if rank <= self.k else 0.0

    def to_list(self) -> List[float]:
        return self.masses.tolist()


@dataclass
class CoalescentTrajectory:
    """Event times and states of one coalescent run, initial state first."""

    times: List[float] = field(default_factory=list)
    states: List[MassPartition] = field(default_factory=list)

    def append(self, time: float, state: MassPartition):
        if self.times:
            if not time > self.times[-1]:
                raise ValueError("event times must be strictly increasing")
            if state.k != self.states[-1].k - 1:
                raise ValueError("each event must merge exactly one pair")
        self.times.append(float(time))
        self.states.append(state)

    @property
    def events(self) -> int:
        """Number of merge events (the initial state is not an event)."""
        return max(0, len(self.states) - 1)

    @property
    def final_state(self) -> MassPartition:
        return self.states[-1]

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class FragmentationSample:
    """A fragmentation state with its provenance."""

    partition: MassPartition
    t: float
    grid_n: int
    seed: Optional[int]
    law_tag: str
    replicate: int = 0

    def __post_init__(self):
        if not (self.law_tag == 'brownian' or self.law_tag.startswith(('theta', 'weighted'))):
            raise ValueError(f"unknown law tag {self.law_tag!r}")

    def provenance(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'grid_n': self.grid_n,
            'seed': self.seed,
            'law_tag': self.law_tag,
            'replicate': self.replicate,
        }
