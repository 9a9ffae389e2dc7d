from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from components.errors import DomainError, InputError
from components.measures.geometry import Box, as_points


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class DiscreteVectorMeasure:
    """
    Finite sum of vector-valued Dirac atoms, mu = sum_k m_k delta_{x_k}.

    Attributes:
        locations: (n, 3) atom positions in meters, pairwise distinct.
        moments: (n, 3) dipole moments in A·m².
        region: Optional source region every atom must lie in.
    """

    locations: np.ndarray
    moments: np.ndarray
    region: Optional[Box] = field(default=None, compare=False)

    def __post_init__(self):
        locations = as_points(self.locations)
        moments = as_points(self.moments)
        if locations.shape != moments.shape:
            raise DomainError(
                f"Got {len(locations)} locations but {len(moments)} moments"
            )
        if not (np.all(np.isfinite(locations)) and np.all(np.isfinite(moments))):
            raise InputError("Atom locations and moments must be finite")

        # Zero-moment atoms carry no mass
        keep = np.any(moments != 0.0, axis=1)
        locations, moments = locations[keep], moments[keep]

        if len(np.unique(locations, axis=0)) != len(locations):
            raise DomainError("Atom locations must be pairwise distinct")
        if self.region is not None and len(locations):
            inside = self.region.contains(locations)
            if not np.all(inside):
                bad = int(np.flatnonzero(~inside)[0])
                raise DomainError(f"Atom at {tuple(locations[bad])} lies outside the source region")

        object.__setattr__(self, "locations", _frozen(locations))
        object.__setattr__(self, "moments", _frozen(moments))

    @classmethod
    def empty(cls, region: Optional[Box] = None) -> "DiscreteVectorMeasure":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), region)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple], region: Optional[Box] = None) -> "DiscreteVectorMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls.empty(region)
        locations, moments = zip(*atoms)
        return cls(np.array(locations, dtype=float), np.array(moments, dtype=float), region)

    def __len__(self) -> int:
        return len(self.locations)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.moments, axis=1)

    def unit_directions(self) -> np.ndarray:
        """The unit density u_mu evaluated at each atom, m_k / |m_k|."""
        return self.moments / self.norms[:, None]

    def scaled(self, t: float) -> "DiscreteVectorMeasure":
        return DiscreteVectorMeasure(self.locations, t * self.moments, self.region)

    def merged(self, other: "DiscreteVectorMeasure") -> "DiscreteVectorMeasure":
        """Concatenate two atom lists, adding moments of atoms at the same location."""
        locations = np.concatenate([self.locations, other.locations])
        moments = np.concatenate([self.moments, other.moments])
        if len(locations) == 0:
            return DiscreteVectorMeasure.empty(self.region)
        unique, inverse = np.unique(locations, axis=0, return_inverse=True)
        summed = np.zeros_like(unique)
        np.add.at(summed, inverse.ravel(), moments)
        return DiscreteVectorMeasure(unique, summed, self.region)


def tv_norm(mu: DiscreteVectorMeasure) -> float:
    """
    Total variation norm of an atomic vector measure.

    Args:
        mu (DiscreteVectorMeasure): The measure.

    Returns:
        float: The sum of the Euclidean norms of the atom moments.
    """
    return float(np.sum(mu.norms))


def support_points(mu: DiscreteVectorMeasure) -> np.ndarray:
    return np.array(mu.locations)
