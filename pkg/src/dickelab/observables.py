"""Uniform record of ground-state observables shared by every method."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class ObservableSet:
    """Energies, populations, second moments and squeezing of one state.

    ``energy`` is the total energy, not per atom.  ``xi_x2`` and ``xi_y2`` are
    ``4 (Delta J)^2 / N`` for the x and y spin components.
    """

    energy: float
    n_photons: float
    n_excited: float
    jz: float
    q2: float
    p2: float
    var_q: float
    var_p: float
    jx2: float
    jy2: float
    xi_x2: float
    xi_y2: float
    first_moments_zero: bool

    # the thirteen fields in file/column order
    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict:
        return asdict(self)

    def numeric(self) -> dict[str, float]:
        return {k: v for k, v in asdict(self).items() if k != "first_moments_zero"}
