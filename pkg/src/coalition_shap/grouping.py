"""Feature grouping and coalition masking.

A grouping bundles the inputs into N players: consecutive temporal windows
of past load plus one group per covariate. A coalition is the canonical
integer whose bit k says group k is present (temporal groups oldest-first,
then covariates). Masking a coalition means withholding the absent groups:
the oldest absent prefix is realized by shortening the context, interior or
recent absences by missing markers or row drops depending on what the
forecaster tolerates, and absent covariates are omitted entirely.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityViolation, DataError
from .forecast import Capabilities, MaskedInput
from .series import HOUR, CovariateSlice, Dataset, ForecastTask

log = logging.getLogger(__name__)

MAX_GROUPS = 20

# The four standard windows as (name, oldest, newest) hour offsets, oldest
# window first; None extends to the context start.
DEFAULT_TEMPORAL_WINDOWS = (
    ("long_term", None, -673),
    ("intermediate", -672, -169),
    ("short_term", -168, -25),
    ("last_day", -24, -1),
)


@dataclass(frozen=True)
class TemporalGroup:
    """A contiguous window of past hours, inclusive offsets relative to origin."""

    name: str
    oldest: int
    newest: int

    def __post_init__(self):
        if not self.oldest <= self.newest <= -1:
            raise DataError(f"temporal group {self.name!r}: bad window [{self.oldest}, {self.newest}]")

    @property
    def n_hours(self) -> int:
        return self.newest - self.oldest + 1


class BaseSignal:
    """Marker: the all-masked coalition; the caller substitutes the base prediction."""

    def __repr__(self):
        return "BaseSignal()"

    def __eq__(self, other):
        return isinstance(other, BaseSignal)

    def __hash__(self):
        return hash(BaseSignal)


@dataclass(frozen=True)
class GroupingSpec:
    """N = len(temporal_groups) + len(covariate_groups) Shapley players.

    Temporal groups are ordered oldest to newest, disjoint, and contiguous
    in union; their union must end at hour -1.
    """

    temporal_groups: tuple[TemporalGroup, ...]
    covariate_groups: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "temporal_groups", tuple(self.temporal_groups))
        object.__setattr__(self, "covariate_groups", tuple(self.covariate_groups))
        groups = self.temporal_groups
        for a, b in zip(groups, groups[1:]):
            if b.oldest != a.newest + 1:
                raise DataError(
                    f"temporal groups {a.name!r} and {b.name!r} are not contiguous oldest-to-newest"
                )
        if groups and groups[-1].newest != -1:
            raise DataError("the newest temporal group must end at hour -1")
        names = [g.name for g in groups] + list(self.covariate_groups)
        if len(set(names)) != len(names):
            raise DataError("group names must be unique")
        if self.n_groups > MAX_GROUPS:
            raise DataError(f"{self.n_groups} groups exceed the hard cap of {MAX_GROUPS} (2^N table)")

    @property
    def n_temporal(self) -> int:
        return len(self.temporal_groups)

    @property
    def n_groups(self) -> int:
        return len(self.temporal_groups) + len(self.covariate_groups)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.temporal_groups) + self.covariate_groups

    @property
    def context_hours(self) -> int:
        return -self.temporal_groups[0].oldest if self.temporal_groups else 0

    def temporal_bit(self, index: int) -> int:
        return 1 << index

    def covariate_bit(self, index: int) -> int:
        return 1 << (self.n_temporal + index)

    def members(self, coalition: int) -> tuple[str, ...]:
        names = self.group_names
        return tuple(names[k] for k in range(self.n_groups) if coalition >> k & 1)

    def to_dict(self) -> dict:
        return {
            "temporal": [
                {"name": g.name, "oldest": g.oldest, "newest": g.newest} for g in self.temporal_groups
            ],
            "covariates": list(self.covariate_groups),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupingSpec":
        return cls(
            temporal_groups=tuple(
                TemporalGroup(g["name"], int(g["oldest"]), int(g["newest"])) for g in data["temporal"]
            ),
            covariate_groups=tuple(data.get("covariates", ())),
        )


def default_grouping(dataset: Dataset, task: ForecastTask) -> GroupingSpec:
    """The standard four temporal windows, clipped to C, plus one group per covariate.

    Windows lying entirely beyond the context are dropped (and logged); the
    oldest surviving window is clipped so the union covers exactly the C
    context hours. Requires C >= 24 so the last-day window exists in full.
    """
    c = task.context_length_hours
    if c < 24:
        raise DataError(f"default grouping needs a context of at least 24 hours, got {c}")
    groups = []
    for name, oldest, newest in DEFAULT_TEMPORAL_WINDOWS:
        oldest = -c if oldest is None else oldest
        if newest < -c:
            log.warning("temporal group %r lies beyond the %dh context; dropped", name, c)
            continue
        groups.append(TemporalGroup(name, max(oldest, -c), newest))
    return GroupingSpec(temporal_groups=tuple(groups), covariate_groups=dataset.covariate_names())


def enumerate_coalitions(spec: GroupingSpec) -> range:
    """All 2^N coalitions in ascending canonical encoding."""
    return range(1 << spec.n_groups)


def coalition_size(coalition: int) -> int:
    return bin(coalition).count("1")


def apply_coalition(
    dataset: Dataset,
    task: ForecastTask,
    spec: GroupingSpec,
    coalition: int,
    caps: Capabilities,
) -> MaskedInput | BaseSignal:
    """Translate one coalition into the model input the forecaster will see.

    Absent covariates are omitted entirely. The maximal absent prefix of
    temporal groups (oldest first) is removed by truncating the context;
    remaining absent temporal groups become missing markers when the
    forecaster accepts them, otherwise their rows are dropped. The
    all-absent coalition yields BaseSignal. Masking never alters values,
    only presence.
    """
    n = spec.n_groups
    if not 0 <= coalition < (1 << n):
        raise DataError(f"coalition {coalition} out of range for {n} groups")
    if coalition == 0:
        return BaseSignal()
    if spec.context_hours > task.context_length_hours:
        raise DataError("grouping spans more hours than the task context")

    temporal_present = [bool(coalition >> k & 1) for k in range(spec.n_temporal)]

    # Maximal absent prefix -> truncation; the context starts at the oldest
    # present group's window.
    first_present = next((i for i, p in enumerate(temporal_present) if p), None)
    if first_present is None:
        offsets = np.empty(0, dtype=np.int64)
        values = np.empty(0)
    else:
        start_offset = spec.temporal_groups[first_present].oldest
        n_rows = -start_offset
        offsets = np.arange(start_offset, 0, dtype=np.int64)
        values = dataset.target.window(task.origin + start_offset * HOUR, n_rows).copy()

        interior_absent = [
            g
            for i, g in enumerate(spec.temporal_groups)
            if i > first_present and not temporal_present[i]
        ]
        if interior_absent:
            absent_mask = np.zeros(n_rows, dtype=bool)
            for g in interior_absent:
                absent_mask[g.oldest - start_offset : g.newest - start_offset + 1] = True
            if caps.accepts_missing_target:
                values[absent_mask] = np.nan
            elif caps.accepts_row_drop:
                # Data gaps must go too: a row-drop consumer cannot see NaN.
                keep = ~absent_mask & ~np.isnan(values)
                offsets = offsets[keep]
                values = values[keep]
            else:
                raise CapabilityViolation(
                    "no masking strategy for interior temporal groups under the declared capabilities"
                )
        elif not caps.accepts_missing_target and caps.accepts_row_drop:
            keep = ~np.isnan(values)
            offsets = offsets[keep]
            values = values[keep]

    covariates: dict[str, CovariateSlice] = {}
    for j, name in enumerate(spec.covariate_groups):
        if not coalition >> (spec.n_temporal + j) & 1:
            continue
        cov = dataset.covariates[name]
        if len(offsets):
            base_idx = cov.series.index_of(task.origin + int(offsets[0]) * HOUR)
            rel = (offsets - int(offsets[0])).astype(np.intp)
            past = cov.series.values[base_idx + rel]
        else:
            past = np.empty(0)
        future = None
        if cov.future_known:
            future = cov.series.window(task.origin, task.horizon_hours)
        covariates[name] = CovariateSlice(past=past, future=future)

    return MaskedInput(
        origin=task.origin,
        offsets=offsets,
        values=values,
        covariates=covariates,
        horizon_hours=task.horizon_hours,
        quantiles=task.quantiles,
    )
