from __future__ import annotations

from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, field_validator

CONSTRAINT_SEPARATOR = " & "
VALUE_SEPARATOR = "="


class SubgroupSpec(BaseModel):
    """Conjunction of ``attribute = value`` constraints.

    Constraints are kept sorted by attribute name so that two specs describing
    the same stratum compare (and hash) equal.
    """

    model_config = ConfigDict(frozen=True)

    constraints: Annotated[
        tuple[tuple[str, str], ...],
        Field(description="(attribute, value) pairs, sorted by attribute name."),
    ]

    @field_validator("constraints")
    @classmethod
    def canonical_order(
        cls, value: tuple[tuple[str, str], ...]
    ) -> tuple[tuple[str, str], ...]:
        if len(value) < 1:
            raise ValueError("A subgroup needs at least one constraint.")
        names = [name for name, _ in value]
        if len(set(names)) != len(names):
            raise ValueError("Attribute names in a subgroup must be distinct.")
        for name, level in value:
            if VALUE_SEPARATOR in str(name) or CONSTRAINT_SEPARATOR in str(name):
                raise ValueError(f"Attribute name {name!r} makes the key ambiguous.")
            if CONSTRAINT_SEPARATOR in str(level):
                raise ValueError(f"Attribute value {level!r} makes the key ambiguous.")
        return tuple(sorted((str(k), str(v)) for k, v in value))

    @classmethod
    def of(cls, **constraints: str) -> SubgroupSpec:
        return cls(constraints=tuple(constraints.items()))

    @property
    def level(self) -> int:
        return len(self.constraints)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.constraints)

    @property
    def key(self) -> str:
        return CONSTRAINT_SEPARATOR.join(
            f"{name}{VALUE_SEPARATOR}{value}" for name, value in self.constraints
        )

    def sort_key(self) -> tuple[int, tuple[tuple[str, str], ...]]:
        return (self.level, self.constraints)

    def __str__(self) -> str:
        return self.key
