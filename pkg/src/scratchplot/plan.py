"""Plot elements and content plans."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .errors import PlanValidationError


class PlotElementKind(str, Enum):
    LOCATION = "location"
    CAST_MALE = "cast_male"
    CAST_FEMALE = "cast_female"
    GENRE = "genre"
    THEME = "theme"
    STORY_BODY = "story_body"
    STORY_ENDING = "story_ending"


# Dependency graph: child kind -> parent kind whose value feeds <X1>.
PARENT_KIND: dict[PlotElementKind, PlotElementKind] = {
    PlotElementKind.CAST_MALE: PlotElementKind.LOCATION,
    PlotElementKind.CAST_FEMALE: PlotElementKind.LOCATION,
    PlotElementKind.THEME: PlotElementKind.GENRE,
}

# Kinds generated with self-debiasing across their sibling descriptions
# (distinct geographical units; male vs. female names). Genre and theme
# descriptions complement each other, so they are sampled plainly.
DEBIASED_KINDS = frozenset(
    {PlotElementKind.LOCATION, PlotElementKind.CAST_MALE, PlotElementKind.CAST_FEMALE}
)

# Generation order preserving dependencies.
ELEMENT_ORDER = (
    PlotElementKind.LOCATION,
    PlotElementKind.CAST_MALE,
    PlotElementKind.CAST_FEMALE,
    PlotElementKind.GENRE,
    PlotElementKind.THEME,
)


@dataclass(frozen=True)
class PlotElement:
    """One stored plot-element value, already post-processed."""

    id: str
    kind: PlotElementKind
    text: str
    parent_ids: tuple[str, ...] = ()
    task_description_id: str = ""
    model_id: str = ""
    created_at: str = ""

    @classmethod
    def create(
        cls,
        kind: PlotElementKind,
        text: str,
        parent_ids: tuple[str, ...] = (),
        task_description_id: str = "",
        model_id: str = "",
    ) -> "PlotElement":
        digest = hashlib.sha1(
            "|".join([kind.value, text, *parent_ids]).encode("utf-8")
        ).hexdigest()[:12]
        return cls(
            id=digest,
            kind=kind,
            text=text,
            parent_ids=parent_ids,
            task_description_id=task_description_id,
            model_id=model_id,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    @property
    def first_name(self) -> str:
        """First whitespace-delimited token; cast values are full names."""
        return self.text.split()[0] if self.text.split() else ""

    def to_json(self) -> str:
        record = {
            "id": self.id,
            "kind": self.kind.value,
            "text": self.text,
            "parent_ids": list(self.parent_ids),
            "task_description_id": self.task_description_id,
            "model_id": self.model_id,
            "created_at": self.created_at,
        }
        return json.dumps(record, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "PlotElement":
        record = json.loads(line)
        return cls(
            id=record["id"],
            kind=PlotElementKind(record["kind"]),
            text=record["text"],
            parent_ids=tuple(record.get("parent_ids", [])),
            task_description_id=record.get("task_description_id", ""),
            model_id=record.get("model_id", ""),
            created_at=record.get("created_at", ""),
        )


@dataclass(frozen=True)
class ContentPlan:
    """One sampled value per plot element.

    Fields may be left unset while a plan is being assembled; operations
    that need a full plan call :meth:`require_complete`.
    """

    location: PlotElement | None = None
    cast_male: PlotElement | None = None
    cast_female: PlotElement | None = None
    genre: PlotElement | None = None
    theme: PlotElement | None = None

    _FIELD_KINDS = (
        ("location", PlotElementKind.LOCATION),
        ("cast_male", PlotElementKind.CAST_MALE),
        ("cast_female", PlotElementKind.CAST_FEMALE),
        ("genre", PlotElementKind.GENRE),
        ("theme", PlotElementKind.THEME),
    )

    def __post_init__(self):
        for name, kind in self._FIELD_KINDS:
            element = getattr(self, name)
            if element is not None and element.kind is not kind:
                raise PlanValidationError([f"{name} has kind {element.kind.value}"])
        for name, parent in (("theme", self.genre), ("cast_male", self.location),
                             ("cast_female", self.location)):
            element = getattr(self, name)
            if element is None or parent is None:
                continue
            if element.parent_ids and parent.id not in element.parent_ids:
                raise PlanValidationError(
                    [f"{name} does not descend from the plan's {parent.kind.value}"]
                )

    def missing(self) -> list[str]:
        return [name for name, _ in self._FIELD_KINDS if getattr(self, name) is None]

    def require_complete(self) -> None:
        missing = self.missing()
        if missing:
            raise PlanValidationError(missing)

    def values(self) -> dict[str, str]:
        self.require_complete()
        return {
            "location": self.location.text,
            "cast_male": self.cast_male.text,
            "cast_female": self.cast_female.text,
            "genre": self.genre.text,
            "theme": self.theme.text,
        }

    def to_dict(self) -> dict:
        self.require_complete()
        return {
            name: {"id": el.id, "text": el.text}
            for name, el in (
                ("location", self.location),
                ("cast_male", self.cast_male),
                ("cast_female", self.cast_female),
                ("genre", self.genre),
                ("theme", self.theme),
            )
        }
