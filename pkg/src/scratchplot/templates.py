"""Task-description registry and prompt rendering.

Templates are plain strings with named ``<PLACEHOLDER>`` slots and live in
a YAML config file so the exact wording stays versioned and overridable.
The default file ships with the package; see ``data/templates.yaml``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigurationError, RenderError
from .plan import ContentPlan, PlotElementKind

_PLACEHOLDER_RE = re.compile(r"<([A-Za-z][A-Za-z0-9_]*)>")

OPEN_QUOTE = '"'

# Kinds whose templates must end with an opening quotation mark so the
# close-quote stop rule has something to close. Story bodies stop by
# fixed length instead.
_QUOTED_KINDS = frozenset(
    {
        PlotElementKind.LOCATION,
        PlotElementKind.CAST_MALE,
        PlotElementKind.CAST_FEMALE,
        PlotElementKind.GENRE,
        PlotElementKind.THEME,
        PlotElementKind.STORY_ENDING,
    }
)


@dataclass(frozen=True)
class TaskDescription:
    """One instruction prompt, optionally with placeholder slots."""

    id: str
    kind: PlotElementKind
    template: str
    terminator: str = "none"  # "open_quote" | "none"
    binds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.terminator not in ("open_quote", "none"):
            raise ConfigurationError(
                f"template {self.id!r}: bad terminator {self.terminator!r}"
            )
        placeholders = set(_PLACEHOLDER_RE.findall(self.template))
        undeclared = placeholders - set(self.binds)
        if undeclared:
            raise ConfigurationError(
                f"template {self.id!r}: placeholders {sorted(undeclared)} have no "
                "declared binding name"
            )
        if self.kind in _QUOTED_KINDS and not self.template.endswith(OPEN_QUOTE):
            raise ConfigurationError(
                f"template {self.id!r} must end with an opening quotation mark"
            )

    @property
    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.template))


def render(desc: TaskDescription, bindings: dict[str, str]) -> str:
    """Substitute every placeholder; extra bindings are ignored."""
    text = desc.template
    for name in desc.placeholders:
        if name not in bindings:
            raise RenderError(name, desc.id)
        text = text.replace(f"<{name}>", bindings[name])
    return text


class TemplateRegistry:
    """Immutable, ordered registry of task descriptions."""

    def __init__(self, descriptions: list[TaskDescription]):
        self._by_kind: dict[PlotElementKind, list[TaskDescription]] = {}
        self._by_id: dict[str, TaskDescription] = {}
        for desc in descriptions:
            if desc.id in self._by_id:
                raise ConfigurationError(f"duplicate template id {desc.id!r}")
            self._by_id[desc.id] = desc
            self._by_kind.setdefault(desc.kind, []).append(desc)

    @classmethod
    def from_file(cls, path: str | Path) -> "TemplateRegistry":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return cls._from_raw(raw, str(path))

    @classmethod
    def default(cls) -> "TemplateRegistry":
        raw = yaml.safe_load(
            resources.files("scratchplot.data").joinpath("templates.yaml").read_text("utf-8")
        )
        return cls._from_raw(raw, "<packaged templates.yaml>")

    @classmethod
    def _from_raw(cls, raw: object, source: str) -> "TemplateRegistry":
        if not isinstance(raw, list):
            raise ConfigurationError(f"{source}: expected a list of templates")
        descriptions = []
        for entry in raw:
            try:
                descriptions.append(
                    TaskDescription(
                        id=entry["id"],
                        kind=PlotElementKind(entry["kind"]),
                        template=entry["template"],
                        terminator=entry.get("terminator", "none"),
                        binds=dict(entry.get("binds", {})),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"{source}: bad template entry {entry!r}: {exc}")
        return cls(descriptions)

    def descriptions_for(self, kind: PlotElementKind) -> list[TaskDescription]:
        if kind not in self._by_kind:
            raise ConfigurationError(f"no templates registered for kind {kind.value!r}")
        return list(self._by_kind[kind])

    def by_id(self, template_id: str) -> TaskDescription:
        if template_id not in self._by_id:
            raise ConfigurationError(f"unknown template id {template_id!r}")
        return self._by_id[template_id]

    def debias_companions(self, desc: TaskDescription) -> list[TaskDescription]:
        """Sibling descriptions a debiased generation contrasts against.

        Location templates contrast with the other geographical units;
        male and female cast templates contrast with each other.
        """
        if desc.kind is PlotElementKind.LOCATION:
            return [d for d in self.descriptions_for(desc.kind) if d.id != desc.id]
        if desc.kind is PlotElementKind.CAST_MALE:
            return self.descriptions_for(PlotElementKind.CAST_FEMALE)
        if desc.kind is PlotElementKind.CAST_FEMALE:
            return self.descriptions_for(PlotElementKind.CAST_MALE)
        return []

    def fuse_plan(self, plan: ContentPlan) -> str:
        """Fuse all five plot elements into the single story prompt."""
        plan.require_complete()
        desc = self.descriptions_for(PlotElementKind.STORY_BODY)[0]
        return render(desc, plan_bindings(desc, plan))

    def ending_prompt(self, plan: ContentPlan, body: str) -> str:
        """Prompt asking for what happens in the end, given the story body."""
        if not body or not body.strip():
            raise ValueError("story body must be non-empty")
        desc = self.descriptions_for(PlotElementKind.STORY_ENDING)[0]
        return render(desc, plan_bindings(desc, plan, body=body))


def plan_bindings(
    desc: TaskDescription, plan: ContentPlan, body: str | None = None
) -> dict[str, str]:
    """Placeholder -> text map for a plan-conditioned template.

    ``binds`` declares the semantic role of each placeholder, e.g.
    ``{X1: genre}``; roles name plan fields or "body". Placeholders whose
    role has no value stay unbound so render() reports them.
    """
    roles: dict[str, str] = {} if plan.missing() else plan.values()
    if body is not None:
        roles["body"] = body
    bindings: dict[str, str] = {}
    for placeholder, role in desc.binds.items():
        if role in roles:
            bindings[placeholder] = roles[role]
    return bindings
