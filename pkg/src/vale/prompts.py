"""Instruction templates and label substitution.

Templates carry the literal placeholder token ``{predicted label}``;
rendering replaces every occurrence with the class label verbatim
(underscores and all). Built-in templates keep the label inside single
quotes, e.g. ``Explain the object in the image: 'bald_eagle'?``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConflictError, InputError

PLACEHOLDER = "{predicted label}"

BUILTIN_TEMPLATES = (
    ("default-imagenet", "Explain the object in the image: '{predicted label}'?"),
    ("sonar-custom",
     "Describe only the object in the image that represents the "
     "'{predicted label}' as acquired through the use of synthetic aperture "
     "sonar, make sure to ignore the background?"),
    ("bare", "Explain?"),
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise InputError("template id must be non-empty")
        if not self.text:
            raise InputError("template text must be non-empty")


@dataclass(frozen=True)
class PromptBundle:
    template_id: str
    label: str
    rendered: str


def render(template: PromptTemplate, label: str) -> PromptBundle:
    """Replace every placeholder with the label; other text is untouched."""
    if not label:
        raise InputError("label must be non-empty")
    return PromptBundle(template.id, label,
                        template.text.replace(PLACEHOLDER, label))


class PromptRegistry:
    """Built-in templates plus user-loaded ones, in stable order."""

    def __init__(self):
        self._templates: dict[str, PromptTemplate] = {}
        for tid, text in BUILTIN_TEMPLATES:
            self._templates[tid] = PromptTemplate(tid, text)

    def list(self) -> list[PromptTemplate]:
        return list(self._templates.values())

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise InputError(f"unknown template id {template_id!r}") from None

    def add(self, template: PromptTemplate) -> None:
        if template.id in self._templates:
            raise ConflictError(f"template id {template.id!r} already registered")
        self._templates[template.id] = template

    def load_file(self, path) -> int:
        """Load templates from a JSON list of {"id", "text"} objects."""
        try:
            with open(path, "r", encoding="utf-8") as fh:
                entries = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read template file {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise InputError("template file must contain a JSON list")
        loaded = 0
        for entry in entries:
            if not isinstance(entry, dict) or "id" not in entry or "text" not in entry:
                raise InputError("each template needs 'id' and 'text'")
            self.add(PromptTemplate(str(entry["id"]), str(entry["text"])))
            loaded += 1
        return loaded

    def to_json(self) -> list[dict]:
        return [{"id": t.id, "text": t.text} for t in self.list()]

    def save_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")
