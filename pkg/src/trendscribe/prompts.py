"""Versioned five-part prompt templates with ``{name}`` placeholders.

Template files live one per version as ``<id>.v<N>.tmpl``::

    placeholders: table_summary, data_block
    source: verbatim
    ## role
    ...
    ## context
    ...
    ## task
    ...
    ## rules
    ...
    ## output_examples
    ...

Literal braces are written ``{{`` and ``}}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

PARTS = ("role", "context", "task", "rules", "output_examples")

_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}|[{}]")
_FILE_RE = re.compile(r"^(?P<id>[A-Za-z0-9_\-]+)\.v(?P<version>\d+)\.tmpl$")


class TemplateError(Exception):
    pass


class UnknownTemplate(TemplateError):
    def __init__(self, template_id: str, version: int | None = None):
        suffix = f" version {version}" if version is not None else ""
        super().__init__(f"unknown template {template_id!r}{suffix}")
        self.template_id = template_id
        self.version = version


class MalformedTemplate(TemplateError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class MissingBinding(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"no binding for placeholder {name!r}")
        self.name = name


class ExtraBinding(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"binding {name!r} is not a placeholder of the template")
        self.name = name


@dataclass(frozen=True)
class Issue:
    kind: str  # EmptyPart | UndeclaredPlaceholder | UnusedPlaceholder | StrayBrace
    name: str

    def __str__(self) -> str:
        return f"{self.kind}({self.name})"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    version: int
    parts: dict[str, str]
    placeholders: frozenset[str]
    metadata: dict[str, str] = field(default_factory=dict)

    def used_placeholders(self) -> set[str]:
        found = set()
        for name in PARTS:
            for m in _TOKEN_RE.finditer(self.parts.get(name, "")):
                if m.group(1):
                    found.add(m.group(1))
        return found

    def render(self, binding: dict[str, str]) -> str:
        return render(self, binding)

    def render_messages(self, binding: dict[str, str]) -> list[dict[str, str]]:
        """System message from the role part, user message from the rest."""
        check_binding(self, binding)
        system = _substitute(self.parts["role"], binding).strip()
        user = "\n\n".join(
            _substitute(self.parts[name], binding).strip() for name in PARTS[1:] if self.parts.get(name, "").strip()
        )
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        return messages


def _substitute(text: str, binding: dict[str, str]) -> str:
    def repl(m: re.Match) -> str:
        token = m.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        if m.group(1):
            return binding[m.group(1)]
        raise MalformedTemplate(f"stray brace at offset {m.start()}")

    return _TOKEN_RE.sub(repl, text)


def check_binding(template: PromptTemplate, binding: dict[str, str]) -> None:
    for name in sorted(template.placeholders):
        if name not in binding:
            raise MissingBinding(name)
    for name in sorted(binding):
        if name not in template.placeholders:
            raise ExtraBinding(name)


def render(template: PromptTemplate, binding: dict[str, str]) -> str:
    """Parts in canonical order, blank-line separated, placeholders substituted."""
    check_binding(template, binding)
    return "\n\n".join(_substitute(template.parts[name], binding) for name in PARTS if template.parts.get(name))


def lint_template(template: PromptTemplate) -> list[Issue]:
    issues = []
    for name in PARTS:
        if not template.parts.get(name, "").strip():
            issues.append(Issue("EmptyPart", name))
    used = template.used_placeholders()
    for name in sorted(used - template.placeholders):
        issues.append(Issue("UndeclaredPlaceholder", name))
    for name in sorted(template.placeholders - used):
        issues.append(Issue("UnusedPlaceholder", name))
    for name in PARTS:
        for m in _TOKEN_RE.finditer(template.parts.get(name, "")):
            if m.group(0) in ("{", "}"):
                issues.append(Issue("StrayBrace", name))
                break
    return issues


def parse_template(text: str, template_id: str, version: int) -> PromptTemplate:
    header: dict[str, str] = {}
    parts: dict[str, list[str]] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^##\s+(\w+)\s*$", line)
        if m:
            current = m.group(1)
            if current not in PARTS:
                raise MalformedTemplate(f"line {lineno}: unknown section {current!r}")
            if current in parts:
                raise MalformedTemplate(f"line {lineno}: duplicate section {current!r}")
            parts[current] = []
        elif current is None:
            if not line.strip():
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise MalformedTemplate(f"line {lineno}: expected 'key: value' header")
            header[key.strip()] = value.strip()
        else:
            parts[current].append(line)
    if "placeholders" not in header:
        raise MalformedTemplate("missing 'placeholders:' header line")
    missing = [p for p in PARTS if p not in parts]
    if missing:
        raise MalformedTemplate(f"missing sections: {', '.join(missing)}")
    placeholders = frozenset(p.strip() for p in header.pop("placeholders").split(",") if p.strip())
    return PromptTemplate(
        id=template_id,
        version=version,
        parts={k: "\n".join(v).strip("\n") for k, v in parts.items()},
        placeholders=placeholders,
        metadata=header,
    )


def default_template_dir() -> Path:
    return Path(str(resources.files("trendscribe") / "templates"))


def available_templates(template_dir: str | Path | None = None) -> dict[str, list[int]]:
    directory = Path(template_dir) if template_dir else default_template_dir()
    found: dict[str, list[int]] = {}
    if directory.is_dir():
        for path in directory.iterdir():
            m = _FILE_RE.match(path.name)
            if m:
                found.setdefault(m.group("id"), []).append(int(m.group("version")))
    return {k: sorted(v) for k, v in sorted(found.items())}


def load_template(template_id: str, version: int | None = None, template_dir: str | Path | None = None) -> PromptTemplate:
    """Load ``template_id`` at ``version``, or its highest version when omitted."""
    directory = Path(template_dir) if template_dir else default_template_dir()
    versions = available_templates(directory).get(template_id)
    if not versions:
        raise UnknownTemplate(template_id)
    if version is None:
        version = versions[-1]
    elif version not in versions:
        raise UnknownTemplate(template_id, version)
    text = (directory / f"{template_id}.v{version}.tmpl").read_text(encoding="utf-8")
    template = parse_template(text, template_id, version)
    issues = lint_template(template)
    if issues:
        raise MalformedTemplate(f"{template_id} v{version}: " + ", ".join(map(str, issues)))
    return template
