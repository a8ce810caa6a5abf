"""Ground-truth roster of shows, characters, aliases, and style domains.

A registry is immutable after load and shared freely across workers. The
package ships a default seed registry covering the four source shows; custom
registries load from a UTF-8 JSON file of the same shape, with
reference-image paths resolved relative to the registry file.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import (
    DanglingCharacterRef,
    DuplicateName,
    RegistryParseError,
    UnknownCharacter,
)


class StyleDomain(enum.Enum):
    CARTOON = "cartoon"
    REALISTIC = "realistic"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Character:
    canonical_name: str
    aliases: tuple[str, ...]
    show_id: str
    description: str = ""
    reference_images: tuple[str, ...] = ()
    eval_subset: bool = False


@dataclass(frozen=True)
class Show:
    show_id: str
    title: str
    style: StyleDomain
    characters: tuple[str, ...]


class CharacterRegistry:
    def __init__(self, shows: list[Show], characters: list[Character]):
        self._shows = {s.show_id: s for s in shows}
        self._characters: dict[str, Character] = {}
        self._lookup: dict[str, str] = {}  # casefolded name/alias -> canonical
        for ch in characters:
            if ch.canonical_name in self._characters:
                raise DuplicateName(f"duplicate character {ch.canonical_name!r}")
            self._characters[ch.canonical_name] = ch
        for ch in characters:
            key = ch.canonical_name.casefold()
            if key in self._lookup:
                raise DuplicateName(f"name collision on {ch.canonical_name!r}")
            self._lookup[key] = ch.canonical_name
        for ch in characters:
            for alias in ch.aliases:
                key = alias.casefold()
                if key in self._lookup and self._lookup[key] != ch.canonical_name:
                    raise DuplicateName(
                        f"alias {alias!r} collides with {self._lookup[key]!r}"
                    )
                self._lookup[key] = ch.canonical_name
        for ch in characters:
            if ch.show_id not in self._shows:
                raise DanglingCharacterRef(
                    f"{ch.canonical_name!r} references unknown show {ch.show_id!r}"
                )
        for show in shows:
            for name in show.characters:
                if name not in self._characters:
                    raise DanglingCharacterRef(
                        f"show {show.show_id!r} lists unknown character {name!r}"
                    )

    @property
    def shows(self) -> list[Show]:
        return list(self._shows.values())

    @property
    def characters(self) -> list[Character]:
        return list(self._characters.values())

    def show(self, show_id: str) -> Show:
        try:
            return self._shows[show_id]
        except KeyError:
            raise UnknownCharacter(f"unknown show {show_id!r}") from None

    def character(self, canonical_name: str) -> Character:
        try:
            return self._characters[canonical_name]
        except KeyError:
            raise UnknownCharacter(canonical_name) from None

    def resolve_alias(self, name: str) -> Optional[str]:
        """Case-insensitive match on canonical names, then aliases."""
        return self._lookup.get(name.strip().casefold())

    def style_of(self, name: str) -> StyleDomain:
        canonical = self.resolve_alias(name)
        if canonical is None:
            raise UnknownCharacter(name)
        return self._shows[self._characters[canonical].show_id].style

    def eval_characters(self) -> list[Character]:
        return [c for c in self._characters.values() if c.eval_subset]


def _parse_registry(data: dict, base_dir: Optional[Path]) -> CharacterRegistry:
    try:
        shows = [
            Show(
                show_id=s["show_id"],
                title=s["title"],
                style=StyleDomain(s["style"]),
                characters=tuple(s["characters"]),
            )
            for s in data.get("shows", [])
        ]
        characters = []
        for c in data.get("characters", []):
            refs = c.get("reference_images", [])
            if base_dir is not None:
                refs = [str((base_dir / r)) for r in refs]
            characters.append(
                Character(
                    canonical_name=c["canonical_name"],
                    aliases=tuple(c.get("aliases", [])),
                    show_id=c["show_id"],
                    description=c.get("description", ""),
                    reference_images=tuple(refs),
                    eval_subset=bool(c.get("eval_subset", False)),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise RegistryParseError(str(exc)) from exc
    return CharacterRegistry(shows, characters)


def load_registry(path: str | Path) -> CharacterRegistry:
    """Load a registry file; reference-image paths resolve relative to it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if text.strip() else {}
    except (OSError, json.JSONDecodeError) as exc:
        raise RegistryParseError(str(exc)) from exc
    return _parse_registry(data, path.parent)


def default_registry() -> CharacterRegistry:
    """The seed registry for the four source shows."""
    data = json.loads(
        resources.files("mimix.data").joinpath("registry.json").read_text("utf-8")
    )
    return _parse_registry(data, None)
