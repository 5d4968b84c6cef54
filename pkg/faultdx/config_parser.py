# Parser for the line-oriented experiment configuration
#
# Expectation is that each line will be formatted like so
#   augment.alpha_scal.min = 0.8
# which translates to
#   {"augment": {"alpha_scal": {"min": "0.8"}}}
#
# Values stay strings (pydantic coerces them against the models), except
#   null / none   -> None
#   (a, b, c)     -> ["a", "b", "c"]
#
import copy
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Optional

from faultdx.core import FaultDxException

log = logging.getLogger(__name__)

COMMENT = "#"
ASSIGN = "="


class ParserException(FaultDxException):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "config"):
        location = f"{source}, line {line}: " if line is not None else f"{source}: "
        super().__init__(location + message)
        self.line = line
        self.source = source


def cast_value(raw: str, line: Optional[int] = None) -> Any:
    value = raw.strip()

    if value.lower() in ("null", "none"):
        return None

    if value.startswith("(") or value.endswith(")"):
        if not (value.startswith("(") and value.endswith(")")):
            raise ParserException(f"List value must be in form (x,y,z), got {value}", line)
        inner = value[1:-1].strip()
        return [item.strip() for item in inner.split(",")] if inner else []

    # Quoted strings keep their inner text verbatim
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]

    return value


@dataclass
class ConfigParameter:
    path: list[str]
    value: Any
    line: Optional[int] = None

    def __str__(self):
        return f"{'.'.join(self.path)} = {self.value}"

    @property
    def key(self) -> str:
        return ".".join(self.path)


class ConfigParser:
    """Used to parse configuration text into a nested dict"""

    def __init__(self, lines: Iterable[str] | None, source: str = "config"):

        # If no lines, then set to empty list
        if lines is None:
            lines = []

        self.lines = list(lines)
        self.source = source

    @classmethod
    def from_text(cls, text: str, source: str = "config") -> "ConfigParser":
        return cls(text.splitlines(), source=source)

    @cached_property
    def decomposed_parameters(self) -> list[ConfigParameter]:
        return self._decompose_lines()

    def tree(self) -> dict:
        return build_tree(self.decomposed_parameters, self.source)

    def _decompose_lines(self) -> list[ConfigParameter]:
        parameters = []
        seen: dict[str, int] = {}

        for number, line in enumerate(self.lines, start=1):
            stripped = line.strip()

            # Skip blank lines and comments
            if not stripped or stripped.startswith(COMMENT):
                continue

            parameter = self._decompose_assignment(stripped, number)

            if parameter.key in seen:
                raise ParserException(
                    f"Duplicate key ({parameter.key}), first set on line {seen[parameter.key]}",
                    number, self.source
                )
            seen[parameter.key] = number
            parameters.append(parameter)

        return parameters

    def _decompose_assignment(self, assignment: str, line: Optional[int]) -> ConfigParameter:
        if ASSIGN not in assignment:
            raise ParserException(f"Expected 'key = value', got ({assignment})", line, self.source)

        key, raw = assignment.split(ASSIGN, 1)

        # Trailing comments are allowed after unquoted values
        if COMMENT in raw and not raw.strip().startswith(("'", '"')):
            raw = raw.split(COMMENT, 1)[0]

        path = [part.strip() for part in key.strip().split(".")]
        if not all(part.isidentifier() for part in path):
            raise ParserException(f"Key ({key.strip()}) is not a dotted identifier", line, self.source)

        if raw.strip() == "":
            raise ParserException(f"Key ({key.strip()}) has no value", line, self.source)

        return ConfigParameter(path=path, value=cast_value(raw, line), line=line)


def build_tree(parameters: Iterable[ConfigParameter], source: str = "config",
               tree: Optional[dict] = None) -> dict:
    tree = {} if tree is None else tree

    for parameter in parameters:
        node = tree
        for depth, part in enumerate(parameter.path[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ParserException(
                    f"Key ({parameter.key}) nests under ({'.'.join(parameter.path[:depth + 1])}) "
                    f"which already holds a value",
                    parameter.line, source
                )
            node = child

        leaf = parameter.path[-1]
        if isinstance(node.get(leaf), dict):
            raise ParserException(
                f"Key ({parameter.key}) is a group and cannot hold a value", parameter.line, source
            )
        node[leaf] = parameter.value

    return tree


def parse_config(text: str, source: str = "config") -> dict:
    return ConfigParser.from_text(text, source=source).tree()


def apply_overrides(tree: dict, overrides: Iterable[str]) -> dict:
    """Returns a copy of tree with each 'key=value' override applied, later ones winning"""

    parser = ConfigParser([], source="override")
    parameters = [parser._decompose_assignment(override, None) for override in overrides]

    result = copy.deepcopy(tree)
    for parameter in parameters:
        # An override may replace a whole group or a value with a group
        node = result
        for part in parameter.path[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parameter.path[-1]] = parameter.value
        log.debug(f"Config override {parameter}")

    return result
