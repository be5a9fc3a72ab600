"""Text commands to action primitives, and topology-aware plan expansion that
clears stacked objects before touching the target.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from gazeintent.scene import TopologyGraph

Vec3 = tuple[float, float, float]

PRIMITIVE_KINDS = ("pick", "put", "pour", "swap", "grasp", "push", "move", "rotate")

# Keyword/synonym table; longer phrases are matched before their substrings.
SYNONYMS: dict[str, tuple[str, ...]] = {
    "pick": ("pick up", "pick", "take", "lift", "get"),
    "put": ("put down", "put", "place", "set down", "drop"),
    "pour": ("pour", "tip over", "empty"),
    "swap": ("swap", "exchange", "switch"),
    "grasp": ("grasp", "grab", "hold"),
    "push": ("push", "shove", "slide"),
    "move": ("move", "shift", "bring"),
    "rotate": ("rotate", "turn", "spin", "twist"),
}


class PlanningError(ValueError):
    """Plan expansion needs a free-space slot and none is declared."""


@dataclass(frozen=True)
class Primitive:
    kind: str
    target: Optional[str] = None
    destination: Optional[object] = None  # object_id or (x, y, z) pose

    def __post_init__(self) -> None:
        if self.kind not in PRIMITIVE_KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")


@dataclass(frozen=True)
class Plan:
    steps: tuple[Primitive, ...]
    warnings: tuple[str, ...] = ()


def parse_command(text: str) -> Optional[str]:
    """Map free text to a primitive kind by keyword/synonym lookup.

    The earliest phrase occurrence in the text wins; at equal positions the
    longer phrase does. Returns None for out-of-vocabulary commands.
    """
    lowered = text.lower()
    best: Optional[tuple[int, int, str]] = None  # (position, -length, kind)
    for kind in PRIMITIVE_KINDS:
        for phrase in SYNONYMS[kind]:
            m = re.search(rf"\b{re.escape(phrase)}\b", lowered)
            if m is None:
                continue
            key = (m.start(), -len(phrase), kind)
            if best is None or key < best:
                best = key
    return best[2] if best else None


def expand_plan(
    primitive: Primitive,
    target: str,
    topo: TopologyGraph,
    free_slots: Sequence[Vec3] = (),
) -> Plan:
    """Expand one primitive into a plan that first relocates everything
    stacked on the target, topmost first, into declared free-space slots
    (reused round-robin). Objects *in* the target cannot be auto-cleared and
    are surfaced as warnings.
    """
    if target not in topo.nodes:
        raise ValueError(f"unknown target {target!r}")
    obstructions = topo.above(target)
    if obstructions and not free_slots:
        raise PlanningError(f"{len(obstructions)} objects on {target!r} but no free-space slot declared")

    steps: list[Primitive] = []
    for i, obj in enumerate(obstructions):
        slot = tuple(free_slots[i % len(free_slots)])
        steps.append(Primitive("pick", target=obj))
        steps.append(Primitive("put", target=obj, destination=slot))
    steps.append(Primitive(primitive.kind, target=target, destination=primitive.destination))

    warnings = tuple(
        f"{child} is inside {target} and was not relocated"
        for child in sorted(topo.children(target, "in"))
    )
    return Plan(tuple(steps), warnings)
