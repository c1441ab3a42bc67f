"""Reactive behavior-tree engine: Sequence / Fallback / Condition / Action
nodes with classical tick semantics and no memory composites. Re-ticks always
restart from the root; the engine holds no state of its own."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional


class Status(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"


class NodeKind(Enum):
    SEQUENCE = "Sequence"
    FALLBACK = "Fallback"
    CONDITION = "Condition"
    ACTION = "Action"


class BTError(Exception):
    pass


class UnboundLeafError(BTError):
    """A Condition/Action leaf was ticked without a registered binding."""


Blackboard = dict
Binding = Callable[[Blackboard], Status]


@dataclass
class BTNode:
    kind: NodeKind
    label: str = ""
    children: list["BTNode"] = field(default_factory=list)
    binding: Optional[Binding] = None

    def __post_init__(self):
        if self.kind in (NodeKind.CONDITION, NodeKind.ACTION):
            if self.children:
                raise BTError(f"{self.kind.value} node '{self.label}' cannot have children")
        elif not self.children:
            raise BTError(f"{self.kind.value} node needs at least one child")

    def is_leaf(self) -> bool:
        return self.kind in (NodeKind.CONDITION, NodeKind.ACTION)

    def walk(self):
        """Pre-order traversal."""
        yield self
        for c in self.children:
            yield from c.walk()


def sequence(*children: BTNode, label: str = "") -> BTNode:
    return BTNode(NodeKind.SEQUENCE, label=label, children=list(children))


def fallback(*children: BTNode, label: str = "") -> BTNode:
    return BTNode(NodeKind.FALLBACK, label=label, children=list(children))


def condition(label: str, binding: Binding | None = None) -> BTNode:
    return BTNode(NodeKind.CONDITION, label=label, binding=binding)


def action(label: str, binding: Binding | None = None) -> BTNode:
    return BTNode(NodeKind.ACTION, label=label, binding=binding)


def tick(node: BTNode, board: Blackboard, trace: list[str] | None = None) -> Status:
    """Tick a tree. Sequence fails/runs on the first non-success child;
    Fallback succeeds/runs on the first non-failure child. Conditions must
    return Success or Failure, never Running. ``trace`` collects visited
    leaf labels in tick order."""
    if node.kind is NodeKind.SEQUENCE:
        for c in node.children:
            s = tick(c, board, trace)
            if s is not Status.SUCCESS:
                return s
        return Status.SUCCESS
    if node.kind is NodeKind.FALLBACK:
        for c in node.children:
            s = tick(c, board, trace)
            if s is not Status.FAILURE:
                return s
        return Status.FAILURE
    # leaf
    if node.binding is None:
        raise UnboundLeafError(f"{node.kind.value} '{node.label}' has no binding")
    if trace is not None:
        trace.append(node.label)
    s = node.binding(board)
    if not isinstance(s, Status):
        raise BTError(f"binding for '{node.label}' returned {s!r}, expected a Status")
    if node.kind is NodeKind.CONDITION and s is Status.RUNNING:
        raise BTError(f"condition '{node.label}' returned Running; conditions are instantaneous")
    return s


def render(node: BTNode) -> str:
    """Deterministic serialization: pre-order, one node per line, two-space
    indentation per depth. Stable, used for golden-file comparisons."""
    lines = []

    def visit(n: BTNode, depth: int):
        text = n.kind.value if not n.label else f"{n.kind.value} {n.label}"
        lines.append("  " * depth + text)
        for c in n.children:
            visit(c, depth + 1)

    visit(node, 0)
    return "\n".join(lines)


def bind(root: BTNode, registry: dict[str, Binding]) -> BTNode:
    """Attach bindings to leaves by label. Labels missing from the registry
    are left unbound and fail at tick time."""
    for n in root.walk():
        if n.is_leaf() and n.label in registry:
            n.binding = registry[n.label]
    return root
