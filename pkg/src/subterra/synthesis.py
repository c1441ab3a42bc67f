"""Back-chained behavior-tree synthesis.

Starting from a goal condition, each condition that some action can satisfy
is replaced by Fallback(condition, Sequence(preconditions..., action)),
recursively, until no expandable condition remains. The tree is fully
expanded before execution so feasibility is checkable up front.

Also assembles the fixed mission-level tree that switches between the
current inspection task and the default fly-home behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .bt import BTNode, NodeKind, action, condition, fallback, sequence


class LibraryError(ValueError):
    pass


class AmbiguityError(LibraryError):
    """More than one action claims to solve the same condition."""


class CycleError(LibraryError):
    """Cyclic dependency between preconditions and postconditions."""


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class ActionSpec:
    name: str
    preconditions: tuple[str, ...] = ()
    postconditions: tuple[str, ...] = ()

    def __post_init__(self):
        overlap = set(self.preconditions) & set(self.postconditions)
        if overlap:
            raise LibraryError(
                f"action '{self.name}' lists {sorted(overlap)} as both pre- and postcondition"
            )


class ActionLibrary:
    """Validated pool of agent capabilities. Each condition is solved by at
    most one action, and the solves-relation graph is acyclic; both are
    enforced here so synthesis is deterministic and terminates."""

    def __init__(self, actions: list[ActionSpec]):
        names = [a.name for a in actions]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise LibraryError(f"duplicate action names: {dupes}")
        self.actions = list(actions)
        self._solver: dict[str, ActionSpec] = {}
        for a in actions:
            for post in a.postconditions:
                if post in self._solver:
                    raise AmbiguityError(
                        f"condition '{post}' is solved by both "
                        f"'{self._solver[post].name}' and '{a.name}'"
                    )
                self._solver[post] = a
        self._check_acyclic()

    def _check_acyclic(self):
        # condition -> solving action -> its preconditions -> ...
        WHITE, GRAY, BLACK = 0, 1, 2
        color: dict[str, int] = {}

        def visit(cond: str, stack: list[str]):
            color[cond] = GRAY
            stack.append(cond)
            a = self._solver.get(cond)
            if a is not None:
                for pre in a.preconditions:
                    c = color.get(pre, WHITE)
                    if c == GRAY:
                        cycle = stack[stack.index(pre):] + [pre]
                        raise CycleError("cyclic condition dependency: " + " -> ".join(cycle))
                    if c == WHITE:
                        visit(pre, stack)
            stack.pop()
            color[cond] = BLACK

        for cond in list(self._solver):
            if color.get(cond, WHITE) == WHITE:
                visit(cond, [])

    def solver_for(self, cond: str) -> ActionSpec | None:
        return self._solver.get(cond)


def load_library(text: str) -> ActionLibrary:
    """Load an action library from JSON: a list of {name, pre, post}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise LibraryError(f"malformed library document at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, list):
        raise LibraryError("library document must be a JSON list of actions")
    specs = []
    for n, entry in enumerate(doc):
        if not isinstance(entry, dict) or "name" not in entry:
            raise LibraryError(f"library entry {n} must be an object with a 'name'")
        specs.append(ActionSpec(
            name=entry["name"],
            preconditions=tuple(entry.get("pre", [])),
            postconditions=tuple(entry.get("post", [])),
        ))
    return ActionLibrary(specs)


def load_library_file(path) -> ActionLibrary:
    with open(path, encoding="utf-8") as f:
        return load_library(f.read())


def find_action_for(lib: ActionLibrary, cond: str) -> ActionSpec | None:
    """The unique action whose postconditions include ``cond``, or None if
    the condition is primitive/environmental."""
    return lib.solver_for(cond)


def _is_expanded(root: BTNode, node: BTNode) -> bool:
    """A condition already guards its solving subtree when it sits as the
    first child of a Fallback produced by a previous expansion."""
    for n in root.walk():
        if n.kind is NodeKind.FALLBACK and n.children and n.children[0] is node:
            return True
    return False


def _find_parent(root: BTNode, node: BTNode) -> BTNode | None:
    for n in root.walk():
        if any(c is node for c in n.children):
            return n
    return None


def expand(root: BTNode, cond_node: BTNode, lib: ActionLibrary) -> BTNode:
    """Replace ``cond_node`` with Fallback(cond, Sequence(pre..., action)).
    A Sequence of a single child (action without preconditions) collapses to
    the action itself. Returns the (possibly new) tree root."""
    if cond_node.kind is not NodeKind.CONDITION:
        raise ExpansionError(f"cannot expand {cond_node.kind.value} '{cond_node.label}'")
    if cond_node is not root and _find_parent(root, cond_node) is None:
        raise ExpansionError(f"condition '{cond_node.label}' is not in the tree")
    if _is_expanded(root, cond_node):
        raise ExpansionError(f"condition '{cond_node.label}' is already expanded")
    solver = lib.solver_for(cond_node.label)
    if solver is None:
        raise ExpansionError(f"no action solves condition '{cond_node.label}'")

    act = action(solver.name)
    if solver.preconditions:
        t1 = sequence(*[condition(p) for p in solver.preconditions], act)
    else:
        t1 = act
    t2 = fallback(condition(cond_node.label), t1)

    if cond_node is root:
        return t2
    parent = _find_parent(root, cond_node)
    parent.children[parent.children.index(cond_node)] = t2
    return root


def generate_behavior_tree(lib: ActionLibrary, goal: str) -> BTNode:
    """Fully expand a goal condition against the library: repeatedly expand
    the first (pre-order) condition that has a solving action, until none
    remain. Output is order-invariant for unambiguous libraries."""
    root: BTNode = condition(goal)
    while True:
        pending = [n for n in root.walk()
                   if n.kind is NodeKind.CONDITION
                   and lib.solver_for(n.label) is not None
                   and not _is_expanded(root, n)]
        if not pending:
            return root
        root = expand(root, pending[0], lib)


def assemble_mission_tree(task_tree: BTNode, default_tree: BTNode) -> BTNode:
    """Mission-level switch: run the inspection subtree until the current
    inspection is completed, then the default behavior."""
    return sequence(
        fallback(condition("Current inspection completed?"), task_tree),
        default_tree,
    )


def default_behavior_tree() -> BTNode:
    """Hand-declared default behavior: once idle long enough, fly back to
    the home location and land; do nothing when already landed."""
    return fallback(
        condition("Landed?"),
        sequence(
            action("Hold position"),
            action("Fly to home location"),
            action("Land"),
        ),
    )
