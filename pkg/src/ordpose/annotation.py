"""Adaptive pairwise-question scheduler: infer a global depth ordering of N
joints (with ties) from closer/farther/same/ambiguous answers, using far fewer
questions than the exhaustive C(N,2) bound.

Strategy: binary insertion over an ordered list of equivalence classes.
Joints are inserted one at a time in a fixed order; each insertion binary
searches the class list, comparing against the first member of the probed
class. "same" merges into the probed class; "ambiguous" retries against a
different member of the class if one exists, otherwise soft-merges with a
flag. Flagged joints are excluded from exported relations by default.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, ProtocolError
from .supervision import OrdinalRelation, RelationSet

ANSWERS = ("closer", "farther", "same", "ambiguous")


@dataclass
class AnnotationSession:
    """Evolving global-ordering state for one item.

    ``classes`` partitions the already-placed joints, front = closest to the
    camera. The pending joint is binary-searched into the class list via the
    (lo, hi, mid, rep_pointer) cursor.
    """

    item_id: str
    joint_count: int
    insertion_order: list[int] = field(default_factory=list)
    classes: list[list[int]] = field(default_factory=list)
    answer_log: list[tuple[int, int, str]] = field(default_factory=list)
    soft_tied: list[int] = field(default_factory=list)
    next_insert_idx: int = 1
    pending_joint: int | None = None
    lo: int = 0
    hi: int = 0
    rep_pointer: int = 0
    status: str = "in-progress"

    def __post_init__(self):
        if self.joint_count < 2:
            raise ContractViolationError("need at least 2 joints to order")
        if not self.insertion_order:
            self.insertion_order = list(range(self.joint_count))
        if sorted(self.insertion_order) != list(range(self.joint_count)):
            raise ContractViolationError("insertion_order must be a permutation of all joints")
        if not self.classes:
            self.classes = [[self.insertion_order[0]]]
            self._begin_insertion()

    @property
    def question_count(self) -> int:
        return len(self.answer_log)

    def _begin_insertion(self):
        if self.next_insert_idx >= self.joint_count:
            self.status = "complete"
            self.pending_joint = None
            return
        self.pending_joint = self.insertion_order[self.next_insert_idx]
        self.lo, self.hi = 0, len(self.classes)
        self.rep_pointer = 0

    def _mid(self) -> int:
        return (self.lo + self.hi) // 2

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "joint_count": self.joint_count,
            "insertion_order": list(self.insertion_order),
            "classes": [list(c) for c in self.classes],
            "answer_log": [list(entry) for entry in self.answer_log],
            "soft_tied": list(self.soft_tied),
            "next_insert_idx": self.next_insert_idx,
            "pending_joint": self.pending_joint,
            "lo": self.lo,
            "hi": self.hi,
            "rep_pointer": self.rep_pointer,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationSession":
        session = cls(item_id=obj["item_id"], joint_count=obj["joint_count"],
                      insertion_order=list(obj["insertion_order"]))
        session.classes = [list(c) for c in obj["classes"]]
        session.answer_log = [(int(i), int(j), str(a)) for i, j, a in obj["answer_log"]]
        session.soft_tied = list(obj["soft_tied"])
        session.next_insert_idx = obj["next_insert_idx"]
        session.pending_joint = obj["pending_joint"]
        session.lo, session.hi = obj["lo"], obj["hi"]
        session.rep_pointer = obj["rep_pointer"]
        session.status = obj["status"]
        return session


def next_question(session: AnnotationSession) -> tuple[int, int] | None:
    """The next (pending_joint, representative) comparison, or None if done.

    Pure read: repeated calls without an intervening answer return the same
    pair.
    """
    if session.status == "complete":
        raise ContractViolationError("session already complete")
    cls = session.classes[session._mid()]
    return session.pending_joint, cls[session.rep_pointer]


def submit_answer(session: AnnotationSession, answer: str) -> AnnotationSession:
    """Advance the insertion state machine with one answer (mutates session)."""
    if answer not in ANSWERS:
        raise ProtocolError(f"invalid answer {answer!r}")
    if session.status == "complete" or session.pending_joint is None:
        raise ProtocolError("no pending question")
    i, j = next_question(session)
    session.answer_log.append((i, j, answer))
    mid = session._mid()

    if answer == "same":
        session.classes[mid].append(i)
        session.next_insert_idx += 1
        session._begin_insertion()
    elif answer == "ambiguous":
        if session.rep_pointer + 1 < len(session.classes[mid]):
            session.rep_pointer += 1  # retry against another member
        else:
            session.classes[mid].append(i)  # soft tie, flagged
            session.soft_tied.append(i)
            session.next_insert_idx += 1
            session._begin_insertion()
    else:
        if answer == "closer":
            session.hi = mid
        else:  # farther
            session.lo = mid + 1
        session.rep_pointer = 0
        if session.lo >= session.hi:
            session.classes.insert(session.lo, [i])
            session.next_insert_idx += 1
            session._begin_insertion()
    return session


def final_ordering(session: AnnotationSession) -> list[list[int]]:
    """Ordered equivalence classes, closest first."""
    if session.status != "complete":
        raise ContractViolationError("session not complete")
    return [list(c) for c in session.classes]


def ordering_to_relations(classes: list[list[int]], exclude: set[int] | frozenset = frozenset()) -> RelationSet:
    """Expand ordered classes into all implied pairwise relations.

    r = 0 within a class, +/-1 across classes by class order. Pairs touching an
    excluded (soft-tied) joint are dropped. Transitively consistent by
    construction.
    """
    rank = {}
    for pos, cls in enumerate(classes):
        for joint in cls:
            rank[joint] = pos
    out = RelationSet()
    joints = sorted(rank)
    for a_idx, i in enumerate(joints):
        for j in joints[a_idx + 1 :]:
            if i in exclude or j in exclude:
                continue
            if rank[i] == rank[j]:
                r = 0
            else:
                r = +1 if rank[i] < rank[j] else -1
            out.add(OrdinalRelation(i, j, r))
    return out


def session_relations(session: AnnotationSession, exclude_flagged: bool = True) -> RelationSet:
    exclude = set(session.soft_tied) if exclude_flagged else set()
    return ordering_to_relations(final_ordering(session), exclude)


def check_transitive_consistency(relations: RelationSet, joint_count: int) -> bool:
    """Brute-force check that a relation set admits a global preorder.

    Verifies every triple: ties compose to ties, a tie plus a strict relation
    composes to the same strict relation, and no strict cycle exists.
    """
    rel = np.zeros((joint_count, joint_count), dtype=int)
    seen = np.zeros((joint_count, joint_count), dtype=bool)
    for r in relations:
        rel[r.i, r.j], rel[r.j, r.i] = r.r, -r.r
        seen[r.i, r.j] = seen[r.j, r.i] = True
    for a in range(joint_count):
        for b in range(joint_count):
            for c in range(joint_count):
                if a == b or b == c or a == c:
                    continue
                if not (seen[a, b] and seen[b, c] and seen[a, c]):
                    continue
                ab, bc, ac = rel[a, b], rel[b, c], rel[a, c]
                if ab == 0 and bc == 0 and ac != 0:
                    return False
                if ab == 0 and bc != 0 and ac != bc:
                    return False
                if ab != 0 and bc == 0 and ac != ab:
                    return False
                if ab == bc != 0 and ac != ab:
                    return False
    return True


def run_simulated_session(pose, annotator, seed: int = 0, item_id: str = "sim",
                          insertion_order: list[int] | None = None) -> AnnotationSession:
    """Drive a full session with the simulated annotator (deterministic)."""
    from .synth import annotate

    pose = np.asarray(pose, dtype=float)
    session = AnnotationSession(item_id=item_id, joint_count=pose.shape[0],
                                insertion_order=insertion_order or [])
    while session.status != "complete":
        i, j = next_question(session)
        submit_answer(session, annotate(annotator, pose, i, j, seed=seed))
    return session


def binary_insertion_question_bound(n: int) -> int:
    """Worst-case comparisons for binary insertion of n items: sum ceil(log2 k)."""
    return int(sum(int(np.ceil(np.log2(k))) for k in range(2, n + 1)))
