"""In-process object store and task registry (the head node's control store)."""

from __future__ import annotations

import itertools
import pickle
import threading
import uuid
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from ..errors import UnknownRef

INLINE_THRESHOLD = 100 * 1024  # bytes


@dataclass(frozen=True)
class ObjectRef:
    """Handle to a value owned by one :class:`ObjectStore`.

    ``size_hint`` is the serialized size in bytes, or -1 while the
    producing task is still pending.
    """

    id: str
    size_hint: int = -1

    @property
    def inline(self) -> Optional[bool]:
        if self.size_hint < 0:
            return None
        return self.size_hint < INLINE_THRESHOLD


class ObjectStore:
    """Keyed map of immutable values with single insertion per key.

    Values below :data:`INLINE_THRESHOLD` are kept in the inline table
    (carried with the task completion); larger ones go to the store
    proper. Both are resolved the same way by :meth:`get`.
    """

    def __init__(self, inline_threshold: int = INLINE_THRESHOLD):
        self.inline_threshold = inline_threshold
        self._namespace = uuid.uuid4().hex[:12]
        self._counter = itertools.count()
        self._lock = threading.Lock()
        self._inline: Dict[str, Tuple[Any, int]] = {}
        self._stored: Dict[str, Tuple[Any, int]] = {}
        self._issued: set = set()

    def new_id(self) -> str:
        oid = f"{self._namespace}-{next(self._counter):08d}"
        with self._lock:
            self._issued.add(oid)
        return oid

    def owns(self, ref: ObjectRef) -> bool:
        return ref.id in self._issued

    def put(self, value: Any, size: Optional[int] = None, oid: Optional[str] = None) -> ObjectRef:
        """Insert ``value``; ``size`` defaults to its pickled length."""
        if size is None:
            size = len(pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL))
        if oid is None:
            oid = self.new_id()
        elif oid not in self._issued:
            raise UnknownRef(oid)
        table = self._inline if size < self.inline_threshold else self._stored
        with self._lock:
            if oid in self._inline or oid in self._stored:
                raise ValueError(f"object {oid} already stored")
            table[oid] = (value, size)
        return ObjectRef(oid, size)

    def contains(self, ref: ObjectRef) -> bool:
        with self._lock:
            return ref.id in self._inline or ref.id in self._stored

    def get(self, ref: ObjectRef) -> Any:
        with self._lock:
            entry = self._inline.get(ref.id) or self._stored.get(ref.id)
        if entry is None:
            raise UnknownRef(ref.id)
        return entry[0]

    def resolve(self, ref: ObjectRef) -> ObjectRef:
        """``ref`` with its final size hint filled in."""
        with self._lock:
            entry = self._inline.get(ref.id) or self._stored.get(ref.id)
        if entry is None:
            raise UnknownRef(ref.id)
        return ObjectRef(ref.id, entry[1])

    def is_stored(self, ref: ObjectRef) -> bool:
        """True if the value lives in the store proper rather than inline."""
        with self._lock:
            return ref.id in self._stored

    def __len__(self):
        with self._lock:
            return len(self._inline) + len(self._stored)


def store_put(store: ObjectStore, value: Any) -> ObjectRef:
    return store.put(value)


def store_get(store: ObjectStore, ref: ObjectRef) -> Any:
    return store.get(ref)
