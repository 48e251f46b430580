"""Per-document reassembly of recognition results that arrive out of order."""

from __future__ import annotations

from typing import Any, Hashable, Iterable, Mapping


class DuplicateSequenceId(ValueError):
    def __init__(self, seq: int) -> None:
        self.seq = seq
        super().__init__(f"sequence id {seq} seen twice")


class MissingResults(RuntimeError):
    def __init__(self, missing: list[int]) -> None:
        self.missing = missing
        super().__init__(f"no result for sequence ids {missing}")


class Reassembler:
    """Buffers results until every sequence id of a document is resolved.

    Documents register their ids (possibly page by page) and are sealed once
    no more ids will be registered. ``add`` returns the documents it completes,
    each as a list of ``(sequence_id, content)`` sorted by sequence id.
    Results for ids not registered yet are held until they are.
    """

    def __init__(self) -> None:
        self._owner: dict[int, Hashable] = {}
        self._pending: dict[Hashable, set[int]] = {}
        self._done: dict[Hashable, dict[int, Any]] = {}
        self._sealed: set[Hashable] = set()
        self._orphans: dict[int, Any] = {}
        self._seen: set[int] = set()

    def register(self, doc: Hashable, seq_ids: Iterable[int]) -> None:
        if doc in self._sealed:
            raise ValueError(f"document {doc!r} is already sealed")
        pending = self._pending.setdefault(doc, set())
        self._done.setdefault(doc, {})
        for seq in seq_ids:
            if seq in self._owner:
                raise DuplicateSequenceId(seq)
            self._owner[seq] = doc
            if seq in self._orphans:
                self._done[doc][seq] = self._orphans.pop(seq)
            else:
                pending.add(seq)

    def seal(self, doc: Hashable) -> list[tuple[Hashable, list]]:
        self._pending.setdefault(doc, set())
        self._done.setdefault(doc, {})
        self._sealed.add(doc)
        return self._release(doc)

    def add(self, seq: int, content: Any) -> list[tuple[Hashable, list]]:
        if seq in self._seen:
            raise DuplicateSequenceId(seq)
        self._seen.add(seq)
        doc = self._owner.get(seq)
        if doc is None:
            self._orphans[seq] = content
            return []
        self._pending[doc].discard(seq)
        self._done[doc][seq] = content
        return self._release(doc)

    def _release(self, doc: Hashable) -> list[tuple[Hashable, list]]:
        if doc not in self._sealed or self._pending[doc]:
            return []
        done = self._done.pop(doc)
        del self._pending[doc]
        return [(doc, sorted(done.items()))]

    def close(self) -> None:
        """Raise MissingResults if any registered id never got a result."""
        missing = sorted(seq for ids in self._pending.values() for seq in ids)
        missing += sorted(self._orphans)
        if missing:
            raise MissingResults(missing)


def reassemble(
    expected: Mapping[Hashable, Iterable[int]], results: Iterable[tuple[int, Any]]
) -> dict[Hashable, list[tuple[int, Any]]]:
    """Group a result stream by document, restoring sequence order."""
    r = Reassembler()
    out: dict[Hashable, list[tuple[int, Any]]] = {}
    for doc, ids in expected.items():
        r.register(doc, ids)
    for doc in expected:
        out.update(r.seal(doc))
    for seq, content in results:
        out.update(r.add(seq, content))
    r.close()
    return out
