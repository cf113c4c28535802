"""Append-only audit log of forget decisions.

One JSON object per line. With a path the log appends to disk and flushes
after every batch of decisions; without one it buffers in memory (useful for
ephemeral stores and tests). Appends are serialized by a lock.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterable, Optional

from .forgetting import ForgetDecision


class AuditLog:
    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._buffer: list[ForgetDecision] = []
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def append(self, decision: ForgetDecision) -> None:
        self.extend([decision])

    def extend(self, decisions: Iterable[ForgetDecision]) -> None:
        decisions = list(decisions)
        if not decisions:
            return
        with self._lock:
            self._count += len(decisions)
            if self.path is None:
                self._buffer.extend(decisions)
                return
            with open(self.path, "a", encoding="utf-8") as fh:
                for decision in decisions:
                    fh.write(json.dumps(decision.to_dict(), ensure_ascii=False) + "\n")
                fh.flush()

    def entries(self) -> list[ForgetDecision]:
        """All decisions recorded so far (reads the file back when on disk)."""
        with self._lock:
            if self.path is None:
                return list(self._buffer)
            if not self.path.exists():
                return []
            out = []
            for line in self.path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    out.append(ForgetDecision.from_dict(json.loads(line)))
            return out
