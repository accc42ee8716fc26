"""
Workspace copies, content hashing and file snapshots.
"""

import hashlib
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, Iterable, Optional

from app.errors import RevertMismatch

logger = logging.getLogger(__name__)

IGNORED_DIRS = {".git", ".flakytrace"}


def copy_workspace(workspace: str, prefix: str = "flaky-mender-") -> str:
    """Copy a workspace into a fresh temporary directory and return the copy's path."""
    parent = tempfile.mkdtemp(prefix=prefix)
    target = os.path.join(parent, "ws")
    shutil.copytree(workspace, target, symlinks=True, ignore=shutil.ignore_patterns(*IGNORED_DIRS))
    logger.debug(f"[WS] copied {workspace} -> {target}")
    return target


def remove_workspace(path: str) -> None:
    parent = os.path.dirname(path)
    if os.path.basename(path) == "ws" and os.path.basename(parent).startswith("flaky-mender"):
        shutil.rmtree(parent, ignore_errors=True)
    else:
        shutil.rmtree(path, ignore_errors=True)


def iter_files(root: str) -> Iterable[str]:
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in IGNORED_DIRS)
        for name in sorted(filenames):
            yield Path(os.path.relpath(os.path.join(dirpath, name), root)).as_posix()


def tree_hash(root: str) -> str:
    """sha256 over every relative path and file content, in sorted order."""
    digest = hashlib.sha256()
    for rel in iter_files(root):
        digest.update(rel.encode("utf-8") + b"\0")
        with open(os.path.join(root, rel), "rb") as f:
            digest.update(hashlib.sha256(f.read()).digest())
    return digest.hexdigest()


def read_text(root: str, rel: str) -> str:
    with open(Path(root) / rel, "r", encoding="utf-8", newline="") as f:
        return f.read()


def write_text(root: str, rel: str, text: str) -> None:
    path = Path(root) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps the exact bytes we computed offsets against
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


class Snapshot:
    """Saved bytes of selected files plus the tree hash they belong to."""

    def __init__(self, root: str, files: Iterable[str]):
        self.root = root
        self.files: Dict[str, Optional[bytes]] = {}
        for rel in files:
            path = Path(root) / rel
            self.files[rel] = path.read_bytes() if path.exists() else None
        self.digest = tree_hash(root)

    def restore(self) -> None:
        """
        Put the saved files back and check the tree hash.

        Raises:
            RevertMismatch: the tree differs from the snapshot after restoring.
        """
        for rel, data in self.files.items():
            path = Path(self.root) / rel
            if data is None:
                if path.exists():
                    path.unlink()
            else:
                path.write_bytes(data)
        current = tree_hash(self.root)
        if current != self.digest:
            raise RevertMismatch(f"workspace hash {current[:12]} != snapshot {self.digest[:12]}")
        logger.debug(f"[WS] restored snapshot {self.digest[:12]}")
