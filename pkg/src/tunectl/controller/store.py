"""Versioned resource store with compare-and-swap updates.

An update is accepted only when the caller's expected generation matches the
stored one; every accepted update increments the generation. The file-backed
variant persists each resource as a canonical YAML document under
``<dir>/<kind>s/<namespace>.<name>.yaml`` plus a generation index, making the
whole control-plane state human-inspectable and diff-friendly.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

import yaml

from ..errors import CasConflictError, ResourceExistsError
from .model import Resource, clone_resource, resource_from_doc, resource_key, resource_to_doc


class ResourceStore:
    """In-memory store; the base for the file-backed variant.

    Reads hand out clones so callers never alias the stored mutable state;
    experiment specs themselves are shared and treated as immutable once
    parsed.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._resources: dict[str, Resource] = {}

    def create(self, resource: Resource) -> Resource:
        with self._lock:
            if resource.key in self._resources:
                raise ResourceExistsError(f"resource '{resource.key}' already exists")
            stored = clone_resource(resource)
            stored.generation = 1
            self._resources[stored.key] = stored
            self._persist(stored)
            return clone_resource(stored)

    def get(self, key: str) -> Resource | None:
        with self._lock:
            found = self._resources.get(key)
            return clone_resource(found) if found else None

    def update(self, resource: Resource) -> Resource:
        """CAS write: ``resource.generation`` must equal the stored one."""
        with self._lock:
            current = self._resources.get(resource.key)
            if current is None:
                raise CasConflictError(f"resource '{resource.key}' does not exist")
            if current.generation != resource.generation:
                raise CasConflictError(
                    f"stale write to '{resource.key}': expected generation "
                    f"{current.generation}, got {resource.generation}"
                )
            stored = clone_resource(resource)
            stored.generation = current.generation + 1
            self._resources[stored.key] = stored
            self._persist(stored)
            return clone_resource(stored)

    def keys(self, kind: str | None = None) -> list[str]:
        with self._lock:
            return sorted(
                key
                for key, res in self._resources.items()
                if kind is None or res.kind == kind
            )

    def list(self, kind: str | None = None, namespace: str | None = None) -> list[Resource]:
        with self._lock:
            keys = sorted(self._resources)
            out = []
            for key in keys:
                res = self._resources[key]
                if kind is not None and res.kind != kind:
                    continue
                if namespace is not None and res.namespace != namespace:
                    continue
                out.append(clone_resource(res))
            return out

    def _persist(self, resource: Resource) -> None:
        pass


class FileResourceStore(ResourceStore):
    def __init__(self, root: str | Path):
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "_generations.json"
        self._load()

    def _resource_path(self, resource: Resource) -> Path:
        return self.root / f"{resource.kind}s" / f"{resource.namespace}.{resource.name}.yaml"

    def _load(self) -> None:
        generations: dict[str, int] = {}
        if self._index_path.exists():
            try:
                generations = json.loads(self._index_path.read_text())
            except json.JSONDecodeError:
                generations = {}
        for sub in sorted(self.root.glob("*s/*.yaml")):
            doc = yaml.safe_load(sub.read_text())
            key = resource_key(doc["kind"], doc["namespace"], doc["name"])
            resource = resource_from_doc(doc, generation=generations.get(key, 1))
            self._resources[key] = resource

    def _persist(self, resource: Resource) -> None:
        path = self._resource_path(resource)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = yaml.safe_dump(resource_to_doc(resource), sort_keys=False, width=2**20)
        _atomic_write(path, text)
        generations = {key: res.generation for key, res in self._resources.items()}
        _atomic_write(self._index_path, json.dumps(generations, sort_keys=True, indent=0))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
