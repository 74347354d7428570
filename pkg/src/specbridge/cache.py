"""Verification cache: query tree, per-leaf results and content hashes.

The cache directory holds `manifest.json`, `tree.json` and one text file
per query.  The manifest records a sha256 digest of the specification
source and of every bound network/dataset file, so integrity can be
re-checked by rehashing alone, without invoking the solver.  Paths are
stored both absolute and cache-relative; the relative one wins on
re-check so a cache directory can be moved together with its resources.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import CacheError
from .verify import (
    PropertyStatus, _atomic_write, emit_query_files, tree_from_json,
)

HASH_ALGORITHM = "sha256"
MANIFEST = "manifest.json"
TREE = "tree.json"


def hash_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class CacheReport:
    status: str                       # valid | stale | corrupt
    changed: list = field(default_factory=list)
    reason: Optional[str] = None

    def to_json(self):
        out = {"cache": self.status}
        if self.changed:
            out["changed"] = self.changed
        if self.reason:
            out["reason"] = self.reason
        return out


def write_cache(directory: str, *, spec_path: str, prop: str, tree,
                resources, parameters: Optional[dict] = None,
                slack=None) -> dict:
    """Emit query files, tree and manifest.  Returns the manifest dict."""
    os.makedirs(directory, exist_ok=True)
    from fractions import Fraction
    emit_query_files(tree, directory,
                     slack if slack is not None else Fraction(0))
    entries = []
    for name, path in sorted(resources.paths.items()):
        role = "network" if name in resources.networks else "dataset"
        entries.append({
            "name": name,
            "role": role,
            "path": os.path.abspath(path),
            "relpath": os.path.relpath(os.path.abspath(path),
                                       os.path.abspath(directory)),
            HASH_ALGORITHM: hash_file(path),
        })
    manifest = {
        "version": 1,
        "algorithm": HASH_ALGORITHM,
        "property": prop,
        "spec": {
            "path": os.path.abspath(spec_path),
            "relpath": os.path.relpath(os.path.abspath(spec_path),
                                       os.path.abspath(directory)),
            HASH_ALGORITHM: hash_file(spec_path),
        },
        "resources": entries,
        "parameters": [{"name": k, "value": str(v)}
                       for k, v in sorted((parameters or {}).items())],
        "tree_file": TREE,
        "results": {},
    }
    _write_manifest(directory, manifest)
    return manifest


def _write_manifest(directory: str, manifest: dict):
    _atomic_write(os.path.join(directory, MANIFEST),
                  json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CacheError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CacheError(f"corrupt manifest {path}: {exc}")


def load_tree(directory: str):
    path = os.path.join(directory, TREE)
    try:
        with open(path) as fh:
            return tree_from_json(json.load(fh)["root"])
    except OSError as exc:
        raise CacheError(f"cannot read {path}: {exc}")
    except (json.JSONDecodeError, KeyError) as exc:
        raise CacheError(f"corrupt tree file {path}: {exc}")


def resolve_resource(directory: str, entry: dict) -> Optional[str]:
    """Relative location first, absolute second."""
    rel = os.path.join(directory, entry.get("relpath", ""))
    if entry.get("relpath") and os.path.exists(rel):
        return rel
    if os.path.exists(entry["path"]):
        return entry["path"]
    return None


def check_cache(directory: str) -> CacheReport:
    """Rehash every external resource; never calls the solver."""
    if not os.path.isdir(directory):
        return CacheReport("corrupt", reason=f"no cache at {directory}")
    try:
        manifest = load_manifest(directory)
    except CacheError as exc:
        return CacheReport("corrupt", reason=str(exc))
    if not os.path.exists(os.path.join(directory, manifest.get(
            "tree_file", TREE))):
        return CacheReport("corrupt", reason="tree.json is missing")
    if manifest.get("algorithm") != HASH_ALGORITHM:
        return CacheReport(
            "corrupt",
            reason=f"unsupported hash algorithm {manifest.get('algorithm')!r}")
    changed = []
    spec = manifest.get("spec")
    if spec:
        path = resolve_resource(directory, spec)
        if path is None:
            changed.append({"name": "spec", "state": "missing"})
        elif hash_file(path) != spec[HASH_ALGORITHM]:
            changed.append({"name": "spec", "state": "modified"})
    for entry in manifest.get("resources", []):
        path = resolve_resource(directory, entry)
        if path is None:
            changed.append({"name": entry["name"], "state": "missing"})
        elif hash_file(path) != entry[HASH_ALGORITHM]:
            changed.append({"name": entry["name"], "state": "modified"})
    if changed:
        return CacheReport("stale", changed=changed)
    return CacheReport("valid")


def record_result(directory: str, leaf_id: str, result: dict):
    """Persist one leaf verdict: {"status": "unsat"} or
    {"status": "sat", "assignment": {...}, "witness": {...}}."""
    manifest = load_manifest(directory)
    known = _leaf_ids(directory, manifest)
    if leaf_id not in known:
        raise CacheError(f"unknown query id {leaf_id!r}")
    manifest.setdefault("results", {})[leaf_id] = result
    _write_manifest(directory, manifest)


def _leaf_ids(directory: str, manifest: dict) -> set:
    with open(os.path.join(directory, manifest.get("tree_file", TREE))) as fh:
        doc = json.load(fh)

    def walk(node):
        if "leaf" in node:
            yield node["leaf"]["id"]
        else:
            for c in node.get("children", []):
                yield from walk(c)
    return set(walk(doc["root"]))


def compute_status(tree_doc: dict, results: dict) -> PropertyStatus:
    """Three-valued verdict from stored leaf results only (pure)."""
    state, payload = _eval_node(tree_doc, results)
    if state == "sat":
        leaf_id, result = payload
        return PropertyStatus(
            "falsified", witness=result.get("witness"),
            embedding=result.get("assignment"), leaf=leaf_id)
    if state == "unsat":
        return PropertyStatus("verified")
    return PropertyStatus("error", reason="unsolved queries: "
                          + ", ".join(sorted(payload)))


def _eval_node(node: dict, results: dict):
    if "leaf" in node:
        leaf_id = node["leaf"]["id"]
        result = results.get(leaf_id)
        if result is None:
            return ("unsolved", {leaf_id})
        if result.get("status") == "sat":
            return ("sat", (leaf_id, result))
        return ("unsat", None)
    states = [_eval_node(c, results) for c in node["children"]]
    if node["op"] == "or":
        for s in states:
            if s[0] == "sat":
                return s
        unsolved = set()
        for s in states:
            if s[0] == "unsolved":
                unsolved |= s[1]
        if unsolved:
            return ("unsolved", unsolved)
        return ("unsat", None)
    # and
    for s in states:
        if s[0] == "unsat":
            return s
    unsolved = set()
    for s in states:
        if s[0] == "unsolved":
            unsolved |= s[1]
    if unsolved:
        return ("unsolved", unsolved)
    for s in states:
        if s[0] == "sat":
            return s
    return ("sat", None)


def read_status(directory: str, verify_integrity: bool = True
                ) -> PropertyStatus:
    """Verdict from the cache.  With verify_integrity (the default), a
    stale or corrupt cache reports an error rather than Verified."""
    if verify_integrity:
        report = check_cache(directory)
        if report.status != "valid":
            return PropertyStatus(
                "error", reason=f"cache is {report.status}: "
                + (report.reason or json.dumps(report.changed)))
    manifest = load_manifest(directory)
    with open(os.path.join(directory, manifest.get("tree_file", TREE))) as fh:
        tree_doc = json.load(fh)
    return compute_status(tree_doc["root"], manifest.get("results", {}))
