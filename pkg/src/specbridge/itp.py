"""Proof-assistant interface files backed by the verification cache.

The property and its supporting definitions are rendered nearly verbatim
so domain experts can read the exported statement: declarations keep
their surface layout, a rendering table swaps Rat/forall/connectives for
the prover's vocabulary, external networks become postulates, and the
property itself is exported as a definition plus a postulate of its
truth.  A header pins
the cache directory and manifest hash and names the `check-cache` command
as the integrity hook, so the surrounding proof can re-validate the claim
by rehashing, never by re-verification.

Every rendered declaration is preceded by a `-- [vcl] <kind>` marker;
`reverse_render` uses the markers and the inverted table to reconstruct
source that re-parses to the original declarations, which is how the
round-trip test pins the rendering.
"""
from __future__ import annotations

import json
import os
import re

from .errors import ExportError
from . import syntax as S
from .syntax import Program, print_expr

DEFAULT_TABLE = os.path.join(os.path.dirname(__file__), "data",
                             "agda_table.json")


def load_table(path: str = DEFAULT_TABLE) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _apply_table(text: str, table: dict, reverse: bool = False) -> str:
    words = table["words"]
    operators = table["operators"]
    if reverse:
        words = {v: k for k, v in words.items()}
        operators = {v: k for k, v in operators.items()}
    for src, dst in sorted(operators.items(), key=lambda kv: -len(kv[0])):
        text = text.replace(src, dst)
    for src, dst in words.items():
        text = re.sub(rf"(?<![\w']){re.escape(src)}(?![\w'])", dst, text)
    return text


def _dependencies(program: Program, root: str) -> list:
    """Declarations the property needs, in program order."""
    by_name = {d.name: d for d in program.decls}
    needed = set()

    def visit(name):
        if name in needed or name not in by_name:
            return
        needed.add(name)
        d = by_name[name]
        for ref in _referenced(d):
            visit(ref)

    visit(root)
    return [d for d in program.decls if d.name in needed]


def _referenced(decl) -> set:
    out = set()

    def walk_type(t):
        if isinstance(t, S.TVar):
            out.add(t.name)
        for v in getattr(t, "__dict__", {}).values():
            if isinstance(v, S.Type):
                walk_type(v)

    def walk(e):
        if isinstance(e, S.Var) and e.scope == "global":
            out.add(e.name)
        for v in e.__dict__.values():
            if isinstance(v, S.Expr):
                walk(v)
            elif isinstance(v, tuple):
                for x in v:
                    if isinstance(x, S.Expr):
                        walk(x)
            elif isinstance(v, S.Type):
                walk_type(v)

    if decl.synonym is not None:
        walk_type(decl.synonym)
    if decl.signature is not None:
        walk_type(decl.signature)
    if decl.body is not None:
        walk(decl.body)
    return out


def _render_decl(d, table: dict) -> str:
    head = f"-- [vcl] {d.kind}\n"
    if d.kind == S.TYPE_SYNONYM:
        body = f"{d.name} : Set\n{d.name} = {d.synonym}"
    elif d.kind in (S.NETWORK, S.DATASET, S.PARAMETER):
        body = f"postulate {d.name} : {d.signature}  -- external {d.kind}"
    elif d.kind == S.PROPERTY:
        body = (f"{d.name} : {d.signature}\n"
                f"{d.name} = {print_expr(d.body)}\n\n"
                f"postulate {d.name}-holds : IsTrue {d.name}")
    else:
        sig = "" if d.signature is None else f"{d.name} : {d.signature}\n"
        body = f"{sig}{d.name} = {print_expr(d.body)}"
    return head + _apply_table(body, table)


def export_interface(program: Program, prop: str, *, status: str,
                     cache_dir: str, manifest_hash: str,
                     module_name: str = None, table_path: str = None,
                     allow_unverified: bool = False) -> str:
    """Deterministic prover-facing source for a checked property."""
    if status != "verified" and not allow_unverified:
        raise ExportError(
            f"property {prop!r} has status {status!r}; refusing to export "
            "a postulate (pass --allow-unverified to override)")
    table = load_table(table_path or DEFAULT_TABLE)
    decls = _dependencies(program, prop)
    module = module_name or prop.capitalize()
    lines = [
        "-- Generated interface; do not edit.",
        f"-- property: {prop}",
        f"-- status: {status}",
        f"-- cache: {cache_dir}",
        f"-- manifest-sha256: {manifest_hash}",
        "-- integrity: run `specbridge check-cache --cache-dir "
        f"{cache_dir}`",
        "--   and require exit code 0 before trusting the postulate below.",
    ]
    if status != "verified":
        lines.append("-- WARNING: UNCHECKED POSTULATE (property not "
                     "verified against the cache).")
    lines += [
        "",
        f"module {module} where",
        "",
        "open import specbridge.prelude  -- Tensor, IsTrue, rationals",
        "",
    ]
    for d in decls:
        lines.append(_render_decl(d, table))
        lines.append("")
    return "\n".join(lines)


def reverse_render(text: str, table_path: str = None) -> str:
    """Reconstruct specification source from an exported file.

    Only the `-- [vcl]`-marked declarations are read back; the prover
    scaffolding (module header, postulates of truth) is dropped.
    """
    table = load_table(table_path or DEFAULT_TABLE)
    blocks = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        m = re.match(r"-- \[vcl\] (\w+)$", lines[i])
        if not m:
            i += 1
            continue
        kind = m.group(1)
        chunk = []
        i += 1
        while i < len(lines) and lines[i].strip():
            chunk.append(lines[i])
            i += 1
        blocks.append(_reverse_decl(kind, chunk, table))
    return "\n\n".join(blocks) + "\n"


def _reverse_decl(kind: str, chunk: list, table: dict) -> str:
    text = "\n".join(chunk)
    text = _apply_table(text, table, reverse=True)
    text = re.sub(r"\s+-- external \w+$", "", text, flags=re.M)
    if kind == S.TYPE_SYNONYM:
        m = re.match(r"(\w+) : Set\n\1 = (.+)", text)
        return f"type {m.group(1)} = {m.group(2)}"
    if kind in (S.NETWORK, S.DATASET, S.PARAMETER):
        m = re.match(r"postulate (\w+) : (.+)", text)
        return f"@{kind}\n{m.group(1)} : {m.group(2)}"
    if kind == S.PROPERTY:
        text = re.sub(r"\n*postulate \w+-holds : IsTrue \w+$", "", text)
        return f"@{kind}\n{text}"
    return text
