"""Repository-level metadata and per-source candidate file ranking.

Builds one immutable index per repository: parsed per-file syntax,
import resolution, import usage lines, sibling and similar-name
relations, parent/child class links, and byte-identical duplicate
groups. On top of that sits ``rank_source_files``, which orders
candidate context files for each of the ten prompt sources.

The index serializes to a canonical JSON cache (sorted keys, fixed
separators) so identical inputs re-serialize byte-identically; the
cache stores content hashes and is discarded when any file changes.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .javaparse import (
    ClassDecl,
    FieldDecl,
    FileSyntaxIndex,
    ImportDecl,
    MethodDecl,
    Occurrence,
    SourceFile,
    Span,
    parse_file,
)

SCHEMA_VERSION = 1

PROMPT_SOURCES = (
    "Current",
    "ParentClass",
    "Import",
    "Sibling",
    "SimilarName",
    "ChildClass",
    "ImportOfSibling",
    "ImportOfSimilarName",
    "ImportOfParentClass",
    "ImportOfChildClass",
)

_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z0-9])|[A-Z]?[a-z0-9]+|[A-Z]+")


def name_parts(path: str) -> frozenset[str]:
    """Lowercased filename parts split on underscores and camel case."""
    stem = path.rsplit("/", 1)[-1]
    if stem.endswith(".java"):
        stem = stem[:-5]
    parts: set[str] = set()
    for chunk in stem.split("_"):
        for part in _CAMEL_RE.findall(chunk):
            parts.add(part.lower())
    return frozenset(parts)


@dataclass
class RepoIndex:
    repo_id: str
    root: str
    files: dict[str, FileSyntaxIndex]
    sources: dict[str, SourceFile]
    file_hashes: dict[str, str]
    class_to_file: dict[str, str]
    import_to_file: dict[str, dict[str, str | None]]
    import_usages: dict[str, list[tuple[str, list[int]]]]
    siblings: dict[str, list[str]]
    similar_names: dict[str, list[str]]
    parent_class_file: dict[str, dict[str, str | None]]
    child_class_files: dict[str, list[str]]
    duplicate_sets: list[list[str]]
    diagnostics: list[str] = field(default_factory=list)

    @property
    def duplicate_paths(self) -> set[str]:
        return {p for group in self.duplicate_sets for p in group}


def _iter_java_files(root: Path) -> list[str]:
    return sorted(
        p.relative_to(root).as_posix()
        for p in root.rglob("*.java")
        if p.is_file()
    )


def _occurrence_lines(index: FileSyntaxIndex, name: str) -> list[int]:
    """Lines of every non-import occurrence of ``name``, one per occurrence."""
    lines = [
        o.span.start_line
        for bucket in (index.identifiers, index.type_identifiers)
        for o in bucket
        if o.text == name
    ]
    return sorted(lines)


def build_repo_index(root: str | Path, repo_id: str | None = None) -> RepoIndex:
    """Parse every ``.java`` file under ``root`` and collate metadata."""
    rootp = Path(root)
    rid = repo_id if repo_id is not None else rootp.name
    files: dict[str, FileSyntaxIndex] = {}
    sources: dict[str, SourceFile] = {}
    hashes: dict[str, str] = {}
    diagnostics: list[str] = []
    raw: dict[str, bytes] = {}
    for rel in _iter_java_files(rootp):
        try:
            data = (rootp / rel).read_bytes()
            text = data.decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            diagnostics.append(f"{rel}: {exc}")
            continue
        raw[rel] = data
        src = SourceFile.from_text(rel, text)
        sources[rel] = src
        hashes[rel] = hashlib.sha256(data).hexdigest()
        files[rel] = parse_file(src)
        if files[rel].parse_error:
            diagnostics.append(f"{rel}: parse failed, empty index used")

    class_to_file: dict[str, str] = {}
    qualified: dict[str, str] = {}
    for rel in sorted(files):
        idx = files[rel]
        for cls in idx.classes:
            class_to_file.setdefault(cls.name, rel)
            if idx.package_name:
                qualified.setdefault(f"{idx.package_name}.{cls.name}", rel)
            else:
                qualified.setdefault(cls.name, rel)

    import_to_file: dict[str, dict[str, str | None]] = {}
    import_usages: dict[str, list[tuple[str, list[int]]]] = {}
    for rel, idx in files.items():
        resolved: dict[str, str | None] = {}
        usages: list[tuple[str, list[int]]] = []
        for imp in idx.imports:
            resolved[imp.path] = qualified.get(imp.path)
            usages.append((imp.path, _occurrence_lines(idx, imp.simple_name)))
        import_to_file[rel] = resolved
        import_usages[rel] = usages

    siblings: dict[str, list[str]] = {}
    for rel in files:
        directory = rel.rsplit("/", 1)[0] if "/" in rel else ""
        sibs = [
            other
            for other in files
            if other != rel
            and (other.rsplit("/", 1)[0] if "/" in other else "") == directory
        ]
        siblings[rel] = sorted(sibs)

    parts = {rel: name_parts(rel) for rel in files}
    similar_names: dict[str, list[str]] = {
        rel: sorted(
            other
            for other in files
            if other != rel and parts[rel] & parts[other]
        )
        for rel in files
    }

    parent_class_file: dict[str, dict[str, str | None]] = {}
    for rel, idx in files.items():
        per_class: dict[str, str | None] = {}
        for cls in idx.classes:
            per_class[cls.name] = _resolve_parent(rel, idx, cls, files, qualified)
        parent_class_file[rel] = per_class

    child_class_files: dict[str, list[str]] = {rel: [] for rel in files}
    for rel in sorted(files):
        for cls, parent in parent_class_file[rel].items():
            if parent is not None and parent != rel and rel not in child_class_files[parent]:
                child_class_files[parent].append(rel)

    by_hash: dict[str, list[str]] = {}
    for rel in sorted(raw):
        by_hash.setdefault(hashes[rel], []).append(rel)
    duplicate_sets = []
    for digest in sorted(by_hash):
        group = by_hash[digest]
        if len(group) < 2:
            continue
        base = raw[group[0]]
        if all(raw[p] == base for p in group[1:]):
            duplicate_sets.append(sorted(group))
    duplicate_sets.sort(key=lambda g: g[0])

    return RepoIndex(
        repo_id=rid,
        root=str(rootp),
        files=files,
        sources=sources,
        file_hashes=hashes,
        class_to_file=class_to_file,
        import_to_file=import_to_file,
        import_usages=import_usages,
        siblings=siblings,
        similar_names=similar_names,
        parent_class_file=parent_class_file,
        child_class_files=child_class_files,
        duplicate_sets=duplicate_sets,
        diagnostics=diagnostics,
    )


def _resolve_parent(
    rel: str,
    idx: FileSyntaxIndex,
    cls: ClassDecl,
    files: dict[str, FileSyntaxIndex],
    qualified: dict[str, str],
) -> str | None:
    if cls.extends_name is None:
        return None
    for imp in idx.imports:
        if imp.simple_name == cls.extends_name:
            return qualified.get(imp.path)
    candidates = sorted(
        other
        for other, oidx in files.items()
        if any(c.name == cls.extends_name for c in oidx.classes)
    )
    if not candidates:
        return None
    same_package = [
        c for c in candidates if files[c].package_name == idx.package_name
    ]
    pool = same_package or candidates
    return pool[0]


# ranking -------------------------------------------------------------


def _usage_distance(usages: list[int], hole_line: int) -> float:
    if not usages:
        return float("inf")
    return min(abs(line - hole_line) for line in usages)


def _ranked_imports_by_distance(index: RepoIndex, hole_file: str, hole_line: int) -> list[str]:
    best: dict[str, float] = {}
    usage_map = dict(index.import_usages.get(hole_file, []))
    for imp, resolved in index.import_to_file.get(hole_file, {}).items():
        if resolved is None or resolved == hole_file:
            continue
        dist = _usage_distance(usage_map.get(imp, []), hole_line)
        if resolved not in best or dist < best[resolved]:
            best[resolved] = dist
    return sorted(best, key=lambda p: (best[p], p))


def _common_import_ranking(
    index: RepoIndex, hole_file: str, hole_line: int, candidates: list[str]
) -> list[str]:
    """Order candidates by nearest shared-import usage in the hole file.

    More shared imports breaks proximity ties; candidates sharing no
    import come last in path order.
    """
    current_imports = set(index.import_to_file.get(hole_file, {}))
    usage_map = dict(index.import_usages.get(hole_file, []))
    scored: list[tuple[float, int, str]] = []
    unscored: list[str] = []
    for cand in candidates:
        if cand == hole_file:
            continue
        common = current_imports & set(index.import_to_file.get(cand, {}))
        if not common:
            unscored.append(cand)
            continue
        proximity = min(
            _usage_distance(usage_map.get(imp, []), hole_line) for imp in common
        )
        scored.append((proximity, -len(common), cand))
    ordered = [c for _, _, c in sorted(scored)]
    return ordered + sorted(unscored)


def _parent_class_files(index: RepoIndex, hole_file: str, hole_line: int) -> list[str]:
    idx = index.files[hole_file]
    best: tuple[float, int] | None = None
    best_file: str | None = None
    for pos, cls in enumerate(idx.classes):
        parent = index.parent_class_file.get(hole_file, {}).get(cls.name)
        if parent is None or parent == hole_file:
            continue
        span = cls.span
        if span.start_line <= hole_line <= span.end_line:
            distance = 0.0
        else:
            distance = min(
                abs(hole_line - span.start_line), abs(hole_line - span.end_line)
            )
        key = (distance, pos)
        if best is None or key < best:
            best = key
            best_file = parent
    return [best_file] if best_file is not None else []


def _import_of(index: RepoIndex, hole_file: str, x_files: list[str]) -> list[str]:
    freq: dict[str, int] = {}
    for xf in x_files:
        usage_map = dict(index.import_usages.get(xf, []))
        for imp, resolved in index.import_to_file.get(xf, {}).items():
            if resolved is None or resolved == hole_file:
                continue
            freq[resolved] = freq.get(resolved, 0) + len(usage_map.get(imp, []))
    return sorted(freq, key=lambda p: (-freq[p], p))


def rank_source_files(index: RepoIndex, source: str, hole) -> list[str]:
    """Ordered candidate files for one prompt source and hole.

    ``hole`` needs ``file`` and ``line`` attributes. Every result path
    exists in the index; only the Current source returns the hole file.
    """
    hole_file: str = hole.file
    hole_line: int = hole.line
    if hole_file not in index.files:
        raise KeyError(f"hole file {hole_file!r} not in repo index")
    if source == "Current":
        return [hole_file]
    if source == "ParentClass":
        return _parent_class_files(index, hole_file, hole_line)
    if source == "Import":
        return _ranked_imports_by_distance(index, hole_file, hole_line)
    if source == "Sibling":
        return _common_import_ranking(
            index, hole_file, hole_line, index.siblings.get(hole_file, [])
        )
    if source == "SimilarName":
        return _common_import_ranking(
            index, hole_file, hole_line, index.similar_names.get(hole_file, [])
        )
    if source == "ChildClass":
        return _common_import_ranking(
            index, hole_file, hole_line, index.child_class_files.get(hole_file, [])
        )
    if source == "ImportOfSibling":
        return _import_of(index, hole_file, index.siblings.get(hole_file, []))
    if source == "ImportOfSimilarName":
        return _import_of(index, hole_file, index.similar_names.get(hole_file, []))
    if source == "ImportOfParentClass":
        return _import_of(
            index, hole_file, _parent_class_files(index, hole_file, hole_line)
        )
    if source == "ImportOfChildClass":
        return _import_of(
            index, hole_file, index.child_class_files.get(hole_file, [])
        )
    raise ValueError(f"unknown prompt source {source!r}")


# serialization -------------------------------------------------------


def _span_to_list(span: Span) -> list[int]:
    return [span.start_line, span.start_col, span.end_line, span.end_col]


def _span_from_list(data: list[int]) -> Span:
    return Span(*data)


def _file_index_to_dict(idx: FileSyntaxIndex) -> dict:
    return {
        "package_name": idx.package_name,
        "imports": [[i.path, i.line] for i in idx.imports],
        "classes": [
            [c.name, c.extends_name, _span_to_list(c.span)] for c in idx.classes
        ],
        "methods": [
            [
                m.signature,
                m.name,
                m.body_text,
                m.enclosing_class,
                _span_to_list(m.span),
                _span_to_list(m.body_span) if m.body_span else None,
            ]
            for m in idx.methods
        ],
        "field_declarations": [
            [f.text, _span_to_list(f.span)] for f in idx.field_declarations
        ],
        "string_literals": [
            [o.text, _span_to_list(o.span)] for o in idx.string_literals
        ],
        "identifiers": [[o.text, _span_to_list(o.span)] for o in idx.identifiers],
        "type_identifiers": [
            [o.text, _span_to_list(o.span)] for o in idx.type_identifiers
        ],
        "parse_error": idx.parse_error,
    }


def _file_index_from_dict(path: str, data: dict) -> FileSyntaxIndex:
    return FileSyntaxIndex(
        path=path,
        package_name=data["package_name"],
        imports=[ImportDecl(p, l) for p, l in data["imports"]],
        classes=[
            ClassDecl(n, e, _span_from_list(s)) for n, e, s in data["classes"]
        ],
        methods=[
            MethodDecl(
                sig,
                name,
                body,
                enc,
                _span_from_list(span),
                _span_from_list(bspan) if bspan else None,
            )
            for sig, name, body, enc, span, bspan in data["methods"]
        ],
        field_declarations=[
            FieldDecl(t, _span_from_list(s)) for t, s in data["field_declarations"]
        ],
        string_literals=[
            Occurrence(t, _span_from_list(s)) for t, s in data["string_literals"]
        ],
        identifiers=[
            Occurrence(t, _span_from_list(s)) for t, s in data["identifiers"]
        ],
        type_identifiers=[
            Occurrence(t, _span_from_list(s)) for t, s in data["type_identifiers"]
       ],
        parse_error=data["parse_error"],
    )


def index_to_json(index: RepoIndex) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "repo_id": index.repo_id,
        "file_hashes": index.file_hashes,
        "files": {p: _file_index_to_dict(i) for p, i in index.files.items()},
        "class_to_file": index.class_to_file,
        "import_to_file": index.import_to_file,
        "import_usages": {
            p: [[imp, lines] for imp, lines in entries]
            for p, entries in index.import_usages.items()
        },
        "siblings": index.siblings,
        "similar_names": index.similar_names,
        "parent_class_file": index.parent_class_file,
        "child_class_files": index.child_class_files,
        "duplicate_sets": index.duplicate_sets,
        "diagnostics": index.diagnostics,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_repo_index(index: RepoIndex, cache_path: str | Path) -> None:
    Path(cache_path).write_text(index_to_json(index), encoding="utf-8")


def load_repo_index(cache_path: str | Path, root: str | Path) -> RepoIndex | None:
    """Rebuild a RepoIndex from cache; None when stale or unreadable."""
    rootp = Path(root)
    try:
        doc = json.loads(Path(cache_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if doc.get("schema_version") != SCHEMA_VERSION:
        return None
    hashes = doc["file_hashes"]
    current = _iter_java_files(rootp)
    if sorted(hashes) != current:
        return None
    sources: dict[str, SourceFile] = {}
    for rel in current:
        try:
            data = (rootp / rel).read_bytes()
        except OSError:
            return None
        if hashlib.sha256(data).hexdigest() != hashes[rel]:
            return None
        sources[rel] = SourceFile.from_text(rel, data.decode("utf-8"))
    return RepoIndex(
        repo_id=doc["repo_id"],
        root=str(rootp),
        files={
            p: _file_index_from_dict(p, d) for p, d in doc["files"].items()
        },
        sources=sources,
        file_hashes=hashes,
        class_to_file=doc["class_to_file"],
        import_to_file=doc["import_to_file"],
        import_usages={
            p: [(imp, lines) for imp, lines in entries]
            for p, entries in doc["import_usages"].items()
        },
        siblings=doc["siblings"],
        similar_names=doc["similar_names"],
        parent_class_file=doc["parent_class_file"],
        child_class_files=doc["child_class_files"],
        duplicate_sets=doc["duplicate_sets"],
        diagnostics=doc["diagnostics"],
    )
