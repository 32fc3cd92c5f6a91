"""Diff-anchored file-local context extraction.

Methods are located with signature heuristics plus brace balancing on a
masked copy of the source (string/char literals and comments blanked out).
A same-file, name-based call graph links them; context expansion walks
callers and callees outward from the methods touching changed lines, one
wave per depth unit, and renders the visited bodies under a line budget.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

RAW_WINDOW = 3  # lines kept around changed lines that fall outside any method

_MODIFIERS = ("public", "protected", "private", "static", "final", "abstract",
              "synchronized", "native", "strictfp", "default")
_CONTROL_KEYWORDS = frozenset({
    "if", "for", "while", "switch", "catch", "return", "new", "else", "do",
    "try", "synchronized", "super", "this", "throw", "assert", "case",
    "instanceof", "break", "continue", "yield",
})

_SIG_RE = re.compile(
    r"(?m)^[ \t]*"
    r"((?:(?:" + "|".join(_MODIFIERS) + r")\s+)*)"     # modifiers
    r"([\w$][\w$.<>\[\], \t?&]*?)[ \t]+"               # return type, same line only
    r"([A-Za-z_$][\w$]*)[ \t]*\("                      # method name
)
_CTOR_RE = re.compile(
    r"(?m)^[ \t]*"
    r"((?:(?:public|protected|private|static|final|synchronized)\s+)+)"
    r"([A-Z][\w$]*)\s*\("
)


@dataclass(frozen=True)
class MethodSpan:
    """One detected method: its name, declaration line, and body extent."""

    name: str
    signature: str
    start_line: int    # 1-based, inclusive
    end_line: int      # 1-based, inclusive
    body: str


@dataclass(frozen=True)
class CallGraph:
    """Same-file caller->callee edges over method names."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def callees(self, name: str) -> list[str]:
        return [b for a, b in self.edges if a == name]

    def callers(self, name: str) -> list[str]:
        return [a for a, b in self.edges if b == name]


@dataclass(frozen=True)
class ContextBundle:
    """Expanded context snippet plus the ordered method set behind it."""

    snippet: str
    included_methods: tuple[str, ...]
    truncated: bool
    depth_used: int
    line_budget: int

    @property
    def line_count(self) -> int:
        return 0 if not self.snippet else self.snippet.count("\n") + 1


def mask_source(source: str) -> str:
    """Blank out string/char literals and comments, preserving offsets."""
    out = list(source)
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            while i < n and source[i] != "\n":
                out[i] = " "
                i += 1
        elif ch == "/" and nxt == "*":
            out[i] = out[i + 1] = " "
            i += 2
            while i < n and not (source[i] == "*" and i + 1 < n and source[i + 1] == "/"):
                if source[i] != "\n":
                    out[i] = " "
                i += 1
            if i < n:
                out[i] = out[i + 1] = " "
                i += 2
        elif ch in ('"', "'"):
            quote = ch
            i += 1
            while i < n and source[i] != quote:
                if source[i] == "\\" and i + 1 < n:
                    out[i] = out[i + 1] = " "
                    i += 2
                    continue
                if source[i] != "\n":
                    out[i] = " "
                i += 1
            i += 1
        else:
            i += 1
    return "".join(out)


def _matching_paren(masked: str, open_pos: int) -> int:
    depth = 0
    for i in range(open_pos, len(masked)):
        if masked[i] == "(":
            depth += 1
        elif masked[i] == ")":
            depth -= 1
            if depth == 0:
                return i
    return -1


def _body_end(masked: str, brace_pos: int) -> int:
    depth = 0
    for i in range(brace_pos, len(masked)):
        if masked[i] == "{":
            depth += 1
        elif masked[i] == "}":
            depth -= 1
            if depth == 0:
                return i
    return -1


def extract_methods(source: str) -> list[MethodSpan]:
    """Best-effort detection of Java method declarations and their extents."""
    if not source:
        return []
    masked = mask_source(source)
    lines = source.split("\n")
    line_starts = [0]
    for ln in lines[:-1]:
        line_starts.append(line_starts[-1] + len(ln) + 1)

    def line_of(offset: int) -> int:
        lo, hi = 0, len(line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1  # 1-based

    spans: list[MethodSpan] = []
    claimed: set[tuple[int, int]] = set()
    for pattern, name_group in ((_SIG_RE, 3), (_CTOR_RE, 2)):
        for m in pattern.finditer(masked):
            name = m.group(name_group)
            if name in _CONTROL_KEYWORDS:
                continue
            if pattern is _SIG_RE:
                head = m.group(2).split()
                if any(tok in _CONTROL_KEYWORDS for tok in head):
                    continue
            open_pos = masked.index("(", m.end() - 1)
            close = _matching_paren(masked, open_pos)
            if close < 0:
                continue
            # skip whitespace and a throws clause; require a body
            tail = close + 1
            while tail < len(masked) and masked[tail] not in "{;":
                tail += 1
            if tail >= len(masked) or masked[tail] == ";":
                continue
            end = _body_end(masked, tail)
            if end < 0:
                continue
            start_line = line_of(m.start())
            end_line = line_of(end)
            if (start_line, end_line) in claimed:
                continue
            claimed.add((start_line, end_line))
            spans.append(MethodSpan(
                name=name,
                signature=lines[start_line - 1],
                start_line=start_line,
                end_line=end_line,
                body="\n".join(lines[start_line - 1:end_line]),
            ))
    spans.sort(key=lambda s: (s.start_line, s.end_line))
    return spans


def build_call_graph(methods: list[MethodSpan], source: str | None = None) -> CallGraph:
    """Name-based caller->callee edges among same-file methods.

    An edge m->n exists when n's name followed by "(" appears in m's masked
    body beyond n's own declaration sites; overloads collapse to one node.
    """
    names: list[str] = []
    for span in methods:
        if span.name not in names:
            names.append(span.name)
    if source is None:
        masked_lines = None
    else:
        masked_lines = mask_source(source).split("\n")

    decl_lines: dict[str, list[int]] = {}
    for span in methods:
        decl_lines.setdefault(span.name, []).append(span.start_line)

    edges: list[tuple[str, str]] = []
    call_res = {name: re.compile(rf"(?<![\w$]){re.escape(name)}\s*\(") for name in names}
    for span in methods:
        if masked_lines is not None:
            body = "\n".join(masked_lines[span.start_line - 1:span.end_line])
        else:
            body = mask_source(span.body)
        for name in names:
            occurrences = len(call_res[name].findall(body))
            declared_inside = sum(
                1 for ln in decl_lines.get(name, ())
                if span.start_line <= ln <= span.end_line
            )
            if occurrences > declared_inside and (span.name, name) not in edges:
                edges.append((span.name, name))
    return CallGraph(nodes=tuple(names), edges=tuple(edges))


def _merge_windows(windows: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for lo, hi in sorted(windows):
        if merged and lo <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def extract_context(cs, source: str, depth: int = 3, max_lines: int = 400) -> ContextBundle:
    """Expand changed lines through the call graph into a bounded snippet.

    Seeds are the methods overlapping the change's new-file lines; each
    depth unit adds one breadth-first wave of callers and callees. Changed
    lines outside any method contribute a small raw window. The rendered
    snippet is cut to whole lines, earlier (closer to the change) methods
    surviving first.
    """
    if depth < 0 or max_lines < 0:
        raise ValueError("depth and max_lines must be >= 0")
    methods = extract_methods(source)
    graph = build_call_graph(methods, source)
    spans_by_name: dict[str, list[MethodSpan]] = {}
    for span in methods:
        spans_by_name.setdefault(span.name, []).append(span)
    first_line = {name: spans[0].start_line for name, spans in spans_by_name.items()}

    changed = sorted(set(cs.changed_new_lines))
    seeds: list[str] = []
    outside: list[int] = []
    for line in changed:
        hits = [s for s in methods if s.start_line <= line <= s.end_line]
        if hits:
            for span in hits:
                if span.name not in seeds:
                    seeds.append(span.name)
        else:
            outside.append(line)

    order = list(seeds)
    seen = set(seeds)
    frontier = list(seeds)
    waves = 0
    while frontier and waves < depth:
        nxt: list[str] = []
        for name in frontier:
            neighbors = sorted(set(graph.callees(name)) | set(graph.callers(name)),
                               key=lambda n: first_line[n])
            for nb in neighbors:
                if nb not in seen:
                    seen.add(nb)
                    order.append(nb)
                    nxt.append(nb)
        if not nxt:
            break
        frontier = nxt
        waves += 1

    parts: list[str] = []
    for name in order:
        for span in spans_by_name[name]:
            if parts:
                parts.append("")
            parts.extend(span.body.split("\n"))
    if outside:
        src_lines = source.split("\n")
        windows = [(max(1, ln - RAW_WINDOW), min(len(src_lines), ln + RAW_WINDOW))
                   for ln in outside]
        for lo, hi in _merge_windows(windows):
            if parts:
                parts.append("")
            parts.extend(src_lines[lo - 1:hi])

    truncated = len(parts) > max_lines
    kept = parts[:max_lines]
    return ContextBundle(
        snippet="\n".join(kept),
        included_methods=tuple(order),
        truncated=truncated,
        depth_used=waves,
        line_budget=max_lines,
    )
