"""Minimal HTML tree on top of html.parser, tuned for content extraction.

Not a spec-grade DOM: mismatched end tags pop conservatively and unknown
markup degrades to text, which is the right trade-off for scraping pages
we do not control. Entity references are decoded by the parser; text
inside <pre>/<code> keeps its original whitespace.
"""

from __future__ import annotations

import re
from html.parser import HTMLParser

VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

_WS_RE = re.compile(r"\s+")


class Node:
    __slots__ = ("tag", "attrs", "children", "parent")

    def __init__(self, tag: str, attrs: dict[str, str] | None = None, parent: "Node | None" = None):
        self.tag = tag
        self.attrs = attrs or {}
        self.children: list[Node | str] = []
        self.parent = parent

    @property
    def classes(self) -> list[str]:
        return self.attrs.get("class", "").split()

    def raw_text(self) -> str:
        """Concatenated text with original whitespace (for code blocks)."""
        parts: list[str] = []
        for child in self.children:
            parts.append(child if isinstance(child, str) else child.raw_text())
        return "".join(parts)

    def text(self) -> str:
        """Whitespace-normalized human text."""
        return _WS_RE.sub(" ", self.raw_text()).strip()

    def iter_nodes(self):
        for child in self.children:
            if isinstance(child, Node):
                yield child
                yield from child.iter_nodes()

    def find_all(self, tag: str | None = None, class_: str | None = None) -> list["Node"]:
        out = []
        for node in self.iter_nodes():
            if tag is not None and node.tag != tag:
                continue
            if class_ is not None and class_ not in node.classes:
                continue
            out.append(node)
        return out

    def find(self, tag: str | None = None, class_: str | None = None) -> "Node | None":
        found = self.find_all(tag, class_)
        return found[0] if found else None

    def has_ancestor(self, tag: str | None = None, class_: str | None = None) -> bool:
        node = self.parent
        while node is not None:
            if (tag is None or node.tag == tag) and (class_ is None or class_ in node.classes):
                return True
            node = node.parent
        return False


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Node("document")
        self._stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = Node(tag, {k: (v or "") for k, v in attrs}, parent=self._stack[-1])
        self._stack[-1].children.append(node)
        if tag not in VOID_TAGS:
            self._stack.append(node)

    def handle_startendtag(self, tag, attrs):
        node = Node(tag, {k: (v or "") for k, v in attrs}, parent=self._stack[-1])
        self._stack[-1].children.append(node)

    def handle_endtag(self, tag):
        # Pop to the nearest matching open tag; ignore strays.
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                return

    def handle_data(self, data):
        if data:
            self._stack[-1].children.append(data)


def parse_html(html: str) -> Node:
    builder = _TreeBuilder()
    builder.feed(html)
    builder.close()
    return builder.root
