"""Parser for the Maude-style functional-module subset, and term printing.

Grammar (EBNF, also published in docs/grammar.md):

    file        ::= module+
    module      ::= "fmod" IDENT "is" statement* "endfm"
    statement   ::= sorts | subsorts | opdecl | vardecl | eqdecl
    sorts       ::= ("sort" | "sorts") IDENT+ "."
    subsorts    ::= ("subsort" | "subsorts") IDENT ("<" IDENT)+ "."
    opdecl      ::= "op" OPNAME ":" sortref* "->" sortref attrs? "."
                  | "ops" OPNAME+ ":" sortref* "->" sortref attrs? "."
    attrs       ::= "[" ("assoc" | "comm" | "id:" term)+ "]"
    vardecl     ::= ("var" | "vars") IDENT+ ":" sortref "."
    eqdecl      ::= "eq" ("[" IDENT "]" ":")? term "=" term ("[" "variant" "]")? "."
    sortref     ::= IDENT | "[" IDENT "]"
    term        ::= primary (INFIXCORE primary)*
    primary     ::= IDENT (":" sortref)?            -- variable / constant
                  | IDENT "(" term ("," term)* ")"  -- prefix application
                  | "(" term ")"

Mixfix is limited to binary infix operators declared as `_c_` (core token c),
all at one precedence level; chains of one associative operator need no
parentheses, everything else does.
"""

from __future__ import annotations

import importlib.resources
import re

from .errors import ParseError, SignatureError, UnsupportedFeature
from .terms import App, Subst, Term, Var, canonical
from .theory import Equation, OpDecl, SortGraph, Theory, is_kind

_UNSUPPORTED = {"ceq", "cmb", "mb", "rl", "crl", "including", "extending",
                "protecting", "inc", "ext", "pr", "omod", "mod", "fth", "view"}

_LINE_COMMENT = re.compile(r"(\*\*\*|---).*$", re.MULTILINE)


class _Tok:
    __slots__ = ("text", "line", "col")

    def __init__(self, text, line, col):
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.text!r}@{self.line}:{self.col}"


def _module_tokens(text: str) -> list[_Tok]:
    toks = []
    for ln, line in enumerate(_LINE_COMMENT.sub("", text).splitlines(), start=1):
        col = 0
        for raw in line.split():
            col = line.index(raw, col)
            toks.extend(_split_raw(raw, ln, col + 1))
            col += len(raw)
    return toks


def _split_raw(raw: str, line: int, col: int) -> list[_Tok]:
    # peel statement dots and attribute brackets off whitespace tokens;
    # "X:[NatSet]" style annotations keep their brackets attached
    out = []
    while raw.startswith("[") and len(raw) > 1:
        out.append(_Tok("[", line, col))
        raw = raw[1:]
        col += 1
    tail = []
    while raw.endswith(".") and len(raw) > 1:
        tail.insert(0, _Tok(".", line, col + len(raw) - 1))
        raw = raw[:-1]
    while raw.endswith("]") and len(raw) > 1 and "[" not in raw:
        tail.insert(0, _Tok("]", line, col + len(raw) - 1))
        raw = raw[:-1]
    if raw:
        out.append(_Tok(raw, line, col))
    return out + tail


# ---------------------------------------------------------------------------
# Module parsing

def parse_modules(text: str) -> list[Theory]:
    """All modules of a file, in order. Importation is not supported."""
    toks = _module_tokens(text)
    theories = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if t.text != "fmod":
            if t.text in _UNSUPPORTED:
                raise UnsupportedFeature(t.text, t.line, t.col)
            raise ParseError(f"expected 'fmod', found {t.text!r}", t.line, t.col)
        i = _parse_one(toks, i, theories)
    if not theories:
        raise ParseError("no module found", 1, 1)
    return theories


def parse_module(text: str) -> Theory:
    """Parse text containing exactly one functional module."""
    mods = parse_modules(text)
    if len(mods) > 1:
        raise ParseError("expected a single module; use parse_modules for files")
    return mods[0]


class _Stmt:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self):
        return self.toks[self.i].text if self.i < len(self.toks) else None

    def next(self):
        if self.i >= len(self.toks):
            last = self.toks[-1]
            raise ParseError("unexpected end of statement", last.line, last.col)
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def rest(self):
        return self.toks[self.i:]


def _parse_one(toks, i, theories):
    start = toks[i]
    i += 1
    if i >= len(toks):
        raise ParseError("module name missing", start.line, start.col)
    name = toks[i].text
    i += 1
    if i >= len(toks) or toks[i].text != "is":
        raise ParseError("expected 'is' after module name", toks[i - 1].line, toks[i - 1].col)
    i += 1

    sorts: list[str] = []
    subsorts: set[tuple[str, str]] = set()
    ops: list[OpDecl] = []
    var_table: dict[str, str] = {}
    raw_eqs = []  # (label_tok_or_None, lhs tokens, rhs tokens, variant flag)

    while True:
        if i >= len(toks):
            raise ParseError(f"module {name} is missing 'endfm'", start.line, start.col)
        head = toks[i]
        if head.text == "endfm":
            i += 1
            break
        if head.text in _UNSUPPORTED:
            raise UnsupportedFeature(head.text, head.line, head.col)
        j = i
        while j < len(toks) and toks[j].text != ".":
            if toks[j].text in ("endfm", "fmod"):
                raise ParseError(f"statement not terminated by '.'", head.line, head.col)
            j += 1
        if j >= len(toks):
            raise ParseError("statement not terminated by '.'", head.line, head.col)
        stmt = _Stmt(toks[i:j])
        i = j + 1
        kw = stmt.next().text
        if kw in ("sort", "sorts"):
            while stmt.peek() is not None:
                sorts.append(stmt.next().text)
        elif kw in ("subsort", "subsorts"):
            chain = [stmt.next().text]
            while stmt.peek() == "<":
                stmt.next()
                chain.append(stmt.next().text)
            if len(chain) < 2:
                raise ParseError("subsort declaration needs at least two sorts",
                                 head.line, head.col)
            for lo, hi in zip(chain, chain[1:]):
                subsorts.add((lo, hi))
        elif kw in ("op", "ops"):
            names = []
            while stmt.peek() not in (":", None):
                names.append(stmt.next().text)
            if kw == "op" and len(names) != 1 or not names:
                raise ParseError("malformed operator declaration", head.line, head.col)
            stmt.expect(":")
            arg_sorts = []
            while stmt.peek() != "->":
                arg_sorts.append(_sortref(stmt))
            stmt.expect("->")
            rng = _sortref(stmt)
            attrs = _attrs(stmt) if stmt.peek() == "[" else {}
            if stmt.peek() is not None:
                t = stmt.next()
                raise ParseError(f"unexpected {t.text!r} in operator declaration",
                                 t.line, t.col)
            for nm in names:
                ops.append((nm, tuple(arg_sorts), rng, attrs, head))
        elif kw in ("var", "vars"):
            names = []
            while stmt.peek() != ":":
                names.append(stmt.next().text)
            stmt.expect(":")
            sort = _sortref(stmt)
            for nm in names:
                var_table[nm] = sort
        elif kw == "eq":
            label = None
            if stmt.peek() == "[":
                stmt.next()
                label = stmt.next()
                stmt.expect("]")
                stmt.expect(":")
            lhs_toks, rhs_toks, variant = _split_eq(stmt, head)
            raw_eqs.append((label, lhs_toks, rhs_toks, variant, head))
        else:
            raise ParseError(f"unknown statement keyword {kw!r}", head.line, head.col)

    try:
        graph = SortGraph(sorts, subsorts)
        for vn, vs in var_table.items():
            if not graph.has(vs):
                raise SignatureError(f"variable {vn} declared with unknown sort {vs}")
        # attribute identity terms need the signature, so build in two passes
        shell = Theory(name, graph, [_mk_decl(o, None) for o in ops], dict(var_table), [])
        decls = []
        for o in ops:
            ident_toks = o[3].get("id")
            ident = None
            if ident_toks is not None:
                ident = parse_term(" ".join(t.text for t in ident_toks), shell, {})
            decls.append(_mk_decl(o, ident))
        th = Theory(name, graph, decls, dict(var_table), [])
    except SignatureError as e:
        raise ParseError(str(e), start.line, start.col) from e

    eqs = []
    seen_labels = set()
    for idx, (label, lhs_toks, rhs_toks, variant, head) in enumerate(raw_eqs, start=1):
        if label is not None:
            if label.text in seen_labels:
                raise ParseError(f"duplicate equation label [{label.text}]",
                                 label.line, label.col)
            seen_labels.add(label.text)
            lbl = label.text
        else:
            lbl = f"eq{idx}"
        lhs = _term_from_tokens(lhs_toks, th, var_table, head)
        rhs = _term_from_tokens(rhs_toks, th, var_table, head)
        eqs.append(Equation(lbl, lhs, rhs, variant))
    try:
        final = Theory(name, graph, decls, dict(var_table), eqs)
    except SignatureError as e:
        raise ParseError(str(e), start.line, start.col) from e
    theories.append(final)
    return i


def _mk_decl(o, ident):
    nm, arg_sorts, rng, attrs, _head = o
    return OpDecl(nm, arg_sorts, rng, assoc="assoc" in attrs,
                  comm="comm" in attrs, identity=ident)


def _sortref(stmt):
    t = stmt.next()
    if t.text == "[":
        inner = stmt.next().text
        stmt.expect("]")
        return f"[{inner}]"
    return t.text


def _attrs(stmt):
    stmt.expect("[")
    attrs = {}
    while stmt.peek() != "]":
        t = stmt.next()
        if t.text in ("assoc", "comm"):
            attrs[t.text] = True
        elif t.text == "id:":
            toks = []
            while stmt.peek() not in ("]", "assoc", "comm", "id:", None):
                toks.append(stmt.next())
            if not toks:
                raise ParseError("id: attribute needs an identity term", t.line, t.col)
            attrs["id"] = toks
        else:
            raise ParseError(f"unknown operator attribute {t.text!r}", t.line, t.col)
    stmt.expect("]")
    return attrs


def _split_eq(stmt, head):
    lhs, rhs = [], []
    side = lhs
    variant = False
    while stmt.peek() is not None:
        if stmt.peek() == "=":
            if side is rhs:
                t = stmt.next()
                raise ParseError("two '=' in one equation", t.line, t.col)
            stmt.next()
            side = rhs
            continue
        if side is rhs and stmt.peek() == "[":
            stmt.next()
            t = stmt.expect("variant")
            stmt.expect("]")
            variant = True
            continue
        side.append(stmt.next())
    if side is lhs or not lhs or not rhs:
        raise ParseError("equation needs 'lhs = rhs'", head.line, head.col)
    return lhs, rhs, variant


def _term_from_tokens(toks, th, var_table, head):
    text = " ".join(t.text for t in toks)
    try:
        return parse_term(text, th, var_table)
    except ParseError as e:
        raise ParseError(f"in equation at line {head.line}: {e}", head.line, head.col) from e


# ---------------------------------------------------------------------------
# Term parsing

_IDENT_CHAR = re.compile(r"[A-Za-z0-9']")


def _term_tokens(s: str):
    toks = []
    i = 0
    while i < len(s):
        c = s[i]
        if c.isspace():
            i += 1
            continue
        col = i + 1
        if c in "()[],:":
            toks.append(_Tok(c, 1, col))
            i += 1
        elif c in "#%" and i + 1 < len(s) and s[i + 1].isdigit():
            j = i + 1
            while j < len(s) and s[j].isdigit():
                j += 1
            toks.append(_Tok(s[i:j], 1, col))
            i = j
        elif _IDENT_CHAR.match(c):
            j = i
            while j < len(s) and _IDENT_CHAR.match(s[j]):
                j += 1
            toks.append(_Tok(s[i:j], 1, col))
            i = j
        else:
            toks.append(_Tok(c, 1, col))
            i += 1
    return toks


_INFIX_NAME = re.compile(r"^_([^_]+)_$")


def infix_core(op_name: str) -> str | None:
    """The middle token of a binary mixfix name like `_*_`, else None."""
    m = _INFIX_NAME.match(op_name)
    return m.group(1) if m else None


class _TermParser:
    def __init__(self, toks, th: Theory, var_table, wildcards=False):
        self.toks = toks
        self.i = 0
        self.th = th
        self.vars = var_table
        self.wildcards = wildcards
        self.n_wild = 0
        self.cores = {}
        for d in th.ops:
            core = infix_core(d.name)
            if core:
                self.cores[core] = d.name

    def peek(self):
        return self.toks[self.i].text if self.i < len(self.toks) else None

    def next(self):
        if self.i >= len(self.toks):
            raise ParseError("unexpected end of term")
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def parse(self) -> Term:
        t = self.infix()
        if self.i < len(self.toks):
            tok = self.toks[self.i]
            raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
        return t

    def infix(self) -> Term:
        first = self.primary()
        chain = [first]
        core = None
        while self.peek() in self.cores:
            tok = self.next()
            if core is None:
                core = tok.text
            elif tok.text != core:
                raise ParseError(
                    f"mixed infix operators {core!r} and {tok.text!r} need parentheses",
                    tok.line, tok.col)
            chain.append(self.primary())
        if core is None:
            return first
        op = self.cores[core]
        if len(chain) > 2 and not self.th.is_assoc(op):
            raise ParseError(f"chain of non-assoc operator {op} needs parentheses")
        t = chain[0]
        for nxt in chain[1:]:
            t = App(op, (t, nxt))
        return t

    def primary(self) -> Term:
        tok = self.next()
        text = tok.text
        if text == "(":
            t = self.infix()
            self.expect(")")
            return t
        if self.wildcards and text in ("_", "?"):
            self.n_wild += 1
            return Var(f"{text}{self.n_wild}", "[*]")
        if text in "()[],:" or text in self.cores:
            raise ParseError(f"unexpected {text!r} in term", tok.line, tok.col)
        if self.peek() == ":":
            self.next()
            sort = self.sortref()
            if not self.th.sort_graph.has(sort):
                raise ParseError(f"unknown sort {sort} in annotation", tok.line, tok.col)
            return Var(text, sort)
        if self.peek() == "(":
            self.next()
            args = [self.infix()]
            while self.peek() == ",":
                self.next()
                args.append(self.infix())
            self.expect(")")
            if not self.th.has_op(text):
                raise ParseError(f"unknown operator {text}", tok.line, tok.col)
            d = self.th.decls(text)[0]
            if len(args) != d.arity and not (d.assoc and len(args) >= 2):
                raise ParseError(f"operator {text} expects {d.arity} arguments",
                                 tok.line, tok.col)
            return App(text, tuple(args))
        if text in self.vars:
            return Var(text, self.vars[text])
        if self.th.has_op(text):
            d = self.th.decls(text)[0]
            if d.arity != 0:
                raise ParseError(f"operator {text} needs arguments", tok.line, tok.col)
            return App(text)
        raise ParseError(f"unknown identifier {text!r}", tok.line, tok.col)

    def sortref(self) -> str:
        t = self.next()
        if t.text == "[":
            inner = self.next().text
            self.expect("]")
            return f"[{inner}]"
        return t.text


def parse_term(text: str, th: Theory, var_table=None, wildcards=False,
               keep_order=False) -> Term:
    """Parse a term in the module's mixfix syntax; `X:Sort` / `X:[Kind]`
    annotations declare variables on the fly. With keep_order the written
    argument order of flattened nodes is preserved (query patterns)."""
    table = dict(th.var_table)
    if var_table:
        table.update(var_table)
    p = _TermParser(_term_tokens(text), th, table, wildcards=wildcards)
    t = p.parse()
    if keep_order:
        return _flatten_ordered(t, th)
    return canonical(t, th)


def _flatten_ordered(t: Term, th: Theory) -> Term:
    if not isinstance(t, App):
        return t
    args = [_flatten_ordered(a, th) for a in t.args]
    if th.is_assoc(t.op):
        flat = []
        for a in args:
            if isinstance(a, App) and a.op == t.op:
                flat.extend(a.args)
            else:
                flat.append(a)
        args = flat
    return App(t.op, tuple(args))


# ---------------------------------------------------------------------------
# Printing (inverse of the term grammar; round-trips modulo Ax)

def format_term(t: Term, th: Theory) -> str:
    if isinstance(t, Var):
        return f"{t.name}:{t.sort}"
    core = infix_core(t.op)
    if core and len(t.args) >= 2:
        parts = []
        for a in t.args:
            s = format_term(a, th)
            if isinstance(a, App) and infix_core(a.op) and len(a.args) >= 2:
                s = f"({s})"
            parts.append(s)
        return f" {core} ".join(parts)
    if not t.args:
        return t.op
    return f"{t.op}({', '.join(format_term(a, th) for a in t.args)})"


def format_subst(s: Subst, th: Theory, arrow="-->", bare_vars=True) -> list[str]:
    """One `X --> t` line per binding, in deterministic order."""
    lines = []
    for v, t in s.items():
        lhs = v.name if bare_vars else format_term(v, th)
        lines.append(f"{lhs} {arrow} {format_term(t, th)}")
    return lines


# ---------------------------------------------------------------------------
# Bundled example theories

FIXTURES = ("nat-variant", "bool", "xor", "xor-nofvp", "xor-acu")

_FIXTURE_MODULES = {
    "nat-variant": "NAT-VARIANT",
    "bool": "BOOL",
    "xor": "EXCLUSIVE-OR",
    "xor-nofvp": "EXCLUSIVE-OR-NOFVP",
    "xor-acu": "EXCLUSIVE-OR-ACU",
}


def fixture_text(name: str) -> str:
    res = importlib.resources.files("varnarrow") / "fixtures" / f"{name}.maude"
    return res.read_text(encoding="utf-8")


def fixture_theory(name: str) -> Theory:
    return parse_module(fixture_text(name))
