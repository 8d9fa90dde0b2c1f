"""Frontend for the ``.dom`` domain-description language.

The concrete grammar is keyword-block shaped::

    part <Sort> [composite(<Sort>, ...)] {
        doc "...";                        -- optional narrative note
        behaviour <name>;                 -- optional behaviour name
        id <IdType>;
        mereo <Sort> -> <expr>;           -- expr: empty | Pi | Pi x Pi ... | set(Pi)
        attr <name> : <quantity> [<category>] [init <value>];
    }
    material <Sort> { ... }
    component <Sort> { ... }
    conversion <name> : <K1> -> <K2> [inverse <name>] = affine(<scale>, <offset>);
    channel <name> : <kind> [x <kind> ...];
    axiom <name> {
        display(<Sort>.<attr>, ...) tracks (<Sort>.<attr> via <conv>, ...; ...);
    }

Files are UTF-8 with ``--`` line comments.  Parsing is total: errors are
reported as diagnostics and recovery resumes at the next block boundary, so
one run can report several problems.  ``print_model`` emits canonical text
with ``parse_model(print_model(m)) == m`` structurally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .diagnostics import Diagnostic, SourceSpan, error
from .model import (
    CATEGORIES,
    COMPONENT,
    CONTINUOUS,
    DISCRETE,
    MATERIAL,
    PART,
    STATIC,
    AttributeDecl,
    AxiomDecl,
    AxiomSource,
    ChannelDecl,
    ConversionDecl,
    DomainModel,
    EndurantDecl,
    MereoEmpty,
    MereoId,
    MereologyExpr,
    MereoProduct,
    MereoSet,
)
from .units import fraction_str

_TOP_KEYWORDS = ("part", "material", "component", "conversion", "channel", "axiom")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[{}();:,.=^*/x-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    type: str  # ident | number | string | punct | arrow | eof
    value: str
    line: int
    col: int

    def span(self, file: str) -> SourceSpan:
        end_col = self.col + max(len(self.value), 1)
        return SourceSpan(file, self.line, self.col, self.line, end_col)


class _ParseError(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(message)
        self.message = message
        self.token = token


def _tokenize(text: str, file: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            diagnostics.append(error(
                "E001", f"unexpected character {text[pos]!r}",
                SourceSpan.point(file, line, col)))
            pos += 1
            col += 1
            continue
        kind = match.lastgroup
        value = match.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = match.end()
    tokens.append(Token("eof", "", line, col))
    return tokens, diagnostics


def _join_ref(parts: list[str]) -> str:
    """Canonical text for a quantity reference or value literal: spaces only
    between adjacent word-ish tokens ('point deg', 'km/h', 'm/s^2')."""
    out: list[str] = []
    wordish = re.compile(r"[A-Za-z_0-9µΩ°]")
    for piece in parts:
        if out and wordish.match(out[-1][-1]) and wordish.match(piece[0]):
            out.append(" ")
        out.append(piece)
    return "".join(out)


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.tokens = tokens
        self.file = file
        self.index = 0
        self.diagnostics: list[Diagnostic] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.index]

    def next(self) -> Token:
        tok = self.tokens[self.index]
        if tok.type != "eof":
            self.index += 1
        return tok

    def at(self, value: str) -> bool:
        return self.peek().value == value and self.peek().type != "string"

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.next()
            return True
        return False

    def expect(self, value: str) -> Token:
        tok = self.peek()
        if tok.value != value or tok.type == "string":
            raise _ParseError(f"expected {value!r}, found {tok.value or 'end of file'!r}", tok)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.type != "ident":
            raise _ParseError(f"expected {what}, found {tok.value or 'end of file'!r}", tok)
        return self.next()

    def fail(self, message: str, token: Optional[Token] = None) -> "_ParseError":
        return _ParseError(message, token or self.peek())

    def report(self, code: str, message: str, token: Token) -> None:
        self.diagnostics.append(error(code, message, token.span(self.file)))

    def skip_to_top_level(self) -> None:
        """Recovery: consume tokens until the next plausible block boundary, a
        top-level keyword either at brace depth 0 or right after '}' or ';'
        (stray braces would otherwise swallow the rest of the file)."""
        depth = 0
        prev = ""
        while True:
            tok = self.peek()
            if tok.type == "eof":
                return
            if (tok.type == "ident" and tok.value in _TOP_KEYWORDS
                    and (depth == 0 or prev in ("}", ";"))):
                return
            if tok.value == "{":
                depth += 1
            elif tok.value == "}":
                if depth == 0:
                    self.next()
                    return
                depth -= 1
            prev = tok.value
            self.next()

    # -- grammar -----------------------------------------------------------

    def parse_model(self) -> DomainModel:
        endurants: list[EndurantDecl] = []
        conversions: list[ConversionDecl] = []
        channels: list[ChannelDecl] = []
        axioms: list[AxiomDecl] = []
        while self.peek().type != "eof":
            tok = self.peek()
            try:
                if tok.value == PART:
                    endurants.append(self.parse_endurant(PART))
                elif tok.value == MATERIAL:
                    endurants.append(self.parse_endurant(MATERIAL))
                elif tok.value == COMPONENT:
                    endurants.append(self.parse_endurant(COMPONENT))
                elif tok.value == "conversion":
                    conversions.append(self.parse_conversion())
                elif tok.value == "channel":
                    channels.append(self.parse_channel())
                elif tok.value == "axiom":
                    axioms.append(self.parse_axiom())
                else:
                    raise self.fail(
                        f"expected a declaration keyword, found {tok.value!r}")
            except _ParseError as err:
                self.report("E001", err.message, err.token)
                self.skip_to_top_level()
        model = DomainModel(tuple(endurants), tuple(conversions),
                            tuple(channels), tuple(axioms))
        self._check_duplicates(model)
        return model

    def parse_endurant(self, kind: str) -> EndurantDecl:
        start = self.next()  # keyword
        name = self.expect_ident("sort name")
        children: Optional[tuple[str, ...]] = None
        if self.at("composite"):
            if kind != PART:
                self.report("E001", f"{kind}s cannot be composite", self.peek())
            self.next()
            self.expect("(")
            kids = [self.expect_ident("child sort").value]
            while self.accept(","):
                kids.append(self.expect_ident("child sort").value)
            self.expect(")")
            children = tuple(kids)
        self.expect("{")

        doc: Optional[str] = None
        behaviour: Optional[str] = None
        id_type: Optional[str] = None
        mereology: Optional[MereologyExpr] = None
        attributes: list[AttributeDecl] = []
        while not self.at("}"):
            tok = self.peek()
            if tok.type == "eof":
                raise self.fail("unterminated block", tok)
            if tok.value == "doc":
                self.next()
                string = self.peek()
                if string.type != "string":
                    raise self.fail("expected string after 'doc'", string)
                self.next()
                doc = _unquote(string.value)
            elif tok.value == "behaviour":
                self.next()
                behaviour = self.expect_ident("behaviour name").value
            elif tok.value == "id":
                self.next()
                id_tok = self.expect_ident("identifier type")
                if id_type is not None:
                    self.report("E002", f"duplicate id declaration {id_tok.value!r}", id_tok)
                else:
                    id_type = id_tok.value
            elif tok.value == "mereo":
                self.next()
                mereology = self.parse_mereology(name.value)
            elif tok.value == "attr":
                self.next()
                attributes.append(self.parse_attribute())
                continue  # attribute parser consumes its ';'
            else:
                raise self.fail(f"unexpected clause {tok.value!r} in {kind} block", tok)
            self.expect(";")
        close = self.expect("}")
        discreteness = CONTINUOUS if kind == MATERIAL else DISCRETE
        return EndurantDecl(
            name=name.value, kind=kind, discreteness=discreteness,
            children=children, id_type=id_type, mereology=mereology,
            attributes=tuple(attributes), behaviour=behaviour, doc=doc,
            span=SourceSpan(self.file, start.line, start.col, close.line, close.col + 1))

    def parse_mereology(self, sort: str) -> MereologyExpr:
        # Accepts both 'mereo <expr>' and the canonical 'mereo <Sort> -> <expr>'.
        if self.peek().type == "ident" and self.tokens[self.index + 1].type == "arrow":
            named = self.next()
            if named.value != sort:
                self.report(
                    "E003",
                    f"mereology names {named.value!r} inside block for {sort!r}",
                    named)
            self.next()  # arrow
        if self.accept("empty"):
            return MereoEmpty()
        if self.at("set"):
            self.next()
            self.expect("(")
            inner = self.expect_ident("identifier type")
            self.expect(")")
            return MereoSet(inner.value)
        first = self.expect_ident("identifier type")
        factors = [first.value]
        while self.at("x"):
            self.next()
            factors.append(self.expect_ident("identifier type").value)
        if len(factors) == 1:
            return MereoId(factors[0])
        return MereoProduct(tuple(factors))

    def parse_attribute(self) -> AttributeDecl:
        name = self.expect_ident("attribute name")
        self.expect(":")
        quantity = self.collect_ref(stop=set(CATEGORIES) | {"init", ";"})
        if not quantity:
            raise self.fail("expected a quantity kind after ':'")
        category = STATIC
        if self.peek().type == "ident" and self.peek().value in CATEGORIES:
            category = self.next().value
        init: Optional[str] = None
        if self.at("init"):
            self.next()
            init = self.collect_ref(stop={";"})
            if not init:
                raise self.fail("expected a value after 'init'")
        semi = self.expect(";")
        return AttributeDecl(name.value, quantity, category, init,
                             span=SourceSpan(self.file, name.line, name.col,
                                             semi.line, semi.col + 1))

    def collect_ref(self, stop: set[str]) -> str:
        """Collect a quantity reference or value literal up to a stop token."""
        parts: list[str] = []
        while True:
            tok = self.peek()
            if tok.type == "eof" or tok.type == "string" or tok.value in stop:
                break
            if tok.value in ("{", "}"):
                break
            self.next()
            parts.append(tok.value)
        return _join_ref(parts)

    def parse_conversion(self) -> ConversionDecl:
        start = self.next()
        name = self.expect_ident("conversion name")
        self.expect(":")
        from_kind = self.collect_ref(stop={"->", "inverse", "="})
        if self.peek().type != "arrow":
            raise self.fail("expected '->' in conversion declaration")
        self.next()
        to_kind = self.collect_ref(stop={"inverse", "="})
        inverse: Optional[str] = None
        if self.at("inverse"):
            self.next()
            inverse = self.expect_ident("inverse conversion name").value
        self.expect("=")
        self.expect("affine")
        self.expect("(")
        scale = self.parse_number()
        self.expect(",")
        offset = self.parse_number()
        self.expect(")")
        semi = self.expect(";")
        if not from_kind or not to_kind:
            raise self.fail("conversion needs source and target kinds", start)
        return ConversionDecl(name.value, from_kind, to_kind, scale, offset, inverse,
                              span=SourceSpan(self.file, start.line, start.col,
                                              semi.line, semi.col + 1))

    def parse_number(self) -> Fraction:
        tok = self.peek()
        if tok.type != "number":
            raise self.fail(f"expected a number, found {tok.value!r}", tok)
        self.next()
        value = Fraction(tok.value)
        if self.at("/"):  # exact rational literals: 5/18
            self.next()
            denom = self.peek()
            if denom.type != "number":
                raise self.fail(f"expected a denominator, found {denom.value!r}", denom)
            self.next()
            value /= Fraction(denom.value)
        return value

    def parse_channel(self) -> ChannelDecl:
        start = self.next()
        name = self.expect_ident("channel name")
        self.expect(":")
        kinds = [self.collect_ref(stop={"x", ";"})]
        while self.at("x"):
            self.next()
            kinds.append(self.collect_ref(stop={"x", ";"}))
        semi = self.expect(";")
        if any(not k for k in kinds):
            raise self.fail("channel declaration needs message kinds", start)
        return ChannelDecl(name.value, tuple(kinds),
                           span=SourceSpan(self.file, start.line, start.col,
                                           semi.line, semi.col + 1))

    def parse_axiom(self) -> AxiomDecl:
        start = self.next()
        name = self.expect_ident("axiom name")
        self.expect("{")
        self.expect("display")
        self.expect("(")
        target_sort, first_attr = self.parse_sort_attr()
        target_attrs = [first_attr]
        while self.accept(","):
            sort, attr = self.parse_sort_attr()
            if sort != target_sort:
                self.report("E001", "display attributes must share one sort", self.peek())
            target_attrs.append(attr)
        self.expect(")")
        self.expect("tracks")
        self.expect("(")
        sources = [self.parse_axiom_source()]
        while self.accept(";"):
            if self.at(")"):
                break
            sources.append(self.parse_axiom_source())
        self.expect(")")
        self.expect(";")
        close = self.expect("}")
        return AxiomDecl(name.value, target_sort, tuple(target_attrs), tuple(sources),
                         span=SourceSpan(self.file, start.line, start.col,
                                         close.line, close.col + 1))

    def parse_sort_attr(self) -> tuple[str, str]:
        sort = self.expect_ident("sort name")
        self.expect(".")
        attr = self.expect_ident("attribute name")
        return sort.value, attr.value

    def parse_axiom_source(self) -> AxiomSource:
        sort, attr = self.parse_sort_attr()
        chain: list[str] = []
        if self.at("via"):
            self.next()
            chain.append(self.expect_ident("conversion name").value)
            while self.accept(","):
                chain.append(self.expect_ident("conversion name").value)
        return AxiomSource(sort, attr, tuple(chain))

    # -- post-parse checks ---------------------------------------------------

    def _check_duplicates(self, model: DomainModel) -> None:
        def check(pairs, what: str) -> None:
            seen: dict[str, SourceSpan] = {}
            for name, span in pairs:
                if name in seen:
                    self.diagnostics.append(error(
                        "E002", f"duplicate {what} {name!r}",
                        span or SourceSpan.point(self.file, 1, 1)))
                else:
                    seen[name] = span

        check(((e.name, e.span) for e in model.endurants), "sort")
        check(((e.id_type, e.span) for e in model.endurants if e.id_type), "identifier type")
        check(((c.name, c.span) for c in model.conversions), "conversion")
        check(((c.name, c.span) for c in model.channels), "channel")
        check(((a.name, a.span) for a in model.axioms), "axiom")
        for endurant in model.endurants:
            check(((a.name, a.span) for a in endurant.attributes),
                  f"attribute of {endurant.name}")


def _unquote(raw: str) -> str:
    return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse_model(text: str, file: str = "<input>") -> tuple[DomainModel, list[Diagnostic]]:
    """Parse source text into a model plus diagnostics.

    On syntax errors a best-effort partial model is returned alongside the
    diagnostics; any error diagnostic should stop downstream phases.
    """
    tokens, diagnostics = _tokenize(text, file)
    parser = _Parser(tokens, file)
    model = parser.parse_model()
    return model, diagnostics + parser.diagnostics


def parse_file(path: str) -> tuple[DomainModel, list[Diagnostic]]:
    with open(path, encoding="utf-8") as handle:
        return parse_model(handle.read(), file=path)


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

def print_model(model: DomainModel) -> str:
    """Canonical source text; ``parse_model(print_model(m))`` equals ``m``."""
    blocks: list[str] = []
    for endurant in model.endurants:
        blocks.append(_print_endurant(endurant))
    for conv in model.conversions:
        inverse = f" inverse {conv.inverse_of}" if conv.inverse_of else ""
        blocks.append(
            f"conversion {conv.name} : {conv.from_kind} -> {conv.to_kind}{inverse}"
            f" = affine({fraction_str(conv.scale)}, {fraction_str(conv.offset)});")
    for channel in model.channels:
        blocks.append(f"channel {channel.name} : {' x '.join(channel.kinds)};")
    for axiom in model.axioms:
        targets = ", ".join(f"{axiom.target_sort}.{a}" for a in axiom.target_attrs)
        lines = [f"axiom {axiom.name} {{", f"  display({targets}) tracks ("]
        for i, source in enumerate(axiom.sources):
            via = f" via {', '.join(source.chain)}" if source.chain else ""
            semi = ";" if i < len(axiom.sources) - 1 else ""
            lines.append(f"    {source.sort}.{source.attr}{via}{semi}")
        lines.append("  );")
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _print_endurant(endurant: EndurantDecl) -> str:
    head = f"{endurant.kind} {endurant.name}"
    if endurant.children is not None:
        head += f" composite({', '.join(endurant.children)})"
    lines = [head + " {"]
    if endurant.doc is not None:
        lines.append(f"  doc {_quote(endurant.doc)};")
    if endurant.behaviour is not None:
        lines.append(f"  behaviour {endurant.behaviour};")
    if endurant.id_type is not None:
        lines.append(f"  id {endurant.id_type};")
    if endurant.mereology is not None:
        lines.append(f"  mereo {endurant.name} -> {endurant.mereology};")
    for attr in endurant.attributes:
        init = f" init {attr.init}" if attr.init is not None else ""
        lines.append(f"  attr {attr.name} : {attr.quantity} {attr.category}{init};")
    lines.append("}")
    return "\n".join(lines)


def format_diagnostics(diagnostics, color: bool = False) -> str:
    lines = []
    for diag in diagnostics:
        if color and diag.is_error:
            lines.append(f"{diag.span}: \x1b[31m{diag.code}\x1b[0m: {diag.message}")
        else:
            lines.append(str(diag))
    return "\n".join(lines)
