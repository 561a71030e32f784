"""Textual model format: tokenizer, parser, validator, printer.

The grammar, in EBNF::

    model     := { definition } ;
    definition:= "cbd" NAME "(" [ports] ")" "{" { item } "}" ;
    ports     := portdecl { ";" portdecl } ;
    portdecl  := ("in"|"out") NAME { "," NAME } ;
    item      := blockdecl | link ;
    blockdecl := "block" NAME "=" KIND "(" [ args ] ")" ";" ;
    args      := (NUMBER | NAME "=" NUMBER) { "," ... } ;
    link      := endpoint "->" endpoint ";" ;
    endpoint  := NAME [ "." NAME ] ;

``//`` starts a comment running to the end of the line.  NUMBER is a
decimal real with optional sign and exponent.  Parsing never raises on bad
input; every problem becomes a :class:`Diagnostic` carrying its source
position, and validation reports all violations rather than the first.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .blocks import KINDS, VARIADIC_MIN_INPUTS
from .graph import BlockDecl, Definition, Link, Model


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Span
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


@dataclass
class SourcePort:
    direction: str
    name: str
    span: Span


@dataclass
class SourceArg:
    name: str | None
    value: float
    span: Span


@dataclass
class SourceBlock:
    name: str
    kind: str
    args: list[SourceArg]
    span: Span


@dataclass
class SourceEndpoint:
    block: str
    port: str | None
    span: Span


@dataclass
class SourceLink:
    src: SourceEndpoint
    dst: SourceEndpoint
    span: Span


@dataclass
class SourceDefinition:
    name: str
    ports: list[SourcePort]
    blocks: list[SourceBlock]
    links: list[SourceLink]
    span: Span


@dataclass
class SourceModel:
    definitions: list[SourceDefinition] = field(default_factory=list)


@dataclass
class ParseResult:
    model: SourceModel
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


# --- tokenizer --------------------------------------------------------------

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_PUNCT = ("->", "(", ")", "{", "}", ";", ",", ".", "=")


@dataclass(frozen=True)
class Token:
    type: str  # IDENT, NUMBER, punctuation literal, EOF, ERROR
    text: str
    span: Span


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    line, col, i = 1, 1, 0
    n = len(text)

    def span() -> Span:
        return Span(line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            if end == -1:
                break
            col += end - i
            i = end
            continue
        if text.startswith("->", i):
            tokens.append(Token("->", "->", span()))
            i += 2
            col += 2
            continue
        if ch.isdigit() or (ch in "+-." and i + 1 < n and
                            (text[i + 1].isdigit() or
                             (ch in "+-" and text[i + 1] == "." and
                              i + 2 < n and text[i + 2].isdigit()))):
            match = _NUMBER_RE.match(text, i)
            if match:
                tokens.append(Token("NUMBER", match.group(), span()))
                length = match.end() - i
                i += length
                col += length
                continue
        match = _IDENT_RE.match(text, i)
        if match:
            tokens.append(Token("IDENT", match.group(), span()))
            length = match.end() - i
            i += length
            col += length
            continue
        if ch in "(){};,.=":
            tokens.append(Token(ch, ch, span()))
            i += 1
            col += 1
            continue
        diagnostics.append(Diagnostic(f"unexpected character {ch!r}", span()))
        tokens.append(Token("ERROR", ch, span()))
        i += 1
        col += 1
    tokens.append(Token("EOF", "", Span(line, col)))
    return tokens, diagnostics


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token], diagnostics: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.current
        if token.type != "EOF":
            self.pos += 1
        return token

    def check(self, type_: str, text: str | None = None) -> bool:
        token = self.current
        return token.type == type_ and (text is None or token.text == text)

    def error(self, expected: str) -> None:
        token = self.current
        got = repr(token.text) if token.text else "end of input"
        self.diagnostics.append(Diagnostic(
            f"expected {expected}, got {got}", token.span
        ))

    def expect(self, type_: str, expected: str | None = None) -> Token | None:
        if self.check(type_):
            return self.advance()
        self.error(expected or f"'{type_}'")
        return None

    def synchronize(self, *stop: str) -> None:
        """Skip tokens until one of the stop types (consumed) or a '}' / EOF."""
        while not self.check("EOF"):
            token = self.current
            if token.type in stop:
                self.advance()
                return
            if token.type == "}":
                return
            self.advance()

    # grammar productions

    def parse_model(self) -> SourceModel:
        model = SourceModel()
        while not self.check("EOF"):
            if self.check("IDENT", "cbd"):
                definition = self.parse_definition()
                if definition is not None:
                    model.definitions.append(definition)
            else:
                self.error("'cbd'")
                self.advance()
        return model

    def parse_definition(self) -> SourceDefinition | None:
        start = self.advance().span  # 'cbd'
        name = self.expect("IDENT", "definition name")
        if name is None:
            self.synchronize("}")
            return None
        if self.expect("(") is None:
            self.synchronize("}")
            return None
        ports: list[SourcePort] = []
        if not self.check(")"):
            self.parse_ports(ports)
        self.expect(")")
        if self.expect("{") is None:
            self.synchronize("}")
            return None
        blocks: list[SourceBlock] = []
        links: list[SourceLink] = []
        while not self.check("}") and not self.check("EOF"):
            if self.check("IDENT", "block"):
                block = self.parse_block()
                if block is not None:
                    blocks.append(block)
            elif self.check("IDENT"):
                link = self.parse_link()
                if link is not None:
                    links.append(link)
            else:
                self.error("'block' or a link")
                self.synchronize(";")
        self.expect("}")
        return SourceDefinition(name.text, ports, blocks, links, start)

    def parse_ports(self, ports: list[SourcePort]) -> None:
        while True:
            direction = self.current
            if not (self.check("IDENT", "in") or self.check("IDENT", "out")):
                self.error("'in' or 'out'")
                self.synchronize(";", ")")
                if not (self.check("IDENT", "in") or self.check("IDENT", "out")):
                    return
                continue
            self.advance()
            while True:
                name = self.expect("IDENT", "port name")
                if name is not None:
                    ports.append(SourcePort(direction.text, name.text, name.span))
                if self.check(","):
                    self.advance()
                    continue
                break
            if self.check(";"):
                self.advance()
                continue
            return

    def parse_block(self) -> SourceBlock | None:
        start = self.advance().span  # 'block'
        name = self.expect("IDENT", "block name")
        ok = name is not None
        ok = ok and self.expect("=") is not None
        kind = self.expect("IDENT", "block kind") if ok else None
        ok = ok and kind is not None and self.expect("(") is not None
        args: list[SourceArg] = []
        if ok and not self.check(")"):
            ok = self.parse_args(args)
        ok = ok and self.expect(")") is not None
        ok = ok and self.expect(";", "';'") is not None
        if not ok:
            self.synchronize(";")
            return None
        return SourceBlock(name.text, kind.text, args, start)

    def parse_args(self, args: list[SourceArg]) -> bool:
        while True:
            token = self.current
            if token.type == "NUMBER":
                self.advance()
                args.append(SourceArg(None, float(token.text), token.span))
            elif token.type == "IDENT":
                self.advance()
                if self.expect("=") is None:
                    return False
                number = self.expect("NUMBER", "a number")
                if number is None:
                    return False
                args.append(SourceArg(token.text, float(number.text), token.span))
            else:
                self.error("a number or NAME '=' NUMBER")
                return False
            if self.check(","):
                self.advance()
                continue
            return True

    def parse_endpoint(self) -> SourceEndpoint | None:
        name = self.expect("IDENT", "an endpoint")
        if name is None:
            return None
        port = None
        if self.check("."):
            self.advance()
            port_token = self.expect("IDENT", "port name")
            if port_token is None:
                return None
            port = port_token.text
        return SourceEndpoint(name.text, port, name.span)

    def parse_link(self) -> SourceLink | None:
        src = self.parse_endpoint()
        ok = src is not None and self.expect("->", "'->'") is not None
        dst = self.parse_endpoint() if ok else None
        ok = ok and dst is not None and self.expect(";", "';'") is not None
        if not ok:
            self.synchronize(";")
            return None
        return SourceLink(src, dst, src.span)


def parse(text: str) -> ParseResult:
    """Parse model source text; problems become diagnostics, never raises."""
    tokens, diagnostics = tokenize(text)
    parser = _Parser(tokens, diagnostics)
    model = parser.parse_model()
    return ParseResult(model, diagnostics)


# --- validation --------------------------------------------------------------

def validate(source: SourceModel) -> tuple[Model | None, list[Diagnostic]]:
    """Check structural rules and build the semantic model.

    Reports every violation found; returns the model only when no errors
    were raised.
    """
    diagnostics: list[Diagnostic] = []
    names: dict[str, SourceDefinition] = {}
    for definition in source.definitions:
        if definition.name in names:
            diagnostics.append(Diagnostic(
                f"duplicate definition {definition.name!r}", definition.span
            ))
        else:
            names[definition.name] = definition

    for definition in source.definitions:
        _validate_definition(definition, names, diagnostics)

    _check_recursion(source, names, diagnostics)

    if any(d.severity == "error" for d in diagnostics):
        return None, diagnostics

    model = Model()
    for definition in source.definitions:
        blocks = {}
        for block in definition.blocks:
            params = _bind_params(block, diagnostics, report=False)
            blocks[block.name] = BlockDecl(kind=block.kind, params=params)
        model.definitions[definition.name] = Definition(
            name=definition.name,
            in_ports=tuple(p.name for p in definition.ports if p.direction == "in"),
            out_ports=tuple(p.name for p in definition.ports if p.direction == "out"),
            blocks=blocks,
            links=[
                Link(src=_endpoint(link.src, definition),
                     dst=_endpoint(link.dst, definition))
                for link in definition.links
            ],
        )
    return model, diagnostics


def _endpoint(endpoint: SourceEndpoint, definition: SourceDefinition):
    port_names = {p.name for p in definition.ports}
    if endpoint.port is None and endpoint.block in port_names:
        return (None, endpoint.block)
    if endpoint.port is None:
        # Bare block name: its single output.
        return (endpoint.block, "out")
    return (endpoint.block, endpoint.port)


def _bind_params(block: SourceBlock, diagnostics: list[Diagnostic],
                 report: bool = True) -> dict[str, float]:
    info = KINDS.get(block.kind)
    declared = info.params if info else ()
    params: dict[str, float] = {}
    for position, arg in enumerate(block.args):
        if arg.name is None:
            if position < len(declared):
                params[declared[position]] = arg.value
            elif report:
                diagnostics.append(Diagnostic(
                    f"{block.kind} takes at most {len(declared)} parameter(s)",
                    arg.span,
                ))
        elif declared and arg.name in declared:
            params[arg.name] = arg.value
        elif report:
            diagnostics.append(Diagnostic(
                f"{block.kind} has no parameter {arg.name!r}", arg.span
            ))
    return params


def _validate_definition(definition: SourceDefinition,
                         names: dict[str, SourceDefinition],
                         diagnostics: list[Diagnostic]) -> None:
    seen_ports: set[str] = set()
    for port in definition.ports:
        if port.name in seen_ports:
            diagnostics.append(Diagnostic(
                f"duplicate port {port.name!r}", port.span
            ))
        seen_ports.add(port.name)

    block_by_name: dict[str, SourceBlock] = {}
    for block in definition.blocks:
        if block.name in block_by_name or block.name in seen_ports:
            diagnostics.append(Diagnostic(
                f"duplicate name {block.name!r}", block.span
            ))
        block_by_name[block.name] = block
        if block.kind not in KINDS and block.kind not in names:
            diagnostics.append(Diagnostic(
                f"unknown block kind {block.kind!r}", block.span
            ))
            continue
        if block.kind in KINDS:
            _bind_params(block, diagnostics, report=True)
            if block.kind == "Constant" and not any(
                arg.name in (None, "value") for arg in block.args
            ):
                diagnostics.append(Diagnostic(
                    "Constant requires a value parameter", block.span
                ))
        elif block.args:
            diagnostics.append(Diagnostic(
                f"composite block {block.kind!r} takes no parameters",
                block.args[0].span,
            ))

    in_ports = {p.name for p in definition.ports if p.direction == "in"}
    out_ports = {p.name for p in definition.ports if p.direction == "out"}
    drivers: dict[tuple[str | None, str], Span] = {}

    def target_ports(block: SourceBlock) -> tuple[set[str], bool]:
        if block.kind in KINDS:
            info = KINDS[block.kind]
            return (set(info.inputs), info.variadic)
        inner = names.get(block.kind)
        if inner is None:
            return set(), False
        return {p.name for p in inner.ports if p.direction == "in"}, False

    def source_ports(block: SourceBlock) -> set[str]:
        if block.kind in KINDS:
            return {"out"}
        inner = names.get(block.kind)
        if inner is None:
            return set()
        return {p.name for p in inner.ports if p.direction == "out"}

    for link in definition.links:
        src, dst = link.src, link.dst
        # source endpoint
        if src.port is None and src.block in in_ports | out_ports:
            pass
        elif src.block in block_by_name:
            block = block_by_name[src.block]
            port = src.port if src.port is not None else "out"
            if block.kind in KINDS or block.kind in names:
                if port not in source_ports(block):
                    diagnostics.append(Diagnostic(
                        f"{src.block!r} has no output port {port!r}", src.span
                    ))
        else:
            diagnostics.append(Diagnostic(
                f"unknown link source {src.block!r}", src.span
            ))
        # destination endpoint
        if dst.port is None and dst.block in out_ports:
            key: tuple[str | None, str] = (None, dst.block)
        elif dst.port is None and dst.block in in_ports:
            diagnostics.append(Diagnostic(
                f"cannot drive input port {dst.block!r} from inside its "
                f"definition", dst.span
            ))
            continue
        elif dst.block in block_by_name:
            block = block_by_name[dst.block]
            if dst.port is None:
                diagnostics.append(Diagnostic(
                    f"link into {dst.block!r} must name an input port", dst.span
                ))
                continue
            if block.kind in KINDS or block.kind in names:
                ports, variadic = target_ports(block)
                valid = dst.port in ports or (
                    variadic and re.fullmatch(r"in[1-9]\d*", dst.port)
                )
                if not valid:
                    diagnostics.append(Diagnostic(
                        f"{dst.block!r} has no input port {dst.port!r}", dst.span
                    ))
                    continue
            key = (dst.block, dst.port)
        else:
            diagnostics.append(Diagnostic(
                f"unknown link target {dst.block!r}", dst.span
            ))
            continue
        if key in drivers:
            diagnostics.append(Diagnostic(
                f"multiple drivers for {dst.block + '.' + dst.port if dst.port else dst.block}",
                dst.span,
            ))
        else:
            drivers[key] = dst.span

    # every declared output port and every block input must be driven
    for port in definition.ports:
        if port.direction == "out" and (None, port.name) not in drivers:
            diagnostics.append(Diagnostic(
                f"output port {port.name!r} has no driver", port.span
            ))
    for block in definition.blocks:
        ports, variadic = target_ports(block)
        driven = {p for (b, p) in drivers if b == block.name}
        if variadic:
            expected = {f"in{i + 1}" for i in range(len(driven))}
            if len(driven) < VARIADIC_MIN_INPUTS or driven != expected:
                diagnostics.append(Diagnostic(
                    f"{block.name!r} ({block.kind}) needs inputs in1..inN "
                    f"(N >= {VARIADIC_MIN_INPUTS}) fully driven", block.span
                ))
        else:
            for port in sorted(ports - driven):
                diagnostics.append(Diagnostic(
                    f"input port {port!r} of {block.name!r} has no driver",
                    block.span,
                ))


def _check_recursion(source: SourceModel, names: dict[str, SourceDefinition],
                     diagnostics: list[Diagnostic]) -> None:
    state: dict[str, str] = {}

    def visit(name: str, trail: list[str]) -> None:
        if state.get(name) == "done":
            return
        if state.get(name) == "visiting":
            cycle = trail[trail.index(name):] + [name]
            diagnostics.append(Diagnostic(
                f"recursive definition chain: {' -> '.join(cycle)}",
                names[name].span,
            ))
            return
        state[name] = "visiting"
        for block in names[name].blocks:
            if block.kind in names:
                visit(block.kind, trail + [name])
        state[name] = "done"

    for name in names:
        visit(name, [])


# --- pretty printer -----------------------------------------------------------

def print_model(source: SourceModel) -> str:
    """Canonical text form; re-parsing yields a structurally identical model."""
    chunks: list[str] = []
    for definition in source.definitions:
        ports = "; ".join(
            f"{p.direction} {p.name}" for p in definition.ports
        )
        chunks.append(f"cbd {definition.name}({ports}) {{")
        for block in definition.blocks:
            args = ", ".join(
                repr(a.value) if a.name is None else f"{a.name}={a.value!r}"
                for a in block.args
            )
            chunks.append(f"  block {block.name} = {block.kind}({args});")
        for link in definition.links:
            chunks.append(
                f"  {_format_endpoint(link.src)} -> {_format_endpoint(link.dst)};"
            )
        chunks.append("}")
        chunks.append("")
    return "\n".join(chunks)


def _format_endpoint(endpoint: SourceEndpoint) -> str:
    if endpoint.port is None:
        return endpoint.block
    return f"{endpoint.block}.{endpoint.port}"


def structure(source: SourceModel):
    """Span-free structural view, for fixpoint comparisons."""
    return tuple(
        (
            d.name,
            tuple((p.direction, p.name) for p in d.ports),
            tuple(
                (b.name, b.kind, tuple((a.name, a.value) for a in b.args))
                for b in d.blocks
            ),
            tuple(
                ((l.src.block, l.src.port), (l.dst.block, l.dst.port))
                for l in d.links
            ),
        )
        for d in source.definitions
    )


def load_model(text: str) -> Model:
    """Parse and validate in one call, raising on any diagnostic error."""
    result = parse(text)
    if not result.ok:
        raise ModelTextError(result.diagnostics)
    model, diagnostics = validate(result.model)
    if model is None:
        raise ModelTextError(diagnostics)
    return model


class ModelTextError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics
