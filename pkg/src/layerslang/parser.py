"""Recursive-descent parser producing an :class:`~layerslang.ast.Experiment`.

The grammar needs at most three tokens of lookahead, for the dotted forms
in scripts (``n.l.mu = 1`` versus ``n.mu = 1`` versus ``n.train(3)``).
Parsing stops at the first syntax error.
"""

from . import ast
from .diagnostics import ParseError
from .lexer import TokenKind as K, tokenize

LAYER_KINDS = {K.FI: "FI", K.CI: "CI", K.F: "F", K.FO: "FO",
               K.C: "C", K.MP: "MP", K.CA: "CA"}

CI_PARAMS = (K.NZ, K.NR, K.NC, K.CR, K.CC)
C_PARAMS = (K.NK, K.KR, K.KC, K.RPAD, K.CPAD, K.STRIDE)
MP_PARAMS = (K.SIZER, K.SIZEC)
FO_PARAMS = (K.CLASSIFICATION, K.REGRESSION, K.AUTOENCODER)
AMEND_PARAMS = tuple(K(p) for p in ast.REAL_PARAMS + ast.INT_PARAMS)
NET_COMMANDS = (K.TRAIN, K.TEST, K.LOAD, K.SAVE, K.TESTOUT)
DATA_COMMANDS = (K.ZSCORE, K.CENTER, K.YUV, K.DIV)


def _names(kinds):
    return {k.value if k in (K.ID, K.CTE, K.NFILE, K.EOF) else f"'{k.value}'"
            for k in kinds}


class Parser:
    def __init__(self, tokens):
        self.tokens = list(tokens)
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    def peek(self, k=0):
        i = min(self.pos + k, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, *kinds, k=0):
        return self.peek(k).kind in kinds

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind is not K.EOF:
            self.pos += 1
        return tok

    def expect(self, *kinds):
        if not self.at(*kinds):
            raise ParseError(_names(kinds), self.peek())
        return self.advance()

    def fail(self, *kinds):
        raise ParseError(_names(kinds), self.peek())

    # -- experiment ----------------------------------------------------------

    def parse_experiment(self):
        first = self.peek()
        constants = self.parse_constants() if self.at(K.CONST) else None
        definitions = []
        while not self.at(K.EOF):
            if self.at(K.DATA):
                definitions.append(self.parse_data())
            elif self.at(K.NETWORK):
                definitions.append(self.parse_network())
            elif self.at(K.SCRIPT):
                definitions.append(self.parse_script())
            elif constants is None and not definitions:
                self.fail(K.CONST, K.DATA, K.NETWORK, K.SCRIPT)
            else:
                self.fail(K.DATA, K.NETWORK, K.SCRIPT)
        if not definitions:
            self.fail(K.DATA, K.NETWORK, K.SCRIPT)
        return ast.Experiment(constants, definitions, first.span.to(self.peek().span))

    def parse_constants(self):
        start = self.expect(K.CONST)
        self.expect(K.LBRACE)
        entries = [self.parse_const()]
        while not self.at(K.RBRACE):
            entries.append(self.parse_const())
        end = self.advance()
        return ast.ConstBlock(entries, start.span.to(end.span))

    def parse_const(self):
        name = self.expect(K.BATCH, K.THREADS, K.LOG)
        self.expect(K.EQ)
        if name.kind is K.LOG:
            value = self.expect(K.NFILE)
        else:
            value = self.expect(K.CTE)
        return ast.ConstEntry(name.lexeme, value.value, name.span.to(value.span))

    def parse_data(self):
        start = self.expect(K.DATA)
        self.expect(K.LBRACE)
        entries = [self.parse_datum()]
        while not self.at(K.RBRACE):
            entries.append(self.parse_datum())
        end = self.advance()
        return ast.DataBlock(entries, start.span.to(end.span))

    def parse_datum(self):
        name = self.expect(K.ID)
        self.expect(K.LBRACK)
        params = [self.parse_datum_param()]
        while self.at(K.COMMA):
            self.advance()
            params.append(self.parse_datum_param())
        end = self.expect(K.RBRACK)
        return ast.DatumDef(name.lexeme, params, name.span.to(end.span))

    def parse_datum_param(self):
        tok = self.expect(K.FILENAME, K.ASCII, K.BINARY)
        if tok.kind is K.FILENAME:
            self.expect(K.EQ)
            path = self.expect(K.NFILE)
            return ast.DatumParam("filename", path.value, tok.span.to(path.span))
        return ast.DatumParam(tok.lexeme, None, tok.span)

    # -- networks ------------------------------------------------------------

    def parse_network(self):
        start = self.expect(K.NETWORK)
        name = self.expect(K.ID)
        self.expect(K.LBRACE)
        netdata = [self.parse_netdata((K.TR,))]
        while self.at(K.DATA):
            netdata.append(self.parse_netdata((K.VA, K.TS)))
        statements = [self.parse_statement()]
        while not self.at(K.RBRACE):
            statements.append(self.parse_statement())
        end = self.advance()
        return ast.NetworkDef(name.lexeme, netdata, statements, start.span.to(end.span))

    def parse_netdata(self, roles):
        start = self.expect(K.DATA)
        role = self.expect(*roles)
        data = self.expect(K.ID)
        return ast.NetData(role.lexeme, data.lexeme, start.span.to(data.span))

    def parse_statement(self):
        if self.peek().kind in LAYER_KINDS:
            return self.parse_layer()
        if self.at(K.ID):
            return self.parse_edge()
        self.fail(K.ID, *LAYER_KINDS)

    def parse_layer(self):
        kind_tok = self.advance()
        kind = LAYER_KINDS[kind_tok.kind]
        name = self.expect(K.ID)
        if kind in ("FI", "CA"):
            return ast.LayerDecl(kind, name.lexeme, None, kind_tok.span.to(name.span))
        self.expect(K.LBRACK)
        if kind == "F":
            params = []
            if self.at(K.NUMNODES):
                params.append(self.parse_assign((K.NUMNODES,)))
            elif self.at(K.LOCAL):
                tok = self.advance()
                params.append(ast.LayerParam("local", None, tok.span))
        elif kind == "FO":
            tok = self.expect(*FO_PARAMS)
            params = [ast.LayerParam(tok.lexeme, None, tok.span)]
            while self.at(*FO_PARAMS):
                tok = self.advance()
                params.append(ast.LayerParam(tok.lexeme, None, tok.span))
        else:
            allowed = {"CI": CI_PARAMS, "C": C_PARAMS, "MP": MP_PARAMS}[kind]
            params = [self.parse_assign(allowed)]
            while self.at(K.COMMA):
                self.advance()
                params.append(self.parse_assign(allowed))
        end = self.expect(K.RBRACK)
        return ast.LayerDecl(kind, name.lexeme, params, kind_tok.span.to(end.span))

    def parse_assign(self, allowed):
        name = self.expect(*allowed)
        self.expect(K.EQ)
        value = self.expect(K.CTE)
        return ast.LayerParam(name.lexeme, value.value, name.span.to(value.span))

    def parse_namelayer(self):
        first = self.expect(K.ID)
        if self.at(K.DOT):
            self.advance()
            second = self.expect(K.ID)
            return ast.NameLayer(second.lexeme, first.lexeme, first.span.to(second.span))
        return ast.NameLayer(first.lexeme, None, first.span)

    def parse_edge(self):
        src = self.parse_namelayer()
        self.expect(K.ARROW)
        dst = self.parse_namelayer()
        return ast.EdgeDecl(src, dst, src.span.to(dst.span))

    # -- scripts -------------------------------------------------------------

    def parse_script(self):
        start = self.expect(K.SCRIPT)
        self.expect(K.LBRACE)
        actions = [self.parse_action()]
        while not self.at(K.RBRACE):
            actions.append(self.parse_action())
        end = self.advance()
        return ast.ScriptBlock(actions, start.span.to(end.span))

    def parse_action(self):
        if self.at(K.TRAIN):
            return self.parse_joint_train()
        first = self.expect(K.ID, K.TRAIN)
        self.expect(K.DOT)
        if self.at(*AMEND_PARAMS):
            return self.parse_amendment(first, None)
        if self.at(*NET_COMMANDS):
            return self.parse_net_command(first)
        if self.at(*DATA_COMMANDS):
            return self.parse_data_command(first)
        if self.at(K.ID):
            second = self.advance()
            self.expect(K.DOT)
            if self.at(K.PRINTKERNELS):
                self.advance()
                self.expect(K.LPAREN)
                path = self.expect(K.NFILE)
                end = self.expect(K.RPAREN)
                return ast.PrintKernels(first.lexeme, second.lexeme, path.value,
                                        first.span.to(end.span))
            if self.at(*AMEND_PARAMS):
                return self.parse_amendment(first, second)
            self.fail(K.PRINTKERNELS, *AMEND_PARAMS)
        self.fail(K.ID, *AMEND_PARAMS, *NET_COMMANDS, *DATA_COMMANDS)

    def parse_amendment(self, first, second):
        param = self.advance()
        self.expect(K.EQ)
        value = self.expect(K.CTE)
        return ast.Amendment(first.lexeme, second.lexeme if second else None,
                             param.lexeme, value.value, first.span.to(value.span))

    def parse_joint_train(self):
        start = self.expect(K.TRAIN)
        self.expect(K.LPAREN)
        epochs = self.expect(K.CTE)
        self.expect(K.COMMA)
        batches = self.expect(K.CTE)
        nets = []
        while self.at(K.COMMA):
            self.advance()
            nets.append(self.expect(K.ID).lexeme)
        end = self.expect(K.RPAREN)
        return ast.JointTrain(epochs.value, batches.value, nets, start.span.to(end.span))

    def _odata(self):
        self.expect(K.LPAREN)
        data = self.advance().lexeme if self.at(K.ID) else None
        return data, self.expect(K.RPAREN)

    def _file_arg(self):
        self.expect(K.LPAREN)
        path = self.expect(K.NFILE)
        return path.value, self.expect(K.RPAREN)

    def parse_net_command(self, target):
        op = self.advance()
        name = target.lexeme
        if op.kind is K.TRAIN:
            self.expect(K.LPAREN)
            epochs = self.expect(K.CTE)
            end = self.expect(K.RPAREN)
            return ast.Train(name, epochs.value, target.span.to(end.span))
        if op.kind is K.TEST:
            data, end = self._odata()
            return ast.Test(name, data, target.span.to(end.span))
        path, end = self._file_arg()
        cls = {K.LOAD: ast.Load, K.SAVE: ast.Save, K.TESTOUT: ast.TestOut}[op.kind]
        return cls(name, path, target.span.to(end.span))

    def parse_data_command(self, target):
        op = self.advance()
        name = target.lexeme
        if op.kind in (K.ZSCORE, K.CENTER):
            ref, end = self._odata()
            cls = ast.Zscore if op.kind is K.ZSCORE else ast.Center
            return cls(name, ref, target.span.to(end.span))
        self.expect(K.LPAREN)
        if op.kind is K.DIV:
            value = self.expect(K.CTE)
            end = self.expect(K.RPAREN)
            return ast.Div(name, value.value, target.span.to(end.span))
        end = self.expect(K.RPAREN)
        return ast.Yuv(name, target.span.to(end.span))


def parse(tokens):
    """Parse a token sequence (ending in EOF) into an Experiment."""
    return Parser(tokens).parse_experiment()


def parse_source(source):
    return parse(tokenize(source))


# -- canonical rendering -------------------------------------------------------

def _num(value):
    return format(value, "f")


def _render_layer(decl):
    if decl.params is None:
        return f"{decl.kind} {decl.name}"
    parts = []
    for p in decl.params:
        parts.append(p.name if p.value is None else f"{p.name}={_num(p.value)}")
    sep = " " if decl.kind == "FO" else ", "
    return f"{decl.kind} {decl.name} [{sep.join(parts)}]"


def _render_action(a):
    if isinstance(a, ast.Amendment):
        target = f"{a.net}.{a.layer}" if a.layer else a.net
        return f"{target}.{a.param} = {_num(a.value)}"
    if isinstance(a, ast.PrintKernels):
        return f'{a.net}.{a.layer}.printkernels("{a.file}")'
    if isinstance(a, ast.JointTrain):
        args = [_num(a.epochs), _num(a.batches), *a.nets]
        return f"train({', '.join(args)})"
    if isinstance(a, ast.Train):
        return f"{a.net}.train({_num(a.epochs)})"
    if isinstance(a, ast.Test):
        return f"{a.net}.test({a.data or ''})"
    if isinstance(a, (ast.Load, ast.Save, ast.TestOut)):
        op = {ast.Load: "load", ast.Save: "save", ast.TestOut: "testout"}[type(a)]
        return f'{a.net}.{op}("{a.file}")'
    if isinstance(a, (ast.Zscore, ast.Center)):
        op = "zscore" if isinstance(a, ast.Zscore) else "center"
        return f"{a.data}.{op}({a.ref or ''})"
    if isinstance(a, ast.Yuv):
        return f"{a.data}.yuv()"
    if isinstance(a, ast.Div):
        return f"{a.data}.div({_num(a.value)})"
    raise TypeError(f"unknown action {a!r}")


def dump_ast(exp):
    """Render an Experiment as canonical Layers source.

    The output is itself a valid program: parsing it gives back a tree equal
    to ``exp``.
    """
    out = []
    if exp.constants is not None:
        out.append("const {")
        for e in exp.constants.entries:
            value = f'"{e.value}"' if e.name == "log" else _num(e.value)
            out.append(f"  {e.name} = {value}")
        out.append("}")
    for block in exp.definitions:
        if out:
            out.append("")
        if isinstance(block, ast.DataBlock):
            out.append("data {")
            for d in block.entries:
                ps = [f'filename="{p.value}"' if p.name == "filename" else p.name
                      for p in d.params]
                out.append(f"  {d.name} [{', '.join(ps)}]")
            out.append("}")
        elif isinstance(block, ast.NetworkDef):
            out.append(f"network {block.name} {{")
            for nd in block.netdata:
                out.append(f"  data {nd.role} {nd.data}")
            for st in block.statements:
                if isinstance(st, ast.LayerDecl):
                    out.append("  " + _render_layer(st))
                else:
                    out.append(f"  {st.src} -> {st.dst}")
            out.append("}")
        else:
            out.append("script {")
            for a in block.actions:
                out.append("  " + _render_action(a))
            out.append("}")
    return "\n".join(out) + "\n"
