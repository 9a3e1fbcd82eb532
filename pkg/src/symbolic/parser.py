"""
Expression Parser

Recursive descent over the grammar

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' signed_integer)?
    atom   := number | identifier | func '(' expr ')' | '(' expr ')' | '-' factor
    func   := sin | cos | tan | exp | ln | sqrt

Results are sympy expressions in simplified normal form. Decimal literals are
53-bit floats, so the shortest repr printed by `render` reads back exactly.
Constant subterms that evaluate to an infinity, NaN or a non-real value
(1/0, ln(0), sqrt(-2)) are rejected where they are built.
"""

import re
from dataclasses import dataclass

import sympy

from src.symbolic.expression import FUNCTIONS, SymbolTable, simplify, symbol
from src.utils.errors import ArityError, EvaluationError, ExpressionSyntaxError, UnknownSymbolError

FLOAT_PRECISION = 53

_NOT_FINITE = (sympy.zoo, sympy.oo, -sympy.oo, sympy.nan)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, op, end
    text: str
    position: int


def tokenize(text: str) -> list[Token]:
    """Split text into tokens, raising on the first unexpected character."""
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            raise ExpressionSyntaxError(
                f"Unexpected character '{text[pos]}'", text=text, position=pos
            )
        kind = match.lastgroup or "op"
        value = match.group(kind)
        tokens.append(Token(kind, value, match.start(kind)))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class ExpressionParser:
    """Single-use parser over one expression string."""

    def __init__(self, text: str, symbols: SymbolTable):
        self.text = text
        self.symbols = symbols
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != "end":
            self.index += 1
        return token

    def _error(self, message: str, token: Token | None = None) -> ExpressionSyntaxError:
        tok = token or self.current
        return ExpressionSyntaxError(message, text=self.text, position=tok.position)

    def _expect(self, op: str) -> Token:
        if self.current.kind == "op" and self.current.text == op:
            return self._advance()
        found = self.current.text or "end of input"
        raise self._error(f"Expected '{op}', found '{found}'")

    def parse(self) -> sympy.Expr:
        if self.current.kind == "end":
            raise self._error("Empty expression")
        result = self._expr()
        if self.current.kind != "end":
            raise self._error(f"Unexpected token '{self.current.text}'")
        return result

    def _expr(self) -> sympy.Expr:
        result = self._term()
        while self.current.kind == "op" and self.current.text in "+-":
            token = self.current
            op = self._advance().text
            rhs = self._term()
            result = result + rhs if op == "+" else result - rhs
            self._check_constant(result, token)
        return result

    def _term(self) -> sympy.Expr:
        result = self._factor()
        while self.current.kind == "op" and self.current.text in "*/":
            token = self.current
            op = self._advance().text
            rhs = self._factor()
            if op == "/" and rhs.is_zero:
                raise EvaluationError(
                    f"Division by zero at position {token.position} in '{self.text}'"
                )
            result = result * rhs if op == "*" else result / rhs
            self._check_constant(result, token)
        return result

    def _factor(self) -> sympy.Expr:
        base = self._atom()
        if self.current.kind == "op" and self.current.text == "^":
            token = self._advance()
            return self._check_constant(sympy.Pow(base, self._signed_integer()), token)
        return base

    def _signed_integer(self) -> sympy.Integer:
        sign = 1
        if self.current.kind == "op" and self.current.text in "+-":
            sign = -1 if self._advance().text == "-" else 1
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise self._error("Exponent must be an integer")
        self._advance()
        return sympy.Integer(sign * int(token.text))

    def _atom(self) -> sympy.Expr:
        token = self.current
        if token.kind == "number":
            self._advance()
            if token.text.isdigit():
                return sympy.Integer(int(token.text))
            return sympy.Float(token.text, precision=FLOAT_PRECISION)
        if token.kind == "ident":
            self._advance()
            if token.text in FUNCTIONS:
                return self._call(token)
            if token.text not in self.symbols:
                raise UnknownSymbolError(
                    token.text, text=self.text, position=token.position
                )
            return symbol(token.text)
        if token.kind == "op" and token.text == "(":
            self._advance()
            inner = self._expr()
            self._expect(")")
            return inner
        if token.kind == "op" and token.text == "-":
            self._advance()
            return -self._factor()
        if token.kind == "end":
            raise self._error("Unexpected end of input")
        raise self._error(f"Unexpected token '{token.text}'")

    def _call(self, name: Token) -> sympy.Expr:
        if not (self.current.kind == "op" and self.current.text == "("):
            raise self._error(f"Function '{name.text}' requires '('")
        self._advance()
        args: list[sympy.Expr] = []
        if not (self.current.kind == "op" and self.current.text == ")"):
            args.append(self._expr())
            while self.current.kind == "op" and self.current.text == ",":
                self._advance()
                args.append(self._expr())
        self._expect(")")
        if len(args) != 1:
            raise ArityError(
                name.text, len(args), text=self.text, position=name.position
            )
        return self._check_constant(FUNCTIONS[name.text](args[0]), name)

    def _check_constant(self, e: sympy.Expr, token: Token) -> sympy.Expr:
        if e.has(*_NOT_FINITE) or e.has(sympy.I):
            raise EvaluationError(
                f"Constant evaluates to {e} at position {token.position} in '{self.text}'"
            )
        return e


def parse_expression(text: str, symbols: SymbolTable) -> sympy.Expr:
    """
    Parse one expression against a symbol table.

    Raises:
        ExpressionSyntaxError: Lexical or syntax error, with position
        UnknownSymbolError: Identifier not in the table
        ArityError: Function called with other than one argument
        EvaluationError: Constant subterm with no finite real value
    """
    return simplify(ExpressionParser(text, symbols).parse())
