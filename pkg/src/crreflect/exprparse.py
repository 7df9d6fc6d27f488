"""Exact expression front-end.

Parses signed sums of terms `coef*var^e*var^e...` into truncated series.
Coefficients are exact rationals: `p`, `p/q`, `i`, `p/q*i`, or the bracketed
complex form `(a/b+c/d*i)`.  The printer in `series.format_series` emits this
same grammar, so parse-print-parse is the identity.
"""

from __future__ import annotations

from fractions import Fraction

from .context import VariableContext
from .gaussian import GaussianRational
from .series import TruncatedSeries


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__("%s (at position %d)" % (message, position))
        self.position = position


_PUNCT = "+-*/^()"


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _PUNCT:
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ParseError("unexpected character %r" % c, i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text, context, order, aliases=None, warnings=None):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.context = context
        self.order = order
        self.aliases = aliases or {}
        self.warnings = warnings if warnings is not None else []

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ParseError("expected %s, found %r" % (kind, tok[1] or "end"),
                             tok[2])
        self.pos += 1
        return tok

    def parse(self) -> TruncatedSeries:
        total = TruncatedSeries.zero(self.context, self.order)
        sign = 1
        tok = self.peek()
        if tok[0] in "+-":
            sign = -1 if tok[0] == "-" else 1
            self.take()
        while True:
            total = total + self.term(sign)
            tok = self.peek()
            if tok[0] == "end":
                return total
            if tok[0] in "+-":
                sign = -1 if tok[0] == "-" else 1
                self.take()
            else:
                raise ParseError("expected '+' or '-', found %r" % tok[1],
                                 tok[2])

    def term(self, sign) -> TruncatedSeries:
        coeff = GaussianRational(sign)
        exps = [0] * self.context.arity
        saw_factor = False
        while True:
            tok = self.peek()
            if tok[0] == "num":
                coeff = coeff * self.rational()
            elif tok[0] == "(":
                coeff = coeff * self.complex_paren()
            elif tok[0] == "ident" and tok[1] == "i":
                self.take()
                coeff = coeff * GaussianRational(0, 1)
            elif tok[0] == "ident":
                name, power = self.variable_power()
                exps[self.context.index(name)] += power
            else:
                raise ParseError("expected a coefficient or variable, found %r"
                                 % (tok[1] or "end"), tok[2])
            saw_factor = True
            if self.peek()[0] == "*":
                self.take()
                continue
            break
        if not saw_factor:
            raise ParseError("empty term", self.peek()[2])
        if sum(exps) > self.order:
            self.warnings.append(
                "term of degree %d exceeds order %d; truncated"
                % (sum(exps), self.order))
            return TruncatedSeries.zero(self.context, self.order)
        return TruncatedSeries.monomial(self.context, self.order,
                                        tuple(exps), coeff)

    def rational(self) -> GaussianRational:
        num = int(self.take("num")[1])
        if self.peek()[0] == "/":
            self.take()
            den_tok = self.take("num")
            den = int(den_tok[1])
            if den == 0:
                raise ParseError("zero denominator", den_tok[2])
            value = Fraction(num, den)
        else:
            value = Fraction(num)
        if self.peek()[0] == "*" and self.tokens[self.pos + 1][:2] == ("ident", "i"):
            self.take()
            self.take()
            return GaussianRational(0, value)
        return GaussianRational(value)

    def complex_paren(self) -> GaussianRational:
        self.take("(")
        first = self.signed_rational()
        tok = self.peek()
        if tok[0] == ")":
            self.take()
            return first
        if tok[0] not in "+-":
            raise ParseError("expected '+', '-' or ')' in coefficient", tok[2])
        sign = -1 if tok[0] == "-" else 1
        self.take()
        if self.peek()[:2] == ("ident", "i"):
            self.take()
            second = GaussianRational(0, 1)
        else:
            second = self.rational()
            if second.is_real():
                raise ParseError("expected imaginary part like c/d*i",
                                 self.peek()[2])
        self.take(")")
        return first + second * sign

    def signed_rational(self) -> GaussianRational:
        sign = 1
        tok = self.peek()
        if tok[0] in "+-":
            sign = -1 if tok[0] == "-" else 1
            self.take()
        if self.peek()[:2] == ("ident", "i"):
            self.take()
            return GaussianRational(0, sign)
        return self.rational() * sign

    def variable_power(self):
        tok = self.take("ident")
        name = self.aliases.get(tok[1], tok[1])
        if name not in self.context:
            raise ParseError("unknown variable %r" % tok[1], tok[2])
        power = 1
        if self.peek()[0] == "^":
            self.take()
            power = int(self.take("num")[1])
        return name, power


def parse_expression(text: str, context: VariableContext, order: int,
                     aliases=None, warnings=None) -> TruncatedSeries:
    """Parse one expression into a series over `context`."""
    return _Parser(text, context, order, aliases, warnings).parse()
