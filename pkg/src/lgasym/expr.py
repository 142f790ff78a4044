"""Expression trees for the ODE coefficient functions.

Single-variable scalar expressions with closed-form differentiation.  The
coefficients f and g enter the analysis through |f|^(-1/4) and its second
derivative; computing that second derivative numerically would pollute the
L1 tail integrals downstream, so differentiation here is symbolic and
exact.  Evaluation accepts plain floats or numpy arrays.

Grammar (whitespace insignificant)::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | power
    power    := atom ('^' exponent)?
    exponent := '-'? number ('^' exponent)?      # constants only, right-assoc
    atom     := number | 'x' | func '(' expr ')' | '(' expr ')'
    func     := 'exp' | 'log' | 'sqrt' | 'sin' | 'cos' | 'abs'

'^' binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Exponents
are restricted to constants; general powers must be spelled via exp/log.

Trees are immutable (frozen dataclass) and all functions here are pure, so
everything in this module is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "abs")

_UNARY_OPS = FUNCTIONS + ("neg", "sign")
_BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class ParseError(ValueError):
    """Malformed expression text; carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__("%s (at offset %d)" % (message, offset))
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Evaluation left the real domain (log/sqrt of negative, x/0, ...)."""

    def __init__(self, message, node):
        super().__init__("%s in subexpression '%s'" % (message, to_string(node)))
        self.node = node


@dataclass(frozen=True)
class ExprNode:
    """One node of an expression tree.

    op is "const", "var", a unary operator or a binary operator.  For
    "const" the payload sits in .value; children sit in .args.
    """

    op: str
    value: float = 0.0
    args: tuple = field(default_factory=tuple)

    def __str__(self):
        return to_string(self)


VAR = ExprNode("var")


def const(v):
    return ExprNode("const", float(v))


def unary(op, a):
    if op not in _UNARY_OPS:
        raise ValueError("unknown unary operator %r" % op)
    if op == "neg":
        if a.op == "const":
            return const(-a.value)
        if a.op == "neg":
            return a.args[0]
    node = ExprNode(op, 0.0, (a,))
    if a.op == "const":
        return _try_fold(node)
    return node


def binary(op, a, b):
    if op not in _BINARY_OPS:
        raise ValueError("unknown binary operator %r" % op)
    if op == "pow" and not is_constant(b):
        raise ValueError("pow exponent must be a constant subtree")
    node = ExprNode(op, 0.0, (a, b))
    if a.op == "const" and b.op == "const":
        return _try_fold(node)
    # identity folds that cannot change domain behaviour
    if op in ("add", "sub") and b.op == "const" and b.value == 0.0:
        return a
    if op == "add" and a.op == "const" and a.value == 0.0:
        return b
    if op == "mul" and a.op == "const" and a.value == 1.0:
        return b
    if op in ("mul", "div") and b.op == "const" and b.value == 1.0:
        return a
    if op == "pow" and b.op == "const" and b.value == 1.0:
        return a
    return node


def _try_fold(node):
    try:
        return const(evaluate(node, 0.0))
    except (EvalDomainError, OverflowError, ZeroDivisionError, ValueError):
        return node


def is_constant(e):
    """True when the tree contains no variable node."""
    if e.op == "var":
        return False
    return all(is_constant(a) for a in e.args)


def constant_value(e):
    if not is_constant(e):
        raise ValueError("expression depends on x")
    return evaluate(e, 0.0)


# --------------------------------------------------------------------------
# parsing

class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self._skip_ws()
        if self.pos >= len(self.text):
            return ("end", None, self.pos)
        ch = self.text[self.pos]
        if ch in "+-*/^()":
            return (ch, ch, self.pos)
        if ch.isdigit() or ch == ".":
            return self._number()
        if ch.isalpha():
            return self._ident()
        raise ParseError("unexpected character %r" % ch, self.pos)

    def _number(self):
        start = self.pos
        text = self.text
        i = start
        while i < len(text) and (text[i].isdigit() or text[i] == "."):
            i += 1
        if i < len(text) and text[i] in "eE":
            j = i + 1
            if j < len(text) and text[j] in "+-":
                j += 1
            if j < len(text) and text[j].isdigit():
                while j < len(text) and text[j].isdigit():
                    j += 1
                i = j
        lit = text[start:i]
        try:
            val = float(lit)
        except ValueError:
            raise ParseError("bad numeric literal %r" % lit, start) from None
        return ("number", val, start)

    def _ident(self):
        start = self.pos
        text = self.text
        i = start
        while i < len(text) and text[i].isalnum():
            i += 1
        return ("ident", text[start:i], start)

    def advance(self):
        tok = self.peek()
        if tok[0] == "number":
            # re-scan to find the literal length
            _, _, start = tok
            i = start
            while i < len(self.text) and (self.text[i].isdigit() or self.text[i] == "."):
                i += 1
            if i < len(self.text) and self.text[i] in "eE":
                j = i + 1
                if j < len(self.text) and self.text[j] in "+-":
                    j += 1
                if j < len(self.text) and self.text[j].isdigit():
                    while j < len(self.text) and self.text[j].isdigit():
                        j += 1
                    i = j
            self.pos = i
        elif tok[0] == "ident":
            self.pos = tok[2] + len(tok[1])
        elif tok[0] == "end":
            pass
        else:
            self.pos = tok[2] + 1
        return tok


def parse(text):
    """Parse expression text into an ExprNode tree.

    Raises ParseError (with byte offset) on syntax errors, unknown
    identifiers, or a non-constant pow exponent.
    """
    tz = _Tokenizer(text)
    node = _parse_expr(tz)
    kind, _, off = tz.peek()
    if kind != "end":
        raise ParseError("trailing input", off)
    return node


def _parse_expr(tz):
    node = _parse_term(tz)
    while True:
        kind, _, _ = tz.peek()
        if kind == "+":
            tz.advance()
            node = binary("add", node, _parse_term(tz))
        elif kind == "-":
            tz.advance()
            node = binary("sub", node, _parse_term(tz))
        else:
            return node


def _parse_term(tz):
    node = _parse_factor(tz)
    while True:
        kind, _, _ = tz.peek()
        if kind == "*":
            tz.advance()
            node = binary("mul", node, _parse_factor(tz))
        elif kind == "/":
            tz.advance()
            node = binary("div", node, _parse_factor(tz))
        else:
            return node


def _parse_factor(tz):
    kind, _, _ = tz.peek()
    if kind == "-":
        tz.advance()
        inner = _parse_factor(tz)
        if inner.op == "const":
            return const(-inner.value)
        return unary("neg", inner)
    return _parse_power(tz)


def _parse_power(tz):
    base = _parse_atom(tz)
    kind, _, _ = tz.peek()
    if kind == "^":
        tz.advance()
        expo = _parse_exponent(tz)
        return binary("pow", base, const(expo))
    return base


def _parse_exponent(tz):
    kind, val, off = tz.peek()
    sign = 1.0
    if kind == "-":
        tz.advance()
        sign = -1.0
        kind, val, off = tz.peek()
    if kind != "number":
        raise ParseError("pow exponent must be a numeric constant", off)
    tz.advance()
    kind, _, _ = tz.peek()
    if kind == "^":
        tz.advance()
        return sign * (val ** _parse_exponent(tz))
    return sign * val


def _parse_atom(tz):
    kind, val, off = tz.peek()
    if kind == "number":
        tz.advance()
        return const(val)
    if kind == "ident":
        tz.advance()
        if val == "x":
            return VAR
        if val in FUNCTIONS:
            k2, _, off2 = tz.peek()
            if k2 != "(":
                raise ParseError("expected '(' after %r" % val, off2)
            tz.advance()
            arg = _parse_expr(tz)
            k3, _, off3 = tz.peek()
            if k3 != ")":
                raise ParseError("expected ')'", off3)
            tz.advance()
            return unary(val, arg)
        raise ParseError("unknown identifier %r" % val, off)
    if kind == "(":
        tz.advance()
        node = _parse_expr(tz)
        k2, _, off2 = tz.peek()
        if k2 != ")":
            raise ParseError("expected ')'", off2)
        tz.advance()
        return node
    raise ParseError("expected a number, 'x', function call or '('", off)


# --------------------------------------------------------------------------
# evaluation

def _is_integral(c):
    return float(c).is_integer()


def evaluate(e, x):
    """Evaluate the tree at x (float or ndarray).

    Returns a float for scalar input, an ndarray for array input.  Raises
    EvalDomainError naming the offending subexpression when evaluation
    leaves the real domain (division by zero, log/sqrt of a negative,
    negative base under a fractional power, overflow to non-finite).
    """
    arr = isinstance(x, np.ndarray)
    with np.errstate(all="ignore"):
        v = _eval(e, np.asarray(x, dtype=float) if arr else float(x))
        if arr:
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)):
                raise EvalDomainError("non-finite result", e)
            return v
        v = float(v)
        if not math.isfinite(v):
            raise EvalDomainError("non-finite result", e)
        return v


def _any(cond):
    return bool(np.any(cond))


def _eval(e, x):
    op = e.op
    if op == "const":
        if isinstance(x, np.ndarray):
            return np.full_like(x, e.value)
        return e.value
    if op == "var":
        return x
    if op in _BINARY_OPS:
        a = _eval(e.args[0], x)
        if op == "pow":
            c = e.args[1].value if e.args[1].op == "const" else constant_value(e.args[1])
            if _any(np.less(a, 0.0)) and not _is_integral(c):
                raise EvalDomainError("negative base under fractional power", e)
            if c < 0 and _any(np.equal(a, 0.0)):
                raise EvalDomainError("zero base under negative power", e)
            return np.power(a, c) if isinstance(a, np.ndarray) else a ** c
        b = _eval(e.args[1], x)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if _any(np.equal(b, 0.0)):
            raise EvalDomainError("division by zero", e)
        return a / b
    a = _eval(e.args[0], x)
    if op == "neg":
        return -a
    if op == "exp":
        return np.exp(a)
    if op == "log":
        if _any(np.less_equal(a, 0.0)):
            raise EvalDomainError("log of a non-positive value", e)
        return np.log(a)
    if op == "sqrt":
        if _any(np.less(a, 0.0)):
            raise EvalDomainError("sqrt of a negative value", e)
        return np.sqrt(a)
    if op == "sin":
        return np.sin(a)
    if op == "cos":
        return np.cos(a)
    if op == "abs":
        return np.abs(a)
    if op == "sign":
        return np.sign(a)
    raise ValueError("unknown operator %r" % op)


# --------------------------------------------------------------------------
# differentiation

def _neg(a):
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return unary("neg", a)


def _add(a, b):
    if a.op == "const" and a.value == 0.0:
        return b
    if b.op == "const" and b.value == 0.0:
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    return binary("add", a, b)


def _sub(a, b):
    if b.op == "const" and b.value == 0.0:
        return a
    if a.op == "const" and a.value == 0.0:
        return _neg(b)
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    return binary("sub", a, b)


def _mul(a, b):
    for u, v in ((a, b), (b, a)):
        if u.op == "const":
            if u.value == 0.0:
                return const(0.0)
            if u.value == 1.0:
                return v
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    return binary("mul", a, b)


def _div(a, b):
    if a.op == "const" and a.value == 0.0:
        return const(0.0)
    if b.op == "const" and b.value == 1.0:
        return a
    return binary("div", a, b)


def differentiate(e):
    """Exact derivative of the tree with respect to x.

    Total on the grammar: every parseable expression has a derivative.
    abs is differentiated as sign(u)*u' with sign(0) = 0; pow requires its
    constant exponent (guaranteed by construction).
    """
    op = e.op
    if op == "const":
        return const(0.0)
    if op == "var":
        return const(1.0)
    if op == "neg":
        return _neg(differentiate(e.args[0]))
    if op == "add":
        return _add(differentiate(e.args[0]), differentiate(e.args[1]))
    if op == "sub":
        return _sub(differentiate(e.args[0]), differentiate(e.args[1]))
    if op == "mul":
        a, b = e.args
        return _add(_mul(differentiate(a), b), _mul(a, differentiate(b)))
    if op == "div":
        a, b = e.args
        num = _sub(_mul(differentiate(a), b), _mul(a, differentiate(b)))
        return _div(num, _mul(b, b))
    if op == "pow":
        base, expo = e.args
        c = expo.value if expo.op == "const" else constant_value(expo)
        if c == 0.0:
            return const(0.0)
        reduced = binary("pow", base, const(c - 1.0))
        return _mul(const(c), _mul(reduced, differentiate(base)))
    u = e.args[0]
    du = differentiate(u)
    if op == "exp":
        return _mul(unary("exp", u), du)
    if op == "log":
        return _div(du, u)
    if op == "sqrt":
        return _div(du, _mul(const(2.0), unary("sqrt", u)))
    if op == "sin":
        return _mul(unary("cos", u), du)
    if op == "cos":
        return _neg(_mul(unary("sin", u), du))
    if op == "abs":
        return _mul(unary("sign", u), du)
    if op == "sign":
        return const(0.0)
    raise ValueError("unknown operator %r" % op)


def substitute(e, replacement):
    """Replace every occurrence of the variable by another tree."""
    if e.op == "var":
        return replacement
    if e.op == "const":
        return e
    return ExprNode(e.op, e.value, tuple(substitute(a, replacement) for a in e.args))


# --------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _fmt_number(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e):
    """Render with minimal parentheses; parse(to_string(e)) rebuilds e."""
    op = e.op
    if op == "const":
        if e.value < 0.0:
            return "-" + _fmt_number(-e.value)
        return _fmt_number(e.value)
    if op == "var":
        return "x"
    if op in ("add", "sub"):
        sym = " + " if op == "add" else " - "
        left = to_string(e.args[0])
        right = to_string(e.args[1])
        if _prec_of(e.args[1]) <= 1 and op == "sub":
            right = "(" + right + ")"
        return left + sym + right
    if op in ("mul", "div"):
        sym = "*" if op == "mul" else "/"
        left = to_string(e.args[0])
        right = to_string(e.args[1])
        if _prec_of(e.args[0]) < 2:
            left = "(" + left + ")"
        if _prec_of(e.args[1]) < 2 or (op == "div" and _prec_of(e.args[1]) == 2):
            right = "(" + right + ")"
        return left + sym + right
    if op == "neg":
        inner = to_string(e.args[0])
        if _prec_of(e.args[0]) < 3:
            inner = "(" + inner + ")"
        return "-" + inner
    if op == "pow":
        base = to_string(e.args[0])
        if _prec_of(e.args[0]) < 5:
            base = "(" + base + ")"
        c = e.args[1].value if e.args[1].op == "const" else constant_value(e.args[1])
        expo = _fmt_number(abs(c))
        return base + "^" + ("-" + expo if c < 0 else expo)
    # function application
    return "%s(%s)" % (op, to_string(e.args[0]))


def _prec_of(e):
    if e.op in ("const", "var") or e.op in _UNARY_OPS and e.op != "neg":
        if e.op == "const" and e.value < 0.0:
            return 3  # prints with a leading minus
        return 5
    return _PREC[e.op]


# --------------------------------------------------------------------------
# compilation to a fast vectorized callable

_GEN = {
    "add": "({}+{})", "sub": "({}-{})", "mul": "({}*{})", "div": "({}/{})",
    "neg": "(-{})", "exp": "np.exp({})", "log": "np.log({})",
    "sqrt": "np.sqrt({})", "sin": "np.sin({})", "cos": "np.cos({})",
    "abs": "np.abs({})", "sign": "np.sign({})",
}


def _gen(e):
    if e.op == "const":
        return "(" + repr(e.value) + ")"
    if e.op == "var":
        return "x"
    if e.op == "pow":
        c = e.args[1].value if e.args[1].op == "const" else constant_value(e.args[1])
        return "(%s**(%s))" % (_gen(e.args[0]), repr(c))
    parts = [_gen(a) for a in e.args]
    return _GEN[e.op].format(*parts)


def compile_fn(e):
    """Compile a tree to a numpy-vectorized callable.

    The compiled path skips the per-node domain checks of evaluate() for
    speed (out-of-domain input produces nan/inf rather than an exception);
    callers on hot paths validate finiteness of the results themselves.
    """
    src = "def _f(x):\n    with np.errstate(all='ignore'):\n        return %s\n" % _gen(e)
    ns = {"np": np}
    exec(src, ns)
    fn = ns["_f"]

    def wrapped(x):
        v = fn(x)
        if isinstance(x, np.ndarray):
            return np.broadcast_to(np.asarray(v, dtype=float), x.shape).copy() \
                if np.ndim(v) == 0 else np.asarray(v, dtype=float)
        return float(v)

    wrapped.source = src
    return wrapped
