"""Expression language used by TM guards, monitors and Event-B-lite machines.

Integers, enumerated-set symbols and booleans; arithmetic ``+ - * div mod``,
comparisons, ``and/or/not/=>`` and membership in ``NAT``, ``NAT1``, ``INT``,
a named enumerated set or a literal ``{a, b}``.
"""

from dataclasses import dataclass

from .errors import EvalError, ExprTypeError, ParseError
from .lexer import TokenStream, tokenize

INT = "int"
BOOL = "bool"

BUILTIN_SETS = ("NAT", "NAT1", "INT", "BOOL")


@dataclass(frozen=True)
class Lit:
    value: object  # int or bool


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Member:
    operand: object
    set_name: str = ""
    elements: tuple = ()  # used when set_name is empty


_PREC = {"=>": 1, "or": 2, "and": 3, "cmp": 5, "+": 6, "-": 6, "*": 7, "div": 7, "mod": 7}
_CMP = ("=", "!=", "<", "<=", ">", ">=")


class ExprParser:
    """Recursive-descent parser over a shared :class:`TokenStream`.

    Stops at the first token that cannot continue an expression, so the
    ``.tm`` parser can embed expressions between ``:`` and ``?``.
    """

    def __init__(self, stream):
        self.s = stream

    def parse(self):
        return self._implies()

    def _implies(self):
        left = self._or()
        if self.s.accept("=>"):
            right = self._implies()
            return Binary("=>", left, right)
        return left

    def _or(self):
        left = self._and()
        while self.s.accept("or"):
            left = Binary("or", left, self._and())
        return left

    def _and(self):
        left = self._not()
        while self.s.accept("and"):
            left = Binary("and", left, self._not())
        return left

    def _not(self):
        if self.s.accept("not"):
            return Unary("not", self._not())
        return self._cmp()

    def _cmp(self):
        left = self._sum()
        tok = self.s.current
        if tok.kind == "OP" and tok.value in _CMP:
            self.s.advance()
            return Binary(tok.value, left, self._sum())
        if self.s.accept("in"):
            return self._membership(left)
        return left

    def _membership(self, operand):
        if self.s.accept("{"):
            elems = [self.s.expect_kind("NAME", "element name").value]
            while self.s.accept(","):
                elems.append(self.s.expect_kind("NAME", "element name").value)
            self.s.expect("}")
            return Member(operand, "", tuple(elems))
        name = self.s.expect_kind("NAME", "set name").value
        return Member(operand, name)

    def _sum(self):
        left = self._term()
        while self.s.current.kind == "OP" and self.s.current.value in ("+", "-"):
            op = self.s.advance().value
            left = Binary(op, left, self._term())
        return left

    def _term(self):
        left = self._unary()
        while self.s.current.kind == "OP" and self.s.current.value in ("*", "div", "mod"):
            op = self.s.advance().value
            left = Binary(op, left, self._unary())
        return left

    def _unary(self):
        if self.s.accept("-"):
            operand = self._unary()
            if isinstance(operand, Lit) and type(operand.value) is int:
                return Lit(-operand.value)
            return Unary("-", operand)
        return self._atom()

    def _atom(self):
        tok = self.s.current
        if tok.kind == "INT":
            self.s.advance()
            return Lit(int(tok.value))
        if tok.kind == "OP" and tok.value in ("true", "false"):
            self.s.advance()
            return Lit(tok.value == "true")
        if tok.kind == "NAME":
            self.s.advance()
            return Name(tok.value)
        if self.s.accept("("):
            inner = self.parse()
            self.s.expect(")")
            return inner
        raise self.s.error(
            f"unexpected {tok.describe()} in expression",
            ["integer", "name", "'('", "'not'", "'-'"],
        )


def parse_expr(text, origin="<memory>"):
    stream = TokenStream(tokenize(text, origin), origin)
    expr = ExprParser(stream).parse()
    if stream.current.kind != "EOF":
        raise stream.error(f"unexpected {stream.current.describe()} after expression", ["end of expression"])
    return expr


# -- printing ---------------------------------------------------------------

def _prec(e):
    if isinstance(e, Binary):
        return _PREC["cmp"] if e.op in _CMP else _PREC[e.op]
    if isinstance(e, Member):
        return _PREC["cmp"]
    if isinstance(e, Unary):
        return 4 if e.op == "not" else 8
    return 9


def to_text(e):
    """Canonical text; ``parse_expr(to_text(e)) == e``."""
    if isinstance(e, Lit):
        if type(e.value) is bool:
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Unary):
        inner = to_text(e.operand)
        if _prec(e.operand) < _prec(e) or isinstance(e.operand, Lit):
            inner = f"({inner})"
        return f"not {inner}" if e.op == "not" else f"-{inner}"
    if isinstance(e, Member):
        left = _wrap(e.operand, _PREC["cmp"], strict=True)
        right = e.set_name or "{" + ", ".join(e.elements) + "}"
        return f"{left} in {right}"
    p = _prec(e)
    if e.op == "=>":
        return f"{_wrap(e.left, p, strict=True)} => {_wrap(e.right, p)}"
    if e.op in _CMP:
        return f"{_wrap(e.left, p, strict=True)} {e.op} {_wrap(e.right, p, strict=True)}"
    return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p, strict=True)}"


def _wrap(e, parent, strict=False):
    text = to_text(e)
    p = _prec(e)
    if p < parent or (strict and p == parent):
        return f"({text})"
    return text


def free_names(e):
    if isinstance(e, Name):
        return {e.name}
    if isinstance(e, Unary):
        return free_names(e.operand)
    if isinstance(e, Binary):
        return free_names(e.left) | free_names(e.right)
    if isinstance(e, Member):
        return free_names(e.operand)
    return set()


# -- evaluation -------------------------------------------------------------

def _kind(v):
    if type(v) is bool:
        return BOOL
    if type(v) is int:
        return INT
    return "symbol"


def _need(v, kind, op):
    if _kind(v) != kind:
        raise ExprTypeError(f"operator {op!r} expects {kind}, got {v!r}")
    return v


def int_div(a, b):
    """Integer division truncating toward zero."""
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def evaluate(e, env, sets=None):
    """Evaluate ``e``.

    ``env`` maps names to values (int, bool or symbol string). Names absent
    from ``env`` that are elements of one of ``sets`` evaluate to the symbol.
    """
    sets = sets or {}
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Name):
        if e.name in env:
            return env[e.name]
        for elems in sets.values():
            if e.name in elems:
                return e.name
        raise EvalError(f"unknown name {e.name!r}")
    if isinstance(e, Unary):
        v = evaluate(e.operand, env, sets)
        if e.op == "not":
            return not _need(v, BOOL, "not")
        return -_need(v, INT, "-")
    if isinstance(e, Member):
        v = evaluate(e.operand, env, sets)
        if not e.set_name:
            if _kind(v) != "symbol":
                raise ExprTypeError(f"membership in an enumeration needs a symbol, got {v!r}")
            return v in e.elements
        return _member(v, e.set_name, sets)
    op = e.op
    if op in ("and", "or", "=>"):
        left = _need(evaluate(e.left, env, sets), BOOL, op)
        if op == "and" and not left:
            return False
        if op == "or" and left:
            return True
        if op == "=>" and not left:
            return True
        return _need(evaluate(e.right, env, sets), BOOL, op)
    left = evaluate(e.left, env, sets)
    right = evaluate(e.right, env, sets)
    if op in ("=", "!="):
        if _kind(left) != _kind(right):
            raise ExprTypeError(f"cannot compare {left!r} with {right!r}")
        return (left == right) if op == "=" else (left != right)
    _need(left, INT, op)
    _need(right, INT, op)
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "div":
        return int_div(left, right)
    if op == "mod":
        return left - right * int_div(left, right)
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise EvalError(f"unknown operator {op!r}")


def _member(v, set_name, sets):
    if set_name in ("NAT", "NAT1", "INT"):
        _need(v, INT, "in")
        if set_name == "NAT":
            return v >= 0
        if set_name == "NAT1":
            return v >= 1
        return True
    if set_name == "BOOL":
        return _kind(v) == BOOL
    if set_name not in sets:
        raise EvalError(f"unknown set {set_name!r}")
    if _kind(v) != "symbol":
        raise ExprTypeError(f"membership in {set_name} needs a symbol, got {v!r}")
    return v in sets[set_name]


def check_bool(e, env, sets=None):
    v = evaluate(e, env, sets)
    if type(v) is not bool:
        raise ExprTypeError(f"expected a predicate, got value {v!r}")
    return v


# -- static typing ----------------------------------------------------------

def infer_type(e, types, sets=None):
    """Static type of ``e``: ``"int"``, ``"bool"`` or an enumerated-set name.

    ``types`` maps declared names to types; enumeration elements are typed
    by the set that contains them.
    """
    sets = sets or {}
    if isinstance(e, Lit):
        return BOOL if type(e.value) is bool else INT
    if isinstance(e, Name):
        if e.name in types:
            return types[e.name]
        for set_name, elems in sets.items():
            if e.name in elems:
                return set_name
        raise ExprTypeError(f"undeclared name {e.name!r}")
    if isinstance(e, Unary):
        t = infer_type(e.operand, types, sets)
        want = BOOL if e.op == "not" else INT
        if t != want:
            raise ExprTypeError(f"operator {e.op!r} expects {want}, got {t}")
        return want
    if isinstance(e, Member):
        t = infer_type(e.operand, types, sets)
        if e.set_name in ("NAT", "NAT1", "INT"):
            expected = INT
        elif e.set_name == "BOOL":
            expected = BOOL
        elif e.set_name:
            if e.set_name not in sets:
                raise ExprTypeError(f"unknown set {e.set_name!r}")
            expected = e.set_name
        else:
            owners = {s for s, elems in sets.items() if set(e.elements) <= set(elems)}
            if t not in owners:
                raise ExprTypeError(f"{to_text(e.operand)} is not an element of {set(e.elements)}")
            expected = t
        if t != expected:
            raise ExprTypeError(f"membership: {to_text(e.operand)} has type {t}, set holds {expected}")
        return BOOL
    lt = infer_type(e.left, types, sets)
    rt = infer_type(e.right, types, sets)
    if e.op in ("and", "or", "=>"):
        if lt != BOOL or rt != BOOL:
            raise ExprTypeError(f"operator {e.op!r} expects bool operands")
        return BOOL
    if e.op in ("=", "!="):
        if lt != rt:
            raise ExprTypeError(f"cannot compare {lt} with {rt} in {to_text(e)}")
        return BOOL
    if lt != INT or rt != INT:
        raise ExprTypeError(f"operator {e.op!r} expects int operands in {to_text(e)}")
    return BOOL if e.op in _CMP else INT


__all__ = [
    "Lit", "Name", "Unary", "Binary", "Member", "ExprParser", "parse_expr", "to_text",
    "evaluate", "check_bool", "infer_type", "free_names", "int_div", "ParseError",
]
