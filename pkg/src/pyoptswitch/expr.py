"""Arithmetic expressions used to declare drift, volatility, drivers, costs, payoffs

Grammar (EBNF)::

    expression = term , { ( "+" | "-" ) , term } ;
    term       = unary , { ( "*" | "/" ) , unary } ;
    unary      = ( "-" | "+" ) , unary | power ;
    power      = atom , [ "^" , unary ] ;               (* right associative *)
    atom       = number | name | call | "(" , expression , ")" ;
    call       = function , "(" , expression , { "," , expression } , ")" ;
    function   = "min" | "max" | "exp" | "log" | "abs" | "sqrt" ;
    name       = "t" | "x1".."xk" | "y1".."ym" | "zvar1".."zvard" ;
    number     = digits , [ "." , [ digits ] ] , [ exponent ]
               | "." , digits , [ exponent ] ;

`min` and `max` take two or more arguments, the other functions exactly one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

# name -> (min arity, max arity or None)
FUNCTIONS: Dict[str, Tuple[int, Optional[int]]] = {
    "min": (2, None),
    "max": (2, None),
    "exp": (1, 1),
    "log": (1, 1),
    "abs": (1, 1),
    "sqrt": (1, 1),
}

_TOKEN_PATTERN = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


def declared_names(k: int, m: int, d: int) -> Tuple[str, ...]:
    """Variable names declared by model dimensions

    Parameters
    ----------
    k : int
        State dimension
    m : int
        Number of modes
    d : int
        Brownian dimension

    Returns
    -------
    names : Tuple[str, ...]
        `t`, `x1..xk`, `y1..ym`, `zvar1..zvard`
    """
    names = ["t"]
    names += [f"x{q}" for q in range(1, k + 1)]
    names += [f"y{j}" for j in range(1, m + 1)]
    names += [f"zvar{r}" for r in range(1, d + 1)]
    return tuple(names)


###########################################################
# Errors
###########################################################


class ExpressionError(ValueError):
    """Expression BaseError"""


class ExpressionSyntaxError(ExpressionError):
    """Expression parse error with position information"""

    def __init__(self, message: str, text: str, offset: int):
        self.text = text
        self.offset = offset
        self.byte_offset = len(text[:offset].encode("utf-8"))
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        self.message = message
        err_msg = f"{message} at line {self.line}, column {self.column} "
        err_msg += f"(byte offset {self.byte_offset}) in '{text}'"
        super().__init__(err_msg)


class UnknownIdentifierError(ExpressionSyntaxError):
    """Identifier is neither a declared variable nor a known function"""


class ArityError(ExpressionSyntaxError):
    """Function called with a wrong number of arguments"""


class MissingBindingError(ExpressionError):
    """Free variable without binding at evaluation"""


class DomainError(ExpressionError):
    """Evaluation left the domain of an operator (log, sqrt, division, overflow)"""

    def __init__(
        self,
        subexpression: Expression,
        index: Optional[Tuple[int, ...]] = None,
        point: Optional[Dict[str, float]] = None,
    ):
        self.subexpression = subexpression
        self.index = index
        self.point = point
        err_msg = f"Domain error in sub-expression '{subexpression}'"
        if point is not None:
            coords = ", ".join(f"{k}={v:.6g}" for k, v in point.items())
            err_msg += f" at ({coords})"
        elif index is not None:
            err_msg += f" at array index {index}"
        super().__init__(err_msg)

    def at_point(self, point: Dict[str, float]) -> DomainError:
        """Same error annotated with the offending sample point"""
        return DomainError(self.subexpression, self.index, point)


###########################################################
# Expression tree
###########################################################


class Expression:
    """Expression BaseClass (immutable tree node)"""

    @property
    def variables(self) -> FrozenSet[str]:
        """Free variable names"""
        raise NotImplementedError()

    @property
    def is_constant(self) -> bool:
        """Check expression has no free variable"""
        return len(self.variables) == 0

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        """Replace variables by expressions

        Parameters
        ----------
        mapping : Mapping[str, Expression]
            Variable name & replacement dict

        Returns
        -------
        expr : Expression
            New expression tree
        """
        raise NotImplementedError()

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        """Evaluate expression at scalar bindings

        Parameters
        ----------
        bindings : Mapping[str, float]
            Variable name & value dict (must cover every free variable)

        Returns
        -------
        value : float
            IEEE double result
        """
        self._check_bindings(bindings)
        env = {name: np.float64(bindings[name]) for name in self.variables}
        try:
            with np.errstate(all="ignore"):
                value = self._eval(env, strict=True)
        except DomainError as e:
            point = {name: float(env[name]) for name in sorted(self.variables)}
            raise e.at_point(point) from None
        return float(value)

    def evaluate_array(
        self,
        bindings: Mapping[str, ArrayLike],
        shape: Optional[Tuple[int, ...]] = None,
        strict: bool = True,
    ) -> np.ndarray:
        """Evaluate expression elementwise on broadcastable arrays

        Parameters
        ----------
        bindings : Mapping[str, ArrayLike]
            Variable name & value (scalar or array) dict
        shape : Optional[Tuple[int, ...]], optional
            Output shape (Default: broadcast shape of the bindings)
        strict : bool, optional
            If True, raise DomainError at the first non-finite entry.
            If False, non-finite entries are returned as NaN.

        Returns
        -------
        values : np.ndarray
            Float array of `shape`
        """
        self._check_bindings(bindings)
        env = {name: np.asarray(bindings[name], dtype=float) for name in self.variables}
        if shape is None:
            shapes = [np.shape(v) for v in env.values()]
            shape = np.broadcast_shapes(*shapes) if shapes else ()
        with np.errstate(all="ignore"):
            values = self._eval(env, strict=strict)
        values = np.array(np.broadcast_to(values, shape), dtype=float)
        if not strict:
            values[~np.isfinite(values)] = np.nan
        return values

    def _check_bindings(self, bindings: Mapping[str, Any]) -> None:
        """Check every free variable is bound"""
        missing = sorted(self.variables - set(bindings.keys()))
        if missing:
            err_msg = f"Missing binding for {missing} in '{self}'"
            raise MissingBindingError(err_msg)

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        raise NotImplementedError()

    def _checked(self, value: Any, strict: bool, *operands: Any) -> Any:
        """Raise DomainError when finite operands gave a non-finite result"""
        if not strict:
            return value
        bad = ~np.isfinite(value)
        if np.any(bad):
            if np.ndim(value) == 0:
                raise DomainError(self)
            index = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DomainError(self, index)
        return value


@dataclass(frozen=True)
class Number(Expression):
    """Real literal"""

    value: float

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset()

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        return self

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        return np.float64(self.value)

    def __str__(self) -> str:
        if self.value < 0:
            return f"(-{repr(-float(self.value))})"
        return repr(float(self.value))


@dataclass(frozen=True)
class Variable(Expression):
    """Variable reference"""

    name: str

    @property
    def variables(self) -> FrozenSet[str]:
        return frozenset((self.name,))

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        return mapping.get(self.name, self)

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        return env[self.name]

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Negate(Expression):
    """Unary minus"""

    operand: Expression

    @property
    def variables(self) -> FrozenSet[str]:
        return self.operand.variables

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        return Negate(self.operand.substitute(mapping))

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        return -self.operand._eval(env, strict)

    def __str__(self) -> str:
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinaryOp(Expression):
    """Binary operator (`+`, `-`, `*`, `/`, `^`)"""

    op: str
    left: Expression
    right: Expression

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/", "^"):
            raise ValueError(f"Invalid binary operator '{self.op}'.")

    @property
    def variables(self) -> FrozenSet[str]:
        return self.left.variables | self.right.variables

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        left, right = self.left.substitute(mapping), self.right.substitute(mapping)
        return BinaryOp(self.op, left, right)

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        a = self.left._eval(env, strict)
        b = self.right._eval(env, strict)
        if self.op == "+":
            value = a + b
        elif self.op == "-":
            value = a - b
        elif self.op == "*":
            value = a * b
        elif self.op == "/":
            value = np.divide(a, b)
        else:
            value = np.power(a, b)
        return self._checked(value, strict, a, b)

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expression):
    """Function call"""

    func: str
    args: Tuple[Expression, ...]

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"Unknown function '{self.func}'.")
        min_arity, max_arity = FUNCTIONS[self.func]
        if len(self.args) < min_arity or (
            max_arity is not None and len(self.args) > max_arity
        ):
            err_msg = f"'{self.func}' called with {len(self.args)} argument(s)."
            raise ValueError(err_msg)

    @property
    def variables(self) -> FrozenSet[str]:
        names: FrozenSet[str] = frozenset()
        for arg in self.args:
            names = names | arg.variables
        return names

    def substitute(self, mapping: Mapping[str, Expression]) -> Expression:
        return Call(self.func, tuple(a.substitute(mapping) for a in self.args))

    def _eval(self, env: Mapping[str, Any], strict: bool) -> Any:
        values = [a._eval(env, strict) for a in self.args]
        if self.func == "min":
            value = values[0]
            for v in values[1:]:
                value = np.minimum(value, v)
        elif self.func == "max":
            value = values[0]
            for v in values[1:]:
                value = np.maximum(value, v)
        elif self.func == "exp":
            value = np.exp(values[0])
        elif self.func == "log":
            value = np.log(values[0])
        elif self.func == "abs":
            value = np.abs(values[0])
        else:
            value = np.sqrt(values[0])
        return self._checked(value, strict, *values)

    def __str__(self) -> str:
        return f"{self.func}({', '.join(str(a) for a in self.args)})"


###########################################################
# Parser
###########################################################


@dataclass(frozen=True)
class _Token:
    kind: str  # "number", "name", "op", "end"
    text: str
    offset: int


def _tokenize(text: str) -> Tuple[_Token, ...]:
    """Split expression text into tokens"""
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_PATTERN.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f"Unexpected character '{text[pos]}'", text, pos)
        kind = match.lastgroup
        tokens.append(_Token(str(kind), match.group(), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tuple(tokens)


class _Parser:
    """Recursive descent parser over the precedence grammar"""

    def __init__(self, text: str, allowed: FrozenSet[str], declared: FrozenSet[str]):
        self.text = text
        self.allowed = allowed
        self.declared = declared
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def token(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> _Token:
        if self.token.text != text:
            found = "end of input" if self.token.kind == "end" else f"'{self.token.text}'"
            err_msg = f"Expected '{text}' but found {found}"
            raise ExpressionSyntaxError(err_msg, self.text, self.token.offset)
        return self.advance()

    def parse(self) -> Expression:
        if self.token.kind == "end":
            raise ExpressionSyntaxError("Empty expression", self.text, 0)
        expr = self.parse_expression()
        if self.token.kind != "end":
            err_msg = f"Unexpected token '{self.token.text}'"
            raise ExpressionSyntaxError(err_msg, self.text, self.token.offset)
        return expr

    def parse_expression(self) -> Expression:
        left = self.parse_term()
        while self.token.text in ("+", "-") and self.token.kind == "op":
            op = self.advance().text
            left = BinaryOp(op, left, self.parse_term())
        return left

    def parse_term(self) -> Expression:
        left = self.parse_unary()
        while self.token.text in ("*", "/") and self.token.kind == "op":
            op = self.advance().text
            left = BinaryOp(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Expression:
        if self.token.kind == "op" and self.token.text == "-":
            self.advance()
            return Negate(self.parse_unary())
        if self.token.kind == "op" and self.token.text == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        if self.token.kind == "op" and self.token.text == "^":
            self.advance()
            return BinaryOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expression:
        token = self.token
        if token.kind == "number":
            value = float(token.text)
            if not np.isfinite(value):
                err_msg = f"Numeric literal '{token.text}' overflows to a non-finite value"
                raise ExpressionSyntaxError(err_msg, self.text, token.offset)
            self.advance()
            return Number(value)
        if token.kind == "name":
            self.advance()
            if self.token.text == "(" and self.token.kind == "op":
                return self.parse_call(token)
            if token.text in FUNCTIONS:
                err_msg = f"Function '{token.text}' must be called with '('"
                raise ExpressionSyntaxError(err_msg, self.text, self.token.offset)
            if token.text not in self.allowed:
                if token.text in self.declared:
                    err_msg = f"Variable '{token.text}' is not allowed here"
                else:
                    err_msg = f"Unknown identifier '{token.text}'"
                raise UnknownIdentifierError(err_msg, self.text, token.offset)
            return Variable(token.text)
        if token.kind == "op" and token.text == "(":
            self.advance()
            expr = self.parse_expression()
            self.expect(")")
            return expr
        found = "end of input" if token.kind == "end" else f"'{token.text}'"
        raise ExpressionSyntaxError(f"Unexpected {found}", self.text, token.offset)

    def parse_call(self, name: _Token) -> Expression:
        if name.text not in FUNCTIONS:
            err_msg = f"Unknown function '{name.text}'"
            raise UnknownIdentifierError(err_msg, self.text, name.offset)
        self.expect("(")
        args = [self.parse_expression()]
        while self.token.kind == "op" and self.token.text == ",":
            self.advance()
            args.append(self.parse_expression())
        self.expect(")")
        min_arity, max_arity = FUNCTIONS[name.text]
        if len(args) < min_arity or (max_arity is not None and len(args) > max_arity):
            expected = f"{min_arity}" if min_arity == max_arity else f">={min_arity}"
            err_msg = f"Function '{name.text}' expects {expected} argument(s), "
            err_msg += f"got {len(args)}"
            raise ArityError(err_msg, self.text, name.offset)
        return Call(name.text, tuple(args))


def parse_expression(
    text: str,
    dims: Tuple[int, int, int],
    allowed: Optional[Sequence[str]] = None,
) -> Expression:
    """Parse expression text

    Parameters
    ----------
    text : str
        Expression text (e.g. `max(y1 - 0.5, 0)`)
    dims : Tuple[int, int, int]
        Model dimensions `(k, m, d)` declaring the variable names
    allowed : Optional[Sequence[str]], optional
        Subset of the declared names usable in this expression (Default: all)

    Returns
    -------
    expr : Expression
        Parsed expression tree
    """
    if not isinstance(text, str) or text.strip() == "":
        raise ExpressionSyntaxError("Empty expression", str(text), 0)
    declared = frozenset(declared_names(*dims))
    allowed_names = declared if allowed is None else frozenset(allowed) & declared
    return _Parser(text, allowed_names, declared).parse()


###########################################################
# Probes
###########################################################


def secant_slopes(
    expr: Expression,
    var: str,
    box: Mapping[str, Tuple[float, float]],
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Signed difference quotients of `expr` in `var` over random secant pairs

    Both points of a pair share every coordinate except `var`.

    Parameters
    ----------
    expr : Expression
        Target expression
    var : str
        Variable to be perturbed
    box : Mapping[str, Tuple[float, float]]
        Variable name & (lo, hi) range dict (must cover free variables and `var`)
    n_samples : int
        Number of secant pairs (>= 2)
    seed : int
        Random seed

    Returns
    -------
    slopes : np.ndarray
        Difference quotients
    """
    if n_samples < 2:
        raise ValueError(f"n_samples={n_samples} is invalid (Must be 'n_samples >= 2').")
    if var not in box:
        raise ValueError(f"Probe variable '{var}' is not covered by the probe box.")
    missing = sorted(expr.variables - set(box.keys()))
    if missing:
        raise ValueError(f"Probe box does not cover variables {missing}.")
    for name, (lo, hi) in box.items():
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueError(f"Probe box range of '{name}' is invalid ({lo}, {hi}).")
    lo, hi = box[var]
    if not lo < hi:
        raise ValueError(f"Probe box range of '{var}' must not be degenerate.")

    rng = np.random.default_rng(seed)
    base = {name: rng.uniform(lo_, hi_, n_samples) for name, (lo_, hi_) in sorted(box.items())}
    other = dict(base)
    other[var] = rng.uniform(lo, hi, n_samples)
    keep = np.abs(base[var] - other[var]) > 1e-12 * (hi - lo)
    values = []
    for bindings in (base, other):
        try:
            values.append(expr.evaluate_array(bindings, shape=(n_samples,)))
        except DomainError as e:
            idx = e.index[0] if e.index else 0
            point = {name: float(arr[idx]) for name, arr in bindings.items()}
            raise e.at_point(point) from None
    delta = base[var][keep] - other[var][keep]
    return (values[0][keep] - values[1][keep]) / delta


def probe_lipschitz(
    expr: Expression,
    var: str,
    box: Mapping[str, Tuple[float, float]],
    n_samples: int,
    seed: int,
) -> float:
    """Maximum observed |difference quotient| of `expr` in `var` inside `box`

    A probe, not a proof: a large value refutes a small Lipschitz constant,
    a small value is only evidence.

    Parameters
    ----------
    expr : Expression
        Target expression
    var : str
        Variable to be perturbed
    box : Mapping[str, Tuple[float, float]]
        Variable name & (lo, hi) range dict
    n_samples : int
        Number of secant pairs (>= 2)
    seed : int
        Random seed

    Returns
    -------
    lipschitz : float
        Probed Lipschitz constant
    """
    slopes = secant_slopes(expr, var, box, n_samples, seed)
    if len(slopes) == 0:
        return 0.0
    return float(np.max(np.abs(slopes)))
