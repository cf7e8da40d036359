"""
Small expression grammar for initial data and custom potentials.

Expressions are checked against a fixed whitelist on the Python syntax tree,
then handed to sympy and compiled to numpy functions, e.g.
"(cos(pi*x/2) + sin(pi*x/2))/100".
"""

import ast
from typing import Callable, Dict

import numpy as np
import sympy
from sympy.core.function import AppliedUndef

from errors import InvalidArgumentError

_FUNCTIONS: Dict[str, object] = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "tanh": sympy.tanh,
    "atanh": sympy.atanh,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "abs": sympy.Abs,
    "sign": sympy.sign,
}
_CONSTANTS: Dict[str, object] = {"pi": sympy.pi}

# "^" is power, as in the formulas users write
_BINARY_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.BitXor)
_UNARY_OPS = (ast.UAdd, ast.USub)


def _syntax_problem(node: ast.AST, variable: str):
    """First construct outside the grammar, or None."""
    if isinstance(node, ast.Expression):
        return _syntax_problem(node.body, variable)
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINARY_OPS):
            return f"operator {type(node.op).__name__}"
        return _syntax_problem(node.left, variable) or _syntax_problem(node.right, variable)
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNARY_OPS):
            return f"operator {type(node.op).__name__}"
        return _syntax_problem(node.operand, variable)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            return f"literal {node.value!r}"
        return None
    if isinstance(node, ast.Name):
        if node.id == variable or node.id in _CONSTANTS:
            return None
        if node.id in _FUNCTIONS:
            return f"function '{node.id}' used without arguments"
        return f"unknown symbol '{node.id}'"
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            name = node.func.id if isinstance(node.func, ast.Name) else ast.unparse(node.func)
            return f"unknown function '{name}'"
        if node.keywords or len(node.args) != 1:
            return f"'{node.func.id}' takes exactly one argument"
        return _syntax_problem(node.args[0], variable)
    return f"construct {type(node).__name__}"


def parse_expression(text: str, variable: str = "x") -> sympy.Expr:
    """
    Parse text into a sympy expression in a single variable.

    Allowed: numbers, the variable, pi, + - * / ** ^, and the one-argument
    functions sin, cos, tan, tanh, atanh, exp, log, sqrt, abs, sign.

    Raises:
        InvalidArgumentError: for anything else, before sympy sees the text.
    """
    if not isinstance(text, str):
        raise InvalidArgumentError(f"expression must be a string, got {type(text).__name__}")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise InvalidArgumentError(f"cannot parse expression '{text}': {e.msg}")
    problem = _syntax_problem(tree, variable)
    if problem:
        raise InvalidArgumentError(
            f"expression '{text}' uses {problem}; allowed are '{variable}', pi, numbers, "
            f"+ - * / ^ and {', '.join(sorted(_FUNCTIONS))}")

    symbol = sympy.Symbol(variable, real=True)
    namespace = {**_FUNCTIONS, **_CONSTANTS, variable: symbol}
    try:
        expr = sympy.sympify(text, locals=namespace, convert_xor=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise InvalidArgumentError(f"cannot parse expression '{text}': {e}")

    undefined = sorted(str(f.func) for f in expr.atoms(AppliedUndef))
    if undefined:
        raise InvalidArgumentError(f"expression '{text}' uses unknown functions {undefined}")
    unknown = {s.name for s in expr.free_symbols} - {variable}
    if unknown:
        raise InvalidArgumentError(
            f"expression '{text}' uses unknown symbols {sorted(unknown)}; only '{variable}' is allowed")
    return expr


def compile_expression(text: str, variable: str = "x") -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression into a vectorised numpy function."""
    expr = parse_expression(text, variable)
    symbol = sympy.Symbol(variable, real=True)
    func = sympy.lambdify(symbol, expr, modules="numpy")

    def evaluate(values):
        values = np.asarray(values, dtype=float)
        return np.broadcast_to(np.asarray(func(values), dtype=float), values.shape).copy()

    return evaluate
