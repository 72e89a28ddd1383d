"""The kernel mini-language used for operator parameters."""

from .evaluate import DivisionByZero, KernelError, compile_kernel, eval_kernel
from .infer import FnT, KernelType, KernelTypeError, Solver, TVar, infer_kernel_type
from .syntax import (
    UnresolvedName,
    as_function,
    parse_kernel,
    show_kernel,
)

__all__ = [
    "DivisionByZero",
    "FnT",
    "KernelError",
    "KernelType",
    "KernelTypeError",
    "Solver",
    "TVar",
    "UnresolvedName",
    "as_function",
    "compile_kernel",
    "eval_kernel",
    "infer_kernel_type",
    "parse_kernel",
    "show_kernel",
]
