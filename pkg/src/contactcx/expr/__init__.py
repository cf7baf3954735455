"""Expression DSL: parsing, serialization, symbolic derivative, jet evaluation."""

from .jet import JetValue, evaluate_jet, gradients, jets, value, values
from .nodes import Expression, const, serialize, var
from .parser import parse
from .tape import MODE_GRAD, MODE_HESS, MODE_VAL, compile_tape, hess_size, unpack_hessian

__all__ = [
    "Expression",
    "JetValue",
    "MODE_GRAD",
    "MODE_HESS",
    "MODE_VAL",
    "compile_tape",
    "const",
    "evaluate_jet",
    "gradients",
    "hess_size",
    "jets",
    "parse",
    "serialize",
    "unpack_hessian",
    "value",
    "values",
    "var",
]
