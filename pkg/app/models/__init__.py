# Expression trees and variable sets
from .expr import (
    Const as Const,
    Exp as Exp,
    FnExpr as FnExpr,
    Prod as Prod,
    ResLin as ResLin,
    Scale as Scale,
    Sum as Sum,
    VarSet as VarSet,
)

# Commuting matrix tuples
from .tuples import OperatorTuple as OperatorTuple
