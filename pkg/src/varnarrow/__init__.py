"""Order-sorted equational narrowing engine and variant-tree explorer."""

from .errors import (InvalidExpansion, NonTermination, ParseError,
                     ResourceLimit, SignatureError, UnsupportedAxioms,
                     UnsupportedFeature, VarnarrowError)
from .terms import App, Subst, Term, Var, ax_equal, canonical, fresh_var
from .theory import Equation, OpDecl, SortGraph, Theory
from .parser import (FIXTURES, fixture_text, fixture_theory, format_subst,
                     format_term, parse_module, parse_modules, parse_term)

__version__ = "0.1.0"
