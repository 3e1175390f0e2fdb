"""Conservation laws, canonical potential systems and symmetry checks for (1+1)-dimensional PDEs."""

from .conservation import (Check, ConservedVector, EquivalenceWitness, check_equivalence,
                           equivalent_by_characteristic, gauge_vector, is_trivial_characteristic,
                           linear_combination, verify_characteristic, verify_divergence)
from .groups import (CanonicalSet, GroupSchema, NormalizationRule, PointTransformation, Residual,
                     apply_transformation, canonicalize, collapse_check, expand_in_basis)
from .jets import Equation, JetSpace, PdeSystem, reduce_mod_system
from .kernel import Int, OutsideFragmentError, diff, normalize, substitute, to_text
from .potentials import PotentialSystem, build_potential_system, enumerate_potential_systems
from .problem import Problem, format_problem, load_problem, parse_problem
from .symmetry import (DeterminingSystem, VectorField, check_symmetry, commutator,
                       depends_on_potential, is_potential_symmetry, prolong)
from .syntax import ParseError, SymbolTable, parse_expr

__version__ = "0.1.0"
