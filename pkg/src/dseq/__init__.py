"""Double sequence spaces defined through the double difference operator.

The package evaluates double sequences on finite windows, certifies
Pringsheim, bounded and regular limits from window evidence, decides
membership in the classical spaces and their difference domains, and runs
condition batteries for four-dimensional matrix classes.
"""
from .config import RunConfig, load_config
from .convergence import (ConvergenceReport, Rule, bounded, bp_limit, lq_norm, lq_norm_delta,
                          p_limit, r_limit, sup_norm_delta, v_sum)
from .difference import apply_4d, delta, e_to_f, inv_delta
from .duality import (alpha_pairing_abs, b_matrix, check_F1, check_F2, check_F3,
                      pairing_partial_sums)
from .errors import (DseqError, IndexOutOfDomain, InvalidExponent, SpecError,
                     UnknownCatalogEntry, UnknownInclusion, ValueOverflow, WindowTooLarge)
from .matclass import ClassId, check_class, check_domain_class, corollary_check, tail_sum
from .seqcore import (Builtin, ClosedForm, Combinator, DoubleSequence, Entries, FourDimMatrix,
                      RowFamily, TableSeq, Window, WindowSchedule, catalog, eval_at, identity,
                      mat_entry, window_table, zero_matrix)
from .spaces import MembershipVerdict, SpaceId, atlas, member, witness
from .zmap import flatten, phi, phi_inv

__version__ = "0.1.0"
