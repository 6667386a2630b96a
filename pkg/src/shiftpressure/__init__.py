"""Certified pressure and entropy computations for shifts of finite type on Z^d."""
from .errors import (DimensionMismatch, EmptySubshift, LanguageUndecided, ParseError, PrecisionExhausted,
                     ResourceLimit, ShiftPressureError)
from .groundstate import (EnergyEstimate, ground_state_energy, ground_state_energy_upper,
                          ground_state_entropy_upper)
from .language import (Decision, ExactSI, ExtendabilityParams, FullShift, LanguageProvider, LocalOverapprox,
                       UserOracle, Verdict, compatible, decide_globally_admissible, extendable_set)
from .lattice import Box, Shape, box, e_interior, growth_set, minkowski_sum, spiral_sites
from .potential import (LocallyConstantPotential, PotentialOracle, add_constant, ergodic_sum, scale,
                        sft_embedding_potential, single_site, sup_norm, upper_regularization, zero_potential)
from .pressure import (Budget, CertifiedEstimate, Method, UpperSequence, certified_pressure,
                       modified_partition_function, partition_function, pressure_upper_sequence, sandwich_bounds,
                       upper_bound_from_shape)
from .rigor import (DyadicInterval, IntervalMatrix, iv_div, iv_exp, iv_log, iv_matmul, iv_matpow, iv_mul,
                    iv_row_sum_bounds, iv_sum)
from .subshift import (Alphabet, ForbiddenEnumeration, Pattern, SftSpec, enumerate_locally_admissible,
                       golden_mean, hard_squares, is_locally_admissible, parse_sft)
from .transfer import (RecodedSystem, full_shift_pressure_2d, higher_block_recode, perron_pressure_1d,
                       transfer_matrix_b, transfer_sum_identity_check)

__version__ = "0.1.0"
