"""Monte-Carlo pricing of knock-out options by path-wise Euler-Maruyama and by
barrier symmetrization of the underlying diffusion."""

from .engine import PathOutcome, PathStream, TimeGrid, gaussian_increment, simulate_pathwise, simulate_terminal
from .errors import DimensionMismatchError, DomainError, InvalidParameterError, NonFiniteStateError
from .harness import Experiment, TableRow, make_benchmark, run_convergence_table
from .models import CoefficientSet, Model1D, SvModel, coefficients_1d, coefficients_sv
from .pricing import (
    McConfig,
    PriceEstimate,
    bachelier_barrier_exact,
    bs_barrier_exact,
    norm_cdf,
    price_pathwise,
    price_pcs,
    price_pcs_double,
    relative_error,
)
from .symmetry import (
    BarrierContract,
    SymmetrizedCoefficients,
    fold_double,
    reflect_payoff_single,
    symmetrize_single_1d,
    symmetrize_single_sv,
    unfold_payoff_double,
)
from .verify import verify_properties

__version__ = "0.1.0"
