"""Stock-and-flow simulation toolkit with an expectation-driven oil price model."""
from .errors import Diagnostic, EvaluationError, GridError, ModelError, ParseError, SourceSpan
from .integrate import IntegratorKind, Trajectory, euler_step, estimate_lipschitz, rk4_step, simulate
from .sdcore import Model, SimState, TimeGrid, build_model, delay_read, eval_rhs, initial_state
from .series import TimeSeries

__version__ = "0.1.0"
