//! Ground-truth mechanical simulation and grey-box model simulation.

mod greybox;
mod io;
mod mechanical;
mod steady;

pub(crate) use greybox::{simulate_trajectory, Flat, Trajectory};
pub use greybox::{final_state, simulate_greybox};
pub use io::{read_system, write_system, SystemFile};
pub use mechanical::{
    sdof, simulate_newton, simulate_newton_from, virtual_silverbox, InputInterpolation, IntegratorConfig,
    MechanicalSystemSpec, NonlinearElement, OutputChannel, OutputKind, SILVERBOX_CUBIC, SILVERBOX_DAMPING,
    SILVERBOX_FREQUENCY_HZ, SILVERBOX_INPUT_GAIN, SILVERBOX_QUADRATIC,
};
pub use steady::{
    periodic_extension, steady_state_from_input, steady_state_response, Newton, Simulate, SteadyState,
    DEFAULT_SETTLE_TOLERANCE,
};
