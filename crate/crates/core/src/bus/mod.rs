//! Two-participant coupling bus.

mod coupled;
mod session;
mod sweep;
mod transport;

pub use coupled::{run_coupled, run_side, CouplingScheme, Solver, StepRecord, Transcript};
pub use session::{InterfaceDescription, Participant};
pub use sweep::{interface_for, overhead_sweep, run_overhead_session, OverheadCell, TransportKind};
pub use transport::{InProc, Socket, Transport};
