//! Serial-implicit fixed-point coupling between two participants.
//!
//! Per time step the leading participant solves with its current interface
//! datum and sends the result; the peer solves with that and replies. The
//! leader measures the change of the reply against the datum it used,
//! announces convergence or continuation, and under-relaxes the datum.

use nalgebra::DMatrix;

use super::session::{InterfaceDescription, Participant};
use crate::error::{Error, Result};

/// One side's numerical work, driven by the coupling loop.
pub trait Solver: Send {
    /// Called once after the handshake with both interface descriptions.
    fn connect(&mut self, _local: &InterfaceDescription, _remote: &InterfaceDescription) -> Result<()> {
        Ok(())
    }

    /// Interface datum the leader uses for the first sub-iteration of the
    /// first step. Ignored on the following side.
    fn initial_datum(&self) -> DMatrix<f64>;

    /// Maps the peer's reply into the space the leader iterates on.
    fn datum_from_reply(&self, reply: DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(reply)
    }

    /// Lets the leader adjust its datum before each solve, e.g. to impose
    /// values it already knows exactly. The adjusted datum is the one the
    /// residual is measured against.
    fn constrain_datum(&self, _step: usize, datum: DMatrix<f64>) -> DMatrix<f64> {
        datum
    }

    /// Solves the current time step given the peer's latest block and
    /// returns the block to send.
    fn solve(&mut self, step: usize, received: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Accepts the last solve as the converged state of `step`.
    fn complete_step(&mut self, step: usize) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingScheme {
    pub steps: usize,
    pub tolerance: f64,
    pub relaxation: f64,
    pub max_iterations: usize,
}

impl Default for CouplingScheme {
    fn default() -> Self {
        Self {
            steps: 1,
            tolerance: 1e-12,
            relaxation: 0.5,
            max_iterations: 100,
        }
    }
}

impl CouplingScheme {
    fn validate(&self) -> Result<()> {
        // written so that NaN parameters are rejected
        let valid = self.tolerance > 0.0 && self.relaxation > 0.0 && self.relaxation <= 1.0 && self.max_iterations > 0;
        if !valid {
            return Err(Error::argument(format!("invalid coupling scheme {self:?}")));
        }
        Ok(())
    }
}

/// Below this sup-norm the residual is reported in absolute terms.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub iterations: usize,
    /// Residual after each sub-iteration; empty on the following side.
    pub residuals: Vec<f64>,
    /// Cumulative overhead bytes sent and received after this step.
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
}

impl Transcript {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

fn residual(received: &DMatrix<f64>, datum: &DMatrix<f64>) -> f64 {
    let scale = received.amax();
    let diff = (received - datum).amax();
    if scale < RESIDUAL_FLOOR {
        diff
    } else {
        diff / scale
    }
}

/// Runs one participant's half of the coupled loop. Performs the handshake
/// if it has not happened yet.
pub fn run_side(p: &mut Participant, solver: &mut dyn Solver, scheme: &CouplingScheme) -> Result<Transcript> {
    let result = drive(p, solver, scheme);
    if result.is_err() {
        p.disconnect();
    }
    result
}

fn drive(p: &mut Participant, solver: &mut dyn Solver, scheme: &CouplingScheme) -> Result<Transcript> {
    scheme.validate()?;
    if p.remote().is_none() {
        p.handshake()?;
    }
    let remote = p.remote().cloned().expect("handshake completed");
    solver.connect(p.local(), &remote)?;
    let mut transcript = Transcript::default();
    let mut datum = if p.role().leads() {
        solver.initial_datum()
    } else {
        DMatrix::zeros(0, 0)
    };
    for step in 0..scheme.steps {
        let mut residuals = Vec::new();
        let mut iterations = 0;
        if p.role().leads() {
            loop {
                iterations += 1;
                datum = solver.constrain_datum(step, datum);
                let out = solver.solve(step, &datum)?;
                p.send_block(&out)?;
                let reply = solver.datum_from_reply(p.recv_block()?)?;
                if reply.shape() != datum.shape() {
                    return Err(Error::protocol("peer reply does not match the interface datum"));
                }
                let res = residual(&reply, &datum);
                residuals.push(res);
                let converged = res < scheme.tolerance;
                if !converged && iterations >= scheme.max_iterations {
                    return Err(Error::Convergence { step, residuals });
                }
                p.send_status(converged)?;
                if converged {
                    datum = reply;
                    break;
                }
                datum = scheme.relaxation * &reply + (1.0 - scheme.relaxation) * &datum;
            }
        } else {
            loop {
                iterations += 1;
                let received = p.recv_block()?;
                let out = solver.solve(step, &received)?;
                p.send_block(&out)?;
                if p.recv_status()? {
                    break;
                }
            }
        }
        solver.complete_step(step)?;
        p.advance();
        transcript.steps.push(StepRecord {
            step,
            iterations,
            residuals,
            bytes_sent: p.sent().overhead_bytes(),
            bytes_received: p.received().overhead_bytes(),
        });
    }
    Ok(transcript)
}

/// Runs both participants on their own threads and returns the leader's
/// transcript followed by the follower's.
pub fn run_coupled<'a>(
    scheme: &CouplingScheme,
    a: (&'a mut Participant, &'a mut dyn Solver),
    b: (&'a mut Participant, &'a mut dyn Solver),
) -> Result<(Transcript, Transcript)> {
    let (lead, follow) = match (a.0.role().leads(), b.0.role().leads()) {
        (true, false) => (a, b),
        (false, true) => (b, a),
        _ => return Err(Error::argument("exactly one participant must lead")),
    };
    let (l, f) = std::thread::scope(|s| {
        let handle = s.spawn(move || run_side(follow.0, follow.1, scheme));
        let l = run_side(lead.0, lead.1, scheme);
        (l, handle.join().expect("follower thread panicked"))
    });
    // the leader's error explains a follower disconnect, so report it first
    Ok((l?, f?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::InProc;
    use crate::wire::Role;

    struct Fixed(f64);
    impl Solver for Fixed {
        fn initial_datum(&self) -> DMatrix<f64> {
            DMatrix::from_element(2, 1, 7.0)
        }
        fn solve(&mut self, _: usize, _: &DMatrix<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_element(2, 1, self.0))
        }
        fn complete_step(&mut self, _: usize) -> Result<()> {
            Ok(())
        }
    }

    /// Returns what it receives, or its negation.
    struct Echo(f64);
    impl Solver for Echo {
        fn initial_datum(&self) -> DMatrix<f64> {
            DMatrix::from_element(2, 1, 1.0)
        }
        fn solve(&mut self, _: usize, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
            Ok(self.0 * r)
        }
        fn complete_step(&mut self, _: usize) -> Result<()> {
            Ok(())
        }
    }

    fn participants() -> (Participant, Participant) {
        let (x, y) = InProc::pair();
        let d = InterfaceDescription::Vertices(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
        (
            Participant::new("lead", Role::Dirichlet, d.clone(), 1, x).unwrap(),
            Participant::new("follow", Role::Neumann, d, 1, y).unwrap(),
        )
    }

    #[test]
    fn fixed_reply_converges_in_one_iteration() {
        let (mut a, mut b) = participants();
        let scheme = CouplingScheme {
            steps: 3,
            ..Default::default()
        };
        let (l, f) = run_coupled(&scheme, (&mut a, &mut Fixed(1.0)), (&mut b, &mut Fixed(7.0))).unwrap();
        assert!(l.steps.iter().all(|s| s.iterations == 1));
        assert_eq!(f.total_iterations(), 3);
        assert_eq!(a.sent(), b.received());
    }

    #[test]
    fn alternating_reply_relaxes_to_zero() {
        let (mut a, mut b) = participants();
        let (l, _) = run_coupled(
            &CouplingScheme::default(),
            (&mut a, &mut Echo(1.0)),
            (&mut b, &mut Echo(-1.0)),
        )
        .unwrap();
        assert_eq!(l.steps[0].iterations, 2);
        assert_eq!(*l.steps[0].residuals.last().unwrap(), 0.0);
    }

    #[test]
    fn divergence_reports_history() {
        let (mut a, mut b) = participants();
        let scheme = CouplingScheme {
            max_iterations: 5,
            ..Default::default()
        };
        let err = run_coupled(&scheme, (&mut a, &mut Echo(1.0)), (&mut b, &mut Echo(-3.0))).unwrap_err();
        match err {
            Error::Convergence { step, residuals } => {
                assert_eq!(step, 0);
                assert_eq!(residuals.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
