//! Communication-overhead sessions: a real handshake plus `N_t` steps of
//! interface data between two participants, in vertex or spline mode.

use std::net::TcpListener;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use super::session::{InterfaceDescription, Participant};
use super::transport::{InProc, Socket, Transport};
use crate::error::Result;
use crate::quadrature::span_rule;
use crate::spline::{KnotVector, TensorBasis};
use crate::wire::{measured_overhead, Mode, OverheadParams, OverheadReport, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProc,
    /// TCP over the loopback interface.
    Loopback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadCell {
    pub mode: Mode,
    pub params: OverheadParams,
    pub report: OverheadReport,
    /// Wall time of the step exchanges, excluding the handshake.
    pub step_time: Duration,
}

/// Interface description of one side for the given mode.
pub fn interface_for(mode: Mode, params: &OverheadParams) -> Result<InterfaceDescription> {
    let (r, p) = (params.subdivisions as usize, params.degree as usize);
    let k = params.param_dim as usize;
    Ok(match mode {
        Mode::Spline => InterfaceDescription::Spline(TensorBasis::uniform(k, p, r)?),
        Mode::Vertex => {
            // one vertex per quadrature point of every interface element
            let rule: Vec<f64> = span_rule(&KnotVector::uniform(0, r, 0.0, 1.0)?, p + 1)
                .into_iter()
                .map(|(x, _)| x)
                .collect();
            let m = rule.len();
            let n = m.pow(k as u32);
            let dim = params.dim as usize;
            InterfaceDescription::Vertices(DMatrix::from_fn(n, dim, |row, c| {
                let idx = [row / m, row % m];
                if k == 1 {
                    if c == 0 {
                        rule[row]
                    } else {
                        0.0
                    }
                } else if c < 2 {
                    rule[idx[c]]
                } else {
                    0.0
                }
            }))
        }
    })
}

fn connect(kind: TransportKind) -> Result<(Box<dyn Transport>, Box<dyn Transport>)> {
    Ok(match kind {
        TransportKind::InProc => {
            let (a, b) = InProc::pair();
            (Box::new(a), Box::new(b))
        }
        TransportKind::Loopback => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let client = std::thread::spawn(move || Socket::connect(addr, Duration::from_secs(10)));
            let server = Socket::accept(&listener)?;
            let client = client.join().expect("connect thread panicked")?;
            (Box::new(server), Box::new(client))
        }
    })
}

/// Runs one session in which the leader sends `params.steps` data blocks
/// after the handshake. Returns the leader's sent-traffic report.
pub fn run_overhead_session(mode: Mode, params: &OverheadParams, kind: TransportKind) -> Result<OverheadCell> {
    let desc = interface_for(mode, params)?;
    let dim = params.dim as usize;
    let (ta, tb) = connect(kind)?;
    let mut lead = Participant::new("sender", Role::Fluid, desc.clone(), dim, ta)?;
    let mut follow = Participant::new("receiver", Role::Structure, desc.clone(), dim, tb)?;
    let steps = params.steps;
    let block = DMatrix::from_fn(desc.rows(), dim, |r, c| (r * dim + c) as f64 * 1e-3);
    let step_time = std::thread::scope(|s| -> Result<Duration> {
        let peer = s.spawn(|| -> Result<()> {
            follow.handshake()?;
            for _ in 0..steps {
                follow.recv_block()?;
                follow.advance();
            }
            Ok(())
        });
        let mut run = || -> Result<Duration> {
            lead.handshake()?;
            let start = Instant::now();
            for _ in 0..steps {
                lead.send_block(&block)?;
                lead.advance();
            }
            Ok(start.elapsed())
        };
        let timed = run();
        if timed.is_err() {
            lead.disconnect();
        }
        let peer = peer.join().expect("receiver thread panicked");
        let elapsed = timed?;
        peer?;
        Ok(elapsed)
    })?;
    Ok(OverheadCell {
        mode,
        params: *params,
        report: measured_overhead(lead.sent(), params, mode),
        step_time,
    })
}

/// The grid of the overhead figures: `r` in 2..=128 by doubling, `p` in
/// 2..=5, both modes, `N_t = 1`, `d = 3` on a surface interface.
pub fn overhead_sweep(kind: TransportKind) -> Result<Vec<OverheadCell>> {
    let mut out = Vec::new();
    for mode in [Mode::Vertex, Mode::Spline] {
        for p in 2..=5 {
            for r in [2, 4, 8, 16, 32, 64, 128] {
                out.push(run_overhead_session(mode, &OverheadParams::surface_grid(r, p), kind)?);
            }
        }
    }
    Ok(out)
}
