//! A participant's end of a coupling session: handshake, lockstep data
//! exchange and byte accounting.

use nalgebra::DMatrix;

use super::transport::Transport;
use crate::error::{Error, Result};
use crate::spline::TensorBasis;
use crate::wire::{header_len, Accounting, Payload, Role, WireFrame};

/// What a participant sends across the interface: control data on a spline
/// basis, or values at a fixed set of vertices.
#[derive(Debug, Clone, PartialEq)]
pub enum InterfaceDescription {
    Spline(TensorBasis),
    Vertices(DMatrix<f64>),
}

impl InterfaceDescription {
    /// Rows of every data block sent for this description.
    pub fn rows(&self) -> usize {
        match self {
            InterfaceDescription::Spline(b) => b.len(),
            InterfaceDescription::Vertices(v) => v.nrows(),
        }
    }

    fn frame(&self, role: Role) -> WireFrame {
        match self {
            InterfaceDescription::Spline(b) => WireFrame::knots(role, b),
            InterfaceDescription::Vertices(v) => WireFrame::vertices(role, v.clone()),
        }
    }

    fn basis(&self) -> Option<&TensorBasis> {
        match self {
            InterfaceDescription::Spline(b) => Some(b),
            InterfaceDescription::Vertices(_) => None,
        }
    }
}

pub struct Participant {
    name: String,
    role: Role,
    local: InterfaceDescription,
    components: usize,
    remote: Option<InterfaceDescription>,
    step: u64,
    transport: Box<dyn Transport>,
    sent: Accounting,
    received: Accounting,
}

impl std::fmt::Debug for Participant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Participant")
            .field("name", &self.name)
            .field("role", &self.role)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

impl Participant {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        local: InterfaceDescription,
        components: usize,
        transport: impl Transport + 'static,
    ) -> Result<Self> {
        if components == 0 || components > u8::MAX as usize {
            return Err(Error::argument(format!("{components} data components")));
        }
        Ok(Self {
            name: name.into(),
            role,
            local,
            components,
            remote: None,
            step: 0,
            transport: Box::new(transport),
            sent: Accounting::default(),
            received: Accounting::default(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn local(&self) -> &InterfaceDescription {
        &self.local
    }

    pub fn remote(&self) -> Option<&InterfaceDescription> {
        self.remote.as_ref()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn sent(&self) -> &Accounting {
        &self.sent
    }

    pub fn received(&self) -> &Accounting {
        &self.received
    }

    /// Exchanges interface descriptions with the peer. Allowed once.
    pub fn handshake(&mut self) -> Result<&InterfaceDescription> {
        if self.remote.is_some() {
            return Err(Error::protocol("handshake already completed"));
        }
        let frame = self.local.frame(self.role);
        let received = if self.role.leads() {
            self.send(&frame)?;
            self.recv()?
        } else {
            let r = self.recv()?;
            self.send(&frame)?;
            r
        };
        let remote = match received.payload {
            Payload::Knots(_) => InterfaceDescription::Spline(
                received
                    .basis
                    .ok_or_else(|| Error::format("knot frame without basis"))?,
            ),
            Payload::Vertices(v) => InterfaceDescription::Vertices(v),
            other => {
                return Err(Error::protocol(format!(
                    "expected a handshake frame, got {:?}",
                    other.kind()
                )));
            }
        };
        Ok(self.remote.insert(remote))
    }

    /// Sends one data block shaped like the local description.
    pub fn send_block(&mut self, block: &DMatrix<f64>) -> Result<()> {
        self.require_handshake()?;
        let rows = self.local.rows();
        if block.shape() != (rows, self.components) {
            return Err(Error::argument(format!(
                "block is {}x{}, interface expects {rows}x{}",
                block.nrows(),
                block.ncols(),
                self.components
            )));
        }
        let frame = WireFrame::control(self.role, self.local.basis(), block.clone());
        self.send(&frame)
    }

    /// Receives one data block shaped like the peer's description.
    pub fn recv_block(&mut self) -> Result<DMatrix<f64>> {
        self.require_handshake()?;
        let frame = self.recv()?;
        let Payload::Control(block) = frame.payload else {
            return Err(Error::protocol(format!(
                "expected a data frame, got {:?}",
                frame.payload.kind()
            )));
        };
        let rows = self.remote.as_ref().map_or(0, InterfaceDescription::rows);
        if block.nrows() != rows {
            return Err(Error::protocol(format!(
                "peer sent {} rows, its interface has {rows}",
                block.nrows()
            )));
        }
        Ok(block)
    }

    pub fn send_status(&mut self, converged: bool) -> Result<()> {
        self.require_handshake()?;
        self.send(&WireFrame::status(self.role, converged))
    }

    /// Returns `true` when the peer declared the step converged.
    pub fn recv_status(&mut self) -> Result<bool> {
        self.require_handshake()?;
        match self.recv()?.payload {
            Payload::Converged => Ok(true),
            Payload::Continue => Ok(false),
            other => Err(Error::protocol(format!(
                "expected a status frame, got {:?}",
                other.kind()
            ))),
        }
    }

    /// One lockstep exchange: the leading role sends first, the other
    /// receives first. Both return the peer's block.
    pub fn exchange_step(&mut self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let received = if self.role.leads() {
            self.send_block(block)?;
            self.recv_block()?
        } else {
            // validate before blocking on the peer
            self.check_shape(block)?;
            let r = self.recv_block()?;
            self.send_block(block)?;
            r
        };
        self.step += 1;
        Ok(received)
    }

    /// Drops the transport so a peer blocked on this participant fails
    /// instead of waiting forever.
    pub fn disconnect(&mut self) {
        self.transport = Box::new(Closed);
    }

    /// Marks the end of a coupling step.
    pub fn advance(&mut self) {
        self.step += 1;
    }

    fn check_shape(&self, block: &DMatrix<f64>) -> Result<()> {
        self.require_handshake()?;
        if block.shape() != (self.local.rows(), self.components) {
            return Err(Error::argument(format!(
                "block is {}x{}, interface expects {}x{}",
                block.nrows(),
                block.ncols(),
                self.local.rows(),
                self.components
            )));
        }
        Ok(())
    }

    fn require_handshake(&self) -> Result<()> {
        if self.remote.is_none() {
            return Err(Error::protocol("no handshake yet"));
        }
        Ok(())
    }

    fn send(&mut self, frame: &WireFrame) -> Result<()> {
        let bytes = frame.encode();
        self.transport.send_bytes(bytes)?;
        self.sent.record(frame, header_len(frame.header().directions.len()));
        Ok(())
    }

    fn recv(&mut self) -> Result<WireFrame> {
        let frame = self.transport.recv_frame()?;
        if frame.role == self.role || frame.role.leads() == self.role.leads() {
            return Err(Error::protocol(format!(
                "peer role {:?} cannot pair with {:?}",
                frame.role, self.role
            )));
        }
        self.received
            .record(&frame, header_len(frame.header().directions.len()));
        Ok(frame)
    }
}

struct Closed;

impl Transport for Closed {
    fn send_bytes(&mut self, _: Vec<u8>) -> Result<()> {
        Err(closed())
    }

    fn recv_frame(&mut self) -> Result<WireFrame> {
        Err(closed())
    }
}

fn closed() -> Error {
    Error::Transport(std::io::Error::new(
        std::io::ErrorKind::NotConnected,
        "participant disconnected",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::InProc;

    fn pair(basis: &TensorBasis) -> (Participant, Participant) {
        let (a, b) = InProc::pair();
        let d = InterfaceDescription::Spline(basis.clone());
        (
            Participant::new("a", Role::Fluid, d.clone(), 3, a).unwrap(),
            Participant::new("b", Role::Structure, d, 3, b).unwrap(),
        )
    }

    #[test]
    fn handshake_then_steps_with_accounting() {
        let basis = TensorBasis::uniform(2, 2, 2).unwrap();
        let (mut a, mut b) = pair(&basis);
        let peer = std::thread::spawn(move || {
            b.handshake().unwrap();
            for _ in 0..10 {
                b.exchange_step(&DMatrix::from_element(16, 3, 2.0)).unwrap();
            }
            b
        });
        assert_eq!(a.handshake().unwrap(), &InterfaceDescription::Spline(basis));
        assert!(matches!(a.handshake(), Err(Error::Protocol(_))));
        for _ in 0..10 {
            let got = a.exchange_step(&DMatrix::from_element(16, 3, 1.0)).unwrap();
            assert_eq!(got, DMatrix::from_element(16, 3, 2.0));
        }
        let b = peer.join().unwrap();
        assert_eq!(a.sent().overhead_bytes(), 608 + 9 * 384);
        assert_eq!(a.sent(), b.received());
        assert_eq!(b.sent(), a.received());
        assert_eq!((a.step(), b.step()), (10, 10));
    }

    #[test]
    fn wrong_shape_fails_before_sending() {
        let basis = TensorBasis::uniform(2, 2, 2).unwrap();
        let (mut a, mut b) = pair(&basis);
        assert!(matches!(a.send_block(&DMatrix::zeros(16, 3)), Err(Error::Protocol(_))));
        let peer = std::thread::spawn(move || b.handshake().map(|_| ()).map(|()| b));
        a.handshake().unwrap();
        let _b = peer.join().unwrap().unwrap();
        let before = *a.sent();
        assert!(matches!(
            a.exchange_step(&DMatrix::zeros(15, 3)),
            Err(Error::Argument(_))
        ));
        assert_eq!(*a.sent(), before);
    }
}
