//! Byte transports between exactly two participants.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::wire::{read_frame, WireFrame};

/// A reliable, ordered, blocking frame channel.
pub trait Transport: Send {
    fn send_bytes(&mut self, bytes: Vec<u8>) -> Result<()>;
    fn recv_frame(&mut self) -> Result<WireFrame>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send_bytes(&mut self, bytes: Vec<u8>) -> Result<()> {
        (**self).send_bytes(bytes)
    }

    fn recv_frame(&mut self) -> Result<WireFrame> {
        (**self).recv_frame()
    }
}

fn disconnected() -> Error {
    Error::Transport(io::Error::new(io::ErrorKind::BrokenPipe, "peer disconnected"))
}

/// In-process queue pair.
pub struct InProc {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl InProc {
    pub fn pair() -> (InProc, InProc) {
        let (tx_a, rx_b) = channel();
        let (tx_b, rx_a) = channel();
        (InProc { tx: tx_a, rx: rx_a }, InProc { tx: tx_b, rx: rx_b })
    }
}

impl Transport for InProc {
    fn send_bytes(&mut self, bytes: Vec<u8>) -> Result<()> {
        self.tx.send(bytes).map_err(|_| disconnected())
    }

    fn recv_frame(&mut self) -> Result<WireFrame> {
        let bytes = self.rx.recv().map_err(|_| disconnected())?;
        WireFrame::decode(&bytes)
    }
}

/// One end of a TCP connection.
pub struct Socket {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Socket {
    fn from_stream(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    /// Accepts exactly one peer on an already bound listener.
    pub fn accept(listener: &TcpListener) -> Result<Self> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream)
    }

    pub fn listen(endpoint: &str) -> Result<Self> {
        Self::accept(&TcpListener::bind(endpoint)?)
    }

    /// Connects, retrying until `timeout` so the peer may start late.
    pub fn connect(endpoint: impl ToSocketAddrs + Copy, timeout: Duration) -> Result<Self> {
        let start = Instant::now();
        loop {
            match TcpStream::connect(endpoint) {
                Ok(stream) => return Self::from_stream(stream),
                Err(e) if start.elapsed() >= timeout => return Err(e.into()),
                Err(_) => std::thread::sleep(Duration::from_millis(20)),
            }
        }
    }
}

impl Transport for Socket {
    fn send_bytes(&mut self, bytes: Vec<u8>) -> Result<()> {
        self.writer.write_all(&bytes)?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<WireFrame> {
        read_frame(&mut self.reader)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Role;

    #[test]
    fn inproc_delivers_in_order_and_reports_disconnect() {
        let (mut a, mut b) = InProc::pair();
        a.send_bytes(WireFrame::status(Role::Fluid, false).encode()).unwrap();
        a.send_bytes(WireFrame::status(Role::Fluid, true).encode()).unwrap();
        assert_eq!(b.recv_frame().unwrap(), WireFrame::status(Role::Fluid, false));
        assert_eq!(b.recv_frame().unwrap(), WireFrame::status(Role::Fluid, true));
        drop(a);
        assert!(matches!(b.recv_frame(), Err(Error::Transport(_))));
    }

    #[test]
    fn socket_loopback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let peer = std::thread::spawn(move || {
            let mut s = Socket::connect(addr, Duration::from_secs(5)).unwrap();
            let f = s.recv_frame().unwrap();
            s.send_bytes(f.encode()).unwrap();
        });
        let mut s = Socket::accept(&listener).unwrap();
        let frame = WireFrame::status(Role::Neumann, true);
        s.send_bytes(frame.encode()).unwrap();
        assert_eq!(s.recv_frame().unwrap(), frame);
        peer.join().unwrap();
        assert!(matches!(s.recv_frame(), Err(Error::Transport(_))));
    }
}
