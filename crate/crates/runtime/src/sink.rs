//! Transports for the pose stream.

use std::io::{self, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs, UdpSocket};
use std::time::{Duration, Instant};

use crate::wire::PoseMessage;

/// Receives encoded poses from the streamer. An error marks the message as
/// lost; the streamer keeps going and records the gap.
pub trait PoseSink: Send {
    fn send(&mut self, message: &PoseMessage) -> io::Result<()>;
}

impl<F: FnMut(&PoseMessage) -> io::Result<()> + Send> PoseSink for F {
    fn send(&mut self, message: &PoseMessage) -> io::Result<()> {
        self(message)
    }
}

pub const INITIAL_BACKOFF: Duration = Duration::from_millis(50);
pub const MAX_BACKOFF: Duration = Duration::from_secs(2);
const CONNECT_TIMEOUT: Duration = Duration::from_millis(500);

fn resolve(endpoint: &str) -> io::Result<SocketAddr> {
    endpoint.to_socket_addrs()?.next().ok_or_else(|| {
        io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("{endpoint}: no address"),
        )
    })
}

/// Back-to-back 78-byte records over a TCP connection. A failed write drops
/// the connection; reconnection is attempted on later sends with exponential
/// backoff, and messages in between are refused.
pub struct TcpSink {
    addr: SocketAddr,
    stream: Option<TcpStream>,
    backoff: Duration,
    retry_at: Instant,
}

impl TcpSink {
    /// Resolves the endpoint; the first connection is made lazily.
    pub fn new(endpoint: &str) -> io::Result<Self> {
        Ok(Self {
            addr: resolve(endpoint)?,
            stream: None,
            backoff: INITIAL_BACKOFF,
            retry_at: Instant::now(),
        })
    }

    fn connect(&mut self) -> io::Result<&mut TcpStream> {
        if self.stream.is_none() {
            let now = Instant::now();
            if now < self.retry_at {
                return Err(io::Error::new(
                    io::ErrorKind::NotConnected,
                    "waiting to reconnect",
                ));
            }
            match TcpStream::connect_timeout(&self.addr, CONNECT_TIMEOUT) {
                Ok(s) => {
                    s.set_nodelay(true)?;
                    self.stream = Some(s);
                    self.backoff = INITIAL_BACKOFF;
                }
                Err(e) => {
                    self.retry_at = Instant::now() + self.backoff;
                    self.backoff = (self.backoff * 2).min(MAX_BACKOFF);
                    return Err(e);
                }
            }
        }
        Ok(self.stream.as_mut().unwrap())
    }
}

impl PoseSink for TcpSink {
    fn send(&mut self, message: &PoseMessage) -> io::Result<()> {
        let bytes = message.encode();
        let result = self.connect()?.write_all(&bytes);
        if result.is_err() {
            self.stream = None;
            self.retry_at = Instant::now();
        }
        result
    }
}

/// One message per datagram, fire and forget.
pub struct UdpSink {
    socket: UdpSocket,
    addr: SocketAddr,
}

impl UdpSink {
    pub fn new(endpoint: &str) -> io::Result<Self> {
        let addr = resolve(endpoint)?;
        let bind: SocketAddr = if addr.is_ipv4() {
            "0.0.0.0:0"
        } else {
            "[::]:0"
        }
        .parse()
        .unwrap();
        Ok(Self {
            socket: UdpSocket::bind(bind)?,
            addr,
        })
    }
}

impl PoseSink for UdpSink {
    fn send(&mut self, message: &PoseMessage) -> io::Result<()> {
        self.socket
            .send_to(&message.encode(), self.addr)
            .map(|_| ())
    }
}
