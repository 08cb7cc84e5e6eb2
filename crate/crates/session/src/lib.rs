//! Interactive sessions: one person plays one seat of a scenario against
//! the game manager over HTTP and WebSocket.
//!
//! [`engine::Session`] is the transport-free state machine;
//! [`server::router`] exposes it.

pub mod engine;
pub mod server;

pub use engine::{Phase, ServerMessage, Session, SessionError};
pub use server::{router, serve, AppState, ServiceConfig};
