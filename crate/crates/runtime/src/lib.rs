//! Multi-threaded tracking runtime and pose streaming.

pub mod bench;
pub mod pipeline;
pub mod posefile;
pub mod report;
pub mod sink;
pub mod source;
pub mod wire;

pub use pipeline::{
    FramePair, Pipeline, PipelineConfig, PipelineError, PipelineOutput, PoseRecord,
};
pub use report::{Gap, LatencySummary, RunReport};
pub use sink::{PoseSink, TcpSink, UdpSink};
pub use wire::{PoseMessage, WireError, MESSAGE_LEN};
