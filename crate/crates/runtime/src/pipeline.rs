//! The three-job tracking pipeline: computing workers, prediction, streamer.
//!
//! Frames are dealt round-robin to `computing_workers` trackers. Results are
//! re-sequenced by frame order before they reach the prediction stage, which
//! owns the [`PredictionState`] and emits a pose every streamer period. The
//! streamer thread drains a bounded queue into the sink; when the sink falls
//! behind the oldest queued message is discarded, so the upstream stages
//! never wait on it.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender, TrySendError};
use irtrack_core::io::IoError;
use irtrack_core::{
    CameraIntrinsics, CorrespondenceError, DepthFrame, FrameOutcome, FrameTracker, MarkerModel,
    PoseSource, PredictionError, PredictionState, ReflectivityFrame, RigidTransform, Stage,
    TrackError, TrackerConfig,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{Gap, LatencySummary, RunReport};
use crate::sink::PoseSink;
use crate::wire::{PoseMessage, FLAG_PREDICTED, FLAG_STALE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub computing_workers: usize,
    /// Hz.
    pub streamer_rate: f64,
    /// How long past the extrapolation horizon the last pose is still sent,
    /// flagged stale, before the stream goes silent. Milliseconds.
    pub stale_cap_ms: u64,
    /// Prediction horizon past the newest measurement. Milliseconds.
    pub max_extrapolation_ms: u64,
    pub queue_capacity: usize,
    /// Replay frames at their recorded rate and emit poses on the wall clock.
    /// Offline runs instead advance the streamer clock with frame timestamps,
    /// which makes the output a pure function of the input.
    pub realtime: bool,
    pub tracker: TrackerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            computing_workers: 2,
            streamer_rate: 46.0,
            stale_cap_ms: 100,
            max_extrapolation_ms: 100,
            queue_capacity: 16,
            realtime: false,
            tracker: TrackerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.computing_workers == 0 {
            return Err("computing_workers must be at least 1".into());
        }
        if !(self.streamer_rate.is_finite() && self.streamer_rate > 0.0) {
            return Err(format!(
                "streamer_rate must be positive, got {}",
                self.streamer_rate
            ));
        }
        if self.queue_capacity == 0 {
            return Err("queue_capacity must be at least 1".into());
        }
        self.tracker.matching.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Source(#[from] IoError),
}

#[derive(Debug, Clone)]
pub struct FramePair {
    pub frame_index: u64,
    pub reflectivity: ReflectivityFrame,
    pub depth: DepthFrame,
}

/// One row of the pose log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    pub timestamp_us: u64,
    pub pose: RigidTransform,
    pub source: PoseSource,
    /// The frame measured, or for predictions the newest frame they rest on.
    pub frame_index: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RunReport,
    /// Measured and predicted poses in emission order. Stale messages are
    /// streamed but not logged.
    pub poses: Vec<PoseRecord>,
}

/// Extra per-frame work injected into a worker, by frame sequence number.
pub type WorkerDelay = Arc<dyn Fn(u64) -> Duration + Send + Sync>;

pub struct Pipeline {
    model: MarkerModel,
    intrinsics: CameraIntrinsics,
    config: PipelineConfig,
    sink: Option<Box<dyn PoseSink>>,
    worker_delay: Option<WorkerDelay>,
}

struct Job {
    seq: u64,
    pair: FramePair,
    intake: Instant,
}

struct Done {
    seq: u64,
    frame_index: u64,
    outcome: FrameOutcome,
    intake: Instant,
}

pub fn rejection_reason(e: &TrackError) -> &'static str {
    match e {
        TrackError::MismatchedFrames(_) => "mismatched_frames",
        TrackError::NoMarkers => "no_markers",
        TrackError::NoValidDepth { .. } => "no_valid_depth",
        TrackError::Correspondence(CorrespondenceError::NoConsistentAssignment { .. }) => {
            "no_consistent_assignment"
        }
        TrackError::Correspondence(CorrespondenceError::Ambiguous { .. }) => "ambiguous",
        TrackError::Correspondence(_) => "correspondence",
        TrackError::Alignment(_) => "alignment",
    }
}

impl Pipeline {
    pub fn new(
        model: MarkerModel,
        intrinsics: CameraIntrinsics,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::Config)?;
        intrinsics
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            model,
            intrinsics,
            config,
            sink: None,
            worker_delay: None,
        })
    }

    pub fn with_sink(mut self, sink: Box<dyn PoseSink>) -> Self {
        self.sink = Some(sink);
        self
    }

    /// Stalls workers per frame, for exercising the re-sequencing.
    pub fn with_worker_delay(mut self, delay: WorkerDelay) -> Self {
        self.worker_delay = Some(delay);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Runs until the source is exhausted and the stream has gone silent.
    /// Frames that fail to track are counted; a source error aborts the run.
    pub fn run<I>(self, source: I) -> Result<PipelineOutput, PipelineError>
    where
        I: IntoIterator<Item = Result<FramePair, IoError>>,
        I::IntoIter: Send,
    {
        let Pipeline {
            model,
            intrinsics,
            config,
            sink,
            worker_delay,
        } = self;
        let source = source.into_iter();
        let workers = config.computing_workers;

        thread::scope(|scope| {
            let (done_tx, done_rx) = bounded::<Done>(2 * workers);
            let mut job_txs = Vec::with_capacity(workers);
            for _ in 0..workers {
                let (tx, rx) = bounded::<Job>(2);
                job_txs.push(tx);
                let done_tx = done_tx.clone();
                let mut tracker = FrameTracker::new(model.clone(), intrinsics, config.tracker)
                    .expect("intrinsics validated");
                let delay = worker_delay.clone();
                scope.spawn(move || {
                    for job in rx {
                        if let Some(d) = &delay {
                            thread::sleep(d(job.seq));
                        }
                        let outcome = tracker.process(&job.pair.reflectivity, &job.pair.depth);
                        let done = Done {
                            seq: job.seq,
                            frame_index: job.pair.frame_index,
                            outcome,
                            intake: job.intake,
                        };
                        if done_tx.send(done).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(done_tx);

            let realtime = config.realtime;
            let intake = scope.spawn(move || -> Result<(), IoError> {
                let mut origin: Option<(Instant, u64)> = None;
                for (seq, pair) in source.enumerate() {
                    let pair = pair?;
                    let ts = pair.reflectivity.timestamp_us;
                    if realtime {
                        let (start, t0) = *origin.get_or_insert((Instant::now(), ts));
                        let due = start + Duration::from_micros(ts.saturating_sub(t0));
                        if let Some(wait) = due.checked_duration_since(Instant::now()) {
                            thread::sleep(wait);
                        }
                    }
                    let job = Job {
                        seq: seq as u64,
                        pair,
                        intake: Instant::now(),
                    };
                    if job_txs[seq % workers].send(job).is_err() {
                        break;
                    }
                }
                Ok(())
            });

            let (queue, streamer) = match sink {
                Some(mut sink) => {
                    let (tx, rx) = bounded::<PoseMessage>(config.queue_capacity);
                    let queue = DropOldest {
                        tx,
                        rx: rx.clone(),
                        dropped: 0,
                    };
                    let handle = scope.spawn(move || stream(rx, sink.as_mut()));
                    (Some(queue), Some(handle))
                }
                None => (None, None),
            };

            let mut stage = PredictionStage::new(&config, queue);
            stage.run(done_rx);
            let dropped = stage.queue.as_ref().map_or(0, |q| q.dropped);
            drop(stage.queue.take());
            let (sent, gaps) = streamer
                .map(|h| h.join().expect("streamer panicked"))
                .unwrap_or_default();
            let source_result = intake.join().expect("intake panicked");

            let mut report = stage.report;
            report.workers = workers;
            report.dropped = dropped;
            report.sent = sent;
            report.gaps = gaps
                .into_iter()
                .map(|(start, duration, lost)| Gap {
                    start_ms: start
                        .checked_duration_since(stage.started.unwrap_or(start))
                        .unwrap_or_default()
                        .as_secs_f64()
                        * 1e3,
                    duration_ms: duration.as_secs_f64() * 1e3,
                    lost,
                })
                .collect();
            let mut latency: BTreeMap<String, LatencySummary> = Stage::ALL
                .iter()
                .zip(&stage.stage_latency)
                .map(|(s, d)| (s.name().to_string(), LatencySummary::of(d)))
                .collect();
            latency.insert("end_to_end".into(), LatencySummary::of(&stage.end_to_end));
            latency.insert("enqueue".into(), LatencySummary::of(&stage.enqueue));
            report.latency = latency;
            source_result?;
            Ok(PipelineOutput {
                report,
                poses: stage.poses,
            })
        })
    }
}

/// Bounded queue whose producer discards the oldest entry instead of waiting.
struct DropOldest {
    tx: Sender<PoseMessage>,
    rx: Receiver<PoseMessage>,
    dropped: usize,
}

impl DropOldest {
    fn push(&mut self, mut m: PoseMessage) {
        loop {
            match self.tx.try_send(m) {
                Ok(()) | Err(TrySendError::Disconnected(_)) => return,
                Err(TrySendError::Full(back)) => {
                    if self.rx.try_recv().is_ok() {
                        self.dropped += 1;
                    }
                    m = back;
                }
            }
        }
    }
}

/// Returns messages delivered and the refusal gaps as (start, length, lost).
fn stream(
    rx: Receiver<PoseMessage>,
    sink: &mut dyn PoseSink,
) -> (usize, Vec<(Instant, Duration, usize)>) {
    let mut sent = 0;
    let mut gaps = Vec::new();
    let mut open: Option<(Instant, usize)> = None;
    for m in rx {
        match sink.send(&m) {
            Ok(()) => {
                sent += 1;
                if let Some((start, lost)) = open.take() {
                    gaps.push((start, start.elapsed(), lost));
                }
            }
            Err(e) => {
                let (_, lost) = open.get_or_insert_with(|| {
                    log::warn!("pose sink refused a message: {e}");
                    (Instant::now(), 0)
                });
                *lost += 1;
            }
        }
    }
    if let Some((start, lost)) = open {
        gaps.push((start, start.elapsed(), lost));
    }
    (sent, gaps)
}

struct PredictionStage {
    state: PredictionState,
    realtime: bool,
    period_us: f64,
    silence_after_us: u64,
    /// Wall instant and timestamp of the first frame.
    origin: Option<(Instant, u64)>,
    started: Option<Instant>,
    next_tick: u64,
    sequence: u32,
    latest_frame: u64,
    queue: Option<DropOldest>,
    reorder: BTreeMap<u64, Done>,
    next_seq: u64,
    last_release: Option<Instant>,
    report: RunReport,
    poses: Vec<PoseRecord>,
    stage_latency: [Vec<Duration>; 7],
    end_to_end: Vec<Duration>,
    enqueue: Vec<Duration>,
}

impl PredictionStage {
    fn new(config: &PipelineConfig, queue: Option<DropOldest>) -> Self {
        let horizon = config.max_extrapolation_ms * 1000;
        Self {
            state: PredictionState::new(horizon),
            realtime: config.realtime,
            period_us: 1e6 / config.streamer_rate,
            silence_after_us: horizon + config.stale_cap_ms * 1000,
            origin: None,
            started: None,
            next_tick: 0,
            sequence: 0,
            latest_frame: 0,
            queue,
            reorder: BTreeMap::new(),
            next_seq: 0,
            last_release: None,
            report: RunReport::default(),
            poses: Vec::new(),
            stage_latency: Default::default(),
            end_to_end: Vec::new(),
            enqueue: Vec::new(),
        }
    }

    fn tick_time(&self, k: u64) -> u64 {
        let (_, t0) = self.origin.expect("ticks start with the first frame");
        t0 + (k as f64 * self.period_us).round() as u64
    }

    fn wall_time(&self, t_us: u64) -> Instant {
        let (start, t0) = self.origin.expect("ticks start with the first frame");
        start + Duration::from_micros(t_us.saturating_sub(t0))
    }

    /// True once nothing more will be emitted without a new measurement.
    fn silent_at(&self, t_us: u64) -> bool {
        match self.state.latest() {
            Some(latest) => t_us > latest.timestamp_us + self.silence_after_us,
            None => true,
        }
    }

    fn run(&mut self, done_rx: Receiver<Done>) {
        loop {
            let received = if self.realtime && self.origin.is_some() {
                let due = self.wall_time(self.tick_time(self.next_tick));
                done_rx.recv_deadline(due)
            } else {
                done_rx.recv().map_err(|_| RecvTimeoutError::Disconnected)
            };
            match received {
                Ok(done) => {
                    self.reorder.insert(done.seq, done);
                    while let Some(done) = self.reorder.remove(&self.next_seq) {
                        self.next_seq += 1;
                        self.release(done);
                    }
                }
                Err(RecvTimeoutError::Timeout) => self.emit_tick(),
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        debug_assert!(self.reorder.is_empty());
        if let (Some(start), Some(end)) = (self.started, self.last_release) {
            let wall = (end - start).as_secs_f64();
            self.report.wall_seconds = wall;
            self.report.fps = if wall > 0.0 {
                self.report.frames as f64 / wall
            } else {
                0.0
            };
        }
        // the source is exhausted; let the stream run down to silence
        while self.origin.is_some() && !self.silent_at(self.tick_time(self.next_tick)) {
            if self.realtime {
                let due = self.wall_time(self.tick_time(self.next_tick));
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
            self.emit_tick();
        }
    }

    fn release(&mut self, done: Done) {
        let now = Instant::now();
        let ts = done.outcome.timestamp_us;
        if self.origin.is_none() {
            self.origin = Some((done.intake, ts));
            self.started = Some(done.intake);
        }
        if !self.realtime {
            while self.tick_time(self.next_tick) < ts {
                self.emit_tick();
            }
        }
        self.last_release = Some(now);
        self.end_to_end.push(now - done.intake);
        for (stage, samples) in Stage::ALL.iter().zip(&mut self.stage_latency) {
            samples.push(done.outcome.timings.get(*stage));
        }
        self.report.frames += 1;
        match done.outcome.result {
            Ok(tracked) => {
                if self.state.push(tracked.pose) {
                    self.report.tracked += 1;
                    self.latest_frame = done.frame_index;
                    self.poses.push(PoseRecord {
                        timestamp_us: ts,
                        pose: tracked.pose.pose,
                        source: PoseSource::Measured,
                        frame_index: done.frame_index,
                    });
                } else {
                    *self
                        .report
                        .rejected
                        .entry("out_of_order".into())
                        .or_default() += 1;
                }
            }
            Err(e) => {
                *self
                    .report
                    .rejected
                    .entry(rejection_reason(&e).into())
                    .or_default() += 1
            }
        }
    }

    fn emit_tick(&mut self) {
        let t = self.tick_time(self.next_tick);
        self.next_tick += 1;
        let (pose, flags) = match self.state.predict(t) {
            Ok(p) => (p.pose, FLAG_PREDICTED),
            Err(PredictionError::TrackingStale { .. }) if !self.silent_at(t) => {
                let latest = self
                    .state
                    .latest()
                    .expect("stale implies history")
                    .timestamp_us;
                let held = self
                    .state
                    .predict(latest + self.state.max_extrapolation_us())
                    .expect("within horizon");
                (held.pose, FLAG_PREDICTED | FLAG_STALE)
            }
            Err(_) => return,
        };
        if flags & FLAG_STALE == 0 {
            self.poses.push(PoseRecord {
                timestamp_us: t,
                pose,
                source: PoseSource::Predicted,
                frame_index: self.latest_frame,
            });
        } else {
            self.report.stale_messages += 1;
        }
        self.report.messages += 1;
        let message = PoseMessage::new(self.sequence, t, &pose, flags);
        self.sequence = self.sequence.wrapping_add(1);
        if let Some(q) = &mut self.queue {
            let start = Instant::now();
            q.push(message);
            self.enqueue.push(start.elapsed());
        }
    }
}
