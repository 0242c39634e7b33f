//! Cameras: each runs a capture task that refreshes a "latest frame" slot at
//! a fixed cadence. Readers clone an `Arc` out of the slot and never wait on
//! the capture work itself.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use gvss_core::{synthetic_frame, Frame};
use serde::Serialize;
use thiserror::Error;
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use crate::clock::Clock;

pub const DEFAULT_CADENCE: Duration = Duration::from_millis(1000);
/// Dimensions of the "normal" resolution mode; "high" is the native size.
pub const NORMAL_RESOLUTION: (u32, u32) = (320, 240);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CameraError {
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error("camera `{0}` has not produced a frame yet")]
    NoFrameYet(String),
    #[error("camera `{id}`: {reason}")]
    Source { id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CameraKind {
    SyntheticPattern { width: u32, height: u32 },
    /// Directory of PNG/PPM stills, cycled in lexicographic order.
    FileSequence { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraConfig {
    pub id: String,
    pub name: String,
    pub kind: CameraKind,
    pub cadence: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourceKind {
    SyntheticPattern,
    FileSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionMode {
    Normal,
    High,
}

impl std::str::FromStr for ResolutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(ResolutionMode::Normal),
            "high" => Ok(ResolutionMode::High),
            other => Err(format!("unknown resolution `{other}` (expected normal or high)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CameraDescriptor {
    pub camera_id: String,
    pub name: String,
    pub kind: SourceKind,
    pub native_width: u32,
    pub native_height: u32,
    pub normal_width: u32,
    pub normal_height: u32,
    pub high_width: u32,
    pub high_height: u32,
    pub cadence_ms: u64,
}

impl CameraDescriptor {
    pub fn resolution(&self, mode: ResolutionMode) -> (u32, u32) {
        match mode {
            ResolutionMode::Normal => (self.normal_width, self.normal_height),
            ResolutionMode::High => (self.high_width, self.high_height),
        }
    }
}

trait FrameSource: Send {
    /// Next raw frame; metadata is stamped by the capture loop.
    fn next_frame(&mut self) -> Result<Frame, String>;
}

struct SyntheticSource {
    width: u32,
    height: u32,
    tick: u64,
}

impl FrameSource for SyntheticSource {
    fn next_frame(&mut self) -> Result<Frame, String> {
        let frame = synthetic_frame(self.width, self.height, self.tick).map_err(|e| e.to_string())?;
        self.tick += 1;
        Ok(frame)
    }
}

struct FileSequenceSource {
    files: Vec<PathBuf>,
    next: usize,
}

fn list_stills(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_still(path: &Path) -> Result<Frame, String> {
    let img = image::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Frame::new(w, h, rgb.into_raw(), chrono::DateTime::UNIX_EPOCH, 0).map_err(|e| e.to_string())
}

impl FileSequenceSource {
    /// Fails when the directory holds no decodable still.
    fn open(dir: &Path) -> Result<(Self, (u32, u32)), String> {
        let files = list_stills(dir)?;
        let first = files
            .iter()
            .find_map(|p| load_still(p).ok())
            .ok_or_else(|| format!("no readable PNG/PPM stills in {}", dir.display()))?;
        Ok((Self { files, next: 0 }, (first.width(), first.height())))
    }
}

impl FrameSource for FileSequenceSource {
    fn next_frame(&mut self) -> Result<Frame, String> {
        // skip unreadable files; at least one loaded at open time
        for _ in 0..self.files.len() {
            let path = &self.files[self.next % self.files.len()];
            self.next = (self.next + 1) % self.files.len();
            match load_still(path) {
                Ok(frame) => return Ok(frame),
                Err(e) => tracing::warn!("skipping still: {e}"),
            }
        }
        Err("no readable stills left".into())
    }
}

pub struct Camera {
    descriptor: CameraDescriptor,
    cadence: Duration,
    latest: RwLock<Option<Arc<Frame>>>,
    source: std::sync::Mutex<Option<Box<dyn FrameSource>>>,
}

impl Camera {
    pub fn open(config: &CameraConfig) -> Result<Self, CameraError> {
        let (source, (w, h)): (Box<dyn FrameSource>, _) = match &config.kind {
            CameraKind::SyntheticPattern { width, height } => (
                Box::new(SyntheticSource {
                    width: *width,
                    height: *height,
                    tick: 0,
                }),
                (*width, *height),
            ),
            CameraKind::FileSequence { dir } => {
                let (src, dims) = FileSequenceSource::open(dir).map_err(|reason| CameraError::Source {
                    id: config.id.clone(),
                    reason,
                })?;
                (Box::new(src), dims)
            }
        };
        let kind = match config.kind {
            CameraKind::SyntheticPattern { .. } => SourceKind::SyntheticPattern,
            CameraKind::FileSequence { .. } => SourceKind::FileSequence,
        };
        Ok(Self {
            descriptor: CameraDescriptor {
                camera_id: config.id.clone(),
                name: config.name.clone(),
                kind,
                native_width: w,
                native_height: h,
                normal_width: NORMAL_RESOLUTION.0,
                normal_height: NORMAL_RESOLUTION.1,
                high_width: w,
                high_height: h,
                cadence_ms: config.cadence.as_millis() as u64,
            },
            cadence: config.cadence,
            latest: RwLock::new(None),
            source: std::sync::Mutex::new(Some(source)),
        })
    }

    pub fn descriptor(&self) -> &CameraDescriptor {
        &self.descriptor
    }

    pub fn latest(&self) -> Option<Arc<Frame>> {
        self.latest.read().unwrap().clone()
    }

    fn publish(&self, frame: Frame) {
        *self.latest.write().unwrap() = Some(Arc::new(frame));
    }

    /// Spawns the capture loop: first frame immediately, then one per cadence.
    pub fn spawn_capture(self: &Arc<Self>, clock: Arc<dyn Clock>) -> JoinHandle<()> {
        let camera = Arc::clone(self);
        let mut source = self
            .source
            .lock()
            .unwrap()
            .take()
            .expect("capture loop started once per camera");
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(camera.cadence);
            ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
            let mut sequence = 0u64;
            loop {
                ticker.tick().await;
                let captured = tokio::task::spawn_blocking(move || {
                    let frame = source.next_frame();
                    (source, frame)
                })
                .await;
                let Ok((returned, frame)) = captured else { return };
                source = returned;
                match frame {
                    Ok(frame) => {
                        sequence += 1;
                        camera.publish(frame.with_metadata(clock.now(), sequence));
                    }
                    Err(e) => tracing::warn!(camera = %camera.descriptor.camera_id, "capture failed: {e}"),
                }
            }
        })
    }
}

/// The configured cameras, in configuration order.
pub struct CameraSet {
    cameras: Vec<Arc<Camera>>,
}

impl CameraSet {
    pub fn open(configs: &[CameraConfig]) -> Result<Self, CameraError> {
        let cameras = configs
            .iter()
            .map(|c| Camera::open(c).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { cameras })
    }

    pub fn spawn_all(&self, clock: Arc<dyn Clock>) -> Vec<JoinHandle<()>> {
        self.cameras
            .iter()
            .map(|c| c.spawn_capture(Arc::clone(&clock)))
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<&Arc<Camera>, CameraError> {
        self.cameras
            .iter()
            .find(|c| c.descriptor.camera_id == id)
            .ok_or_else(|| CameraError::UnknownCamera(id.to_string()))
    }

    pub fn first(&self) -> &Arc<Camera> {
        &self.cameras[0]
    }

    pub fn descriptors(&self) -> Vec<CameraDescriptor> {
        self.cameras.iter().map(|c| c.descriptor.clone()).collect()
    }

    pub fn capture_latest(&self, id: &str) -> Result<Arc<Frame>, CameraError> {
        self.get(id)?
            .latest()
            .ok_or_else(|| CameraError::NoFrameYet(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SystemClock;

    fn synthetic(id: &str, cadence_ms: u64) -> CameraConfig {
        CameraConfig {
            id: id.into(),
            name: format!("{id} test"),
            kind: CameraKind::SyntheticPattern {
                width: 640,
                height: 480,
            },
            cadence: Duration::from_millis(cadence_ms),
        }
    }

    #[tokio::test]
    async fn serves_latest_frame_and_rejects_unknown_ids() {
        let set = CameraSet::open(&[synthetic("cam0", 1000)]).unwrap();
        assert_eq!(
            set.capture_latest("cam0"),
            Err(CameraError::NoFrameYet("cam0".into()))
        );
        let _tasks = set.spawn_all(Arc::new(SystemClock));
        tokio::time::sleep(Duration::from_millis(100)).await;
        let a = set.capture_latest("cam0").unwrap();
        tokio::time::sleep(Duration::from_millis(10)).await;
        let b = set.capture_latest("cam0").unwrap();
        assert_eq!(a.pixels().len(), 640 * 480 * 3);
        assert_eq!(a.sequence(), b.sequence());
        assert_eq!(
            set.capture_latest("ghost").unwrap_err(),
            CameraError::UnknownCamera("ghost".into())
        );
    }

    #[tokio::test(start_paused = true)]
    async fn cadence_over_ten_intervals() {
        let set = CameraSet::open(&[synthetic("cam0", 1000)]).unwrap();
        let _tasks = set.spawn_all(Arc::new(SystemClock));
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..100 {
            tokio::time::sleep(Duration::from_millis(100)).await;
            if let Ok(f) = set.capture_latest("cam0") {
                seen.insert(f.sequence());
            }
        }
        assert!((9..=11).contains(&seen.len()), "{} distinct", seen.len());
    }

    #[test]
    fn descriptor_advertises_modes() {
        let set = CameraSet::open(&[synthetic("cam0", 1000)]).unwrap();
        let d = &set.descriptors()[0];
        assert_eq!(d.resolution(ResolutionMode::Normal), (320, 240));
        assert_eq!(d.resolution(ResolutionMode::High), (640, 480));
        assert_eq!(d.kind, SourceKind::SyntheticPattern);
    }

    #[tokio::test]
    async fn file_sequence_cycles_and_skips_garbage() {
        let dir = tempfile::tempdir().unwrap();
        for (name, shade) in [("b.png", 200u8), ("a.ppm", 10)] {
            let img = image::RgbImage::from_pixel(4, 3, image::Rgb([shade, shade, shade]));
            img.save(dir.path().join(name)).unwrap();
        }
        std::fs::write(dir.path().join("c.png"), b"not a png").unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();

        let (mut src, dims) = FileSequenceSource::open(dir.path()).unwrap();
        assert_eq!(dims, (4, 3));
        let shades: Vec<u8> = (0..4).map(|_| src.next_frame().unwrap().pixels()[0]).collect();
        assert_eq!(shades, vec![10, 200, 10, 200]);
    }

    #[test]
    fn empty_file_sequence_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CameraConfig {
            id: "files".into(),
            name: "files".into(),
            kind: CameraKind::FileSequence {
                dir: dir.path().to_path_buf(),
            },
            cadence: DEFAULT_CADENCE,
        };
        assert!(matches!(Camera::open(&cfg), Err(CameraError::Source { .. })));
    }
}
