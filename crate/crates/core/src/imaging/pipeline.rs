//! Generation jobs: a bounded FIFO queue drained by a fixed worker pool.

use std::collections::HashMap;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use crossbeam_channel::{Sender, TrySendError};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::backend::{BackendRequest, ImageBackendPort, GRID_SIZE};
use super::images::{ImageStore, NewImage};
use crate::corpus::Corpus;
use crate::guardrails::{revalidate, validate_tags, TagError, TagSelection, TaskTheme, Violation};

pub const DEFAULT_WORKERS: usize = 2;
pub const DEFAULT_QUEUE_DEPTH: usize = 32;

/// A prompt that has been through [`revalidate`]. Jobs accept nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfirmedPrompt {
    text: String,
    theme: TaskTheme,
    corrections: Vec<Violation>,
}

impl ConfirmedPrompt {
    pub fn confirm(
        edited_prompt: &str,
        selection: &TagSelection,
        theme: TaskTheme,
        corpus: &Corpus,
    ) -> Result<ConfirmedPrompt, TagError> {
        validate_tags(selection, theme, corpus)?;
        let outcome = revalidate(edited_prompt, selection, theme, corpus);
        Ok(ConfirmedPrompt {
            text: outcome.normalized_idea,
            theme,
            corrections: outcome.violations,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn theme(&self) -> TaskTheme {
        self.theme
    }

    /// What revalidation changed in the submitted text; empty when it was
    /// already compliant.
    pub fn corrections(&self) -> &[Violation] {
        &self.corrections
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub request_id: String,
    pub prompt: String,
    /// The site rendering at the root of this request's lineage.
    pub base_rendering_ref: String,
    pub seed: u64,
    pub batch_size: usize,
    /// Refinements start from this image instead of the site rendering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_image_id: Option<String>,
}

impl GenerationRequest {
    pub fn new(prompt: &ConfirmedPrompt, base_rendering_ref: impl Into<String>, seed: u64) -> GenerationRequest {
        GenerationRequest {
            request_id: format!("req-{}", uuid::Uuid::new_v4().simple()),
            prompt: prompt.text().to_string(),
            base_rendering_ref: base_rendering_ref.into(),
            seed,
            batch_size: GRID_SIZE,
            parent_image_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobTimings {
    pub queued_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub job_id: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub image_ids: Vec<String>,
    pub request: GenerationRequest,
    pub timings: JobTimings,
}

impl GenerationJob {
    fn advance(&mut self, to: JobStatus) {
        assert!(
            to > self.status && self.status < JobStatus::Done,
            "job {} cannot move from {:?} to {:?}",
            self.job_id,
            self.status,
            to
        );
        self.status = to;
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.status, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown base rendering `{0}`")]
    UnknownBaseRendering(String),
    #[error("generation queue is full")]
    QueueFull,
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("generation pipeline is shut down")]
    ShutDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub workers: usize,
    pub queue_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workers: DEFAULT_WORKERS,
            queue_depth: DEFAULT_QUEUE_DEPTH,
        }
    }
}

pub type OnFinished = Box<dyn FnOnce(&GenerationJob) + Send>;

struct Task {
    job_id: String,
    base: BackendRequest,
    on_finished: Option<OnFinished>,
}

struct Shared {
    backend: Arc<dyn ImageBackendPort>,
    images: Arc<ImageStore>,
    jobs: RwLock<HashMap<String, Arc<Mutex<GenerationJob>>>>,
    finished: (Mutex<u64>, Condvar),
}

pub struct ImagePipeline {
    corpus: Arc<Corpus>,
    shared: Arc<Shared>,
    tx: Option<Sender<Task>>,
    workers: Vec<JoinHandle<()>>,
}

impl ImagePipeline {
    pub fn new(
        corpus: Arc<Corpus>,
        backend: Arc<dyn ImageBackendPort>,
        images: Arc<ImageStore>,
        config: PipelineConfig,
    ) -> ImagePipeline {
        let (tx, rx) = crossbeam_channel::bounded::<Task>(config.queue_depth.max(1));
        let shared = Arc::new(Shared {
            backend,
            images,
            jobs: RwLock::new(HashMap::new()),
            finished: (Mutex::new(0), Condvar::new()),
        });
        let workers = (0..config.workers.max(1))
            .map(|i| {
                let rx = rx.clone();
                let shared = shared.clone();
                std::thread::Builder::new()
                    .name(format!("image-worker-{i}"))
                    .spawn(move || {
                        for task in rx {
                            shared.run(task);
                        }
                    })
                    .expect("spawn image worker")
            })
            .collect();
        ImagePipeline {
            corpus,
            shared,
            tx: Some(tx),
            workers,
        }
    }

    pub fn images(&self) -> &Arc<ImageStore> {
        &self.shared.images
    }

    pub fn backend_name(&self) -> &'static str {
        self.shared.backend.name()
    }

    pub fn submit(&self, request: GenerationRequest) -> Result<String, PipelineError> {
        self.submit_with(request, None)
    }

    /// Like [`submit`](Self::submit); `on_finished` runs on the worker once
    /// the job is Done or Failed.
    pub fn submit_with(
        &self,
        request: GenerationRequest,
        on_finished: Option<OnFinished>,
    ) -> Result<String, PipelineError> {
        let (bytes, media_type) = match &request.parent_image_id {
            Some(parent) => self
                .shared
                .images
                .bytes(parent)
                .ok_or_else(|| PipelineError::UnknownImage(parent.clone()))?,
            None => {
                let asset = self
                    .corpus
                    .rendering(&request.base_rendering_ref)
                    .ok_or_else(|| PipelineError::UnknownBaseRendering(request.base_rendering_ref.clone()))?;
                (asset.bytes.clone(), asset.media_type.clone())
            }
        };
        let job_id = format!("job-{}", uuid::Uuid::new_v4().simple());
        let base = BackendRequest {
            prompt: request.prompt.clone(),
            seed: request.seed,
            base_image: bytes,
            base_media_type: media_type,
        };
        let job = GenerationJob {
            job_id: job_id.clone(),
            status: JobStatus::Queued,
            failure_reason: None,
            image_ids: Vec::new(),
            request,
            timings: JobTimings {
                queued_at: Utc::now(),
                started_at: None,
                finished_at: None,
            },
        };
        self.shared
            .jobs
            .write()
            .insert(job_id.clone(), Arc::new(Mutex::new(job)));
        let tx = self.tx.as_ref().ok_or(PipelineError::ShutDown)?;
        let task = Task {
            job_id: job_id.clone(),
            base,
            on_finished,
        };
        match tx.try_send(task) {
            Ok(()) => Ok(job_id),
            Err(e) => {
                self.shared.jobs.write().remove(&job_id);
                Err(match e {
                    TrySendError::Full(_) => PipelineError::QueueFull,
                    TrySendError::Disconnected(_) => PipelineError::ShutDown,
                })
            }
        }
    }

    /// A new job that starts from `parent_image_id` and keeps its lineage.
    pub fn refine(
        &self,
        parent_image_id: &str,
        prompt: &ConfirmedPrompt,
        seed: u64,
        on_finished: Option<OnFinished>,
    ) -> Result<String, PipelineError> {
        let parent = self
            .shared
            .images
            .get(parent_image_id)
            .ok_or_else(|| PipelineError::UnknownImage(parent_image_id.to_string()))?;
        let mut request = GenerationRequest::new(prompt, parent.base_rendering_ref, seed);
        request.parent_image_id = Some(parent.image_id);
        self.submit_with(request, on_finished)
    }

    pub fn poll(&self, job_id: &str) -> Result<GenerationJob, PipelineError> {
        self.shared
            .jobs
            .read()
            .get(job_id)
            .map(|j| j.lock().clone())
            .ok_or_else(|| PipelineError::UnknownJob(job_id.to_string()))
    }

    /// Blocks until the job finishes or `timeout` passes, returning the
    /// latest snapshot either way.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Result<GenerationJob, PipelineError> {
        let deadline = Instant::now() + timeout;
        let (lock, cv) = &self.shared.finished;
        let mut seen = lock.lock();
        loop {
            let job = self.poll(job_id)?;
            if job.is_finished() || Instant::now() >= deadline {
                return Ok(job);
            }
            cv.wait_until(&mut seen, deadline);
        }
    }

    pub fn fetch_image(&self, image_id: &str) -> Result<(Arc<Vec<u8>>, String), PipelineError> {
        self.shared
            .images
            .bytes(image_id)
            .ok_or_else(|| PipelineError::UnknownImage(image_id.to_string()))
    }
}

impl Drop for ImagePipeline {
    fn drop(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Shared {
    fn run(&self, task: Task) {
        let Some(slot) = self.jobs.read().get(&task.job_id).cloned() else {
            return;
        };
        let request = {
            let mut job = slot.lock();
            job.advance(JobStatus::Running);
            job.timings.started_at = Some(Utc::now());
            job.request.clone()
        };
        let result = self
            .backend
            .generate(&task.base)
            .map_err(|e| e.to_string())
            .and_then(|payloads| {
                if payloads.len() != GRID_SIZE {
                    return Err(format!(
                        "backend returned {} images instead of {GRID_SIZE}",
                        payloads.len()
                    ));
                }
                payloads
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| {
                        self.images
                            .put(NewImage {
                                job_id: task.job_id.clone(),
                                grid_index: i,
                                media_type: p.media_type,
                                bytes: p.bytes,
                                prompt: request.prompt.clone(),
                                seed: request.seed,
                                base_rendering_ref: request.base_rendering_ref.clone(),
                                parent_image_id: request.parent_image_id.clone(),
                            })
                            .map(|m| m.image_id)
                            .map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, _>>()
            });
        let snapshot = {
            let mut job = slot.lock();
            match result {
                Ok(ids) => {
                    job.advance(JobStatus::Done);
                    job.image_ids = ids;
                }
                Err(reason) => {
                    tracing::warn!(job = %task.job_id, %reason, "generation failed");
                    job.advance(JobStatus::Failed);
                    job.failure_reason = Some(reason);
                }
            }
            job.timings.finished_at = Some(Utc::now());
            job.clone()
        };
        if let Some(cb) = task.on_finished {
            cb(&snapshot);
        }
        let (lock, cv) = &self.finished;
        *lock.lock() += 1;
        cv.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::backend::{BackendError, ImagePayload, StubBackend};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn corpus() -> Arc<Corpus> {
        Arc::new(Corpus::bundled().unwrap())
    }

    fn sel() -> TagSelection {
        use crate::corpus::CategoryId;
        TagSelection::default()
            .with(CategoryId::Viewpoint, "viewpoint.medium")
            .with(CategoryId::TimeOfDay, "time-of-day.evening")
            .with(CategoryId::People, "people.none")
            .with(CategoryId::RenderingStyle, "rendering-style.photorealistic")
    }

    fn confirmed(c: &Corpus, text: &str) -> ConfirmedPrompt {
        ConfirmedPrompt::confirm(text, &sel(), TaskTheme::RiskEstimation, c).unwrap()
    }

    fn pipeline(c: &Arc<Corpus>, backend: Arc<dyn ImageBackendPort>) -> ImagePipeline {
        ImagePipeline::new(
            c.clone(),
            backend,
            Arc::new(ImageStore::in_memory()),
            PipelineConfig::default(),
        )
    }

    const WAIT: Duration = Duration::from_secs(10);

    #[test]
    fn stub_jobs_finish_with_four_images() {
        let c = corpus();
        let p = pipeline(&c, Arc::new(StubBackend));
        let prompt = confirmed(&c, "floodwater around the tower");
        let id = p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 5)).unwrap();
        let job = p.wait(&id, WAIT).unwrap();
        assert_eq!(job.status, JobStatus::Done);
        assert_eq!(job.image_ids.len(), 4);
        for img in &job.image_ids {
            let meta = p.images().get(img).unwrap();
            assert_eq!(meta.prompt, prompt.text());
            assert_eq!(p.fetch_image(img).unwrap(), p.fetch_image(img).unwrap());
        }
    }

    #[test]
    fn identical_requests_give_identical_bytes() {
        let c = corpus();
        let p = pipeline(&c, Arc::new(StubBackend));
        let prompt = confirmed(&c, "evening rain");
        let a = p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 9)).unwrap();
        let b = p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 9)).unwrap();
        let (a, b) = (p.wait(&a, WAIT).unwrap(), p.wait(&b, WAIT).unwrap());
        assert_ne!(a.image_ids, b.image_ids);
        for (x, y) in a.image_ids.iter().zip(&b.image_ids) {
            assert_eq!(p.fetch_image(x).unwrap().0, p.fetch_image(y).unwrap().0);
        }
    }

    #[test]
    fn unknown_references() {
        let c = corpus();
        let p = pipeline(&c, Arc::new(StubBackend));
        let prompt = confirmed(&c, "x");
        assert_eq!(
            p.submit(GenerationRequest::new(&prompt, "nowhere.png", 1)),
            Err(PipelineError::UnknownBaseRendering("nowhere.png".into()))
        );
        assert!(matches!(p.poll("job-missing"), Err(PipelineError::UnknownJob(_))));
        assert!(matches!(
            p.refine("img-missing", &prompt, 1, None),
            Err(PipelineError::UnknownImage(_))
        ));
        assert!(matches!(
            p.fetch_image("img-missing"),
            Err(PipelineError::UnknownImage(_))
        ));
    }

    #[test]
    fn refine_keeps_lineage_and_uses_parent_as_base() {
        let c = corpus();
        let p = pipeline(&c, Arc::new(StubBackend));
        let prompt = confirmed(&c, "typhoon clouds");
        let first = p
            .wait(
                &p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 1)).unwrap(),
                WAIT,
            )
            .unwrap();
        let parent = &first.image_ids[2];
        let edited = confirmed(&c, "typhoon clouds and heavy rain");
        let child = p.wait(&p.refine(parent, &edited, 1, None).unwrap(), WAIT).unwrap();
        assert_eq!(child.request.parent_image_id.as_deref(), Some(parent.as_str()));
        assert_eq!(child.request.base_rendering_ref, "ruishi-lou.png");
        let grand = p
            .wait(&p.refine(&child.image_ids[0], &edited, 1, None).unwrap(), WAIT)
            .unwrap();
        assert_eq!(
            p.images().lineage(&grand.image_ids[0]),
            vec![child.image_ids[0].clone(), parent.clone()]
        );
        // same prompt and seed, different base image
        let direct = p
            .wait(
                &p.submit(GenerationRequest::new(&edited, "ruishi-lou.png", 1)).unwrap(),
                WAIT,
            )
            .unwrap();
        assert_ne!(
            p.fetch_image(&direct.image_ids[0]).unwrap().0,
            p.fetch_image(&child.image_ids[0]).unwrap().0
        );
    }

    #[test]
    fn lock_clause_is_reasserted_before_refine() {
        let c = corpus();
        let sel = sel();
        let original = crate::guardrails::constraint_profile(TaskTheme::HistoricalReconstruction, c.lexicon());
        let edited = "A market day beside the tower.";
        let prompt = ConfirmedPrompt::confirm(edited, &sel, TaskTheme::HistoricalReconstruction, &c).unwrap();
        assert!(prompt.text().contains(&original.architecture_lock_clause));
        assert!(!prompt.corrections().is_empty());
        assert!(ConfirmedPrompt::confirm(
            edited,
            &TagSelection::default(),
            TaskTheme::HistoricalReconstruction,
            &c
        )
        .is_err());
        let p = pipeline(&c, Arc::new(StubBackend));
        let first = p
            .wait(
                &p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 1)).unwrap(),
                WAIT,
            )
            .unwrap();
        let child = p
            .wait(&p.refine(&first.image_ids[0], &prompt, 2, None).unwrap(), WAIT)
            .unwrap();
        assert_eq!(child.request.prompt, prompt.text());
    }

    struct Broken(AtomicUsize);

    impl ImageBackendPort for Broken {
        fn generate(&self, _: &BackendRequest) -> Result<Vec<ImagePayload>, BackendError> {
            if self.0.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(BackendError::Timeout)
            } else {
                Ok(vec![ImagePayload {
                    bytes: vec![1],
                    media_type: "image/png".into(),
                }])
            }
        }
        fn name(&self) -> &'static str {
            "broken"
        }
    }

    #[test]
    fn failures_are_reported_and_never_expose_images() {
        let c = corpus();
        let p = ImagePipeline::new(
            c.clone(),
            Arc::new(Broken(AtomicUsize::new(0))),
            Arc::new(ImageStore::in_memory()),
            PipelineConfig {
                workers: 1,
                queue_depth: 4,
            },
        );
        let prompt = confirmed(&c, "x");
        for _ in 0..2 {
            let job = p
                .wait(
                    &p.submit(GenerationRequest::new(&prompt, "ruishi-lou.png", 1)).unwrap(),
                    WAIT,
                )
                .unwrap();
            assert_eq!(job.status, JobStatus::Failed);
            assert!(job.image_ids.is_empty());
            assert!(job.failure_reason.is_some());
        }
        assert!(p.images().is_empty());
    }

    struct Slow(Arc<(Mutex<bool>, Condvar)>);

    impl ImageBackendPort for Slow {
        fn generate(&self, r: &BackendRequest) -> Result<Vec<ImagePayload>, BackendError> {
            let (l, cv) = &*self.0;
            let mut open = l.lock();
            while !*open {
                cv.wait(&mut open);
            }
            StubBackend.generate(r)
        }
        fn name(&self) -> &'static str {
            "slow"
        }
    }

    #[test]
    fn queue_is_bounded_and_fifo() {
        let c = corpus();
        let gate = Arc::new((Mutex::new(false), Condvar::new()));
        let p = ImagePipeline::new(
            c.clone(),
            Arc::new(Slow(gate.clone())),
            Arc::new(ImageStore::in_memory()),
            PipelineConfig {
                workers: 1,
                queue_depth: 2,
            },
        );
        let prompt = confirmed(&c, "x");
        let order = Arc::new(Mutex::new(Vec::new()));
        let mut ids = Vec::new();
        let mut full = false;
        for i in 0..6 {
            let o = order.clone();
            match p.submit_with(
                GenerationRequest::new(&prompt, "ruishi-lou.png", i),
                Some(Box::new(move |j: &GenerationJob| o.lock().push(j.request.seed))),
            ) {
                Ok(id) => ids.push(id),
                Err(PipelineError::QueueFull) => full = true,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(full);
        assert!(ids.len() <= 3);
        assert_eq!(p.poll(&ids[ids.len() - 1]).unwrap().status, JobStatus::Queued);
        *gate.0.lock() = true;
        gate.1.notify_all();
        for id in &ids {
            assert_eq!(p.wait(id, WAIT).unwrap().status, JobStatus::Done);
        }
        let seeds = order.lock().clone();
        let mut sorted = seeds.clone();
        sorted.sort();
        assert_eq!(seeds, sorted);
    }
}
