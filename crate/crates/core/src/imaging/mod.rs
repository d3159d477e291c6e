//! Image generation: workflow descriptors, backends, the job pipeline and
//! image storage.

mod backend;
mod images;
mod pipeline;
mod workflow;

pub use backend::{
    backend_from_env, BackendError, BackendRequest, ImageBackendPort, ImagePayload, RemoteBackend, RemoteBackendConfig,
    StubBackend, GRID_SIZE, STUB_EDGE,
};
pub use images::{is_image_id, ImageStore, ImageStoreError, NewImage, StoredImage};
pub use pipeline::{
    ConfirmedPrompt, GenerationJob, GenerationRequest, ImagePipeline, JobStatus, JobTimings, OnFinished,
    PipelineConfig, PipelineError, DEFAULT_QUEUE_DEPTH, DEFAULT_WORKERS,
};
pub use workflow::{
    bundled_workflow_path, WorkflowDescriptor, WorkflowEdge, WorkflowError, WorkflowNode, REQUIRED_SLOTS,
};
