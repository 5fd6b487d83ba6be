use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;

use super::{EngineError, LabelEvent, ProjectState};
use crate::corpus::Label;

type Hook = Box<dyn Fn(&ProjectState) + Send + Sync>;

struct Inner {
    state: ProjectState,
    in_flight: bool,
    queued: bool,
    last_error: Option<EngineError>,
}

struct Shared {
    inner: Mutex<Inner>,
    idle: Condvar,
    on_change: Option<Hook>,
}

/// A project whose retrains run on a background thread.
///
/// `submit_label` returns as soon as the event is appended. At most one
/// retrain runs at a time; labels arriving meanwhile schedule exactly one
/// follow-up retrain on the then-current log. Outcomes older than the
/// installed model are discarded.
#[derive(Clone)]
pub struct AsyncProject {
    shared: Arc<Shared>,
}

impl AsyncProject {
    pub fn new(state: ProjectState) -> Self {
        Self::build(state, None)
    }

    /// `on_change` runs under the project lock after every appended label and
    /// every installed model, e.g. to persist the state.
    pub fn with_hook(state: ProjectState, on_change: impl Fn(&ProjectState) + Send + Sync + 'static) -> Self {
        Self::build(state, Some(Box::new(on_change)))
    }

    fn build(state: ProjectState, on_change: Option<Hook>) -> Self {
        let project = AsyncProject {
            shared: Arc::new(Shared {
                inner: Mutex::new(Inner {
                    state,
                    in_flight: false,
                    queued: false,
                    last_error: None,
                }),
                idle: Condvar::new(),
                on_change,
            }),
        };
        {
            let mut inner = project.lock();
            if inner.state.needs_retrain() {
                project.schedule(&mut inner);
            }
        }
        project
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.shared.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Read access to the current state.
    pub fn with_state<T>(&self, f: impl FnOnce(&ProjectState) -> T) -> T {
        f(&self.lock().state)
    }

    /// Mutable access for operations that do not touch the event log.
    pub fn with_state_mut<T>(&self, f: impl FnOnce(&mut ProjectState) -> T) -> T {
        f(&mut self.lock().state)
    }

    pub fn next_record(&self) -> Result<super::Presented, EngineError> {
        self.lock().state.next_record()
    }

    pub fn submit_label(&self, row_id: usize, label: Label) -> Result<LabelEvent, EngineError> {
        let mut inner = self.lock();
        let event = inner.state.submit_label(row_id, label)?;
        if let Some(hook) = &self.shared.on_change {
            hook(&inner.state);
        }
        self.schedule(&mut inner);
        Ok(event)
    }

    pub fn is_training(&self) -> bool {
        self.lock().in_flight
    }

    /// Blocks until no retrain is in flight or queued. Returns the error of
    /// the last failed retrain, if any.
    pub fn wait_idle(&self) -> Result<(), EngineError> {
        let mut inner = self.lock();
        while inner.in_flight {
            inner = self.shared.idle.wait(inner).unwrap_or_else(|p| p.into_inner());
        }
        inner.last_error.take().map_or(Ok(()), Err)
    }

    fn schedule(&self, inner: &mut Inner) {
        if inner.in_flight {
            inner.queued = true;
            return;
        }
        inner.in_flight = true;
        let job = inner.state.training_job();
        let shared = Arc::clone(&self.shared);
        thread::spawn(move || {
            let mut job = job;
            loop {
                let outcome = job.run();
                let mut inner = shared.inner.lock().unwrap_or_else(|p| p.into_inner());
                match outcome {
                    Ok(outcome) => {
                        if inner.state.install(outcome) {
                            if let Some(hook) = &shared.on_change {
                                hook(&inner.state);
                            }
                        }
                    }
                    Err(e) => inner.last_error = Some(e),
                }
                if inner.queued {
                    inner.queued = false;
                    job = inner.state.training_job();
                    continue;
                }
                inner.in_flight = false;
                shared.idle.notify_all();
                return;
            }
        });
    }
}
