//! The screening loop: priors, train, present, label, retrain.
//!
//! [`ProjectState`] is the single writer of a project. Its observable state
//! (model, scores, ranking, presented record, rng cursor) is a pure function
//! of the dataset, the settings and the label event log. A retrain trained on
//! the first `L` events draws from random stream `L` only, which is what lets
//! the asynchronous driver in [`AsyncProject`] coalesce retrains and still end
//! up in the same state as the synchronous loop once it is idle.

mod asynch;
mod export;
mod persist;
mod settings;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifyError, Model};
use crate::corpus::{Dataset, Label};
use crate::rng::{ProjectRng, RngCursor, SUGGESTION_STREAM};
use crate::strategy::{self, StrategyError};
use crate::textfeat::{self, FeatureError, Features};

pub use asynch::AsyncProject;
pub use export::{export_results, ExportFormat};
pub use persist::{load_state, save_state, STATE_FORMAT_VERSION};
pub use settings::{Settings, StopSpec};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error("at least one relevant prior record is required")]
    NoPriorIncluded,
    #[error("at least one irrelevant prior record is required")]
    NoPriorExcluded,
    #[error("record {0} is listed as both relevant and irrelevant prior")]
    OverlappingPriors(usize),
    #[error("unknown record {0}")]
    UnknownRowId(usize),
    #[error("a project needs at least two records, the dataset has {0}")]
    TooFewRecords(usize),
    #[error("record {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("every record has been screened")]
    PoolExhausted,
    #[error("the stopping rule has been reached")]
    Stopped,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("invalid classifier/feature combination: {0}")]
    InvalidCombination(String),
    #[error("state belongs to dataset {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("corrupt state at {path}: {reason}")]
    CorruptState { path: String, reason: String },
    #[error("state format version {0} is not supported")]
    VersionUnsupported(u32),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

impl EngineError {
    pub(crate) fn corrupt(path: impl Into<String>, reason: impl fmt::Display) -> Self {
        EngineError::CorruptState {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Prior,
    /// Proposed by the model's scores.
    Model,
    /// Drawn at random by the query strategy.
    Random,
    /// Labeled out of queue order, e.g. after a search.
    Searched,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Prior => "prior",
            LabelSource::Model => "model",
            LabelSource::Random => "random",
            LabelSource::Searched => "searched",
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prior" => Ok(LabelSource::Prior),
            "model" => Ok(LabelSource::Model),
            "random" => Ok(LabelSource::Random),
            "searched" => Ok(LabelSource::Searched),
            other => Err(format!("unknown label source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub order: usize,
    pub row_id: usize,
    pub label: Label,
    pub source: LabelSource,
    /// Version of the model that proposed the record; 0 for priors.
    pub model_version: u64,
}

/// The record currently offered to the reviewer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presented {
    pub row_id: usize,
    pub source: LabelSource,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub n_labeled: usize,
    pub n_relevant: usize,
    pub n_irrelevant: usize,
    pub n_total: usize,
    /// Relevant labels per consecutive window of 10 labels, in screening order.
    pub recall_proxy: Vec<usize>,
    pub last_model_version: u64,
}

impl Progress {
    pub fn empty(n_total: usize) -> Self {
        Progress {
            n_labeled: 0,
            n_relevant: 0,
            n_irrelevant: 0,
            n_total,
            recall_proxy: Vec::new(),
            last_model_version: 0,
        }
    }
}

/// Everything a retrain needs, detached from the live state.
#[derive(Debug, Clone)]
pub struct TrainingJob {
    features: Arc<Features>,
    settings: Settings,
    n_priors: usize,
    labeled: Vec<(usize, Label)>,
}

/// Result of a [`TrainingJob`].
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    prefix_len: usize,
    model: Model,
    scores: Vec<f64>,
    training_set: Vec<usize>,
    rng: ProjectRng,
}

impl TrainingJob {
    pub fn prefix_len(&self) -> usize {
        self.labeled.len()
    }

    /// balance, fit, score every row.
    pub fn run(self) -> Result<TrainingOutcome, EngineError> {
        let prefix_len = self.labeled.len();
        let matrix = &self.features.matrix;
        let mut rng = ProjectRng::new(self.settings.seed, prefix_len as u64);
        let (ids, labels): (Vec<usize>, Vec<Label>) = self.labeled.iter().copied().unzip();
        let training_set = strategy::balance(&ids, &labels, matrix.n_rows(), &self.settings.balance, &mut rng)?;
        let mut label_of = vec![Label::Irrelevant; matrix.n_rows()];
        for (&id, &label) in ids.iter().zip(&labels) {
            label_of[id] = label;
        }
        let rows: Vec<_> = training_set.iter().map(|&id| matrix.row(id)).collect();
        let train_labels: Vec<Label> = training_set.iter().map(|&id| label_of[id]).collect();
        let version = (prefix_len - self.n_priors + 1) as u64;
        let model = classify::fit(&rows, &train_labels, matrix.n_cols(), &self.settings.classifier)?.with_version(version);
        let scores = classify::predict_relevance(&model, matrix)?;
        Ok(TrainingOutcome {
            prefix_len,
            model,
            scores,
            training_set,
            rng,
        })
    }
}

/// Persistent, resumable state of one screening project.
#[derive(Debug, Clone)]
pub struct ProjectState {
    dataset: Arc<Dataset>,
    settings: Settings,
    features: Arc<Features>,
    events: Vec<LabelEvent>,
    labels: Vec<Option<Label>>,
    n_priors: usize,
    model: Option<Arc<Model>>,
    trained_on: usize,
    scores: Vec<f64>,
    ranking: Vec<usize>,
    presented: Option<Presented>,
    rng_cursor: RngCursor,
    last_training_set: Vec<usize>,
    /// Last record handed out by `next_record`. Kept when a newer model
    /// replaces the proposal so the label still carries its proposal stamp.
    issued: Option<Presented>,
}

impl PartialEq for ProjectState {
    /// Two states are equal when everything except the cached training set agrees.
    fn eq(&self, other: &Self) -> bool {
        self.dataset.fingerprint() == other.dataset.fingerprint()
            && self.settings == other.settings
            && self.features == other.features
            && self.events == other.events
            && self.n_priors == other.n_priors
            && self.model == other.model
            && self.trained_on == other.trained_on
            && self.scores == other.scores
            && self.ranking == other.ranking
            && self.presented == other.presented
            && self.rng_cursor == other.rng_cursor
    }
}

fn check_priors(n: usize, included: &[usize], excluded: &[usize]) -> Result<(BTreeSet<usize>, BTreeSet<usize>), EngineError> {
    let inc: BTreeSet<usize> = included.iter().copied().collect();
    let exc: BTreeSet<usize> = excluded.iter().copied().collect();
    if inc.is_empty() {
        return Err(EngineError::NoPriorIncluded);
    }
    if exc.is_empty() {
        return Err(EngineError::NoPriorExcluded);
    }
    if let Some(&bad) = inc.iter().chain(&exc).find(|&&id| id >= n) {
        return Err(EngineError::UnknownRowId(bad));
    }
    if let Some(&both) = inc.intersection(&exc).next() {
        return Err(EngineError::OverlappingPriors(both));
    }
    Ok((inc, exc))
}

impl ProjectState {
    /// Starts a project: builds the feature matrix, records the priors
    /// (relevant first, each set in ascending id order) and trains model 1.
    pub fn init_project(
        dataset: Arc<Dataset>,
        settings: Settings,
        prior_included: &[usize],
        prior_excluded: &[usize],
    ) -> Result<Self, EngineError> {
        settings.validate()?;
        if dataset.len() < 2 {
            return Err(EngineError::TooFewRecords(dataset.len()));
        }
        let (inc, exc) = check_priors(dataset.len(), prior_included, prior_excluded)?;
        let features = Arc::new(textfeat::build_features(&dataset, &settings.feature)?);
        let mut state = ProjectState::empty(dataset, settings, features);
        let priors = inc
            .iter()
            .map(|&id| (id, Label::Relevant))
            .chain(exc.iter().map(|&id| (id, Label::Irrelevant)));
        for (row_id, label) in priors {
            state.push_event(row_id, label, LabelSource::Prior, 0);
        }
        state.n_priors = state.events.len();
        state.retrain()?;
        Ok(state)
    }

    fn empty(dataset: Arc<Dataset>, settings: Settings, features: Arc<Features>) -> Self {
        let n = dataset.len();
        ProjectState {
            dataset,
            settings,
            features,
            events: Vec::new(),
            labels: vec![None; n],
            n_priors: 0,
            model: None,
            trained_on: 0,
            scores: Vec::new(),
            ranking: Vec::new(),
            presented: None,
            rng_cursor: RngCursor::default(),
            last_training_set: Vec::new(),
            issued: None,
        }
    }

    /// Rebuilds a state from its event log with a single retrain. Equal to the
    /// state reached by the synchronous loop after the same events.
    pub fn replay(dataset: Arc<Dataset>, settings: Settings, events: &[LabelEvent]) -> Result<Self, EngineError> {
        let included: Vec<usize> = events
            .iter()
            .filter(|e| e.source == LabelSource::Prior && e.label.is_relevant())
            .map(|e| e.row_id)
            .collect();
        let excluded: Vec<usize> = events
            .iter()
            .filter(|e| e.source == LabelSource::Prior && !e.label.is_relevant())
            .map(|e| e.row_id)
            .collect();
        settings.validate()?;
        if dataset.len() < 2 {
            return Err(EngineError::TooFewRecords(dataset.len()));
        }
        check_priors(dataset.len(), &included, &excluded)?;
        let features = Arc::new(textfeat::build_features(&dataset, &settings.feature)?);
        let mut state = ProjectState::empty(dataset, settings, features);
        state.restore_events(events)?;
        state.retrain()?;
        Ok(state)
    }

    /// Appends events verbatim, checking the log's structural invariants.
    fn restore_events(&mut self, events: &[LabelEvent]) -> Result<(), EngineError> {
        let mut in_priors = true;
        for (i, e) in events.iter().enumerate() {
            let path = format!("events[{i}]");
            if e.order != i {
                return Err(EngineError::corrupt(path, "order is not dense"));
            }
            if e.row_id >= self.labels.len() {
                return Err(EngineError::corrupt(path, format!("unknown record {}", e.row_id)));
            }
            if self.labels[e.row_id].is_some() {
                return Err(EngineError::corrupt(path, format!("record {} labeled twice", e.row_id)));
            }
            match (e.source == LabelSource::Prior, in_priors) {
                (true, false) => return Err(EngineError::corrupt(path, "prior after screening started")),
                (false, true) => in_priors = false,
                _ => {}
            }
            self.push_event(e.row_id, e.label, e.source, e.model_version);
            if in_priors {
                self.n_priors = self.events.len();
            }
        }
        if self.n_priors < 2 {
            return Err(EngineError::corrupt("events", "log does not start with priors of both classes"));
        }
        Ok(())
    }

    fn push_event(&mut self, row_id: usize, label: Label, source: LabelSource, model_version: u64) -> LabelEvent {
        let event = LabelEvent {
            order: self.events.len(),
            row_id,
            label,
            source,
            model_version,
        };
        self.labels[row_id] = Some(label);
        self.events.push(event);
        event
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn features(&self) -> &Arc<Features> {
        &self.features
    }

    pub fn events(&self) -> &[LabelEvent] {
        &self.events
    }

    pub fn n_priors(&self) -> usize {
        self.n_priors
    }

    pub fn label_of(&self, row_id: usize) -> Option<Label> {
        self.labels.get(row_id).copied().flatten()
    }

    pub fn labeled_mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn model(&self) -> Option<&Arc<Model>> {
        self.model.as_ref()
    }

    pub fn model_version(&self) -> u64 {
        self.model.as_ref().map_or(0, |m| m.model_version)
    }

    /// Number of events the current model was trained on.
    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    /// True when events arrived after the current model was trained.
    pub fn needs_retrain(&self) -> bool {
        self.model.is_none() || self.trained_on < self.events.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Unlabeled records by descending score, as of the latest completed model.
    /// Records labeled after that model was trained are filtered out.
    pub fn ranking(&self) -> Vec<usize> {
        self.ranking.iter().copied().filter(|&id| self.labels[id].is_none()).collect()
    }

    pub fn presented(&self) -> Option<Presented> {
        self.presented
    }

    pub fn rng_cursor(&self) -> RngCursor {
        self.rng_cursor
    }

    /// Training multiset (row ids) used by the most recent retrain.
    pub fn last_training_set(&self) -> &[usize] {
        &self.last_training_set
    }

    pub fn is_stopped(&self) -> bool {
        let screened = &self.events[self.n_priors..];
        match self.settings.stopping {
            StopSpec::None => false,
            StopSpec::MaxScreened(k) => self.events.len() >= k,
            StopSpec::ConsecutiveIrrelevant(k) => {
                screened.len() >= k && screened[screened.len() - k..].iter().all(|e| !e.label.is_relevant())
            }
        }
    }

    pub fn progress(&self) -> Progress {
        let n_relevant = self.events.iter().filter(|e| e.label.is_relevant()).count();
        Progress {
            n_labeled: self.events.len(),
            n_relevant,
            n_irrelevant: self.events.len() - n_relevant,
            n_total: self.dataset.len(),
            recall_proxy: self
                .events
                .chunks(10)
                .map(|w| w.iter().filter(|e| e.label.is_relevant()).count())
                .collect(),
            last_model_version: self.model_version(),
        }
    }

    /// The record to screen next. Served from the latest completed model, so
    /// it never waits for a retrain in flight.
    pub fn next_record(&mut self) -> Result<Presented, EngineError> {
        if self.n_unlabeled() == 0 {
            return Err(EngineError::PoolExhausted);
        }
        if self.is_stopped() {
            return Err(EngineError::Stopped);
        }
        if let Some(p) = self.presented.filter(|p| self.labels[p.row_id].is_none()) {
            self.issued = Some(p);
            return Ok(p);
        }
        // The proposal was consumed and the next model is not ready yet.
        let row_id = self.ranking().first().copied().ok_or(EngineError::PoolExhausted)?;
        let p = Presented {
            row_id,
            source: LabelSource::Model,
            model_version: self.model_version(),
        };
        self.presented = Some(p);
        self.issued = Some(p);
        Ok(p)
    }

    /// Appends a label without retraining. Labeling the presented record keeps
    /// its proposal stamp; any other unlabeled record is recorded as searched.
    pub fn submit_label(&mut self, row_id: usize, label: Label) -> Result<LabelEvent, EngineError> {
        match self.labels.get(row_id) {
            None => return Err(EngineError::UnknownRowId(row_id)),
            Some(Some(_)) => return Err(EngineError::AlreadyLabeled(row_id)),
            Some(None) => {}
        }
        let stamp = [self.presented, self.issued].into_iter().flatten().find(|p| p.row_id == row_id);
        let (source, version) = match stamp {
            Some(p) => (p.source, p.model_version),
            None => (LabelSource::Searched, self.model_version()),
        };
        if self.presented.is_some_and(|p| p.row_id == row_id) {
            self.presented = None;
        }
        if self.issued.is_some_and(|p| p.row_id == row_id) {
            self.issued = None;
        }
        Ok(self.push_event(row_id, label, source, version))
    }

    /// Synchronous mode: label, then retrain before returning.
    pub fn submit_label_sync(&mut self, row_id: usize, label: Label) -> Result<LabelEvent, EngineError> {
        let event = self.submit_label(row_id, label)?;
        self.retrain()?;
        Ok(event)
    }

    pub fn training_job(&self) -> TrainingJob {
        TrainingJob {
            features: Arc::clone(&self.features),
            settings: self.settings.clone(),
            n_priors: self.n_priors,
            labeled: self.events.iter().map(|e| (e.row_id, e.label)).collect(),
        }
    }

    /// Installs a finished retrain unless a model trained on at least as many
    /// events is already in place. Returns whether the outcome was used.
    pub fn install(&mut self, outcome: TrainingOutcome) -> bool {
        if self.model.is_some() && outcome.prefix_len <= self.trained_on {
            return false;
        }
        let TrainingOutcome {
            prefix_len,
            model,
            scores,
            training_set,
            mut rng,
        } = outcome;
        let mask = self.labeled_mask();
        let version = model.model_version;
        self.ranking = strategy::rank_pool(&scores, &mask);
        self.presented = match strategy::select_next(&scores, &mask, &self.settings.query, &mut rng) {
            Ok(sel) => Some(Presented {
                row_id: sel.row_id,
                source: if sel.random { LabelSource::Random } else { LabelSource::Model },
                model_version: version,
            }),
            Err(_) => None,
        };
        self.rng_cursor = rng.cursor();
        self.scores = scores;
        self.model = Some(Arc::new(model));
        self.trained_on = prefix_len;
        self.last_training_set = training_set;
        true
    }

    /// balance → fit → score → rank on the full event log.
    pub fn retrain(&mut self) -> Result<(), EngineError> {
        let outcome = self.training_job().run()?;
        self.install(outcome);
        Ok(())
    }

    /// `k` distinct unlabeled records drawn uniformly, for picking irrelevant priors.
    pub fn suggest_random_excluded(&self, k: usize, rng: &mut ProjectRng) -> Result<Vec<usize>, EngineError> {
        suggest_random_excluded(&self.labeled_mask(), k, rng)
    }
}

/// Draws `k` distinct unlabeled row ids uniformly at random. Under extreme
/// class imbalance these are almost always irrelevant.
pub fn suggest_random_excluded(labeled: &[bool], k: usize, rng: &mut ProjectRng) -> Result<Vec<usize>, EngineError> {
    let pool: Vec<usize> = (0..labeled.len()).filter(|&i| !labeled[i]).collect();
    if k > pool.len() {
        return Err(EngineError::PoolExhausted);
    }
    Ok(rand::seq::index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// The suggestion stream of a project seed.
pub fn suggestion_rng(seed: u64) -> ProjectRng {
    ProjectRng::new(seed, SUGGESTION_STREAM)
}
