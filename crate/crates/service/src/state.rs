use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use uqsched_core::{
    analyze, Analysis, AnalysisConfig, GroupComparison, PredictorConfig, PredictorSet, Result, Snapshot,
};

/// One consistent view: a snapshot, its analysis and the predictors in use.
#[derive(Debug, Clone)]
pub struct ServiceState {
    pub snapshot: Snapshot,
    pub analysis: Analysis,
    pub predictors: PredictorSet,
    /// Configuration for the next training run.
    pub predictor_config: PredictorConfig,
    /// Comparison table from the training run that produced `predictors`.
    pub comparison: Option<Vec<GroupComparison>>,
}

impl ServiceState {
    pub fn new(
        snapshot: Snapshot,
        analysis_config: &AnalysisConfig,
        predictors: PredictorSet,
        predictor_config: PredictorConfig,
    ) -> Result<Self> {
        predictor_config.validate()?;
        let analysis = analyze(&snapshot, analysis_config)?;
        Ok(ServiceState {
            snapshot,
            analysis,
            predictors,
            predictor_config,
            comparison: None,
        })
    }
}

/// Shared handle given to every handler.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    current: RwLock<Arc<ServiceState>>,
    training: AtomicBool,
}

/// Held while a training job runs; releases the slot on drop.
pub struct TrainingGuard {
    inner: Arc<Inner>,
}

impl Drop for TrainingGuard {
    fn drop(&mut self) {
        self.inner.training.store(false, Ordering::Release);
    }
}

impl AppState {
    pub fn new(state: ServiceState) -> Self {
        AppState {
            inner: Arc::new(Inner {
                current: RwLock::new(Arc::new(state)),
                training: AtomicBool::new(false),
            }),
        }
    }

    pub fn current(&self) -> Arc<ServiceState> {
        self.inner
            .current
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn swap(&self, next: ServiceState) -> Arc<ServiceState> {
        let mut slot = self.inner.current.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *slot, Arc::new(next))
    }

    /// `None` if a training job already holds the slot.
    pub fn try_begin_training(&self) -> Option<TrainingGuard> {
        self.inner
            .training
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| TrainingGuard {
                inner: self.inner.clone(),
            })
    }

    pub fn is_training(&self) -> bool {
        self.inner.training.load(Ordering::Acquire)
    }
}
