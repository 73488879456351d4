//! Two-stage detector: classify every patch, localize the positive ones.

use super::{dedupe, DetectError, Detection, Detector, DetectorParams};
use crate::data::{patchify, Frame, PATCH};
use crate::exec::Exec;
use crate::geo::GridSpec;
use crate::nn::{Head, Network, NnError};
use crate::time::Timestamp;

#[derive(Debug, Clone)]
pub struct NeuralDetector {
    pub classifier: Network,
    pub localizer: Network,
    pub params: DetectorParams,
    /// Execution mode inside one map; keep sequential when maps themselves
    /// are processed in parallel.
    pub inner: Exec,
}

impl NeuralDetector {
    pub fn new(classifier: Network, localizer: Network, params: DetectorParams) -> Result<Self, DetectError> {
        params.validate()?;
        if classifier.head() != Head::Classification || localizer.head() != Head::Localization {
            return Err(NnError::WrongHead("expected a classification and a localization network".into()).into());
        }
        if classifier.norm != localizer.norm {
            return Err(DetectError::NormMismatch);
        }
        Ok(Self { classifier, localizer, params, inner: Exec::Sequential })
    }

    /// Candidates before duplicate suppression.
    pub fn raw_detections(&self, time: Timestamp, frame: &Frame, spec: &GridSpec) -> Result<Vec<Detection>, DetectError> {
        let patches = patchify(frame, time)?;
        let scores = self.classifier.predict_scores(&patches, self.inner)?;
        let positive: Vec<(usize, f64)> =
            scores.into_iter().enumerate().filter(|(_, s)| *s >= self.params.class_threshold).collect();
        let chosen: Vec<_> = positive.iter().map(|&(i, _)| patches[i].clone()).collect();
        let coords = self.localizer.predict_coords(&chosen, self.inner)?;
        let max = (PATCH - 1) as f64;
        Ok(chosen
            .iter()
            .zip(coords)
            .zip(&positive)
            .map(|((p, (r, c)), &(_, score))| {
                let row = (p.patch_row * PATCH) as f64 + r.clamp(0.0, max);
                let col = (p.patch_col * PATCH) as f64 + c.clamp(0.0, max);
                Detection::new(time, row, col, score, spec)
            })
            .collect())
    }
}

impl Detector for NeuralDetector {
    fn detect_frame(&self, time: Timestamp, frame: &Frame, spec: &GridSpec) -> Result<Vec<Detection>, DetectError> {
        Ok(dedupe(self.raw_detections(time, frame, spec)?, self.params.dedupe_radius_cells))
    }
}
