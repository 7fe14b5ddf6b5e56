//! Accuracy and confusion counts with High as the positive class.

use crate::compose::{CompositeFeature, ViewSet};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::svm::SvmModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::High, Label::High) => self.tp += 1,
            (Label::High, Label::Low) => self.fp += 1,
            (Label::Low, Label::Low) => self.tn += 1,
            (Label::Low, Label::High) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Confusion,
    pub n_test: usize,
    pub view_set: ViewSet,
    pub converged: bool,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, view_set: ViewSet, converged: bool) -> Result<Self> {
        let n_test = confusion.total();
        if n_test == 0 {
            return Err(Error::InvalidParameter("evaluation needs at least one test sample".into()));
        }
        Ok(Self { accuracy: confusion.correct() as f64 / n_test as f64, confusion, n_test, view_set, converged })
    }
}

pub fn evaluate(model: &SvmModel, test: &[(CompositeFeature, Label)]) -> Result<EvalReport> {
    let Some((first, _)) = test.first() else {
        return Err(Error::InvalidParameter("evaluation needs at least one test sample".into()));
    };
    let mut confusion = Confusion::default();
    for (x, actual) in test {
        confusion.record(model.predict(x)?, *actual);
    }
    EvalReport::from_confusion(confusion, first.view_set(), model.converged())
}
