use std::fmt;

use serde::Serialize;

use super::{QualityClass, QualityError};

/// 5x5 confusion matrix, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub matrix: [[u32; 5]; 5],
    pub truth_counts: [u32; 5],
    pub predicted_counts: [u32; 5],
    pub total: u32,
    pub correct: u32,
    pub accuracy: f64,
}

impl ConfusionReport {
    pub fn cell(&self, truth: QualityClass, predicted: QualityClass) -> u32 {
        self.matrix[truth.index()][predicted.index()]
    }

    pub fn off_diagonal(&self) -> u32 {
        self.total - self.correct
    }

    /// Per-class recall, `None` for classes absent from the truth.
    pub fn class_accuracy(&self, class: QualityClass) -> Option<f64> {
        let n = self.truth_counts[class.index()];
        (n > 0).then(|| f64::from(self.matrix[class.index()][class.index()]) / f64::from(n))
    }
}

pub fn quality_report(
    predicted: &[QualityClass],
    truth: &[QualityClass],
) -> Result<ConfusionReport, QualityError> {
    if predicted.len() != truth.len() {
        return Err(QualityError::LengthMismatch {
            labels: predicted.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(QualityError::Empty);
    }
    let mut matrix = [[0u32; 5]; 5];
    for (p, t) in predicted.iter().zip(truth) {
        matrix[t.index()][p.index()] += 1;
    }
    let truth_counts = matrix.map(|row| row.iter().sum());
    let mut predicted_counts = [0u32; 5];
    for row in &matrix {
        for (c, v) in predicted_counts.iter_mut().zip(row) {
            *c += v;
        }
    }
    let correct = (0..5).map(|i| matrix[i][i]).sum();
    let total = truth.len() as u32;
    Ok(ConfusionReport {
        matrix,
        truth_counts,
        predicted_counts,
        total,
        correct,
        accuracy: f64::from(correct) / f64::from(total),
    })
}

impl fmt::Display for ConfusionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "truth \\ pred")?;
        for c in QualityClass::ALL {
            write!(f, "{:>14}", c.as_str())?;
        }
        writeln!(f, "{:>8}", "n")?;
        for t in QualityClass::ALL {
            write!(f, "{:<14}", t.as_str())?;
            for p in QualityClass::ALL {
                write!(f, "{:>14}", self.cell(t, p))?;
            }
            writeln!(f, "{:>8}", self.truth_counts[t.index()])?;
        }
        write!(
            f,
            "accuracy {}/{} = {:.4}",
            self.correct, self.total, self.accuracy
        )
    }
}
