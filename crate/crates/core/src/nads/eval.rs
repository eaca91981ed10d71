//! Confusion matrix and precision/recall. Abnormal is the positive class.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::metrics::Truth;
use super::NadsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Absent when nothing was predicted abnormal.
    pub precision: Option<f64>,
    /// Absent when nothing was truly abnormal.
    pub recall: Option<f64>,
}

pub const REPORT_HEADER: &str = "tp,fp,tn,fn,precision,recall";

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> EvalReport {
        EvalReport { tp, fp, tn, fn_, precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_) }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Data row matching [`REPORT_HEADER`]; absent ratios are empty.
    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.tp, self.fp, self.tn, self.fn_, f(self.precision), f(self.recall))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        writeln!(w, "{}", self.csv_row())
    }
}

pub fn evaluate(predictions: &[Truth], truth: &[Truth]) -> Result<EvalReport, NadsError> {
    if predictions.len() != truth.len() {
        return Err(NadsError::LengthMismatch(predictions.len(), truth.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_abnormal(), t.is_abnormal()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Truth::*;

    fn expand(tp: usize, fp: usize, tn: usize, fn_: usize) -> (Vec<Truth>, Vec<Truth>) {
        let mut p = Vec::new();
        let mut t = Vec::new();
        for (n, pv, tv) in [(tp, Abnormal, Abnormal), (fp, Abnormal, Benign), (tn, Benign, Benign), (fn_, Benign, Abnormal)] {
            p.extend(std::iter::repeat(pv).take(n));
            t.extend(std::iter::repeat(tv).take(n));
        }
        (p, t)
    }

    #[test]
    fn reference_rows() {
        let (p, t) = expand(55, 6, 47, 0);
        let r = evaluate(&p, &t).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (55, 6, 47, 0));
        assert_eq!(format!("{:.2}", r.precision.unwrap()), "0.90");
        assert_eq!(r.recall, Some(1.0));

        let (p, t) = expand(20, 8, 45, 35);
        let r = evaluate(&p, &t).unwrap();
        assert_eq!(format!("{:.2}", r.precision.unwrap()), "0.71");
        assert_eq!(format!("{:.2}", r.recall.unwrap()), "0.36");
    }

    #[test]
    fn undefined_ratios_are_absent() {
        let r = evaluate(&[Benign, Benign], &[Benign, Benign]).unwrap();
        assert_eq!(r.tn, 2);
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, None);
        assert_eq!(r.csv_row(), "0,0,2,0,,");
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(evaluate(&[Benign], &[]), Err(NadsError::LengthMismatch(1, 0)));
    }
}
