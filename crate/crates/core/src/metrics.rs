//! Confusion matrices and the precision / recall / F1 report.
//!
//! Rates are generic over [`Rate`], so the same code runs in floating point
//! for reporting and in exact rational arithmetic for identity checks.

use std::fmt::Debug;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use num_traits::Num;

use crate::error::{Error, Result};

/// A number type in which rates are computed.
pub trait Rate: Num + Clone + PartialOrd + Debug {
    fn from_count(n: u64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Rate for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Rate for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Rate for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits i64"))
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Rate for Ratio<i128> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// `num / den`, with `0/0 → 0`.
fn ratio<R: Rate>(num: R, den: R) -> R {
    if den == R::zero() {
        R::zero()
    } else {
        num / den
    }
}

/// `K×K` counts; entry `[i][j]` is items of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        Self {
            class_names,
            counts: vec![0; k * k],
        }
    }

    pub fn from_counts(class_names: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let k = class_names.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!(
                "confusion matrix for {k} classes needs {k}x{k} counts"
            )));
        }
        Ok(Self {
            class_names,
            counts: rows.concat(),
        })
    }

    /// Matrix with placeholder class names `0..k`.
    pub fn unnamed(rows: &[Vec<u64>]) -> Result<Self> {
        Self::from_counts((0..rows.len()).map(|i| i.to_string()).collect(), rows)
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes() + pred]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes().max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.classes()).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.classes()).map(|i| self.get(i, j)).sum()
    }

    /// Adds one count per `(truth, pred)` pair.
    pub fn accumulate(&mut self, truth: &[usize], pred: &[usize]) -> Result<()> {
        if truth.len() != pred.len() {
            return Err(Error::Dimension(format!(
                "{} true labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let k = self.classes();
        if let Some(&bad) = truth.iter().chain(pred).find(|&&l| l >= k) {
            return Err(Error::Index(format!("label {bad} out of range for {k} classes")));
        }
        for (&t, &p) in truth.iter().zip(pred) {
            self.counts[t * k + p] += 1;
        }
        Ok(())
    }

    /// Elementwise sum of two matrices over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::Consistency(
                "cannot merge confusion matrices over different classes".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn accuracy<R: Rate>(&self) -> R {
        ratio(R::from_count(self.trace()), R::from_count(self.total()))
    }

    /// Per-class precision, recall, F1 and support.
    pub fn class_report<R: Rate>(&self) -> Vec<ClassMetrics<R>> {
        (0..self.classes())
            .map(|j| {
                let tp = R::from_count(self.get(j, j));
                let support = self.row_sum(j);
                ClassMetrics::from_rates(
                    ratio(tp.clone(), R::from_count(self.col_sum(j))),
                    ratio(tp, R::from_count(support)),
                    support,
                )
            })
            .collect()
    }

    pub fn report<R: Rate>(&self) -> Result<MetricsReport<R>> {
        let per_class = self.class_report::<R>();
        let aggregate = aggregate_report(&per_class)?;
        Ok(MetricsReport {
            class_names: self.class_names.clone(),
            per_class,
            aggregate,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics<R> {
    pub precision: R,
    pub recall: R,
    pub f1: R,
    pub support: u64,
}

impl<R: Rate> ClassMetrics<R> {
    /// Fills in `F1 = 2PR / (P + R)` (zero when both rates are zero).
    pub fn from_rates(precision: R, recall: R, support: u64) -> Self {
        let two = R::one() + R::one();
        let f1 = ratio(
            two * precision.clone() * recall.clone(),
            precision.clone() + recall.clone(),
        );
        Self {
            precision,
            recall,
            f1,
            support,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Averages<R> {
    pub precision: R,
    pub recall: R,
    pub f1: R,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate<R> {
    /// Weighted recall, i.e. trace / total for a matrix-derived report.
    pub accuracy: R,
    pub macro_avg: Averages<R>,
    pub weighted: Averages<R>,
    pub total_support: u64,
}

/// Macro (unweighted) and support-weighted means of the per-class rows.
pub fn aggregate_report<R: Rate>(rows: &[ClassMetrics<R>]) -> Result<Aggregate<R>> {
    if rows.is_empty() {
        return Err(Error::Config("cannot aggregate an empty report".into()));
    }
    let total: u64 = rows.iter().map(|r| r.support).sum();
    if total == 0 {
        return Err(Error::Config("total support is zero".into()));
    }
    let n = R::from_count(rows.len() as u64);
    let total_r = R::from_count(total);
    let mean = |f: &dyn Fn(&ClassMetrics<R>) -> R| -> R {
        rows.iter().fold(R::zero(), |acc, r| acc + f(r)) / n.clone()
    };
    let weighted = |f: &dyn Fn(&ClassMetrics<R>) -> R| -> R {
        rows.iter()
            .fold(R::zero(), |acc, r| acc + R::from_count(r.support) * f(r))
            / total_r.clone()
    };
    let macro_avg = Averages {
        precision: mean(&|r| r.precision.clone()),
        recall: mean(&|r| r.recall.clone()),
        f1: mean(&|r| r.f1.clone()),
    };
    let weighted = Averages {
        precision: weighted(&|r| r.precision.clone()),
        recall: weighted(&|r| r.recall.clone()),
        f1: weighted(&|r| r.f1.clone()),
    };
    Ok(Aggregate {
        accuracy: weighted.recall.clone(),
        macro_avg,
        weighted,
        total_support: total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport<R> {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics<R>>,
    pub aggregate: Aggregate<R>,
}

/// Rounds half away from zero to two decimals, as displayed in reports.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Hundredths after display rounding, for exact comparisons against
/// published two-decimal figures.
pub fn hundredths(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

pub const REPORT_HEADER: &str = "class,precision,recall,f1,support";

impl<R: Rate> MetricsReport<R> {
    /// CSV with 4-decimal rates: per-class rows, then `macro`, `weighted`
    /// and `accuracy,,,,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            out.push_str(&format!(
                "{name},{:.4},{:.4},{:.4},{}\n",
                m.precision.to_f64(),
                m.recall.to_f64(),
                m.f1.to_f64(),
                m.support
            ));
        }
        let agg = &self.aggregate;
        for (label, avg) in [("macro", &agg.macro_avg), ("weighted", &agg.weighted)] {
            out.push_str(&format!(
                "{label},{:.4},{:.4},{:.4},{}\n",
                avg.precision.to_f64(),
                avg.recall.to_f64(),
                avg.f1.to_f64(),
                agg.total_support
            ));
        }
        out.push_str(&format!("accuracy,,,,{:.4}\n", agg.accuracy.to_f64()));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table with rates rounded to two decimals.
    pub fn display_table(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(0);
        let mut out = format!(
            "{:>width$}  {:>9}  {:>6}  {:>8}  {:>7}\n",
            "", "precision", "recall", "f1-score", "support"
        );
        let row = |label: &str, p: f64, r: f64, f: f64, s: u64| {
            format!(
                "{label:>width$}  {:>9.2}  {:>6.2}  {:>8.2}  {s:>7}\n",
                round2(p),
                round2(r),
                round2(f)
            )
        };
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            out.push_str(&row(name, m.precision.to_f64(), m.recall.to_f64(), m.f1.to_f64(), m.support));
        }
        let agg = &self.aggregate;
        out.push('\n');
        out.push_str(&format!(
            "{:>width$}  {:>9}  {:>6}  {:>8.2}  {:>7}\n",
            "accuracy",
            "",
            "",
            round2(agg.accuracy.to_f64()),
            agg.total_support
        ));
        for (label, avg) in [("macro avg", &agg.macro_avg), ("weighted avg", &agg.weighted)] {
            out.push_str(&row(
                label,
                avg.precision.to_f64(),
                avg.recall.to_f64(),
                avg.f1.to_f64(),
                agg.total_support,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Ratio<i64>;

    #[test]
    fn accumulate_examples() {
        let mut m = ConfusionMatrix::unnamed(&[vec![0; 3], vec![0; 3], vec![0; 3]]).unwrap();
        m.accumulate(&[0, 0, 1, 1, 1, 2], &[0, 0, 1, 1, 1, 2]).unwrap();
        assert_eq!(m.rows(), vec![vec![2, 0, 0], vec![0, 3, 0], vec![0, 0, 1]]);

        let mut m = ConfusionMatrix::unnamed(&[vec![0; 2], vec![0; 2]]).unwrap();
        m.accumulate(&[0, 0, 1], &[0, 1, 1]).unwrap();
        assert_eq!(m.rows(), vec![vec![1, 1], vec![0, 1]]);

        assert!(matches!(m.accumulate(&[2], &[0]), Err(Error::Index(_))));
        assert!(matches!(m.accumulate(&[0], &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn halves_equal_whole() {
        let truth = [0, 1, 2, 2, 1, 0, 0, 2];
        let pred = [0, 2, 2, 1, 1, 0, 1, 2];
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        let mut whole = ConfusionMatrix::new(names.clone());
        whole.accumulate(&truth, &pred).unwrap();
        let mut first = ConfusionMatrix::new(names.clone());
        first.accumulate(&truth[..3], &pred[..3]).unwrap();
        let mut second = ConfusionMatrix::new(names);
        second.accumulate(&truth[3..], &pred[3..]).unwrap();
        first.merge(&second).unwrap();
        assert_eq!(first, whole);
    }

    #[test]
    fn class_report_examples() {
        let m = ConfusionMatrix::unnamed(&[vec![5, 1, 0], vec![1, 4, 0], vec![0, 0, 6]]).unwrap();
        let rows = m.class_report::<Q>();
        assert_eq!(rows[0].precision, Q::new(5, 6));
        assert_eq!(rows[0].recall, Q::new(5, 6));
        assert_eq!(rows[2].f1, Q::from_integer(1));
        assert!((rows[0].precision.to_f64() - 0.833).abs() < 1e-3);

        let perfect = ConfusionMatrix::unnamed(&[vec![2, 0], vec![0, 3]]).unwrap();
        for r in perfect.class_report::<f64>() {
            assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn zero_over_zero_is_zero() {
        // class 1 never predicted and never present
        let m = ConfusionMatrix::unnamed(&[vec![3, 0], vec![0, 0]]).unwrap();
        let rows = m.class_report::<f64>();
        assert_eq!((rows[1].precision, rows[1].recall, rows[1].f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn potholes_row_rounds_like_published() {
        let row = ClassMetrics::from_rates(0.96_f64, 0.90, 189);
        assert!((row.f1 - 0.929).abs() < 5e-4);
        assert_eq!(hundredths(row.f1), 93);
    }

    #[test]
    fn equal_supports_make_macro_equal_weighted() {
        let rows = vec![
            ClassMetrics::from_rates(Q::new(1, 3), Q::new(2, 5), 10),
            ClassMetrics::from_rates(Q::new(7, 9), Q::new(1, 2), 10),
        ];
        let agg = aggregate_report(&rows).unwrap();
        assert_eq!(agg.macro_avg, agg.weighted);
        assert!(matches!(aggregate_report::<f64>(&[]), Err(Error::Config(_))));
    }

    #[test]
    fn weighted_recall_is_accuracy_exactly() {
        let m = ConfusionMatrix::unnamed(&[vec![17, 2, 5], vec![3, 11, 0], vec![1, 1, 9]]).unwrap();
        let report = m.report::<Q>().unwrap();
        assert_eq!(report.aggregate.accuracy, m.accuracy::<Q>());
        assert_eq!(report.aggregate.weighted.recall, Q::new(37, 49));
    }

    #[test]
    fn csv_layout() {
        let m = ConfusionMatrix::from_counts(
            vec!["a".into(), "b".into()],
            &[vec![3, 1], vec![0, 4]],
        )
        .unwrap();
        let csv = m.report::<f64>().unwrap().to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "class,precision,recall,f1,support");
        assert_eq!(lines[1], "a,1.0000,0.7500,0.8571,4");
        assert_eq!(lines[2], "b,0.8000,1.0000,0.8889,4");
        assert!(lines[3].starts_with("macro,"));
        assert!(lines[4].starts_with("weighted,"));
        assert_eq!(lines[5], "accuracy,,,,0.8750");
        assert_eq!(lines.len(), 6);
    }
}
