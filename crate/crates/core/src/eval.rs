//! Segmentation scoring: confusion matrices, IoU and result tables.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::raster::{LabelMap, ValidMask};

/// The six shared street-scene classes in result-table column order; label id = index.
pub const DEFAULT_CLASSES: [&str; 6] = [
    "roads",
    "buildings",
    "vegetation",
    "sky",
    "pedestrians",
    "cars",
];

pub fn default_classes() -> Vec<String> {
    DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// Ground truth × prediction counts. Rows are ground-truth classes; columns are
/// predicted classes plus a trailing "none" column for ignored predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.is_empty() || classes.len() > 255 {
            return Err(Error::domain(format!(
                "class list must hold 1..=255 entries, got {}",
                classes.len()
            )));
        }
        let c = classes.len();
        Ok(ConfusionMatrix {
            classes,
            counts: vec![0; c * (c + 1)],
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Count for ground truth `gt` predicted as `pred` (`None` = ignored prediction).
    pub fn get(&self, gt: usize, pred: Option<usize>) -> u64 {
        let c = self.num_classes();
        self.counts[gt * (c + 1) + pred.unwrap_or(c)]
    }

    /// Number of scored pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds another matrix over the same class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::domain(
                "cannot merge confusion matrices over different class lists",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Adds every scored pixel of `(pred, gt)` to `cm`.
///
/// A pixel is scored when `mask` (if any) is set and `gt` is not the ignore id.
/// Ignored predictions land in the "none" column and count against the ground-truth class.
/// On error `cm` is left unchanged.
pub fn accumulate(
    pred: &LabelMap,
    gt: &LabelMap,
    mask: Option<&ValidMask>,
    cm: &mut ConfusionMatrix,
) -> Result<()> {
    let dims = (gt.width(), gt.height());
    if (pred.width(), pred.height()) != dims {
        return Err(Error::domain(format!(
            "prediction {}x{} does not match ground truth {}x{}",
            pred.width(),
            pred.height(),
            dims.0,
            dims.1
        )));
    }
    if let Some(m) = mask {
        if (m.width(), m.height()) != dims {
            return Err(Error::domain(format!(
                "mask {}x{} does not match ground truth {}x{}",
                m.width(),
                m.height(),
                dims.0,
                dims.1
            )));
        }
    }
    let c = cm.num_classes();
    let mut local = vec![0u64; cm.counts.len()];
    for (idx, (&g, &p)) in gt.ids().iter().zip(pred.ids()).enumerate() {
        if g != gt.ignore_id() && (g as usize) >= c {
            return Err(Error::domain(format!("undeclared ground-truth id {g}")));
        }
        if p != pred.ignore_id() && (p as usize) >= c {
            return Err(Error::domain(format!("undeclared predicted id {p}")));
        }
        if g == gt.ignore_id() || mask.is_some_and(|m| !m.bits()[idx]) {
            continue;
        }
        let col = if p == pred.ignore_id() { c } else { p as usize };
        local[g as usize * (c + 1) + col] += 1;
    }
    for (a, b) in cm.counts.iter_mut().zip(local) {
        *a += b;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub name: String,
    /// IoU percentage; `None` when the class never appears in prediction or ground truth.
    pub iou: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Per-class and mean IoU in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoUReport {
    pub classes: Vec<ClassScore>,
    /// Mean over every declared class; classes with no union contribute 0.
    pub mean: f64,
}

impl IoUReport {
    pub fn class_iou(&self, name: &str) -> Option<f64> {
        self.classes
            .iter()
            .find(|c| c.name == name)
            .and_then(|c| c.iou)
    }
}

pub fn iou(cm: &ConfusionMatrix) -> IoUReport {
    let c = cm.num_classes();
    let classes: Vec<ClassScore> = (0..c)
        .map(|k| {
            let tp = cm.get(k, Some(k));
            let row: u64 = (0..c).map(|p| cm.get(k, Some(p))).sum::<u64>() + cm.get(k, None);
            let col: u64 = (0..c).map(|g| cm.get(g, Some(k))).sum();
            let (fp, fn_) = (col - tp, row - tp);
            let union = tp + fp + fn_;
            ClassScore {
                name: cm.classes[k].clone(),
                iou: (union > 0).then(|| tp as f64 / union as f64 * 100.0),
                tp,
                fp,
                fn_,
            }
        })
        .collect();
    let mean = classes.iter().map(|s| s.iou.unwrap_or(0.0)).sum::<f64>() / c as f64;
    IoUReport { classes, mean }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    #[default]
    Markdown,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            _ => Err(Error::domain(format!("unknown table format {s:?}"))),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    phi: String,
    phi_radians: f64,
    report: &'a IoUReport,
}

/// Fixed-point hundredths, the precision tables are rendered and compared at.
fn hundredths(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

/// Renders one row per φ with every class column followed by the average.
/// The best value of each column is marked (bold in Markdown, `*` suffix in CSV);
/// ties mark every maximum.
pub fn emit_table(rows: &[(Angle, IoUReport)], format: TableFormat) -> Result<String> {
    let Some((_, first)) = rows.first() else {
        return Err(Error::domain("no reports to tabulate"));
    };
    let names: Vec<&str> = first.classes.iter().map(|c| c.name.as_str()).collect();
    for (phi, r) in rows {
        if !r
            .classes
            .iter()
            .map(|c| c.name.as_str())
            .eq(names.iter().copied())
        {
            return Err(Error::domain(format!(
                "report for {} has a different class list",
                phi.label()
            )));
        }
    }
    if format == TableFormat::Json {
        let json: Vec<JsonRow> = rows
            .iter()
            .map(|(phi, report)| JsonRow {
                phi: phi.label(),
                phi_radians: phi.radians(),
                report,
            })
            .collect();
        return Ok(serde_json::to_string_pretty(&json).expect("serializable report") + "\n");
    }

    let values: Vec<Vec<i64>> = rows
        .iter()
        .map(|(_, r)| {
            r.classes
                .iter()
                .map(|c| hundredths(c.iou.unwrap_or(0.0)))
                .chain(std::iter::once(hundredths(r.mean)))
                .collect()
        })
        .collect();
    let ncols = names.len() + 1;
    let best: Vec<i64> = (0..ncols)
        .map(|k| values.iter().map(|v| v[k]).max().unwrap())
        .collect();
    let render = |v: i64| {
        format!(
            "{}{}.{:02}",
            if v < 0 { "-" } else { "" },
            v.abs() / 100,
            v.abs() % 100
        )
    };

    let mut out = String::new();
    let header: Vec<&str> = names
        .iter()
        .copied()
        .chain(std::iter::once("average"))
        .collect();
    match format {
        TableFormat::Csv => {
            writeln!(out, "phi,{}", header.join(",")).unwrap();
        }
        _ => {
            writeln!(out, "| φ | {} |", header.join(" | ")).unwrap();
            writeln!(out, "|---|{}", "---:|".repeat(ncols)).unwrap();
        }
    }
    for ((phi, _), vals) in rows.iter().zip(&values) {
        let cells: Vec<String> = vals
            .iter()
            .zip(&best)
            .map(|(&v, &b)| match (format, v == b) {
                (TableFormat::Csv, true) => format!("{}*", render(v)),
                (_, true) => format!("**{}**", render(v)),
                _ => render(v),
            })
            .collect();
        match format {
            TableFormat::Csv => writeln!(out, "{},{}", phi.label(), cells.join(",")).unwrap(),
            _ => writeln!(out, "| {} | {} |", phi.label(), cells.join(" | ")).unwrap(),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm6() -> ConfusionMatrix {
        ConfusionMatrix::new(default_classes()).unwrap()
    }

    #[test]
    fn identical_maps_give_diagonal_matrix() {
        let gt = LabelMap::new(3, 2, vec![0, 1, 2, 3, 5, 255]).unwrap();
        let mut cm = cm6();
        accumulate(&gt, &gt, None, &mut cm).unwrap();
        for g in 0..6 {
            for p in 0..6 {
                let expect = u64::from(g == p && g != 4);
                assert_eq!(cm.get(g, Some(p)), expect);
            }
            assert_eq!(cm.get(g, None), 0);
        }
        let r = iou(&cm);
        for c in &r.classes {
            if c.name == "pedestrians" {
                assert_eq!(c.iou, None);
            } else {
                assert_eq!(c.iou, Some(100.0));
            }
        }
        // absent pedestrians still count in the denominator
        assert!((r.mean - 500.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn all_ignore_ground_truth_scores_nothing() {
        let gt = LabelMap::filled(4, 4, 255);
        let pred = LabelMap::filled(4, 4, 2);
        let mut cm = cm6();
        accumulate(&pred, &gt, None, &mut cm).unwrap();
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn ignored_prediction_is_a_miss() {
        let gt = LabelMap::filled(2, 1, 1);
        let pred = LabelMap::new(2, 1, vec![1, 255]).unwrap();
        let mut cm = cm6();
        accumulate(&pred, &gt, None, &mut cm).unwrap();
        assert_eq!(cm.get(1, None), 1);
        assert_eq!(iou(&cm).class_iou("buildings"), Some(50.0));
    }

    #[test]
    fn mask_restricts_scoring() {
        let gt = LabelMap::filled(2, 2, 0);
        let pred = LabelMap::new(2, 2, vec![0, 1, 1, 1]).unwrap();
        let mask = ValidMask::from_bits(2, 2, vec![true, false, false, false]).unwrap();
        let mut cm = cm6();
        accumulate(&pred, &gt, Some(&mask), &mut cm).unwrap();
        assert_eq!(cm.total(), 1);
        assert_eq!(iou(&cm).class_iou("roads"), Some(100.0));
    }

    #[test]
    fn errors_leave_matrix_untouched() {
        let mut cm = cm6();
        let gt = LabelMap::filled(2, 2, 0);
        assert!(accumulate(&LabelMap::filled(3, 2, 0), &gt, None, &mut cm)
            .unwrap_err()
            .is_domain());
        let bad = LabelMap::new(2, 2, vec![0, 0, 0, 9]).unwrap();
        assert!(accumulate(&bad, &gt, None, &mut cm).is_err());
        assert!(accumulate(&gt, &bad, None, &mut cm).is_err());
        let m = ValidMask::filled(1, 1, true);
        assert!(accumulate(&gt, &gt, Some(&m), &mut cm).is_err());
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn fifty_percent_iou() {
        // TP=50, FP=25, FN=25 on class 0
        let mut ids_gt = vec![0u8; 75];
        ids_gt.extend(vec![1u8; 25]);
        let mut ids_pred = vec![0u8; 50];
        ids_pred.extend(vec![1u8; 25]);
        ids_pred.extend(vec![0u8; 25]);
        let gt = LabelMap::new(100, 1, ids_gt).unwrap();
        let pred = LabelMap::new(100, 1, ids_pred).unwrap();
        let mut cm = cm6();
        accumulate(&pred, &gt, None, &mut cm).unwrap();
        let r = iou(&cm);
        assert_eq!(r.classes[0].tp, 50);
        assert_eq!(r.classes[0].fp, 25);
        assert_eq!(r.classes[0].fn_, 25);
        assert_eq!(r.class_iou("roads"), Some(50.0));
    }

    fn report(vals: [f64; 6]) -> IoUReport {
        let classes = DEFAULT_CLASSES
            .iter()
            .zip(vals)
            .map(|(n, v)| ClassScore {
                name: n.to_string(),
                iou: Some(v),
                tp: 0,
                fp: 0,
                fn_: 0,
            })
            .collect();
        IoUReport {
            classes,
            mean: vals.iter().sum::<f64>() / 6.0,
        }
    }

    #[test]
    fn table_header_and_marks() {
        let rows = vec![(
            Angle::pi_fraction(6, 16),
            report([39.36, 51.5, 58.28, 41.08, 0.0, 12.36]),
        )];
        let md = emit_table(&rows, TableFormat::Markdown).unwrap();
        let first = md.lines().next().unwrap();
        assert_eq!(
            first,
            "| φ | roads | buildings | vegetation | sky | pedestrians | cars | average |"
        );
        assert!(md.contains("| 6π/16 | **39.36** | **51.50**"));
        let csv = emit_table(&rows, TableFormat::Csv).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "phi,roads,buildings,vegetation,sky,pedestrians,cars,average"
        );
        assert!(emit_table(&[], TableFormat::Csv).is_err());
    }

    #[test]
    fn ties_mark_every_maximum() {
        // averages: (10+20+30+40+0+5)/6 = 17.50, (10+10+30+41+0+6)/6 = 16.17
        let rows = vec![
            (
                Angle::pi_fraction(1, 16),
                report([10.0, 20.0, 30.0, 40.0, 0.0, 5.0]),
            ),
            (
                Angle::pi_fraction(2, 16),
                report([10.0, 10.0, 30.0, 41.0, 0.0, 6.0]),
            ),
        ];
        let csv = emit_table(&rows, TableFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[1],
            "1π/16,10.00*,20.00*,30.00*,40.00,0.00*,5.00,17.50*"
        );
        assert_eq!(
            lines[2],
            "2π/16,10.00*,10.00,30.00*,41.00*,0.00*,6.00*,16.17"
        );
    }

    #[test]
    fn csv_parse_back_reproduces_two_decimals() {
        let rows: Vec<(Angle, IoUReport)> = (1..=8)
            .map(|k| {
                let base = k as f64 * 3.137;
                (
                    Angle::pi_fraction(k, 16),
                    report([base, base * 1.3, 50.0 - base, 12.345, 0.0, base / 7.0]),
                )
            })
            .collect();
        let csv = emit_table(&rows, TableFormat::Csv).unwrap();
        for (line, (_, r)) in csv.lines().skip(1).zip(&rows) {
            let parsed: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|cell| cell.trim_end_matches('*').parse().unwrap())
                .collect();
            let expect: Vec<f64> = r
                .classes
                .iter()
                .map(|c| c.iou.unwrap())
                .chain([r.mean])
                .map(|v| (v * 100.0).round() / 100.0)
                .collect();
            assert_eq!(parsed, expect);
        }
    }

    #[test]
    fn json_table_keeps_full_precision() {
        let rows = vec![(
            Angle::pi_fraction(6, 16),
            report([1.0 / 3.0, 2.0, 3.0, 4.0, 0.0, 6.0]),
        )];
        let json = emit_table(&rows, TableFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let back: IoUReport = serde_json::from_value(v[0]["report"].clone()).unwrap();
        assert_eq!(back, rows[0].1);
        assert_eq!(v[0]["phi"], "6π/16");
    }
}
