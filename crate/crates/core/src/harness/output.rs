use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use plotters::prelude::*;
use serde::Serialize;

use super::{HarnessError, Method, ResultRow};
use crate::planner::Heuristic;

/// Writes rows as CSV with a header in field order.
pub fn write_csv(rows: &[ResultRow], w: impl Write) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_path(path)?;
    for r in summary {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Seed-averaged results for one series point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub heuristic: Heuristic,
    pub n_withheld: usize,
    pub fraction: f64,
    pub seeds: usize,
    pub mean_solved_percent: f64,
    pub std_solved_percent: f64,
    pub mean_learn_seconds: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, Heuristic, usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.method, r.heuristic, r.n_withheld, r.fraction.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((method, heuristic, n_withheld, fraction), rs)| {
            let n = rs.len() as f64;
            let mean = rs.iter().map(|r| r.solved_percent).sum::<f64>() / n;
            let var = rs
                .iter()
                .map(|r| (r.solved_percent - mean).powi(2))
                .sum::<f64>()
                / n;
            SummaryRow {
                method,
                heuristic,
                n_withheld,
                fraction: f64::from_bits(fraction),
                seeds: rs.len(),
                mean_solved_percent: mean,
                std_solved_percent: var.sqrt(),
                mean_learn_seconds: rs.iter().map(|r| r.learn_seconds).sum::<f64>() / n,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.method, a.heuristic, a.n_withheld)
            .cmp(&(b.method, b.heuristic, b.n_withheld))
            .then(a.fraction.total_cmp(&b.fraction))
    });
    out
}

/// Solved percent against data fraction, one line per method. Methods
/// that do not learn are drawn flat across the fraction axis.
pub fn plot_learning_curve(
    rows: &[ResultRow],
    title: &str,
    path: &Path,
) -> Result<(), HarnessError> {
    let err = |e: &dyn std::fmt::Display| HarnessError::Plot(e.to_string());
    let summary = summarize(rows);
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0f64..1.0f64, 0.0f64..100.0f64)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("fraction of data")
        .y_desc("% solved")
        .draw()
        .map_err(|e| err(&e))?;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in &summary {
        let label = if s.n_withheld > 0 {
            format!("{} ({} withheld)", s.method, s.n_withheld)
        } else {
            s.method.to_string()
        };
        series
            .entry(label)
            .or_default()
            .push((s.fraction, s.mean_solved_percent));
    }
    let palette = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    for (i, (label, mut points)) in series.into_iter().enumerate() {
        if points.len() == 1 {
            let y = points[0].1;
            points = vec![(0.0, y), (1.0, y)];
        }
        let color = palette[i % palette.len()];
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainId;

    fn row(method: Method, fraction: f64, seed: u64, solved: f64) -> ResultRow {
        ResultRow {
            domain: DomainId::Cover,
            method,
            heuristic: Heuristic::HAdd,
            fraction,
            seed,
            n_withheld: 0,
            solved_percent: solved,
            mean_wall_ms: 1.5,
            mean_nodes: 3.0,
            mean_sampler_calls: 20.0,
            learn_seconds: 0.01,
            n_operators: 3,
            error: String::new(),
        }
    }

    #[test]
    fn one_row_gives_two_lines() {
        let mut buf = Vec::new();
        write_csv(&[row(Method::Loft, 1.0, 0, 100.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "domain,method,heuristic,fraction,seed,n_withheld,solved_percent,mean_wall_ms,mean_nodes,\
             mean_sampler_calls,learn_seconds,n_operators,error"
        );
        assert!(lines[1].starts_with("cover,loft,hadd,1.0,0,0,100.0,"));
    }

    #[test]
    fn csv_is_byte_identical_on_rerun() {
        let rows = vec![
            row(Method::Oracle, 1.0, 0, 100.0),
            row(Method::Loft, 0.5, 1, 40.0),
        ];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&rows, &mut a).unwrap();
        write_csv(&rows, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_averages_over_seeds() {
        let rows = vec![
            row(Method::Loft, 0.5, 0, 40.0),
            row(Method::Loft, 0.5, 1, 60.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_solved_percent, 50.0);
        assert_eq!(s[0].std_solved_percent, 10.0);
    }

    #[test]
    fn plot_has_one_series_per_method() {
        let rows = vec![
            row(Method::Loft, 0.5, 0, 40.0),
            row(Method::Loft, 1.0, 0, 90.0),
            row(Method::Oracle, 1.0, 0, 100.0),
            row(Method::B5, 1.0, 0, 10.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.svg");
        plot_learning_curve(&rows, "cover", &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.matches("<polyline").count() >= 3);
        for m in ["loft", "oracle", "b5"] {
            assert!(svg.contains(m));
        }
    }
}
