//! CSV tables and SVG overhead plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::engine::TrajectorySample;
use super::stats::SweepStats;
use crate::topomap::TopoMap;
use crate::world::{Point, Workspace};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |e| ExportError::Csv { path: path.into(), source: e }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |e| ExportError::Io { path: path.into(), source: e }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trajectory_csv(path: &Path, samples: &[TrajectorySample]) -> Result<(), ExportError> {
    #[derive(Serialize)]
    struct Row<'a> {
        t: f64,
        robot: usize,
        x: f64,
        y: f64,
        theta: f64,
        mode: &'a str,
    }
    let rows: Vec<Row> =
        samples.iter().map(|s| Row { t: s.t, robot: s.robot, x: s.x, y: s.y, theta: s.theta, mode: s.mode }).collect();
    if rows.is_empty() {
        return fs::write(path, "t,robot,x,y,theta,mode\n").map_err(io_err(path));
    }
    write_rows(path, &rows)
}

pub fn write_stats_csv(path: &Path, stats: &[SweepStats]) -> Result<(), ExportError> {
    if stats.is_empty() {
        return fs::write(path, "team_size,min,max,avg,std\n").map_err(io_err(path));
    }
    write_rows(path, stats)
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<SweepStats>, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<Vec<SweepStats>, _>>().map_err(csv_err(path))
}

pub fn write_map_csv(path: &Path, map: &TopoMap) -> Result<(), ExportError> {
    #[derive(Serialize)]
    struct Row {
        a: i64,
        b: i64,
        x: f64,
        y: f64,
        state: &'static str,
    }
    let rows: Vec<Row> = map
        .iter()
        .map(|(c, s)| {
            let p = map.point(c);
            Row { a: c.a, b: c.b, x: p.x, y: p.y, state: s.label() }
        })
        .collect();
    if rows.is_empty() {
        return fs::write(path, "a,b,x,y,state\n").map_err(io_err(path));
    }
    write_rows(path, &rows)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Overhead plot: free space, obstacles, lattice vertices, robot paths and targets.
pub fn render_svg(w: &Workspace, vertices: &[Point], samples: &[TrajectorySample], targets: &[Point]) -> String {
    let (lo, hi) = w.bounds();
    let pad = 1.0;
    let (width, height) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let scale = 800.0 / width.max(height);
    // SVG y grows downward.
    let tx = |p: Point| ((p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale);
    let poly = |pts: &[Point]| {
        pts.iter()
            .map(|&p| {
                let (x, y) = tx(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}">"#,
        width * scale,
        height * scale
    );
    let _ =
        writeln!(s, r##"<polygon points="{}" fill="#ffffff" stroke="#000000" stroke-width="2"/>"##, poly(w.boundary()));
    for o in w.obstacles() {
        let _ = writeln!(s, r##"<polygon points="{}" fill="#808080" stroke="#404040"/>"##, poly(o));
    }
    for &v in vertices {
        let (x, y) = tx(v);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="#bbbbbb"/>"##);
    }
    let robots = samples.iter().map(|t| t.robot + 1).max().unwrap_or(0);
    for r in 0..robots {
        let pts: Vec<Point> = samples.iter().filter(|t| t.robot == r).map(|t| Point::new(t.x, t.y)).collect();
        if pts.len() < 2 {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            poly(&pts),
            PALETTE[r % PALETTE.len()]
        );
    }
    for &t in targets {
        let (x, y) = tx(t);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="#00a000"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), ExportError> {
    fs::write(path, svg).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Workspace {
        Workspace::rectangle(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.3).unwrap()
    }

    #[test]
    fn empty_trajectory_gives_valid_svg() {
        let svg = render_svg(&square(), &[], &[], &[]);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn stats_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.csv");
        write_stats_csv(&p, &[SweepStats { team_size: 1, min: 1.0, max: 2.0, avg: 1.5, std: 0.5 }]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("team_size,min,max,avg,std"));
        write_stats_csv(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "team_size,min,max,avg,std\n");
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_stats_csv(Path::new("/nonexistent/dir/stats.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/stats.csv"));
    }

    #[test]
    fn quoting_follows_rfc4180() {
        #[derive(Serialize)]
        struct Row {
            label: String,
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        write_rows(&p, &[Row { label: "a,\"b\"".into() }]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "label\n\"a,\"\"b\"\"\"\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stats_round_trip_bit_exact(
            rows in proptest::collection::vec((1usize..20, -1e6..1e6f64, 0.0..1e6f64, any::<u64>()), 1..10),
        ) {
            let stats: Vec<SweepStats> = rows
                .iter()
                .map(|&(k, lo, span, bits)| {
                    let frac = (bits >> 11) as f64 / (1u64 << 53) as f64;
                    SweepStats { team_size: k, min: lo, max: lo + span, avg: lo + span * frac, std: span * frac / 3.0 }
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            write_stats_csv(&p, &stats).unwrap();
            let back = read_stats_csv(&p).unwrap();
            prop_assert_eq!(back.len(), stats.len());
            for (a, b) in stats.iter().zip(&back) {
                prop_assert_eq!(a.team_size, b.team_size);
                for (x, y) in [(a.min, b.min), (a.max, b.max), (a.avg, b.avg), (a.std, b.std)] {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
