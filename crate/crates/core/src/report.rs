//! CSV export of solutions and resonance data.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::api::{ResonanceResponse, SolveResponse};
use crate::error::Result;

#[derive(Serialize)]
struct SolutionRow {
    tau: f64,
    re: f64,
    im: f64,
}

/// Writes `<stem>_edge<k>.csv` (1-based `k`) with columns `tau,re,im`
/// into `dir`; returns the paths written.
pub fn write_solution_csv(sol: &SolveResponse, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (k, edge) in sol.edges.iter().enumerate() {
        let path = dir.join(format!("{stem}_edge{}.csv", k + 1));
        let mut w = csv::Writer::from_path(&path)?;
        for (&tau, y) in edge.tau.iter().zip(&edge.values) {
            w.serialize(SolutionRow { tau, re: y.re, im: y.im })?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Serialize)]
struct LRow {
    edge: usize,
    column: usize,
    re: f64,
    im: f64,
}

/// `edge,column,re,im` entries of `L` (1-based indices).
pub fn write_resonance_csv(res: &ResonanceResponse, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for j in 0..res.l.ncols() {
        for k in 0..res.l.nrows() {
            let z = res.l[(k, j)];
            w.serialize(LRow {
                edge: k + 1,
                column: j + 1,
                re: z.re,
                im: z.im,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::{resonance, ResonanceRequest};
    use crate::potentials::ShortRangeSpec;

    #[test]
    fn resonance_csv_has_one_row_per_entry() {
        let res = resonance(&ResonanceRequest {
            short_range: ShortRangeSpec::zero(3),
            options: Default::default(),
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        write_resonance_csv(&res, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "edge,column,re,im");
        assert_eq!(lines.len(), 4);
    }
}
