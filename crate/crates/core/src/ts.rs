//! Sample covariance of multichannel time series, and the manifest loader
//! that turns a directory of run files into a labeled covariance set.
//!
//! A run is an `m × n` matrix: `m` time steps (rows) of `n` channels. Its
//! descriptor is the sample covariance `X̃ᵀX̃ / (m−1)` with `X̃` the
//! column-centered data. Column means and entry products are summed in
//! sorted value order, which costs a sort per entry but buys an exact
//! invariant: permuting the rows of the input reproduces the covariance
//! bit for bit, not merely approximately.
//!
//! Rank-deficient covariances (fewer steps than channels, constant
//! channels) are repaired by flooring the spectrum when
//! [`CovOptions::repair`] is set; the flag in the result records whether
//! that happened.

use crate::error::{Error, Result};
use crate::io::{read_manifest, read_matrix_csv};
use crate::spd::{SpdMatrix, SymMatrix, DEFAULT_FLOOR_RATIO};
use nalgebra::DMatrix;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct CovOptions {
    /// Subtract column means first.
    pub center: bool,
    /// Floor a non-positive spectrum instead of failing.
    pub repair: bool,
    pub floor_ratio: f64,
}

impl Default for CovOptions {
    fn default() -> Self {
        CovOptions {
            center: true,
            repair: true,
            floor_ratio: DEFAULT_FLOOR_RATIO,
        }
    }
}

fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let mut acc = 0.0;
    for v in values {
        acc += *v;
    }
    acc
}

/// Sample covariance of one run. The boolean reports whether the spectrum
/// had to be repaired.
pub fn run_covariance(data: &DMatrix<f64>, opts: &CovOptions) -> Result<(SpdMatrix, bool)> {
    let m = data.nrows();
    let n = data.ncols();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance needs at least 2 time steps, found {m}"
        )));
    }
    for r in 0..m {
        for c in 0..n {
            if !data[(r, c)].is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("time series entry ({r}, {c})"),
                });
            }
        }
    }

    let mut centered = data.clone();
    if opts.center {
        let mut column = vec![0.0; m];
        for j in 0..n {
            for t in 0..m {
                column[t] = data[(t, j)];
            }
            let mean = sorted_sum(&mut column) / m as f64;
            for t in 0..m {
                centered[(t, j)] -= mean;
            }
        }
    }

    let mut cov = DMatrix::zeros(n, n);
    let mut products = vec![0.0; m];
    for j in 0..n {
        for k in j..n {
            for t in 0..m {
                products[t] = centered[(t, j)] * centered[(t, k)];
            }
            let v = sorted_sum(&mut products) / (m - 1) as f64;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }

    SpdMatrix::from_sym_report(
        SymMatrix::from_symmetric_unchecked(cov),
        opts.repair,
        opts.floor_ratio,
    )
}

/// One loaded run: its manifest id, class label, and raw data.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub id: String,
    pub label: u32,
    pub data: DMatrix<f64>,
}

/// Load every run named by a manifest. Each manifest line is
/// `id,path,label` with the path resolved relative to the manifest's
/// directory; `skip_header` drops the first line of each data file.
pub fn load_runs(manifest: &Path, skip_header: bool) -> Result<Vec<RunRecord>> {
    load_runs_from(manifest, None, skip_header)
}

/// Like [`load_runs`], but resolving relative data paths against an
/// explicit directory instead of the manifest's own.
pub fn load_runs_from(
    manifest: &Path,
    data_dir: Option<&Path>,
    skip_header: bool,
) -> Result<Vec<RunRecord>> {
    let entries = read_manifest(manifest)?;
    let base = data_dir.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new("")));
    let mut runs = Vec::with_capacity(entries.len());
    for e in entries {
        let path = base.join(&e.path);
        let data = read_matrix_csv(&path, skip_header)?;
        runs.push(RunRecord {
            id: e.id,
            label: e.label,
            data,
        });
    }
    Ok(runs)
}

#[derive(Clone, Debug)]
pub struct CovMeta {
    pub id: String,
    pub label: u32,
    pub repaired: bool,
}

/// Covariance descriptors of a run collection, in input order.
#[derive(Clone, Debug)]
pub struct LabeledCovSet {
    pub covs: Vec<SpdMatrix>,
    pub meta: Vec<CovMeta>,
}

impl LabeledCovSet {
    pub fn len(&self) -> usize {
        self.covs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covs.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.meta.iter().map(|m| m.label).collect()
    }

    pub fn repaired_count(&self) -> usize {
        self.meta.iter().filter(|m| m.repaired).count()
    }
}

pub fn build_cov_set(runs: &[RunRecord], opts: &CovOptions) -> Result<LabeledCovSet> {
    if runs.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = runs[0].data.ncols();
    let mut covs = Vec::with_capacity(runs.len());
    let mut meta = Vec::with_capacity(runs.len());
    for run in runs {
        if run.data.ncols() != n {
            return Err(Error::dim(
                format!("{n} channels"),
                format!("{} in run {}", run.data.ncols(), run.id),
            ));
        }
        let (cov, repaired) = run_covariance(&run.data, opts)?;
        covs.push(cov);
        meta.push(CovMeta {
            id: run.id.clone(),
            label: run.label,
            repaired,
        });
    }
    Ok(LabeledCovSet { covs, meta })
}
