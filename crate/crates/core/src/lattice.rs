//! Discrete mKdV lattice: `(x_n^t, y_n^t) = F(x_n^{t-1}, y_{n-1}^t)` for
//! `1 ≤ n ≤ N`, `1 ≤ t ≤ T`, with boundary data `x_n^0` on the bottom row and
//! `y_0^t` on the left column.
//!
//! Boundary values at sites with `n + t` even follow the `(X, Y)` laws and
//! those with `n + t` odd the `(U, V)` laws; when `F` carries `X⊗Y` to `U⊗V`
//! this assignment is reproduced on every row, because the two inputs of a
//! cell share a parity and its outputs have the other one.

use crate::balance::{BalanceSpec, PairLaws};
use crate::dist::{LawSampler, MarginalLaw};
use crate::error::{Error, Result};
use crate::maps::{f_dk, MapParams, PositivePair};
use crate::rng;
use crate::stats::{integrated_autocorrelation_time, ks_one_sample, ks_two_sample};
use rand_distr::Distribution;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum Boundary {
    /// Independent draws from the configured marginals.
    Iid,
    /// Values read from a file of `axis,index,value` lines (`x` for the
    /// bottom row `n = 1..N`, `y` for the left column `t = 1..T`).
    Replay(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeConfig {
    pub width: usize,
    pub horizon: usize,
    pub map: MapParams,
    /// Laws at even sites (`n + t` even).
    pub x_marginal: MarginalLaw,
    pub y_marginal: MarginalLaw,
    /// Laws at odd sites; `None` means the same as the even ones (type I).
    pub odd_marginals: Option<(MarginalLaw, MarginalLaw)>,
    pub seed: u64,
    pub boundary: Boundary,
    pub expect_stationary: bool,
}

impl LatticeConfig {
    /// The stationary configuration with `X⊗Y` / `U⊗V` laws of the scalar
    /// `F_dK` balance spec; `c₁ = c₂` gives the type-I product measure.
    pub fn stationary(
        map: MapParams,
        lambda: f64,
        c1: f64,
        c2: f64,
        width: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = BalanceSpec::new(map, c1, c2, lambda, crate::balance::Variant::ScalarFdk)?;
        let (PairLaws::Scalar([x, y]), PairLaws::Scalar([u, v])) =
            (spec.input_laws()?, spec.output_laws()?)
        else {
            unreachable!("scalar variant")
        };
        let odd = (c1 != c2).then_some((u, v));
        let cfg = Self {
            width,
            horizon,
            map,
            x_marginal: x,
            y_marginal: y,
            odd_marginals: odd,
            seed,
            boundary: Boundary::Iid,
            expect_stationary: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.horizon == 0 {
            return Err(Error::domain(
                "lattice width and horizon must be at least 1",
            ));
        }
        self.x_marginal.validate()?;
        self.y_marginal.validate()?;
        if let Some((u, v)) = &self.odd_marginals {
            u.validate()?;
            v.validate()?;
        }
        Ok(())
    }

    /// `(x law, y law)` at a site of the given parity of `n + t`.
    pub fn laws_at(&self, parity: usize) -> (MarginalLaw, MarginalLaw) {
        match (&self.odd_marginals, parity % 2) {
            (Some((u, v)), 1) => (*u, *v),
            _ => (self.x_marginal, self.y_marginal),
        }
    }

    /// The same configuration with both x-marginals rescaled by `k`.
    pub fn with_x_scaled(&self, k: f64) -> Result<Self> {
        let odd = match self.odd_marginals {
            Some((u, v)) => Some((u.scaled(k)?, v)),
            None => None,
        };
        Ok(Self {
            x_marginal: self.x_marginal.scaled(k)?,
            odd_marginals: odd,
            expect_stationary: false,
            ..self.clone()
        })
    }
}

/// Row `t` of the lattice. Frame 0 carries the boundary row `x_n^0` and an
/// independent reference row drawn from the y laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeFrame {
    pub t: usize,
    pub x_row: Vec<f64>,
    pub y_row: Vec<f64>,
}

struct BoundaryData {
    x0: Vec<f64>,
    y_col: Vec<f64>,
    y_ref: Vec<f64>,
}

fn parity_draws(
    cfg: &LatticeConfig,
    len: usize,
    offset: usize,
    stream: u64,
    pick_y: bool,
) -> Result<Vec<f64>> {
    let samplers: Vec<LawSampler> = (0..2)
        .map(|p| {
            let (x, y) = cfg.laws_at(p);
            LawSampler::new(if pick_y { &y } else { &x })
        })
        .collect::<Result<_>>()?;
    let mut g = rng::stream(cfg.seed, stream);
    Ok((1..=len)
        .map(|i| samplers[(i + offset) % 2].sample(&mut g))
        .collect())
}

fn read_replay(path: &PathBuf, width: usize, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut x = vec![f64::NAN; width];
    let mut y = vec![f64::NAN; horizon];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "axis,index,value" {
            continue;
        }
        let err = |column: usize, message: String| Error::Parse {
            line: ln + 1,
            column,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(1, format!("expected axis,index,value, got {line:?}")));
        }
        let idx: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| err(fields[0].len() + 2, format!("bad index: {e}")))?;
        let val: f64 = fields[2].trim().parse().map_err(|e| {
            err(
                fields[0].len() + fields[1].len() + 3,
                format!("bad value: {e}"),
            )
        })?;
        if !(val > 0.0 && val.is_finite()) {
            return Err(err(
                fields[0].len() + fields[1].len() + 3,
                format!("boundary values must be positive, got {val}"),
            ));
        }
        let slot = match fields[0].trim() {
            "x" if (1..=width).contains(&idx) => &mut x[idx - 1],
            "y" if (1..=horizon).contains(&idx) => &mut y[idx - 1],
            other => {
                return Err(err(
                    1,
                    format!("index {idx} out of range for axis {other:?}"),
                ))
            }
        };
        *slot = val;
    }
    if x.iter().chain(&y).any(|v| v.is_nan()) {
        return Err(Error::domain(format!(
            "replay file {} does not cover every boundary site",
            path.display()
        )));
    }
    Ok((x, y))
}

fn boundary(cfg: &LatticeConfig) -> Result<BoundaryData> {
    cfg.validate()?;
    // streams: 0 bottom row, 1 left column, 2 reference y row
    let (x0, y_col) = match &cfg.boundary {
        Boundary::Iid => (
            parity_draws(cfg, cfg.width, 0, 0, false)?,
            parity_draws(cfg, cfg.horizon, 0, 1, true)?,
        ),
        Boundary::Replay(path) => read_replay(path, cfg.width, cfg.horizon)?,
    };
    let y_ref = parity_draws(cfg, cfg.width, 0, 2, true)?;
    Ok(BoundaryData { x0, y_col, y_ref })
}

/// Row-by-row evaluation holding one row in memory.
pub struct Evolution {
    map: MapParams,
    x: Vec<f64>,
    y_col: Vec<f64>,
    y_ref: Option<Vec<f64>>,
    next_t: usize,
    horizon: usize,
}

impl Iterator for Evolution {
    type Item = LatticeFrame;

    fn next(&mut self) -> Option<LatticeFrame> {
        let t = self.next_t;
        if t > self.horizon {
            return None;
        }
        self.next_t += 1;
        if t == 0 {
            return Some(LatticeFrame {
                t,
                x_row: self.x.clone(),
                y_row: self.y_ref.take().unwrap_or_default(),
            });
        }
        let mut y_row = Vec::with_capacity(self.x.len());
        let mut carry = self.y_col[t - 1];
        for xn in self.x.iter_mut() {
            let out = f_dk(self.map, PositivePair::raw(*xn, carry));
            *xn = out.first;
            carry = out.second;
            y_row.push(carry);
        }
        Some(LatticeFrame {
            t,
            x_row: self.x.clone(),
            y_row,
        })
    }
}

/// Frames `t = 0..=T` in order, computed row by row.
pub fn evolve(config: &LatticeConfig) -> Result<Evolution> {
    let b = boundary(config)?;
    Ok(Evolution {
        map: config.map,
        x: b.x0,
        y_col: b.y_col,
        y_ref: Some(b.y_ref),
        next_t: 0,
        horizon: config.horizon,
    })
}

/// The same frames computed by anti-diagonal wavefronts `n + t = d`. Each
/// cell reads the current value of its column (`x`) and of its row (`y`),
/// so cells on one diagonal are independent. Holds the whole lattice.
pub fn evolve_wavefront(config: &LatticeConfig) -> Result<Vec<LatticeFrame>> {
    let b = boundary(config)?;
    let (w, h) = (config.width, config.horizon);
    let mut col_x = b.x0.clone();
    let mut row_y = b.y_col.clone();
    let mut frames: Vec<LatticeFrame> = (1..=h)
        .map(|t| LatticeFrame {
            t,
            x_row: vec![0.0; w],
            y_row: vec![0.0; w],
        })
        .collect();
    for d in 2..=w + h {
        let t_lo = d.saturating_sub(w).max(1);
        let t_hi = (d - 1).min(h);
        for t in t_lo..=t_hi {
            let n = d - t;
            let out = f_dk(config.map, PositivePair::raw(col_x[n - 1], row_y[t - 1]));
            col_x[n - 1] = out.first;
            row_y[t - 1] = out.second;
            frames[t - 1].x_row[n - 1] = out.first;
            frames[t - 1].y_row[n - 1] = out.second;
        }
    }
    let mut all = vec![LatticeFrame {
        t: 0,
        x_row: b.x0,
        y_row: b.y_ref,
    }];
    all.extend(frames);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEntry {
    pub t: usize,
    pub field: String,
    /// `even` or `odd` parity of `n + t`.
    pub parity: String,
    /// Sample stride along the row (rows of `y` are serially dependent).
    pub stride: usize,
    pub size: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// One-sample KS p-value against the law assigned to this parity class.
    pub law_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub schema_version: u32,
    pub config: LatticeConfig,
    pub probe_times: Vec<usize>,
    pub entries: Vec<ProbeEntry>,
    /// Largest relative defect of `x_n^{t-1} y_{n-1}^t = x_n^t y_n^t` seen.
    pub max_product_defect: f64,
    pub min_p_value: f64,
    /// No rejection for a stationary config, at least one for a perturbed one.
    pub pass: bool,
}

/// Sites `n` (1-based) whose `n + t` has the given parity.
fn class_indices(width: usize, t: usize, parity: usize) -> impl Iterator<Item = usize> {
    (0..width).filter(move |i| (i + 1 + t) % 2 == parity)
}

/// Even stride covering `2τ` for the serially dependent `y` row, with `τ`
/// the autocorrelation time of `ln y` standardised within parity classes.
fn y_stride(row: &[f64], t: usize) -> usize {
    let mut z: Vec<f64> = row.iter().map(|v| v.ln()).collect();
    for parity in 0..2 {
        let idx: Vec<usize> = class_indices(row.len(), t, parity).collect();
        if idx.len() < 2 {
            return 2;
        }
        let m = idx.iter().map(|&i| z[i]).sum::<f64>() / idx.len() as f64;
        let sd =
            (idx.iter().map(|&i| (z[i] - m).powi(2)).sum::<f64>() / (idx.len() - 1) as f64).sqrt();
        for &i in &idx {
            z[i] = if sd > 0.0 { (z[i] - m) / sd } else { 0.0 };
        }
    }
    let tau = integrated_autocorrelation_time(&z);
    2 * ((tau).ceil() as usize).max(1)
}

/// Two-sample KS between each probe row and row 0, per field and parity
/// class, plus a one-sample KS of each class against its assigned law.
pub fn stationarity_report(
    config: &LatticeConfig,
    probe_times: &[usize],
    seed: u64,
) -> Result<StationarityReport> {
    let cfg = LatticeConfig {
        seed,
        ..config.clone()
    };
    if let Some(&bad) = probe_times.iter().find(|&&t| t == 0 || t > cfg.horizon) {
        return Err(Error::domain(format!(
            "probe time {bad} outside 1..={}",
            cfg.horizon
        )));
    }
    let mut frames = evolve(&cfg)?;
    let reference = frames.next().expect("frame 0");
    let mut prev_x = reference.x_row.clone();
    let mut defect = 0.0f64;
    let mut entries = Vec::new();
    let b_col = boundary(&cfg)?.y_col;
    for frame in frames {
        // per-cell product conservation
        let mut carry = b_col[frame.t - 1];
        for ((&x0, &x1), &y1) in prev_x.iter().zip(&frame.x_row).zip(&frame.y_row) {
            let before = x0 * carry;
            defect = defect.max(((x1 * y1 - before) / before).abs());
            carry = y1;
        }
        prev_x.clone_from(&frame.x_row);
        if !probe_times.contains(&frame.t) {
            continue;
        }
        for (field, row, ref_row) in [
            ("x", &frame.x_row, &reference.x_row),
            ("y", &frame.y_row, &reference.y_row),
        ] {
            let stride = if field == "y" {
                y_stride(row, frame.t)
            } else {
                1
            };
            for parity in 0..2 {
                let probe: Vec<f64> = class_indices(cfg.width, frame.t, parity)
                    .step_by(stride)
                    .map(|i| row[i])
                    .collect();
                let base: Vec<f64> = class_indices(cfg.width, 0, parity)
                    .map(|i| ref_row[i])
                    .collect();
                if probe.is_empty() || base.is_empty() {
                    continue;
                }
                let ks = ks_two_sample(&probe, &base);
                let (lx, ly) = cfg.laws_at(parity);
                let law = if field == "x" { lx } else { ly };
                let mut sorted = probe.clone();
                sorted.sort_by(f64::total_cmp);
                let law_p = ks_one_sample(&law.cdf_sorted(&sorted)?).p_value;
                entries.push(ProbeEntry {
                    t: frame.t,
                    field: field.into(),
                    parity: if parity == 0 { "even" } else { "odd" }.into(),
                    stride,
                    size: probe.len(),
                    statistic: ks.statistic,
                    p_value: ks.p_value,
                    law_p_value: law_p,
                });
            }
        }
    }
    let min_p = entries.iter().map(|e| e.p_value).fold(1.0, f64::min);
    // a stationary config passes when no probe rejects; a perturbed one when
    // the drift is detected
    let detected = min_p < 0.01;
    let pass = defect <= 1e-13 && detected != cfg.expect_stationary;
    Ok(StationarityReport {
        schema_version: crate::report::SCHEMA_VERSION,
        config: cfg,
        probe_times: probe_times.to_vec(),
        entries,
        max_product_defect: defect,
        min_p_value: min_p,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(w: usize, h: usize) -> LatticeConfig {
        LatticeConfig::stationary(MapParams::new(1.0, 2.0).unwrap(), 0.5, 1.0, 1.0, w, h, 9)
            .unwrap()
    }

    #[test]
    fn single_cell_is_one_map_application() {
        let c = cfg(1, 1);
        let frames: Vec<LatticeFrame> = evolve(&c).unwrap().collect();
        let b = boundary(&c).unwrap();
        let out = f_dk(c.map, PositivePair::raw(b.x0[0], b.y_col[0]));
        assert_eq!(frames.len(), 2);
        assert_eq!(
            (frames[1].x_row[0], frames[1].y_row[0]),
            (out.first, out.second)
        );
    }

    #[test]
    fn wavefront_matches_row_sweep_bitwise() {
        for (w, h) in [(1, 5), (7, 3), (40, 40), (100, 13)] {
            let c = cfg(w, h);
            let rows: Vec<LatticeFrame> = evolve(&c).unwrap().collect();
            assert_eq!(rows, evolve_wavefront(&c).unwrap());
        }
    }

    #[test]
    fn one_step_is_undone_by_the_involution() {
        let c = cfg(200, 1);
        let b = boundary(&c).unwrap();
        let f1 = evolve(&c).unwrap().nth(1).unwrap();
        let mut carry = b.y_col[0];
        for n in 0..c.width {
            let back = f_dk(c.map, PositivePair::raw(f1.x_row[n], f1.y_row[n]));
            assert!(((back.first - b.x0[n]) / b.x0[n]).abs() <= 1e-12);
            assert!(((back.second - carry) / carry).abs() <= 1e-12);
            carry = f1.y_row[n];
        }
    }

    #[test]
    fn deterministic_and_positive() {
        let c = cfg(500, 20);
        let a: Vec<LatticeFrame> = evolve(&c).unwrap().collect();
        assert_eq!(a, evolve(&c).unwrap().collect::<Vec<_>>());
        assert!(a.iter().all(|f| f
            .x_row
            .iter()
            .chain(&f.y_row)
            .all(|&v| v > 0.0 && v.is_finite())));
    }

    #[test]
    fn replay_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(
            &path,
            "axis,index,value\nx,1,0.5\nx,2,2.0\ny,1,1.0\ny,2,3.0\n",
        )
        .unwrap();
        let c = LatticeConfig {
            boundary: Boundary::Replay(path.clone()),
            ..cfg(2, 2)
        };
        let frames: Vec<LatticeFrame> = evolve(&c).unwrap().collect();
        assert_eq!(frames[0].x_row, vec![0.5, 2.0]);
        let first = f_dk(c.map, PositivePair::raw(0.5, 1.0));
        assert_eq!(frames[1].x_row[0], first.first);
        std::fs::write(&path, "x,1,0.5\nx,9,1\n").unwrap();
        assert!(matches!(evolve(&c), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn small_stationary_run_and_drift() {
        let c = cfg(20_000, 10);
        let r = stationarity_report(&c, &[5, 10], 3).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(r.max_product_defect <= 4.0 * f64::EPSILON);
        let p = stationarity_report(&c.with_x_scaled(2.0).unwrap(), &[5, 10], 3).unwrap();
        assert!(p.min_p_value < 0.01 && p.pass);
    }

    #[test]
    fn type_two_parity_classes() {
        let c = LatticeConfig::stationary(
            MapParams::new(0.5, 3.0).unwrap(),
            -0.5,
            1.0,
            3.0,
            20_000,
            6,
            4,
        )
        .unwrap();
        assert!(c.odd_marginals.is_some());
        let r = stationarity_report(&c, &[3, 6], 8).unwrap();
        assert!(r.pass, "{r:#?}");
        assert!(r.entries.iter().all(|e| e.law_p_value > 0.01), "{r:#?}");
    }
}
