use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::real::Real;
use crate::representation::Representation;
use crate::site::Site;
use crate::sparse::SparseFeatureMap;

/// Default box radii, before clipping to the grid.
pub const DEFAULT_RADII: [usize; 8] = [1, 2, 3, 4, 6, 8, 12, 16];

/// Binary activity grid with a summed-area table for O(1) box counts.
#[derive(Clone, Debug)]
pub struct ActiveMask {
    width: usize,
    height: usize,
    // (width + 1) x (height + 1) prefix sums
    integral: Vec<u64>,
    sites: Vec<Site>,
}

impl ActiveMask {
    pub fn from_fn(width: usize, height: usize, is_active: impl Fn(Site) -> bool) -> Self {
        let stride = width + 1;
        let mut integral = vec![0u64; stride * (height + 1)];
        let mut sites = Vec::new();
        for y in 0..height {
            let mut row = 0u64;
            for x in 0..width {
                let s = Site::new(x as i32, y as i32);
                if is_active(s) {
                    row += 1;
                    sites.push(s);
                }
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
            }
        }
        Self { width, height, integral, sites }
    }

    pub fn from_sites(width: usize, height: usize, sites: &[Site]) -> Self {
        let mut grid = vec![false; width * height];
        for s in sites.iter().filter(|s| s.in_bounds(width, height)) {
            grid[s.linear(width)] = true;
        }
        Self::from_fn(width, height, |s| grid[s.linear(width)])
    }

    pub fn from_representation(rep: &Representation) -> Self {
        Self::from_fn(rep.width(), rep.height(), |s| rep.is_active(s))
    }

    pub fn from_map<T: Real>(map: &SparseFeatureMap<T>) -> Self {
        Self::from_fn(map.width(), map.height(), |s| map.contains(s))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn active_sites(&self) -> &[Site] {
        &self.sites
    }

    /// Active sites in the `(2r+1)`-sided square around `c`, clipped to the grid.
    pub fn count_box(&self, c: Site, r: usize) -> u64 {
        let r = r as i64;
        let x0 = (c.x as i64 - r).clamp(0, self.width as i64) as usize;
        let x1 = (c.x as i64 + r + 1).clamp(0, self.width as i64) as usize;
        let y0 = (c.y as i64 - r).clamp(0, self.height as i64) as usize;
        let y1 = (c.y as i64 + r + 1).clamp(0, self.height as i64) as usize;
        let s = self.width + 1;
        let at = |x: usize, y: usize| self.integral[y * s + x];
        at(x1, y1) + at(x0, y0) - at(x0, y1) - at(x1, y0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalEstimate {
    /// Box centre; `None` when counts are averaged over many centres.
    pub center: Option<Site>,
    pub centers: usize,
    pub radii: Vec<usize>,
    /// Mean active count per radius.
    pub counts: Vec<f64>,
    /// Least-squares slope of `ln count` against `ln(2r + 1)`.
    pub gamma: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Fractal dimension at one centre.
pub fn fractal_dimension(mask: &ActiveMask, center: Site, radii: &[usize]) -> Result<FractalEstimate, AnalysisError> {
    let mut est = fractal_dimension_mean(mask, &[center], radii)?;
    est.center = Some(center);
    Ok(est)
}

/// Fractal dimension of counts averaged over `centers`.
pub fn fractal_dimension_mean(mask: &ActiveMask, centers: &[Site], radii: &[usize]) -> Result<FractalEstimate, AnalysisError> {
    let mut radii: Vec<usize> = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    if centers.is_empty() {
        return Err(AnalysisError::TooFewRadii(0));
    }
    let counts: Vec<f64> = radii
        .iter()
        .map(|&r| centers.iter().map(|&c| mask.count_box(c, r)).sum::<u64>() as f64 / centers.len() as f64)
        .collect();
    let points: Vec<(f64, f64)> = radii
        .iter()
        .zip(&counts)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&r, &m)| (((2 * r + 1) as f64).ln(), m.ln()))
        .collect();
    if points.len() < 2 {
        return Err(AnalysisError::TooFewRadii(points.len()));
    }
    let (gamma, residual) = least_squares_slope(&points);
    Ok(FractalEstimate { center: None, centers: centers.len(), radii, counts, gamma, residual })
}

/// Radii from `DEFAULT_RADII` that fit inside the larger grid side.
pub fn default_radii(width: usize, height: usize) -> Vec<usize> {
    let limit = width.max(height);
    DEFAULT_RADII.iter().copied().filter(|&r| 2 * r < limit).collect()
}

fn least_squares_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

impl FractalEstimate {
    /// One CSV row per radius; the fitted slope is repeated on every row.
    pub fn write_csv(&self, w: impl Write) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["radius", "side", "count", "ln_side", "ln_count", "gamma", "residual"])?;
        for (&r, &m) in self.radii.iter().zip(&self.counts) {
            let side = 2 * r + 1;
            let ln_count = if m > 0.0 { sig9(m.ln()) } else { String::new() };
            wr.write_record([
                r.to_string(),
                side.to_string(),
                sig9(m),
                sig9((side as f64).ln()),
                ln_count,
                sig9(self.gamma),
                sig9(self.residual),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Formats a real with 9 significant digits.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}
