//! Batch and recursive least-squares estimation of the beacon paraboloid.
//!
//! With `k_x`, `k_y` known, the paraboloid is linear in
//! `β = [-2 k_x p, -2 k_y q, l_pq + k_x p² + k_y q²]`:
//!
//! `L(x, y) - k_x x² - k_y y² = [x, y, 1] · β`
//!
//! so each measurement becomes one row of an ordinary linear regression and
//! the peak is recovered algebraically from `β`.

use nalgebra::{Matrix3, RowVector3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::antenna_sim::BeaconSample;
use crate::beacon_model::{kx_from_elevation, QuadraticCoefficients};
use crate::error::{Error, Result};

/// Regressions with a scaled normal matrix below this reciprocal condition
/// number are rejected.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Default initial covariance scale for RLS.
pub const DEFAULT_RLS_DELTA: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionRow {
    /// `[x, y, 1]`
    pub x_row: [f64; 3],
    pub y_value: f64,
}

impl RegressionRow {
    fn x(&self) -> RowVector3<f64> {
        RowVector3::new(self.x_row[0], self.x_row[1], self.x_row[2])
    }
}

/// Builds `X_i = [x, y, 1]` and `Y_i = L - k_x x² - k_y y²` from a sample.
pub fn regression_row(sample: &BeaconSample, k: &QuadraticCoefficients) -> RegressionRow {
    let (x, y) = (sample.azimuth, sample.elevation);
    RegressionRow {
        x_row: [x, y, 1.0],
        y_value: sample.level - k.k_x * x * x - k.k_y * y * y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaVector(pub [f64; 3]);

impl BetaVector {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::from(self.0)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        Self([v[0], v[1], v[2]])
    }

    /// Forward map from a peak to the regression coefficients.
    pub fn from_peak(peak: &PeakEstimate, k: &QuadraticCoefficients) -> Self {
        Self([
            -2.0 * k.k_x * peak.p,
            -2.0 * k.k_y * peak.q,
            peak.l_pq + k.k_x * peak.p * peak.p + k.k_y * peak.q * peak.q,
        ])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LsProblem {
    pub rows: Vec<RegressionRow>,
}

impl LsProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples<'a>(
        samples: impl IntoIterator<Item = &'a BeaconSample>,
        k: &QuadraticCoefficients,
    ) -> Self {
        Self {
            rows: samples.into_iter().map(|s| regression_row(s, k)).collect(),
        }
    }

    pub fn push(&mut self, row: RegressionRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Root-mean-square of `Y - Xβ`.
    pub fn residual_rms(&self, beta: &BetaVector) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let b = beta.to_vector();
        let ss: f64 = self
            .rows
            .iter()
            .map(|r| {
                let e = r.y_value - (r.x() * b)[0];
                e * e
            })
            .sum();
        (ss / self.rows.len() as f64).sqrt()
    }
}

/// Least-squares minimizer of `‖Xβ − Y‖²`.
///
/// The angle columns are centered and scaled before forming the 3×3 normal
/// equations, which keeps the solve well conditioned when the pattern is a
/// fraction of a degree wide but sits tens of degrees from the origin.
pub fn ls_fit(problem: &LsProblem) -> Result<BetaVector> {
    let n = problem.rows.len();
    if n < 3 {
        return Err(Error::InsufficientData { got: n, need: 3 });
    }
    if problem
        .rows
        .iter()
        .any(|r| !r.y_value.is_finite() || r.x_row.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Numeric("regression rows"));
    }
    let nf = n as f64;
    let mean_x = problem.rows.iter().map(|r| r.x_row[0]).sum::<f64>() / nf;
    let mean_y = problem.rows.iter().map(|r| r.x_row[1]).sum::<f64>() / nf;
    let spread = |f: &dyn Fn(&RegressionRow) -> f64| {
        (problem.rows.iter().map(|r| f(r).powi(2)).sum::<f64>() / nf).sqrt()
    };
    let scale_x = spread(&|r| r.x_row[0] - mean_x);
    let scale_y = spread(&|r| r.x_row[1] - mean_y);
    if scale_x == 0.0 || scale_y == 0.0 {
        return Err(Error::RankDeficient { rcond: 0.0 });
    }

    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for r in &problem.rows {
        let z = Vector3::new(
            (r.x_row[0] - mean_x) / scale_x,
            (r.x_row[1] - mean_y) / scale_y,
            r.x_row[2],
        );
        normal += z * z.transpose();
        rhs += z * r.y_value;
    }

    let rcond = symmetric_rcond(&normal);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::RankDeficient { rcond });
    }
    let gamma = normal
        .cholesky()
        .ok_or(Error::RankDeficient { rcond })?
        .solve(&rhs);

    let b1 = gamma[0] / scale_x;
    let b2 = gamma[1] / scale_y;
    let b3 = gamma[2] - b1 * mean_x - b2 * mean_y;
    let beta = BetaVector([b1, b2, b3]);
    if !beta.is_finite() {
        return Err(Error::Numeric("least-squares solution"));
    }
    Ok(beta)
}

/// Ratio of smallest to largest eigenvalue of a symmetric matrix.
pub fn symmetric_rcond(m: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if !(max > 0.0) {
        return 0.0;
    }
    (min / max).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub p: f64,
    pub q: f64,
    pub l_pq: f64,
}

/// Inverts the β definition for `(p, q, l_pq)`.
pub fn recover_peak(
    beta: &BetaVector,
    k: &QuadraticCoefficients,
    floor: f64,
) -> Result<PeakEstimate> {
    k.check_floor(floor)?;
    let [b1, b2, b3] = beta.0;
    let p = -b1 / (2.0 * k.k_x);
    let q = -b2 / (2.0 * k.k_y);
    let l_pq = b3 - k.k_x * p * p - k.k_y * q * q;
    let est = PeakEstimate { p, q, l_pq };
    if !(p.is_finite() && q.is_finite() && l_pq.is_finite()) {
        return Err(Error::Numeric("peak recovery"));
    }
    Ok(est)
}

/// Memory horizon `1/(1-λ)` in samples; infinite for `λ = 1`.
///
/// Rounded to 1e-9 samples: `1 - λ` only carries the representation error
/// of `λ` beyond that (0.98 would otherwise give 49.99999999999996).
pub fn memory_horizon(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return Ok(f64::INFINITY);
    }
    let tau = 1.0 / (1.0 - lambda);
    Ok((tau * 1e9).round() / 1e9)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "forgetting factor must be in (0, 1], got {lambda}"
        )))
    }
}

/// Recursive least-squares filter memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsState {
    pub beta: BetaVector,
    pub p_matrix: Matrix3<f64>,
    pub lambda: f64,
}

impl RlsState {
    /// `β = 0`, `P = δI`.
    pub fn new(lambda: f64, delta: f64) -> Result<Self> {
        Self::with_beta(lambda, delta, BetaVector([0.0; 3]))
    }

    /// Warm start from a previous coefficient vector with fresh covariance.
    pub fn with_beta(lambda: f64, delta: f64, beta: BetaVector) -> Result<Self> {
        check_lambda(lambda)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        if !beta.is_finite() {
            return Err(Error::Numeric("initial beta"));
        }
        Ok(Self {
            beta,
            p_matrix: Matrix3::identity() * delta,
            lambda,
        })
    }

    /// One step of the exponentially weighted RLS recursion. Returns the new
    /// state and the a-priori residual `e`.
    pub fn update(&self, row: &RegressionRow) -> Result<(Self, f64)> {
        if !row.y_value.is_finite() || row.x_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("rls input row"));
        }
        let x = row.x();
        let p_prev = self.p_matrix;
        let beta_prev = self.beta.to_vector();

        let q = p_prev / (self.lambda + (x * p_prev * x.transpose())[0]);
        let gain = q * x.transpose();
        let predicted = (x * beta_prev)[0];
        let e = row.y_value - predicted;
        let beta = beta_prev + gain * e;
        let p = (Matrix3::identity() - gain * x) * p_prev / self.lambda;
        // the literal update drifts from symmetry in finite precision
        let p = (p + p.transpose()) * 0.5;

        if !beta.iter().all(|v| v.is_finite()) || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("rls update"));
        }
        Ok((
            Self {
                beta: BetaVector::from_vector(&beta),
                p_matrix: p,
                lambda: self.lambda,
            },
            e,
        ))
    }

    /// Runs [`update`](Self::update) over a sequence of rows.
    pub fn update_all<'a>(&self, rows: impl IntoIterator<Item = &'a RegressionRow>) -> Result<Self> {
        rows.into_iter()
            .try_fold(*self, |s, r| s.update(r).map(|(s, _)| s))
    }

    pub fn recover(&self, k: &QuadraticCoefficients, floor: f64) -> Result<PeakEstimate> {
        recover_peak(&self.beta, k, floor)
    }
}

/// Estimator used for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    BatchLs,
    #[default]
    Rls,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub estimator: EstimatorKind,
    pub k_y: f64,
    pub kx_floor: f64,
    pub lambda: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub peak: PeakEstimate,
    pub coefficients: QuadraticCoefficients,
    pub residual_rms: f64,
    pub samples: usize,
}

const KX_REFINEMENTS: usize = 4;

/// Fits the peak over a batch of samples, with angles taken relative to the
/// sample centroid.
pub fn fit_samples(
    samples: &[BeaconSample],
    reference_elevation: f64,
    settings: &FitSettings,
) -> Result<FitReport> {
    let n = samples.len().max(1) as f64;
    let origin = (
        samples.iter().map(|s| s.azimuth).sum::<f64>() / n,
        samples.iter().map(|s| s.elevation).sum::<f64>() / n,
    );
    fit_samples_about(samples, origin, reference_elevation, settings)
}

/// Fits the peak with angles taken relative to `origin`, which keeps both
/// estimators well conditioned. `k_x` starts from `reference_elevation` and
/// is re-evaluated at the estimated elevation until the two agree.
pub fn fit_samples_about(
    samples: &[BeaconSample],
    origin: (f64, f64),
    reference_elevation: f64,
    settings: &FitSettings,
) -> Result<FitReport> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData {
            got: samples.len(),
            need: 3,
        });
    }
    let local: Vec<BeaconSample> = samples
        .iter()
        .map(|s| BeaconSample {
            azimuth: s.azimuth - origin.0,
            elevation: s.elevation - origin.1,
            ..*s
        })
        .collect();

    let mut elevation = reference_elevation;
    let mut report = None;
    for _ in 0..KX_REFINEMENTS {
        let k = coefficients_at(settings.k_y, elevation, settings.kx_floor)?;
        let problem = LsProblem::from_samples(&local, &k);
        let beta = match settings.estimator {
            EstimatorKind::BatchLs => ls_fit(&problem)?,
            EstimatorKind::Rls => {
                RlsState::new(settings.lambda, settings.delta)?
                    .update_all(&problem.rows)?
                    .beta
            }
        };
        let local_peak = recover_peak(&beta, &k, settings.kx_floor)?;
        let peak = PeakEstimate {
            p: local_peak.p + origin.0,
            q: local_peak.q + origin.1,
            l_pq: local_peak.l_pq,
        };
        report = Some(FitReport {
            peak,
            coefficients: k,
            residual_rms: problem.residual_rms(&beta),
            samples: samples.len(),
        });
        let next = peak.q.clamp(0.0, 90.0);
        if kx_from_elevation(settings.k_y, next)? == k.k_x {
            break;
        }
        elevation = next;
    }
    Ok(report.expect("at least one refinement pass"))
}

/// Coefficients at an elevation, with `k_x` checked against the floor.
pub fn coefficients_at(k_y: f64, elevation: f64, kx_floor: f64) -> Result<QuadraticCoefficients> {
    let k = QuadraticCoefficients {
        k_x: kx_from_elevation(k_y, elevation.clamp(0.0, 90.0))?,
        k_y,
    };
    k.check_floor(kx_floor)?;
    Ok(k)
}
