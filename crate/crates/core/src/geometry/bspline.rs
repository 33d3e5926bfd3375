//! Clamped B-spline curves: evaluation, arc length and least-squares fitting.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Point3, Polyline, Vector3};
use crate::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1], 8 points.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Sub-intervals per knot span used for arc-length quadrature.
const QUAD_SUBDIV: usize = 4;

#[derive(Debug, Deserialize)]
struct RawCurve {
    degree: usize,
    control_points: Vec<Point3>,
    knots: Vec<f64>,
}

impl TryFrom<RawCurve> for BSplineCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        BSplineCurve::new(raw.degree, raw.control_points, raw.knots)
    }
}

/// A clamped, non-rational B-spline curve parameterized on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct BSplineCurve {
    degree: usize,
    control_points: Vec<Point3>,
    knots: Vec<f64>,
}

impl BSplineCurve {
    pub fn new(degree: usize, control_points: Vec<Point3>, knots: Vec<f64>) -> Result<Self> {
        if degree < 1 {
            return Err(Error::Domain("B-spline degree must be at least 1".into()));
        }
        if control_points.len() < degree + 1 {
            return Err(Error::InsufficientData(format!(
                "degree {degree} needs at least {} control points, got {}",
                degree + 1,
                control_points.len()
            )));
        }
        if knots.len() != control_points.len() + degree + 1 {
            return Err(Error::Domain(format!(
                "knot count {} != control count {} + degree {} + 1",
                knots.len(),
                control_points.len(),
                degree
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain(
                "knots must be finite and non-decreasing".into(),
            ));
        }
        let (lo, hi) = (knots[0], knots[knots.len() - 1]);
        if lo != 0.0 || hi != 1.0 {
            return Err(Error::Domain("knot vector must span [0, 1]".into()));
        }
        let clamped_lo = knots[..=degree].iter().all(|&k| k == lo);
        let clamped_hi = knots[knots.len() - degree - 1..].iter().all(|&k| k == hi);
        if !clamped_lo || !clamped_hi {
            return Err(Error::Domain("knot vector must be clamped".into()));
        }
        if control_points
            .iter()
            .any(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Domain("control points must be finite".into()));
        }
        Ok(Self {
            degree,
            control_points,
            knots,
        })
    }

    /// Clamped curve with uniformly spaced interior knots.
    pub fn clamped_uniform(degree: usize, control_points: Vec<Point3>) -> Result<Self> {
        let n = control_points.len();
        if n < degree + 1 {
            return Err(Error::InsufficientData(format!(
                "degree {degree} needs at least {} control points, got {n}",
                degree + 1
            )));
        }
        let knots = clamped_uniform_knots(degree, n);
        Self::new(degree, control_points, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[Point3] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Evaluate the curve at `t` in [0, 1].
    pub fn eval(&self, t: f64) -> Result<Point3> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("parameter {t} outside [0, 1]")));
        }
        Ok(self.point_at(t))
    }

    /// Evaluate with `t` clamped into [0, 1].
    pub fn point_at(&self, t: f64) -> Point3 {
        let t = t.clamp(0.0, 1.0);
        if t == 0.0 {
            return self.control_points[0];
        }
        if t == 1.0 {
            return self.control_points[self.control_points.len() - 1];
        }
        let coords: Vec<Vector3> = self.control_points.iter().map(|p| p.coords).collect();
        Point3::from(de_boor(self.degree, &self.knots, &coords, t))
    }

    /// First derivative with respect to the curve parameter.
    pub fn derivative_at(&self, t: f64) -> Vector3 {
        let (knots, ctrl) = self.derivative_controls();
        de_boor(self.degree - 1, &knots, &ctrl, t.clamp(0.0, 1.0))
    }

    /// Unit tangent; falls back to the chord direction when the derivative vanishes.
    pub fn tangent_at(&self, t: f64) -> Vector3 {
        let d = self.derivative_at(t);
        if d.norm() > 1e-12 {
            return d.normalize();
        }
        let chord = self.control_points[self.control_points.len() - 1] - self.control_points[0];
        if chord.norm() > 0.0 {
            chord.normalize()
        } else {
            Vector3::x()
        }
    }

    fn derivative_controls(&self) -> (Vec<f64>, Vec<Vector3>) {
        let p = self.degree as f64;
        let ctrl = self
            .control_points
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let denom = self.knots[i + self.degree + 1] - self.knots[i + 1];
                if denom > 0.0 {
                    (w[1] - w[0]) * (p / denom)
                } else {
                    Vector3::zeros()
                }
            })
            .collect();
        let knots = self.knots[1..self.knots.len() - 1].to_vec();
        (knots, ctrl)
    }

    /// Arc length between parameters `t0 <= t1`.
    pub fn arc_length_between(&self, t0: f64, t1: f64) -> f64 {
        let (t0, t1) = (t0.clamp(0.0, 1.0), t1.clamp(0.0, 1.0));
        if t1 <= t0 {
            return 0.0;
        }
        let (dknots, dctrl) = self.derivative_controls();
        let mut total = 0.0;
        for w in self.knots.windows(2) {
            let (a, b) = (w[0].max(t0), w[1].min(t1));
            if b <= a {
                continue;
            }
            let h = (b - a) / QUAD_SUBDIV as f64;
            for s in 0..QUAD_SUBDIV {
                let (lo, hi) = (a + s as f64 * h, a + (s + 1) as f64 * h);
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (x, wgt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                    let t = mid + half * x;
                    total += wgt * half * de_boor(self.degree - 1, &dknots, &dctrl, t).norm();
                }
            }
        }
        total
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length_between(0.0, 1.0)
    }

    /// Arc length from the start of the curve to parameter `t`.
    pub fn arc_length_at(&self, t: f64) -> f64 {
        self.arc_length_between(0.0, t)
    }

    /// Parameter at which the arc length from the start equals `s`.
    pub fn param_at_arc_length(&self, s: f64) -> f64 {
        let total = self.arc_length();
        if s <= 0.0 || total <= 0.0 {
            return 0.0;
        }
        if s >= total {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut t = s / total;
        for _ in 0..60 {
            let f = self.arc_length_at(t) - s;
            if f.abs() < 1e-12 * total.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let speed = self.derivative_at(t).norm();
            let newton = if speed > 1e-12 {
                t - f / speed
            } else {
                f64::NAN
            };
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }

    /// Parameter of the point on the curve closest to `p`.
    pub fn closest_param(&self, p: &Point3) -> f64 {
        let n = 16 * self.control_points.len().max(4);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let d = (self.point_at(t) - p).norm_squared();
            if d < best.0 {
                best = (d, t);
            }
        }
        self.refine_param(p, best.1)
    }

    /// Newton refinement of a foot-point parameter starting from `t`.
    pub(crate) fn refine_param(&self, p: &Point3, mut t: f64) -> f64 {
        let h = 1e-6;
        for _ in 0..20 {
            let c = self.point_at(t);
            let d1 = self.derivative_at(t);
            let f = (c - p).dot(&d1);
            // numerical second derivative keeps this independent of degree
            let d2 = (self.derivative_at((t + h).min(1.0)) - self.derivative_at((t - h).max(0.0)))
                / ((t + h).min(1.0) - (t - h).max(0.0));
            let df = d1.norm_squared() + (c - p).dot(&d2);
            if df.abs() < 1e-14 {
                break;
            }
            let next = (t - f / df).clamp(0.0, 1.0);
            let done = (next - t).abs() < 1e-14;
            t = next;
            if done {
                break;
            }
        }
        t
    }

    /// `n` points at equal arc-length spacing, endpoints included.
    pub fn resample(&self, n: usize) -> Result<Polyline> {
        if n < 2 {
            return Err(Error::Domain(format!("resample count {n} < 2")));
        }
        let total = self.arc_length();
        if total <= 0.0 {
            return Err(Error::DegenerateGeometry("curve has zero length".into()));
        }
        let points = (0..n)
            .map(|i| {
                let s = total * i as f64 / (n - 1) as f64;
                self.point_at(self.param_at_arc_length(s))
            })
            .collect();
        Polyline::new(points)
    }

    /// Dense polyline at uniform parameter spacing, `n >= 2` points.
    pub fn sample_uniform(&self, n: usize) -> Vec<Point3> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.point_at(i as f64 / (n - 1) as f64))
            .collect()
    }

    /// Apply a map to every control point. Exact for affine maps.
    pub fn map_controls(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        Self {
            degree: self.degree,
            control_points: self.control_points.iter().map(f).collect(),
            knots: self.knots.clone(),
        }
    }
}

pub(crate) fn clamped_uniform_knots(degree: usize, n_controls: usize) -> Vec<f64> {
    let n_interior = n_controls - degree - 1;
    let mut knots = vec![0.0; degree + 1];
    knots.extend((1..=n_interior).map(|i| i as f64 / (n_interior + 1) as f64));
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    knots
}

/// Knot span index containing `t` (last non-empty span for `t == 1`).
fn find_span(degree: usize, knots: &[f64], n_ctrl: usize, t: f64) -> usize {
    if t >= knots[n_ctrl] {
        return n_ctrl - 1;
    }
    if t <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n_ctrl);
    let mut mid = (lo + hi) / 2;
    while t < knots[mid] || t >= knots[mid + 1] {
        if t < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

fn de_boor(degree: usize, knots: &[f64], ctrl: &[Vector3], t: f64) -> Vector3 {
    let k = find_span(degree, knots, ctrl.len(), t);
    let mut d: Vec<Vector3> = (0..=degree).map(|j| ctrl[j + k - degree]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let i = j + k - degree;
            let denom = knots[i + degree + 1 - r] - knots[i];
            let alpha = if denom > 0.0 {
                (t - knots[i]) / denom
            } else {
                0.0
            };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[degree]
}

/// Non-zero basis values N_{span-p..=span, p}(t).
fn basis_funs(degree: usize, knots: &[f64], span: usize, t: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Options for [`bspline_fit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub degree: usize,
    pub n_controls: usize,
    /// Levenberg-Marquardt rounds refining sample parameters after the
    /// chord-length fit; 0 keeps the plain chord-length solution.
    pub param_correction_iters: usize,
}

impl FitOptions {
    pub fn new(degree: usize, n_controls: usize) -> Self {
        Self {
            degree,
            n_controls,
            param_correction_iters: 30,
        }
    }
}

/// Least-squares clamped B-spline fit with chord-length parameterization.
///
/// End points are interpolated exactly. After the initial fit, sample
/// parameters and interior controls are refined jointly toward the
/// orthogonal-distance optimum, which recovers exact spline data to
/// round-off.
pub fn bspline_fit(samples: &Polyline, degree: usize, n_controls: usize) -> Result<BSplineCurve> {
    bspline_fit_with(samples, FitOptions::new(degree, n_controls))
}

pub fn bspline_fit_with(samples: &Polyline, opts: FitOptions) -> Result<BSplineCurve> {
    let FitOptions {
        degree,
        n_controls,
        param_correction_iters,
    } = opts;
    let pts = samples.points();
    if degree < 1 {
        return Err(Error::Domain("B-spline degree must be at least 1".into()));
    }
    if n_controls < degree + 1 {
        return Err(Error::InsufficientData(format!(
            "{n_controls} controls cannot carry degree {degree}"
        )));
    }
    if pts.len() < n_controls {
        return Err(Error::InsufficientData(format!(
            "{} samples for {n_controls} control points",
            pts.len()
        )));
    }
    let params = chord_length_params(pts)?;
    let knots = clamped_uniform_knots(degree, n_controls);
    let mut curve = solve_controls(pts, &params, degree, &knots)?;
    if param_correction_iters > 0 && pts.len() > 2 {
        if let Some(refined) =
            refine_orthogonal(pts, params, degree, &knots, param_correction_iters)
        {
            curve = solve_controls(pts, &refined, degree, &knots)?;
        }
    }
    Ok(curve)
}

/// Levenberg-Marquardt on interior control points and interior sample
/// parameters jointly, minimizing the squared distance from each sample to
/// its curve point. Each parameter touches only its own sample, so the
/// parameter block is eliminated per sample (Schur complement) and only the
/// control-point system is factored. Returns the refined parameters, or
/// `None` when the refinement could not keep them ordered.
fn refine_orthogonal(
    pts: &[Point3],
    mut params: Vec<f64>,
    degree: usize,
    knots: &[f64],
    iters: usize,
) -> Option<Vec<f64>> {
    let m = pts.len();
    let n = knots.len() - degree - 1;
    let curve = solve_controls(pts, &params, degree, knots).ok()?;
    let mut ctrl: Vec<Vector3> = curve.control_points.iter().map(|p| p.coords).collect();
    let nu = 3 * n.saturating_sub(2);

    let residuals = |ctrl: &[Vector3], params: &[f64]| -> Vec<Vector3> {
        pts.iter()
            .zip(params)
            .map(|(q, &t)| de_boor(degree, knots, ctrl, t) - q.coords)
            .collect()
    };
    let sse = |r: &[Vector3]| r.iter().map(|v| v.norm_squared()).sum::<f64>();

    let mut res = residuals(&ctrl, &params);
    let mut cost = sse(&res);
    let mut lambda = 1e-6;
    for _ in 0..iters {
        if cost < 1e-26 {
            break;
        }
        let pdeg = degree as f64;
        let dctrl: Vec<Vector3> = ctrl
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let denom = knots[i + degree + 1] - knots[i + 1];
                if denom > 0.0 {
                    (w[1] - w[0]) * (pdeg / denom)
                } else {
                    Vector3::zeros()
                }
            })
            .collect();
        let dknots = &knots[1..knots.len() - 1];

        // per-sample sparse rows: (unknown column, basis value) pairs
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut derivs: Vec<Vector3> = Vec::with_capacity(m);
        let mut a = DMatrix::<f64>::zeros(nu, nu);
        let mut g_ctrl = nalgebra::DVector::<f64>::zeros(nu);
        let mut g_par = vec![0.0; m];
        for (k, &t) in params.iter().enumerate() {
            let span = find_span(degree, knots, n, t);
            let row: Vec<(usize, f64)> = basis_funs(degree, knots, span, t)
                .into_iter()
                .enumerate()
                .filter_map(|(j, v)| {
                    let idx = span - degree + j;
                    (idx != 0 && idx != n - 1).then(|| (idx - 1, v))
                })
                .collect();
            for &(ia, va) in &row {
                for &(ib, vb) in &row {
                    for c in 0..3 {
                        a[(3 * ia + c, 3 * ib + c)] += va * vb;
                    }
                }
                for c in 0..3 {
                    g_ctrl[3 * ia + c] += va * res[k][c];
                }
            }
            let d = if k > 0 && k < m - 1 {
                de_boor(degree - 1, dknots, &dctrl, t)
            } else {
                Vector3::zeros()
            };
            g_par[k] = d.dot(&res[k]);
            rows.push(row);
            derivs.push(d);
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut reduced = a.clone();
            for i in 0..nu {
                reduced[(i, i)] += lambda * (1.0 + a[(i, i)]);
            }
            let mut rhs = -g_ctrl.clone();
            let mut dk = vec![0.0; m];
            for k in 1..m - 1 {
                let d = derivs[k];
                let diag = d.norm_squared() * (1.0 + lambda) + lambda;
                dk[k] = diag;
                // coupling entries B[(3a+c), k] = v_a * d[c]
                for &(ia, va) in &rows[k] {
                    for ca in 0..3 {
                        let bi = va * d[ca];
                        rhs[3 * ia + ca] += bi * g_par[k] / diag;
                        for &(ib, vb) in &rows[k] {
                            for cb in 0..3 {
                                reduced[(3 * ia + ca, 3 * ib + cb)] -= bi * vb * d[cb] / diag;
                            }
                        }
                    }
                }
            }
            let step_ctrl = if nu > 0 {
                match reduced.cholesky() {
                    Some(chol) => chol.solve(&rhs),
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                }
            } else {
                nalgebra::DVector::zeros(0)
            };
            let mut trial_ctrl = ctrl.clone();
            for j in 0..nu / 3 {
                for c in 0..3 {
                    trial_ctrl[j + 1][c] += step_ctrl[3 * j + c];
                }
            }
            let mut trial_params = params.clone();
            for k in 1..m - 1 {
                let d = derivs[k];
                let mut bt_dc = 0.0;
                for &(ia, va) in &rows[k] {
                    for c in 0..3 {
                        bt_dc += va * d[c] * step_ctrl[3 * ia + c];
                    }
                }
                let dp = -(g_par[k] + bt_dc) / dk[k];
                trial_params[k] = (trial_params[k] + dp).clamp(0.0, 1.0);
            }
            let ordered = trial_params.windows(2).all(|w| w[0] <= w[1]);
            let trial_res = residuals(&trial_ctrl, &trial_params);
            let trial_cost = sse(&trial_res);
            if ordered && trial_cost < cost {
                ctrl = trial_ctrl;
                params = trial_params;
                res = trial_res;
                improved = cost - trial_cost > 1e-30;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-15);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    params.windows(2).all(|w| w[0] <= w[1]).then_some(params)
}

fn chord_length_params(pts: &[Point3]) -> Result<Vec<f64>> {
    let mut acc = Vec::with_capacity(pts.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in pts.windows(2) {
        total += (w[1] - w[0]).norm();
        acc.push(total);
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGeometry("samples have zero length".into()));
    }
    let last = acc.len() - 1;
    for v in acc.iter_mut() {
        *v /= total;
    }
    acc[last] = 1.0;
    Ok(acc)
}

fn solve_controls(
    pts: &[Point3],
    params: &[f64],
    degree: usize,
    knots: &[f64],
) -> Result<BSplineCurve> {
    let n = knots.len() - degree - 1;
    let m = pts.len();
    let first = pts[0];
    let last = pts[m - 1];
    let mut controls = vec![first; n];
    controls[n - 1] = last;
    if n > 2 {
        let unknowns = n - 2;
        let mut basis = DMatrix::<f64>::zeros(m, n);
        for (k, &t) in params.iter().enumerate() {
            let span = find_span(degree, knots, n, t);
            for (j, v) in basis_funs(degree, knots, span, t).into_iter().enumerate() {
                basis[(k, span - degree + j)] = v;
            }
        }
        let inner = basis.columns(1, unknowns).into_owned();
        if (0..unknowns).any(|j| inner.column(j).iter().all(|v| v.abs() < 1e-14)) {
            return Err(Error::SingularFit(
                "a basis function has no sample in its support".into(),
            ));
        }
        let mut rhs = DMatrix::<f64>::zeros(m, 3);
        for k in 0..m {
            let r = pts[k].coords - first.coords * basis[(k, 0)] - last.coords * basis[(k, n - 1)];
            for c in 0..3 {
                rhs[(k, c)] = r[c];
            }
        }
        let normal = inner.transpose() * &inner;
        let rhs = inner.transpose() * rhs;
        let chol = normal
            .cholesky()
            .ok_or_else(|| Error::SingularFit("normal matrix is not positive definite".into()))?;
        let diag = chol.l();
        let (dmax, dmin) = diag
            .diagonal()
            .iter()
            .fold((0.0_f64, f64::INFINITY), |(a, b), v| (a.max(*v), b.min(*v)));
        if dmin <= dmax * 1e-10 {
            return Err(Error::SingularFit("normal matrix is rank deficient".into()));
        }
        let sol = chol.solve(&rhs);
        for j in 0..unknowns {
            controls[j + 1] = Point3::new(sol[(j, 0)], sol[(j, 1)], sol[(j, 2)]);
        }
    }
    BSplineCurve::new(degree, controls, knots.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn linear_midpoint() {
        let c = BSplineCurve::clamped_uniform(1, vec![p(0., 0., 0.), p(2., 0., 0.)]).unwrap();
        assert_eq!(c.eval(0.5).unwrap(), p(1., 0., 0.));
    }

    #[test]
    fn endpoints_are_exact() {
        let ctrl = vec![
            p(0.3, 1., 2.),
            p(1., 5., -1.),
            p(4., 2., 0.),
            p(7., 7., 7.),
            p(9., 1., 3.),
        ];
        let c = BSplineCurve::clamped_uniform(3, ctrl.clone()).unwrap();
        assert_eq!(c.eval(0.0).unwrap(), ctrl[0]);
        assert_eq!(c.eval(1.0).unwrap(), ctrl[4]);
    }

    #[test]
    fn constant_controls_give_constant_curve() {
        let c0 = p(1.5, -2.0, 3.25);
        let c = BSplineCurve::clamped_uniform(3, vec![c0; 6]).unwrap();
        for i in 0..=20 {
            let q = c.eval(i as f64 / 20.0).unwrap();
            assert_relative_eq!((q - c0).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_range_parameter() {
        let c = BSplineCurve::clamped_uniform(1, vec![p(0., 0., 0.), p(1., 0., 0.)]).unwrap();
        assert!(matches!(c.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(c.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_knots() {
        let ctrl = vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.), p(3., 0., 0.)];
        let unclamped = vec![0., 0., 0.2, 0.4, 0.6, 0.8, 1., 1.];
        assert!(BSplineCurve::new(3, ctrl.clone(), unclamped).is_err());
        let short = vec![0., 0., 0., 0., 1., 1., 1.];
        assert!(BSplineCurve::new(3, ctrl, short).is_err());
    }

    #[test]
    fn fit_line_is_exact() {
        let samples = Polyline::new((0..10).map(|i| p(i as f64 * 1.3, 0., 0.)).collect()).unwrap();
        let c = bspline_fit(&samples, 3, 4).unwrap();
        for i in 0..=100 {
            let q = c.eval(i as f64 / 100.0).unwrap();
            assert!(q.y.abs() < 1e-9 && q.z.abs() < 1e-9);
        }
    }

    #[test]
    fn fit_recovers_known_spline() {
        let truth = BSplineCurve::clamped_uniform(
            3,
            vec![
                p(0., 0., 0.),
                p(10., 4., 1.),
                p(20., -3., 2.),
                p(30., 5., -1.),
                p(40., 0., 3.),
                p(50., 2., 0.),
                p(60., 1., 1.),
            ],
        )
        .unwrap();
        // non-uniform parameter sampling so chord length is not exact
        let samples: Vec<Point3> = (0..60)
            .map(|i| {
                let u = i as f64 / 59.0;
                truth.point_at(u * u * (3.0 - 2.0 * u) * 0.5 + 0.5 * u)
            })
            .collect();
        let fitted = bspline_fit(&Polyline::new(samples.clone()).unwrap(), 3, 7).unwrap();
        for q in &samples {
            let t = fitted.closest_param(q);
            let d = (fitted.point_at(t) - q).norm();
            assert!(d < 1e-6, "sample off the recovered curve by {d}");
        }
        for (a, b) in fitted.control_points().iter().zip(truth.control_points()) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn fit_insufficient_samples() {
        let samples = Polyline::new(vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 1., 0.)]).unwrap();
        assert!(matches!(
            bspline_fit(&samples, 3, 4),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_singular_when_span_is_empty() {
        // all interior samples crowd into the first span
        let mut pts = vec![p(0., 0., 0.)];
        pts.extend((1..8).map(|i| p(i as f64 * 1e-3, 0., 0.)));
        pts.push(p(100., 0., 0.));
        let samples = Polyline::new(pts).unwrap();
        let opts = FitOptions {
            param_correction_iters: 0,
            ..FitOptions::new(3, 8)
        };
        assert!(matches!(
            bspline_fit_with(&samples, opts),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn arc_length_of_line() {
        let c = BSplineCurve::clamped_uniform(
            3,
            vec![p(0., 0., 0.), p(1., 0., 0.), p(2.5, 0., 0.), p(3., 4., 0.)],
        )
        .unwrap();
        let dense = c.sample_uniform(20001);
        let poly: f64 = dense.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        assert_relative_eq!(c.arc_length(), poly, max_relative = 1e-6);
        let t = c.param_at_arc_length(2.0);
        assert_relative_eq!(c.arc_length_at(t), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = BSplineCurve::clamped_uniform(
            3,
            vec![
                p(0., 0., 0.),
                p(1., 2., 0.),
                p(3., -1., 1.),
                p(4., 0., 2.),
                p(6., 1., 0.),
            ],
        )
        .unwrap();
        for &t in &[0.1, 0.37, 0.5, 0.81] {
            let h = 1e-6;
            let fd = (c.point_at(t + h) - c.point_at(t - h)) / (2.0 * h);
            assert_relative_eq!((fd - c.derivative_at(t)).norm(), 0.0, epsilon = 1e-5);
        }
    }

    /// Textbook Cox-de Boor recursion, independent of the span search.
    fn cox_de_boor(i: usize, p: usize, knots: &[f64], t: f64) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 1];
            let inside = knots[i] <= t && t < knots[i + 1];
            let at_end = t == last && knots[i] < last && knots[i + 1] == last;
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * cox_de_boor(i, p - 1, knots, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - t) / d2 * cox_de_boor(i + 1, p - 1, knots, t);
        }
        v
    }

    proptest::proptest! {
        #[test]
        fn eval_is_a_convex_combination(
            raw in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64), 4..10),
            degree in 1usize..4,
            t in 0.0..=1.0f64,
        ) {
            let ctrl: Vec<Point3> = raw.iter().map(|&(x, y, z)| p(x, y, z)).collect();
            let c = BSplineCurve::clamped_uniform(degree, ctrl.clone()).unwrap();
            let w: Vec<f64> = (0..ctrl.len()).map(|i| cox_de_boor(i, degree, c.knots(), t)).collect();
            proptest::prop_assert!(w.iter().all(|&x| x >= -1e-12));
            proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let combo = ctrl.iter().zip(&w).fold(Vector3::zeros(), |acc, (q, wi)| acc + q.coords * *wi);
            let q = c.eval(t).unwrap();
            proptest::prop_assert!((q.coords - combo).norm() < 1e-9);
            proptest::prop_assert_eq!(c.eval(0.0).unwrap(), ctrl[0]);
            proptest::prop_assert_eq!(c.eval(1.0).unwrap(), ctrl[ctrl.len() - 1]);
        }
    }
}
